#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "impulse/detector.hpp"
#include "impulse/errors.hpp"
#include "impulse/events.hpp"
#include "impulse/rake.hpp"
#include "impulse/rng.hpp"

namespace impulse {

// Layered LIF net. W[d] maps layer d-1 activity (or the input for d=0) to
// layer d membrane drive.
struct SnnNetwork {
  std::vector<Eigen::MatrixXd> W;
  double beta_lif = 0.9;   // membrane decay
  double zeta = 1.0;       // firing threshold
  double surrogate_k = 2.0;

  int depth() const { return static_cast<int>(W.size()); }
  int input_size() const { return W.empty() ? 0 : static_cast<int>(W.front().cols()); }
  int output_size() const { return W.empty() ? 0 : static_cast<int>(W.back().rows()); }

  void validate() const {
    if (W.empty()) throw config_error("SnnNetwork: no layers");
    if (!(beta_lif > 0.0 && beta_lif < 1.0))
      throw config_error("SnnNetwork: beta_lif must lie strictly in (0,1)");
    if (zeta <= 0.0) throw config_error("SnnNetwork: zeta must be > 0");
    for (std::size_t d = 1; d < W.size(); ++d)
      if (W[d].cols() != W[d - 1].rows())
        throw structural_error("SnnNetwork: layer " + std::to_string(d) +
                               " expects " + std::to_string(W[d].cols()) +
                               " inputs, previous layer emits " +
                               std::to_string(W[d - 1].rows()));
  }
};

inline SnnNetwork make_snn(const std::vector<int>& layer_sizes, double beta_lif,
                           double zeta, std::uint64_t seed) {
  if (layer_sizes.size() < 2)
    throw config_error("make_snn: need at least input and output sizes");
  SnnNetwork net;
  net.beta_lif = beta_lif;
  net.zeta = zeta;
  Rng rng(derive_seed(seed, {0x736e6e77ULL}));
  for (std::size_t d = 1; d < layer_sizes.size(); ++d) {
    Eigen::MatrixXd w(layer_sizes[d], layer_sizes[d - 1]);
    const double scale = 2.0 / std::sqrt(static_cast<double>(layer_sizes[d - 1]));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = scale * rng.gaussian();
    net.W.push_back(std::move(w));
  }
  net.validate();
  return net;
}

// Per-layer membranes and the previous step's spikes (the subtractive reset
// acts one step late).
struct SnnState {
  std::vector<Eigen::VectorXd> u;
  std::vector<Eigen::VectorXd> s_prev;
};

inline SnnState init_state(const SnnNetwork& net) {
  SnnState st;
  st.u.reserve(net.W.size());
  st.s_prev.reserve(net.W.size());
  for (const auto& w : net.W) {
    st.u.emplace_back(Eigen::VectorXd::Zero(w.rows()));
    st.s_prev.emplace_back(Eigen::VectorXd::Zero(w.rows()));
  }
  return st;
}

// One membrane update of layer d:
//   U[m] = beta*U[m-1] + W*x - S[m-1]*zeta,  S[m] = 1(U[m] >= zeta).
inline Eigen::VectorXd lif_step(SnnState& state, const SnnNetwork& net,
                                const Eigen::VectorXd& x, int d) {
  if (d < 0 || d >= net.depth())
    throw structural_error("lif_step: layer index out of range");
  if (x.size() != net.W[d].cols())
    throw structural_error("lif_step: input size " + std::to_string(x.size()) +
                           " != " + std::to_string(net.W[d].cols()));
  state.u[d] = net.beta_lif * state.u[d] + net.W[d] * x -
               net.zeta * state.s_prev[d];
  Eigen::VectorXd spikes =
      (state.u[d].array() >= net.zeta).cast<double>().matrix();
  state.s_prev[d] = spikes;
  return spikes;
}

struct ClassScores {
  Eigen::VectorXd counts;
  int label = 0;
};

inline int argmax_label(const Eigen::VectorXd& counts) {
  int best = 0;
  for (int i = 1; i < counts.size(); ++i)
    if (counts[i] > counts[best]) best = i;  // ties keep the lowest index
  return best;
}

// Runs the net over explicit per-step inputs; scores are output spike counts.
inline ClassScores forward(const SnnNetwork& net,
                           std::span<const Eigen::VectorXd> step_inputs) {
  net.validate();
  SnnState st = init_state(net);
  ClassScores out;
  out.counts = Eigen::VectorXd::Zero(net.output_size());
  for (const Eigen::VectorXd& x : step_inputs) {
    Eigen::VectorXd act = x;
    for (int d = 0; d < net.depth(); ++d) act = lif_step(st, net, act, d);
    out.counts += act;
  }
  out.label = argmax_label(out.counts);
  return out;
}

enum class Presentation { block, interleaved };

// Expands per-frame slices into per-step inputs: block mode holds slice j for
// T consecutive steps; interleaved cycles j = m mod N_f.
inline std::vector<Eigen::VectorXd> expand_slices(
    std::span<const Eigen::VectorXd> slices, int steps_per_slice,
    Presentation mode = Presentation::block) {
  if (steps_per_slice < 1)
    throw config_error("expand_slices: steps_per_slice must be >= 1");
  std::vector<Eigen::VectorXd> steps;
  const std::size_t total = slices.size() * steps_per_slice;
  steps.reserve(total);
  for (std::size_t m = 0; m < total; ++m) {
    const std::size_t j = mode == Presentation::block
                              ? m / steps_per_slice
                              : m % slices.size();
    steps.push_back(slices[j]);
  }
  return steps;
}

// Digital path: reconstructed frame bits drive the first layer directly.
inline Eigen::VectorXd encode_digital(const EventFrame& frame) {
  Eigen::VectorXd x(frame.bit_count());
  auto raw = frame.raw();
  for (std::size_t i = 0; i < raw.size(); ++i)
    x[static_cast<Eigen::Index>(i)] = raw[i] ? 1.0 : 0.0;
  return x;
}

inline ClassScores forward_static(const SnnNetwork& net,
                                  const Eigen::VectorXd& x, int total_steps) {
  std::vector<Eigen::VectorXd> steps(total_steps, x);
  return forward(net, steps);
}

// Analog path: sigmoid-normalized statistics, one slice per frame j, laid out
// in full-frame bit order (undoing the tiling and vectorization).
inline std::vector<Eigen::VectorXd> encode_analog(const FrameStatistics& stats,
                                                  int tile_h, int tile_w) {
  const int g = detail::isqrt_exact(stats.users);
  if (g <= 0)
    throw config_error("encode_analog: user count must be a perfect square");
  if (stats.bits != 2 * tile_h * tile_w)
    throw structural_error("encode_analog: stats carry " +
                           std::to_string(stats.bits) + " bits per user, tile needs " +
                           std::to_string(2 * tile_h * tile_w));
  const int width = tile_w * g;
  std::vector<Eigen::VectorXd> slices(
      stats.frames,
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(stats.users) * stats.bits));
  for (int k = 0; k < stats.users; ++k) {
    const LinkMoments& m = stats.moments[k];
    if (m.sigma <= 0.0)
      throw numeric_error("encode_analog: requires sigma > 0");
    const int row0 = (k / g) * tile_h;
    const int col0 = (k % g) * tile_w;
    for (int n = 0; n < stats.bits; ++n) {
      const int pix = n / 2;
      const int y = row0 + pix / tile_w;
      const int x = col0 + pix % tile_w;
      const Eigen::Index idx = (static_cast<Eigen::Index>(y) * width + x) * 2 + n % 2;
      for (int j = 0; j < stats.frames; ++j) {
        const double z =
            1.0 / (1.0 + std::exp(-(stats.at(k, n, j) - m.mu / 2.0) / m.sigma));
        slices[j][idx] = z;
      }
    }
  }
  return slices;
}

// Arctangent surrogate derivative of the spike indicator.
inline double surrogate_grad(double u, double zeta, double k) {
  const double a = kPi * k * (u - zeta);
  return 1.0 / (1.0 + a * a);
}

struct LabeledPattern {
  Eigen::VectorXd input;
  int label = 0;
};

struct TrainResult {
  SnnNetwork net;
  std::vector<double> losses;      // per epoch
  std::vector<double> accuracies;  // per epoch, on the training set
  int epochs_run = 0;
};

// Full-batch surrogate-gradient BPTT on static patterns presented for
// total_steps. Cross-entropy on softmax of output spike counts.
inline TrainResult train_toy(SnnNetwork net,
                             std::span<const LabeledPattern> patterns,
                             int epochs, double lr, int total_steps = 6) {
  net.validate();
  if (patterns.empty()) throw training_error("train_toy: empty dataset");
  if (patterns.size() > 10000)
    throw training_error("train_toy: desk-scale trainer, keep <= 1e4 samples");
  if (net.depth() > 3)
    throw training_error("train_toy: desk-scale trainer, keep <= 3 layers");
  const int N = static_cast<int>(patterns.size());
  const int D = net.depth();
  const int C = net.output_size();

  Eigen::MatrixXd X(net.input_size(), N);
  std::vector<int> labels(N);
  for (int i = 0; i < N; ++i) {
    if (patterns[i].input.size() != net.input_size())
      throw structural_error("train_toy: pattern " + std::to_string(i) +
                             " input size mismatch");
    if (patterns[i].label < 0 || patterns[i].label >= C)
      throw structural_error("train_toy: pattern " + std::to_string(i) +
                             " label out of range");
    X.col(i) = patterns[i].input;
    labels[i] = patterns[i].label;
  }
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(C, N);
  for (int i = 0; i < N; ++i) onehot(labels[i], i) = 1.0;

  TrainResult result;
  const int M = total_steps;
  // traces: U[d][m], S[d][m] are (layer_size x N)
  std::vector<std::vector<Eigen::MatrixXd>> U(D), S(D);
  for (int d = 0; d < D; ++d) {
    U[d].assign(M, Eigen::MatrixXd());
    S[d].assign(M, Eigen::MatrixXd());
  }

  double initial_loss = -1.0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    // forward
    for (int d = 0; d < D; ++d) {
      const Eigen::Index rows = net.W[d].rows();
      for (int m = 0; m < M; ++m) {
        const Eigen::MatrixXd& drive = d == 0 ? X : S[d - 1][m];
        Eigen::MatrixXd u = net.W[d] * drive;
        if (m > 0)
          u += net.beta_lif * U[d][m - 1] - net.zeta * S[d][m - 1];
        U[d][m] = std::move(u);
        S[d][m] = (U[d][m].array() >= net.zeta).cast<double>().matrix();
        (void)rows;
      }
    }
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(C, N);
    for (int m = 0; m < M; ++m) counts += S[D - 1][m];

    // softmax + CE
    Eigen::MatrixXd P = counts;
    double loss = 0.0;
    int correct = 0;
    for (int i = 0; i < N; ++i) {
      const double mx = P.col(i).maxCoeff();
      Eigen::VectorXd e = (P.col(i).array() - mx).exp();
      P.col(i) = e / e.sum();
      loss -= std::log(std::max(P(labels[i], i), 1e-300));
      int best = 0;
      for (int c = 1; c < C; ++c)
        if (counts(c, i) > counts(best, i)) best = c;
      correct += best == labels[i];
    }
    loss /= N;
    const double acc = static_cast<double>(correct) / N;
    result.losses.push_back(loss);
    result.accuracies.push_back(acc);
    result.epochs_run = epoch + 1;
    if (initial_loss < 0.0) initial_loss = loss;
    if (loss > 10.0 * initial_loss + 1e-9) {
      std::ostringstream msg;
      msg << "train_toy: diverged at epoch " << epoch << " (loss " << loss
          << " vs initial " << initial_loss << "); lower the learning rate";
      throw training_error(msg.str());
    }
    if (acc >= 1.0 && epoch + 1 < epochs) break;  // nothing left to fit
    if (lr == 0.0) continue;

    // backward through time
    const Eigen::MatrixXd dCounts = (P - onehot) / N;
    std::vector<Eigen::MatrixXd> gradW(D);
    for (int d = 0; d < D; ++d)
      gradW[d] = Eigen::MatrixXd::Zero(net.W[d].rows(), net.W[d].cols());
    std::vector<Eigen::MatrixXd> lam_next(D);  // lambda_U[d][m+1]
    for (int d = 0; d < D; ++d)
      lam_next[d] = Eigen::MatrixXd::Zero(net.W[d].rows(), N);
    std::vector<Eigen::MatrixXd> lam(D);
    for (int m = M - 1; m >= 0; --m) {
      for (int d = D - 1; d >= 0; --d) {
        Eigen::MatrixXd gS = d == D - 1
                                 ? dCounts
                                 : Eigen::MatrixXd(net.W[d + 1].transpose() *
                                                   lam[d + 1]);
        gS -= net.zeta * lam_next[d];
        Eigen::MatrixXd gprime =
            U[d][m].unaryExpr([&](double u) {
              return surrogate_grad(u, net.zeta, net.surrogate_k);
            });
        lam[d] = gS.cwiseProduct(gprime) + net.beta_lif * lam_next[d];
        gradW[d] += lam[d] * (d == 0 ? X : S[d - 1][m]).transpose();
      }
      for (int d = 0; d < D; ++d) lam_next[d] = lam[d];
    }
    for (int d = 0; d < D; ++d) net.W[d] -= lr * gradW[d];
  }
  result.net = std::move(net);
  return result;
}

// ---- weight blob (versioned, native-endian) ----

inline constexpr char kWeightMagic[4] = {'S', 'N', 'N', 'W'};
inline constexpr std::uint32_t kWeightVersion = 1;

inline void save_weights(std::ostream& out, const SnnNetwork& net) {
  net.validate();
  out.write(kWeightMagic, 4);
  auto put_u32 = [&](std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
  };
  auto put_f64 = [&](double v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
  };
  put_u32(kWeightVersion);
  put_f64(net.beta_lif);
  put_f64(net.zeta);
  put_f64(net.surrogate_k);
  put_u32(static_cast<std::uint32_t>(net.W.size()));
  for (const auto& w : net.W) {
    put_u32(static_cast<std::uint32_t>(w.rows()));
    put_u32(static_cast<std::uint32_t>(w.cols()));
  }
  for (const auto& w : net.W)
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) put_f64(w(r, c));
}

inline SnnNetwork load_weights(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kWeightMagic, 4) != 0)
    throw parse_error("load_weights: bad magic");
  auto get_u32 = [&]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (in.gcount() != 4) throw parse_error("load_weights: truncated blob");
    return v;
  };
  auto get_f64 = [&]() {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (in.gcount() != 8) throw parse_error("load_weights: truncated blob");
    return v;
  };
  const std::uint32_t version = get_u32();
  if (version != kWeightVersion)
    throw parse_error("load_weights: unsupported version " +
                      std::to_string(version));
  SnnNetwork net;
  net.beta_lif = get_f64();
  net.zeta = get_f64();
  net.surrogate_k = get_f64();
  const std::uint32_t layers = get_u32();
  if (layers == 0 || layers > 64)
    throw parse_error("load_weights: implausible layer count");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes(layers);
  for (auto& s : shapes) {
    s.first = get_u32();
    s.second = get_u32();
  }
  for (const auto& s : shapes) {
    Eigen::MatrixXd w(s.first, s.second);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = get_f64();
    net.W.push_back(std::move(w));
  }
  net.validate();
  return net;
}

// ---- toy task ----

struct ToySample {
  EventFrame frame;
  int label = 0;
};

// Linearly separable rate patterns: class c lights up quadrant-style region c
// with dense positive events, background pixels fire rarely.
inline std::vector<ToySample> make_toy_dataset(int per_class, std::uint64_t seed,
                                               int height = 16, int width = 16,
                                               int classes = 4,
                                               double on_rate = 0.75,
                                               double off_rate = 0.02) {
  if (classes != 4)
    throw config_error("make_toy_dataset: quadrant layout needs 4 classes");
  std::vector<ToySample> out;
  out.reserve(static_cast<std::size_t>(per_class) * classes);
  const int hh = height / 2;
  const int hw = width / 2;
  for (int c = 0; c < classes; ++c) {
    const int row0 = (c / 2) * hh;
    const int col0 = (c % 2) * hw;
    for (int i = 0; i < per_class; ++i) {
      Rng rng(derive_seed(seed, {0x746f79ULL, static_cast<std::uint64_t>(c),
                                 static_cast<std::uint64_t>(i)}));
      EventFrame f(height, width);
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          const bool in_region = y >= row0 && y < row0 + hh && x >= col0 &&
                                 x < col0 + hw;
          const double rate = in_region ? on_rate : off_rate;
          if (rng.bernoulli(rate))
            f.set_polarity(y, x, in_region ? 1 : rng.sign());
        }
      out.push_back({std::move(f), c});
    }
  }
  return out;
}

inline std::vector<LabeledPattern> to_patterns(std::span<const ToySample> data) {
  std::vector<LabeledPattern> out;
  out.reserve(data.size());
  for (const ToySample& s : data)
    out.push_back({encode_digital(s.frame), s.label});
  return out;
}

// Learned sparsity estimator: quantile features of the sigmoid-normalized
// statistics, classified into log-spaced sparsity bins by a small LIF net.
class SnnSparsityEstimator final : public SparsityEstimator {
 public:
  SnnSparsityEstimator(SnnNetwork net, std::vector<double> bin_centers,
                       int total_steps = 6)
      : net_(std::move(net)), bins_(std::move(bin_centers)), steps_(total_steps) {
    net_.validate();
    if (static_cast<int>(bins_.size()) != net_.output_size())
      throw config_error("SnnSparsityEstimator: one bin per output neuron");
  }

  static Eigen::VectorXd features(std::span<const double> y, double mu,
                                  double sigma, int n_quantiles) {
    std::vector<double> z(y.begin(), y.end());
    for (double& v : z) v = 1.0 / (1.0 + std::exp(-(v - mu / 2.0) / sigma));
    std::sort(z.begin(), z.end());
    Eigen::VectorXd f(n_quantiles);
    for (int q = 0; q < n_quantiles; ++q) {
      const double pos = (q + 0.5) / n_quantiles * (z.size() - 1);
      const auto i = static_cast<std::size_t>(pos);
      const double frac = pos - i;
      f[q] = i + 1 < z.size() ? (1.0 - frac) * z[i] + frac * z[i + 1] : z[i];
    }
    return f;
  }

  SparsityEstimate estimate(std::span<const double> y, double mu,
                            double sigma) const override {
    if (sigma <= 0.0)
      throw estimation_error("SnnSparsityEstimator: requires sigma > 0");
    if (y.size() < 100)
      throw estimation_error("SnnSparsityEstimator: needs >= 100 statistics");
    const Eigen::VectorXd f = features(y, mu, sigma, net_.input_size());
    const ClassScores scores = forward_static(net_, f, steps_);
    SparsityEstimate e;
    e.method = SparsityMethod::learned;
    e.samples = y.size();
    e.p_hat = std::clamp(bins_[scores.label], kEpsPrior, 1.0 - kEpsPrior);
    return e;
  }

  const SnnNetwork& net() const { return net_; }

 private:
  SnnNetwork net_;
  std::vector<double> bins_;
  int steps_;
};

}  // namespace impulse
