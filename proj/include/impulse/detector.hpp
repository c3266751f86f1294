#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "impulse/errors.hpp"
#include "impulse/events.hpp"
#include "impulse/rake.hpp"

namespace impulse {

inline constexpr double kEpsPrior = 1e-4;   // prior clamp for degenerate p
inline constexpr double kLambdaMax = 1e3;   // bias search upper bound

inline double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

// Inverse of Q on (0,1), by bisection; 1e-13 absolute in x.
inline double q_function_inv(double prob) {
  if (prob <= 0.0 || prob >= 1.0)
    throw numeric_error("q_function_inv: prob must be in (0,1)");
  double lo = -40.0, hi = 40.0;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (q_function(mid) > prob)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// MAP decision threshold with bias lambda on the one-hypothesis.
inline double map_threshold(double lambda, double p, double mu, double sigma) {
  if (lambda < 1.0) throw config_error("map_threshold: lambda must be >= 1");
  if (p <= 0.0 || p >= 1.0)
    throw config_error("map_threshold: degenerate prior p=" +
                       std::to_string(p) + " (clamp before calling)");
  if (mu <= 0.0) throw numeric_error("map_threshold: requires mu > 0");
  return (sigma * sigma / mu) * std::log((1.0 - p) / (lambda * p)) + mu / 2.0;
}

inline int detect_frame(double y, double eta) { return y > eta ? 1 : 0; }

inline int majority_vote(std::span<const std::uint8_t> frame_bits) {
  const int n = static_cast<int>(frame_bits.size());
  if (n < 1 || n % 2 == 0)
    throw config_error("majority_vote: N_f must be odd, got " +
                       std::to_string(n));
  int sum = 0;
  for (auto b : frame_bits) sum += b ? 1 : 0;
  return 2 * sum > n ? 1 : 0;
}

struct FrameErrorProbs {
  double p_fa = 0.0;
  double p_md = 0.0;
};

inline FrameErrorProbs per_frame_error_probs(double eta, double mu,
                                             double sigma) {
  if (sigma <= 0.0)
    throw numeric_error("per_frame_error_probs: requires sigma > 0");
  return {q_function(eta / sigma), q_function((mu - eta) / sigma)};
}

namespace detail {
inline double binomial_coeff(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c *= static_cast<double>(n - k + i) / i;
  return c;
}
}  // namespace detail

// Probability that more than m = (N_f-1)/2 of N_f frames are wrong, given a
// per-frame error probability.
inline double vote_error_prob(double p_err, int N_f) {
  if (N_f < 1 || N_f % 2 == 0)
    throw config_error("vote_error_prob: N_f must be odd");
  const int m = (N_f - 1) / 2;
  double sum = 0.0;
  for (int i = m + 1; i <= N_f; ++i)
    sum += detail::binomial_coeff(N_f, i) * std::pow(p_err, i) *
           std::pow(1.0 - p_err, N_f - i);
  return sum;
}

struct ErrorModel {
  double lambda = 1.0;
  double p = 0.5;
  double eta = 0.0;
  double p_fa = 0.0;
  double p_md = 0.0;
  double p_e0 = 0.0;  // post-vote error given b=0
  double p_e1 = 0.0;  // post-vote error given b=1
  double ber = 0.0;
  int vote_threshold = 0;  // m = (N_f-1)/2
};

// Closed-form BER of threshold + majority vote. p may sit at {0,1}: the
// threshold is evaluated at the clamped prior and the vanished term drops.
inline ErrorModel analytic_ber(double lambda, double p, int N_f, double mu,
                               double sigma) {
  if (N_f < 1 || N_f % 2 == 0)
    throw config_error("analytic_ber: N_f must be odd");
  if (p < 0.0 || p > 1.0) throw config_error("analytic_ber: p outside [0,1]");
  ErrorModel m;
  m.lambda = lambda;
  m.p = p;
  m.vote_threshold = (N_f - 1) / 2;
  const double p_eta = std::clamp(p, kEpsPrior, 1.0 - kEpsPrior);
  m.eta = map_threshold(lambda, p_eta, mu, sigma);
  const FrameErrorProbs fp = per_frame_error_probs(m.eta, mu, sigma);
  m.p_fa = fp.p_fa;
  m.p_md = fp.p_md;
  m.p_e0 = vote_error_prob(m.p_fa, N_f);
  m.p_e1 = vote_error_prob(m.p_md, N_f);
  m.ber = (1.0 - p) * m.p_e0 + p * m.p_e1;
  return m;
}

// BER of a given threshold under the true prior; useful when eta was tuned
// on an estimated prior.
inline ErrorModel analytic_ber_at_eta(double eta, double p, int N_f, double mu,
                                      double sigma) {
  if (N_f < 1 || N_f % 2 == 0)
    throw config_error("analytic_ber_at_eta: N_f must be odd");
  ErrorModel m;
  m.p = p;
  m.eta = eta;
  m.vote_threshold = (N_f - 1) / 2;
  const FrameErrorProbs fp = per_frame_error_probs(eta, mu, sigma);
  m.p_fa = fp.p_fa;
  m.p_md = fp.p_md;
  m.p_e0 = vote_error_prob(m.p_fa, N_f);
  m.p_e1 = vote_error_prob(m.p_md, N_f);
  m.ber = (1.0 - p) * m.p_e0 + p * m.p_e1;
  return m;
}

struct LambdaOpt {
  double lambda_star = 1.0;
  double ber_star = 0.0;
  double eta_star = 0.0;
};

// Minimizes analytic BER over lambda in [1, lambda_max]: coarse grid on
// ln(lambda), then golden-section refinement of the bracketing cell. The
// grid step certifies against non-unimodal surprises at this resolution.
inline LambdaOpt optimize_lambda(double p, int N_f, double mu, double sigma,
                                 double lambda_max = kLambdaMax,
                                 int grid_points = 1024) {
  if (p <= 0.0 || p >= 1.0)
    throw config_error("optimize_lambda: p must be in (0,1)");
  if (lambda_max < 1.0)
    throw config_error("optimize_lambda: lambda_max must be >= 1");
  const double hi_ln = std::log(lambda_max);
  const auto ber_at = [&](double ln_lambda) {
    return analytic_ber(std::exp(ln_lambda), p, N_f, mu, sigma).ber;
  };

  int best_i = 0;
  double best = ber_at(0.0);
  for (int i = 1; i < grid_points; ++i) {
    const double v = ber_at(hi_ln * i / (grid_points - 1));
    if (v < best) {
      best = v;
      best_i = i;
    }
  }
  double a = hi_ln * std::max(best_i - 1, 0) / (grid_points - 1);
  double b = hi_ln * std::min(best_i + 1, grid_points - 1) / (grid_points - 1);

  const double inv_phi = 0.6180339887498949;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = ber_at(x1);
  double f2 = ber_at(x2);
  for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = ber_at(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = ber_at(x2);
    }
  }
  double ln_star = 0.5 * (a + b);
  if (ber_at(ln_star) > best) ln_star = hi_ln * best_i / (grid_points - 1);

  LambdaOpt opt;
  opt.lambda_star = std::exp(ln_star);
  const ErrorModel em = analytic_ber(opt.lambda_star, p, N_f, mu, sigma);
  opt.ber_star = em.ber;
  opt.eta_star = em.eta;
  return opt;
}

enum class SparsityMethod { oracle, moment, em, learned };

struct SparsityEstimate {
  double p_hat = 0.0;
  SparsityMethod method = SparsityMethod::moment;
  std::size_t samples = 0;
};

// Moment estimator: E[Y] = p*mu under the two-component mixture.
inline SparsityEstimate estimate_sparsity(std::span<const double> y, double mu) {
  if (mu <= 0.0) throw estimation_error("estimate_sparsity: requires mu > 0");
  if (y.size() < 100)
    throw estimation_error("estimate_sparsity: needs >= 100 statistics, got " +
                           std::to_string(y.size()));
  SparsityEstimate e;
  e.method = SparsityMethod::moment;
  e.samples = y.size();
  e.p_hat = std::clamp(mean(y) / mu, kEpsPrior, 1.0 - kEpsPrior);
  return e;
}

// EM refinement on the mixture (1-p)*N(0,sigma^2) + p*N(mu,sigma^2) with
// (mu, sigma) held fixed; only the mixing weight moves. Monotone in
// likelihood by construction.
inline SparsityEstimate estimate_sparsity_em(std::span<const double> y,
                                             double mu, double sigma,
                                             int max_iters = 200,
                                             std::vector<double>* nll_trace = nullptr) {
  if (sigma <= 0.0)
    throw estimation_error("estimate_sparsity_em: requires sigma > 0");
  SparsityEstimate e = estimate_sparsity(y, mu);
  e.method = SparsityMethod::em;
  double p = e.p_hat;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  for (int it = 0; it < max_iters; ++it) {
    double acc = 0.0;
    double nll = 0.0;
    for (double v : y) {
      const double l0 = std::exp(-v * v * inv2s2);
      const double l1 = std::exp(-(v - mu) * (v - mu) * inv2s2);
      const double num = p * l1;
      const double den = num + (1.0 - p) * l0;
      acc += den > 0.0 ? num / den : 0.0;
      nll -= std::log(std::max(den, 1e-300));
    }
    if (nll_trace) nll_trace->push_back(nll);
    const double next = acc / static_cast<double>(y.size());
    if (std::abs(next - p) < 1e-12) {
      p = next;
      break;
    }
    p = next;
  }
  e.p_hat = std::clamp(p, kEpsPrior, 1.0 - kEpsPrior);
  return e;
}

// Hook for a learned estimator (see the SNN engine for one implementation).
class SparsityEstimator {
 public:
  virtual ~SparsityEstimator() = default;
  virtual SparsityEstimate estimate(std::span<const double> y, double mu,
                                    double sigma) const = 0;
};

class MomentSparsityEstimator final : public SparsityEstimator {
 public:
  SparsityEstimate estimate(std::span<const double> y, double mu,
                            double /*sigma*/) const override {
    return estimate_sparsity(y, mu);
  }
};

class EmSparsityEstimator final : public SparsityEstimator {
 public:
  SparsityEstimate estimate(std::span<const double> y, double mu,
                            double sigma) const override {
    return estimate_sparsity_em(y, mu, sigma);
  }
};

// Detects one user's bit stream from its statistics slice: threshold per
// frame, then vote across the N_f repeats.
inline BitStream detect_stream(const FrameStatistics& stats, int k, double eta) {
  BitStream out;
  out.user = k;
  out.bits.resize(stats.bits);
  std::vector<std::uint8_t> frame_bits(stats.frames);
  for (int n = 0; n < stats.bits; ++n) {
    for (int j = 0; j < stats.frames; ++j)
      frame_bits[j] =
          static_cast<std::uint8_t>(detect_frame(stats.at(k, n, j), eta));
    out.bits[n] = static_cast<std::uint8_t>(majority_vote(frame_bits));
  }
  return out;
}

struct UserDetection {
  SparsityEstimate sparsity;
  LambdaOpt lambda;
  BitStream stream;
};

// Full per-user detection: estimate p (or take the oracle value), optimize
// the bias, threshold, vote.
inline UserDetection detect_user(const FrameStatistics& stats, int k,
                                 const SparsityEstimator* estimator = nullptr,
                                 double oracle_p = -1.0) {
  const LinkMoments& m = stats.moments[k];
  UserDetection d;
  std::span<const double> slice(
      stats.y.data() + static_cast<std::size_t>(k) * stats.bits * stats.frames,
      static_cast<std::size_t>(stats.bits) * stats.frames);
  if (oracle_p >= 0.0) {
    d.sparsity = {std::clamp(oracle_p, kEpsPrior, 1.0 - kEpsPrior),
                  SparsityMethod::oracle, slice.size()};
  } else if (estimator) {
    d.sparsity = estimator->estimate(slice, m.mu, m.sigma);
  } else {
    d.sparsity = estimate_sparsity(slice, m.mu);
  }
  if (m.sigma == 0.0) {
    // noiseless: no bias needed, midpoint threshold is exact
    d.lambda = {1.0, 0.0, m.mu / 2.0};
  } else {
    d.lambda = optimize_lambda(d.sparsity.p_hat, stats.frames, m.mu, m.sigma);
  }
  d.stream = detect_stream(stats, k, d.lambda.eta_star);
  d.stream.user = k;
  return d;
}

// All users detected and reassembled into a frame.
inline EventFrame reconstruct_frame(const FrameStatistics& stats, int tile_h,
                                    int tile_w,
                                    const SparsityEstimator* estimator = nullptr,
                                    double oracle_p = -1.0) {
  std::vector<BitStream> streams;
  streams.reserve(stats.users);
  for (int k = 0; k < stats.users; ++k)
    streams.push_back(detect_user(stats, k, estimator, oracle_p).stream);
  return assemble_frame(streams, stats.users, tile_h, tile_w);
}

}  // namespace impulse
