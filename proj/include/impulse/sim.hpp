#pragma once

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "impulse/channel.hpp"
#include "impulse/detector.hpp"
#include "impulse/errors.hpp"
#include "impulse/events.hpp"
#include "impulse/phy.hpp"
#include "impulse/rake.hpp"
#include "impulse/rng.hpp"
#include "impulse/snn.hpp"
#include "impulse/stats.hpp"

namespace impulse {

enum class Scheme { ook_digital, ook_analog, ppm_digital, ppm_analog, baseline };
enum class SimLevel { waveform, statistic };
enum class NoiseEst { automatic, oracle, estimated };

inline bool scheme_is_ppm(Scheme s) {
  return s == Scheme::ppm_digital || s == Scheme::ppm_analog;
}
inline bool scheme_is_analog(Scheme s) {
  return s == Scheme::ook_analog || s == Scheme::ppm_analog;
}

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::ook_digital: return "ook-digital";
    case Scheme::ook_analog: return "ook-analog";
    case Scheme::ppm_digital: return "ppm-digital";
    case Scheme::ppm_analog: return "ppm-analog";
    case Scheme::baseline: return "baseline";
  }
  return "?";
}

struct ExperimentConfig {
  LinkConfig link;
  PulseShape pulse;
  ChannelParams channel;
  std::string channel_preset = "cm1";
  Scheme scheme = Scheme::ook_digital;
  SimLevel level = SimLevel::statistic;
  std::vector<double> snr_grid = {0.0};
  long trials = 1000;
  long block_bits = 0;  // 0: one block per SNR point
  std::uint64_t seed = 1;
  double p = 0.1;            // activation rate of synthetic bits
  double active_prob = 1.0;  // collisions: per-user activity probability
  SparsityMethod sparsity = SparsityMethod::oracle;
  VarianceModel variance_model = VarianceModel::as_printed;
  NoiseEst noise_est = NoiseEst::automatic;
  Presentation presentation = Presentation::block;
  int threads = 1;
  bool dry_run = false;
  int frame_h = 16;
  int frame_w = 16;
  // toy SNN knobs
  int snn_hidden = 64;
  int snn_steps = 2;  // steps per slice
  int snn_epochs = 50;
  double snn_lr = 0.5;
  double snn_beta = 0.9;
  double snn_zeta = 1.0;
  double snn_surrogate_k = 2.0;
  int toy_per_class = 100;
  int toy_test_per_class = 50;

  std::uint64_t config_hash = 0;  // FNV-1a of the raw config text
};

// ---- config parsing: [section] / key = value / '#' comments ----

namespace detail {
inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline bool parse_double_str(const std::string& v, double& out) {
  if (v == "inf") {
    out = std::numeric_limits<double>::infinity();
    return true;
  }
  try {
    std::size_t pos = 0;
    out = std::stod(v, &pos);
    return pos == v.size();
  } catch (...) {
    return false;
  }
}

inline bool parse_long_str(const std::string& v, long& out) {
  try {
    std::size_t pos = 0;
    out = std::stol(v, &pos);
    return pos == v.size();
  } catch (...) {
    return false;
  }
}

// "a:step:b" inclusive range, or whitespace/comma separated values.
inline bool parse_grid(const std::string& v, std::vector<double>& out) {
  out.clear();
  if (v.find(':') != std::string::npos) {
    double a, step, b;
    std::string s = v;
    for (char& c : s)
      if (c == ':') c = ' ';
    std::istringstream is(s);
    if (!(is >> a >> step >> b) || step <= 0) return false;
    for (double x = a; x <= b + 1e-9; x += step) out.push_back(x);
    return !out.empty();
  }
  std::string s = v;
  for (char& c : s)
    if (c == ',') c = ' ';
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) {
    double x;
    if (!parse_double_str(tok, x)) return false;
    out.push_back(x);
  }
  return !out.empty();
}
}  // namespace detail

inline std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> errs;
  const auto check = [&](auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      errs.emplace_back(e.what());
    }
  };
  check([&] { c.link.validate(); });
  check([&] { c.pulse.validate(); });
  check([&] { c.channel.validate(); });
  if (c.snr_grid.empty()) errs.emplace_back("sim.snr_db: grid must be non-empty");
  if (c.trials < 1 && !c.dry_run)
    errs.emplace_back("sim.trials: must be >= 1");
  if (c.block_bits < 0) errs.emplace_back("sim.block_bits: must be >= 0");
  if (c.threads < 1) errs.emplace_back("sim.threads: must be >= 1");
  if (c.p < 0.0 || c.p > 1.0) errs.emplace_back("sim.p: must lie in [0,1]");
  if (c.active_prob < 0.0 || c.active_prob > 1.0)
    errs.emplace_back("sim.active_prob: must lie in [0,1]");
  if (c.link.N_f % 2 == 0)
    errs.emplace_back("link.N_f: must be odd (majority voting)");
  if (scheme_is_ppm(c.scheme) && c.link.N_p != 1)
    errs.emplace_back("link.N_p: intra-frame repetition applies to OOK only");
  if (c.dry_run && c.sparsity != SparsityMethod::oracle)
    errs.emplace_back("sim.dry_run: needs sparsity = oracle (no samples drawn)");
  if (c.snn_steps < 1) errs.emplace_back("snn.steps: must be >= 1");
  if (c.snn_hidden < 1) errs.emplace_back("snn.hidden: must be >= 1");
  if (c.snn_epochs < 1) errs.emplace_back("snn.epochs: must be >= 1");
  if (c.toy_per_class < 1 || c.toy_test_per_class < 1)
    errs.emplace_back("snn.per_class/test_per_class: must be >= 1");
  return errs;
}

// Parses the structured key = value config; unknown sections/keys rejected.
inline ExperimentConfig parse_config(std::istream& in) {
  std::ostringstream raw;
  raw << in.rdbuf();
  const std::string text = raw.str();

  ExperimentConfig c;
  c.config_hash = fnv1a64(text);
  std::vector<std::string> errs;
  std::string section;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  bool channel_overridden = false;

  while (std::getline(lines, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        errs.push_back("line " + std::to_string(line_no) + ": malformed section");
        continue;
      }
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "link" && section != "pulse" && section != "channel" &&
          section != "sim" && section != "snn")
        errs.push_back("line " + std::to_string(line_no) +
                       ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errs.push_back("line " + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    const std::string where = section + "." + key;
    const auto bad = [&](const std::string& why) {
      errs.push_back(where + ": " + why + " (got '" + val + "')");
    };
    const auto num = [&](double& slot) {
      double x;
      if (detail::parse_double_str(val, x))
        slot = x;
      else
        bad("expected a number");
    };
    const auto integer = [&](int& slot) {
      long x;
      if (detail::parse_long_str(val, x))
        slot = static_cast<int>(x);
      else
        bad("expected an integer");
    };
    const auto longint = [&](long& slot) {
      long x;
      if (detail::parse_long_str(val, x))
        slot = x;
      else
        bad("expected an integer");
    };
    const auto boolean = [&](bool& slot) {
      if (val == "true" || val == "1")
        slot = true;
      else if (val == "false" || val == "0")
        slot = false;
      else
        bad("expected true/false");
    };

    if (section == "link") {
      if (key == "T_f") num(c.link.T_f);
      else if (key == "T_c") num(c.link.T_c);
      else if (key == "N_f") integer(c.link.N_f);
      else if (key == "N_p") integer(c.link.N_p);
      else if (key == "K") integer(c.link.K);
      else if (key == "E_s") num(c.link.E_s);
      else if (key == "N_0") num(c.link.N_0);
      else if (key == "L") integer(c.link.L);
      else if (key == "sample_rate") num(c.link.sample_rate);
      else if (key == "ppm_delta") num(c.link.ppm_delta);
      else if (key == "energy_mode") {
        if (val == "per-pulse") c.link.energy_mode = EnergyMode::per_pulse;
        else if (val == "per-bit") c.link.energy_mode = EnergyMode::per_bit;
        else bad("expected per-pulse|per-bit");
      } else bad("unknown key");
    } else if (section == "pulse") {
      if (key == "tau_p") num(c.pulse.tau_p);
      else if (key == "half_width") num(c.pulse.half_width);
      else bad("unknown key");
    } else if (section == "channel") {
      channel_overridden = true;
      if (key == "preset") {
        if (val == "cm1") c.channel = cm1_preset();
        else if (val == "single-path") c.channel = single_path_preset();
        else bad("expected cm1|single-path");
        c.channel_preset = val;
      } else if (key == "cluster_rate") num(c.channel.cluster_rate);
      else if (key == "ray_rate") num(c.channel.ray_rate);
      else if (key == "cluster_decay") num(c.channel.cluster_decay);
      else if (key == "ray_decay") num(c.channel.ray_decay);
      else if (key == "m_nak") num(c.channel.m_nak);
      else if (key == "n_clusters") integer(c.channel.n_clusters);
      else if (key == "rays_per_cluster") integer(c.channel.rays_per_cluster);
      else if (key == "max_delay") num(c.channel.max_delay);
      else if (key == "phase_model") {
        if (val == "sign") c.channel.phase_model = PhaseModel::sign;
        else if (val == "complex-real-part")
          c.channel.phase_model = PhaseModel::complex_real_part;
        else bad("expected sign|complex-real-part");
      } else if (key == "ray_count_model") {
        if (val == "fixed") c.channel.ray_count_model = RayCountModel::fixed;
        else if (val == "poisson")
          c.channel.ray_count_model = RayCountModel::poisson;
        else bad("expected fixed|poisson");
      } else bad("unknown key");
    } else if (section == "sim") {
      if (key == "scheme") {
        if (val == "ook-digital") c.scheme = Scheme::ook_digital;
        else if (val == "ook-analog") c.scheme = Scheme::ook_analog;
        else if (val == "ppm-digital") c.scheme = Scheme::ppm_digital;
        else if (val == "ppm-analog") c.scheme = Scheme::ppm_analog;
        else if (val == "baseline") c.scheme = Scheme::baseline;
        else bad("expected ook-digital|ook-analog|ppm-digital|ppm-analog|baseline");
      } else if (key == "level") {
        if (val == "waveform") c.level = SimLevel::waveform;
        else if (val == "statistic") c.level = SimLevel::statistic;
        else bad("expected waveform|statistic");
      } else if (key == "snr_db") {
        if (!detail::parse_grid(val, c.snr_grid)) bad("expected grid or list");
      } else if (key == "trials") longint(c.trials);
      else if (key == "block_bits") longint(c.block_bits);
      else if (key == "seed") {
        long s;
        if (detail::parse_long_str(val, s) && s >= 0)
          c.seed = static_cast<std::uint64_t>(s);
        else bad("expected a non-negative integer");
      } else if (key == "p") num(c.p);
      else if (key == "active_prob") num(c.active_prob);
      else if (key == "sparsity") {
        if (val == "oracle") c.sparsity = SparsityMethod::oracle;
        else if (val == "moment") c.sparsity = SparsityMethod::moment;
        else if (val == "em") c.sparsity = SparsityMethod::em;
        else if (val == "learned") c.sparsity = SparsityMethod::learned;
        else bad("expected oracle|moment|em|learned");
      } else if (key == "variance_model") {
        if (val == "as-printed") c.variance_model = VarianceModel::as_printed;
        else if (val == "derived") c.variance_model = VarianceModel::derived;
        else bad("expected as-printed|derived");
      } else if (key == "noise_est") {
        if (val == "auto") c.noise_est = NoiseEst::automatic;
        else if (val == "oracle") c.noise_est = NoiseEst::oracle;
        else if (val == "estimated") c.noise_est = NoiseEst::estimated;
        else bad("expected auto|oracle|estimated");
      } else if (key == "threads") integer(c.threads);
      else if (key == "dry_run") boolean(c.dry_run);
      else if (key == "frame_h") integer(c.frame_h);
      else if (key == "frame_w") integer(c.frame_w);
      else bad("unknown key");
    } else if (section == "snn") {
      if (key == "hidden") integer(c.snn_hidden);
      else if (key == "steps") integer(c.snn_steps);
      else if (key == "epochs") integer(c.snn_epochs);
      else if (key == "lr") num(c.snn_lr);
      else if (key == "beta_lif") num(c.snn_beta);
      else if (key == "zeta") num(c.snn_zeta);
      else if (key == "surrogate_k") num(c.snn_surrogate_k);
      else if (key == "per_class") integer(c.toy_per_class);
      else if (key == "test_per_class") integer(c.toy_test_per_class);
      else if (key == "presentation") {
        if (val == "block") c.presentation = Presentation::block;
        else if (val == "interleaved") c.presentation = Presentation::interleaved;
        else bad("expected block|interleaved");
      } else bad("unknown key");
    } else {
      errs.push_back("line " + std::to_string(line_no) +
                     ": key outside any section");
    }
  }
  (void)channel_overridden;

  for (const std::string& e : validate_config(c)) errs.push_back(e);
  if (!errs.empty()) {
    std::string msg = "config invalid:";
    for (const std::string& e : errs) msg += "\n  - " + e;
    throw config_error(msg);
  }
  return c;
}

// ---- collision analytics ----

// P(n users' chip sets are pairwise disjoint), each set = N_p chips drawn
// uniformly without replacement from n_chips.
inline double collision_disjoint_prob(int n_active, int N_p, int n_chips) {
  if (n_active <= 1) return 1.0;
  if (static_cast<long>(n_active) * N_p > n_chips) return 0.0;
  double prob = 1.0;
  const double denom = detail::binomial_coeff(n_chips, N_p);
  for (int k = 1; k < n_active; ++k)
    prob *= detail::binomial_coeff(n_chips - k * N_p, N_p) / denom;
  return prob;
}

// Collision probability with each of K users independently active with
// probability q (PPM: q = 1, a pulse is sent every frame).
inline double collision_prob_analytic(int K, int N_p, int n_chips, double q) {
  double p_coll = 0.0;
  for (int n = 0; n <= K; ++n) {
    const double w = detail::binomial_coeff(K, n) * std::pow(q, n) *
                     std::pow(1.0 - q, K - n);
    p_coll += w * (1.0 - collision_disjoint_prob(n, N_p, n_chips));
  }
  return p_coll;
}

struct CollisionResult {
  double analytic = 0.0;
  double empirical = 0.0;
  Interval ci;
  long frames = 0;
  long collisions = 0;
};

inline CollisionResult run_collision_analysis(const ExperimentConfig& c) {
  if (c.link.K < 2)
    return {0.0, 0.0, {0.0, 0.0}, c.trials, 0};
  const bool ppm = scheme_is_ppm(c.scheme);
  const int n_chips = ppm ? c.link.n_hops() - 1 : c.link.n_hops();
  const double q = ppm ? 1.0 : c.active_prob;
  CollisionResult r;
  r.frames = c.trials;
  r.analytic = collision_prob_analytic(c.link.K, c.link.N_p, n_chips, q);

  Rng rng(derive_seed(c.seed, {0x636f6cULL}));
  std::vector<char> occupied(n_chips);
  std::vector<int> chips(c.link.N_p);
  for (long t = 0; t < c.trials; ++t) {
    std::fill(occupied.begin(), occupied.end(), 0);
    bool coll = false;
    for (int k = 0; k < c.link.K && !coll; ++k) {
      if (!ppm && !rng.bernoulli(q)) continue;
      // draw N_p distinct chips
      for (int i = 0; i < c.link.N_p; ++i) {
        int ch;
        bool fresh;
        do {
          ch = static_cast<int>(rng.uniform_int(n_chips));
          fresh = true;
          for (int j = 0; j < i; ++j)
            if (chips[j] == ch) fresh = false;
        } while (!fresh);
        chips[i] = ch;
      }
      for (int i = 0; i < c.link.N_p; ++i) {
        if (occupied[chips[i]]) coll = true;
        occupied[chips[i]] = 1;
      }
    }
    if (coll) ++r.collisions;
  }
  r.empirical = static_cast<double>(r.collisions) / r.frames;
  r.ci = wilson_interval(r.collisions, r.frames);
  return r;
}

// ---- BER sweep ----

struct SweepRow {
  double snr_db = 0.0;
  double p = 0.0;
  double lambda_star = 1.0;
  double eta = 0.0;
  double analytic = 0.0;
  double empirical = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  long bits = 0;
  long errors = 0;
};

namespace detail {

template <class Fn>
inline void parallel_blocks(long n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  const int workers = static_cast<int>(std::min<long>(threads, n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const long i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  for (auto& t : pool) t.join();
}

struct BlockOutcome {
  long bits = 0;
  long errors = 0;
  double analytic_bits = 0.0;  // analytic BER * bits
  double lambda = 1.0;
  double eta = 0.0;
};

inline double resolve_sparsity(const ExperimentConfig& c,
                               std::span<const double> y,
                               const LinkMoments& m) {
  switch (c.sparsity) {
    case SparsityMethod::oracle:
      return std::clamp(c.p, kEpsPrior, 1.0 - kEpsPrior);
    case SparsityMethod::moment:
      return estimate_sparsity(y, m.mu).p_hat;
    case SparsityMethod::em:
      return estimate_sparsity_em(y, m.mu, m.sigma).p_hat;
    case SparsityMethod::learned:
      throw config_error("ber-sweep: learned sparsity needs the e2e pipeline");
  }
  return c.p;
}

// Shared channel setup: realization for user k, strongest-path selection.
// The harness clamps L to the realized tap count so sparse realizations do
// not abort a sweep.
inline FingerSet block_fingers(const ExperimentConfig& c, std::uint64_t point,
                               long block, int k,
                               ChannelRealization* out_ch = nullptr) {
  ChannelRealization ch =
      sample_channel(c.channel, derive_seed(c.seed, {11, point, static_cast<std::uint64_t>(block)}),
                     k, static_cast<std::uint64_t>(block));
  const int L_eff = std::min<int>(c.link.L, static_cast<int>(ch.taps.size()));
  FingerSet f = select_paths(ch, L_eff);
  if (out_ch) *out_ch = std::move(ch);
  return f;
}

inline BlockOutcome stat_block_ook(const ExperimentConfig& c, double N_0,
                                   std::uint64_t point, long block, long nbits) {
  FingerSet fingers = block_fingers(c, point, block, 0);
  fingers.noise_vars.assign(fingers.taps.size(), N_0 / 2.0);
  const LinkMoments m = link_stats(fingers, c.link, c.variance_model);

  Rng rng(derive_seed(c.seed, {12, point, static_cast<std::uint64_t>(block)}));
  std::vector<std::uint8_t> bits(nbits);
  std::vector<double> y(static_cast<std::size_t>(nbits) * c.link.N_f);
  for (long n = 0; n < nbits; ++n) {
    bits[n] = rng.bernoulli(c.p) ? 1 : 0;
    for (int j = 0; j < c.link.N_f; ++j)
      y[n * c.link.N_f + j] = statistic_model_sample(bits[n], m.mu, m.sigma, rng);
  }

  BlockOutcome out;
  out.bits = nbits;
  double eta;
  if (m.sigma == 0.0) {  // noiseless edge
    out.lambda = 1.0;
    eta = m.mu / 2.0;
    out.analytic_bits = 0.0;
  } else {
    const double p_hat = resolve_sparsity(c, y, m);
    const LambdaOpt lo = optimize_lambda(p_hat, c.link.N_f, m.mu, m.sigma);
    out.lambda = lo.lambda_star;
    eta = lo.eta_star;
    out.analytic_bits =
        analytic_ber_at_eta(eta, c.p, c.link.N_f, m.mu, m.sigma).ber * nbits;
  }
  out.eta = eta;
  std::vector<std::uint8_t> fb(c.link.N_f);
  for (long n = 0; n < nbits; ++n) {
    for (int j = 0; j < c.link.N_f; ++j)
      fb[j] = static_cast<std::uint8_t>(
          detect_frame(y[n * c.link.N_f + j], eta));
    if (majority_vote(fb) != bits[n]) ++out.errors;
  }
  return out;
}

inline BlockOutcome stat_block_ppm(const ExperimentConfig& c, double N_0,
                                   std::uint64_t point, long block, long nbits) {
  FingerSet fingers = block_fingers(c, point, block, 0);
  fingers.noise_vars.assign(fingers.taps.size(), N_0 / 2.0);
  const LinkMoments m = link_stats(fingers, c.link, c.variance_model);

  Rng rng(derive_seed(c.seed, {12, point, static_cast<std::uint64_t>(block)}));
  BlockOutcome out;
  out.bits = nbits;
  out.lambda = 1.0;
  out.eta = 0.0;
  const double pf = m.sigma > 0.0
                        ? q_function(m.mu / (std::sqrt(2.0) * m.sigma))
                        : 0.0;
  out.analytic_bits = vote_error_prob(pf, c.link.N_f) * nbits;
  std::vector<std::uint8_t> fb(c.link.N_f);
  for (long n = 0; n < nbits; ++n) {
    const int b = rng.bernoulli(c.p) ? 1 : 0;
    for (int j = 0; j < c.link.N_f; ++j) {
      double y0 = m.sigma > 0.0 ? rng.gaussian(0.0, m.sigma) : 0.0;
      double y1 = m.sigma > 0.0 ? rng.gaussian(0.0, m.sigma) : 0.0;
      (b ? y1 : y0) += m.mu;
      fb[j] = y1 > y0 ? 1 : 0;
    }
    if (majority_vote(fb) != b) ++out.errors;
  }
  return out;
}

// Pulses of one OOK bit, block-relative offsets.
inline PulseTrain ook_bit_train(const HopCode& code, const LinkConfig& cfg,
                                int n, std::uint8_t b) {
  PulseTrain t;
  t.user = code.user;
  t.modulation = Modulation::ook;
  if (!b) return t;
  const double amp = cfg.amplitude(Modulation::ook);
  for (int j = 0; j < cfg.N_f; ++j)
    for (int i = 0; i < cfg.N_p; ++i)
      t.pulses.push_back({code.user, n, j,
                          j * cfg.T_f + (code.chip(n, j, i) + 0.5) * cfg.T_c,
                          amp});
  return t;
}

inline PulseTrain ppm_bit_train(const HopCode& code, const LinkConfig& cfg,
                                int n, std::uint8_t b) {
  PulseTrain t;
  t.user = code.user;
  t.modulation = Modulation::ppm;
  const double amp = cfg.amplitude(Modulation::ppm);
  const double d = cfg.delta();
  for (int j = 0; j < cfg.N_f; ++j)
    t.pulses.push_back({code.user, n, j,
                        j * cfg.T_f + (code.chip(n, j, 0) + 0.5) * cfg.T_c +
                            (b ? d : 0.0),
                        amp});
  return t;
}

inline BlockOutcome wave_block(const ExperimentConfig& c, double N_0,
                               std::uint64_t point, long block, long nbits) {
  const bool ppm = scheme_is_ppm(c.scheme);
  const LinkConfig& link = c.link;
  const int K = link.K;
  const int chip_range = ppm ? link.n_hops() - 1 : 0;

  std::vector<ChannelRealization> chans;
  std::vector<HopCode> codes;
  chans.reserve(K);
  codes.reserve(K);
  FingerSet fingers;
  for (int k = 0; k < K; ++k) {
    ChannelRealization ch;
    FingerSet f = block_fingers(c, point, block, k, &ch);
    if (k == 0) fingers = std::move(f);
    chans.push_back(std::move(ch));
    codes.push_back(gen_th_code(
        derive_seed(c.seed, {14, point, static_cast<std::uint64_t>(block)}), k,
        link, static_cast<int>(nbits) + 1, chip_range));
  }

  // Per-finger noise: estimated from silent chips of a calibration block
  // (captures MUI), or the AWGN oracle value.
  const bool estimate =
      c.noise_est == NoiseEst::estimated ||
      (c.noise_est == NoiseEst::automatic && (K > 1) && N_0 > 0.0);
  if (estimate) {
    Rng cal_rng(derive_seed(c.seed, {15, point, static_cast<std::uint64_t>(block)}));
    std::vector<PulseTrain> cal(K);
    for (int k = 0; k < K; ++k) {
      const std::uint8_t b =
          k == 0 ? 0 : (cal_rng.bernoulli(c.p) ? 1 : 0);  // user 0 silent
      cal[k] = ppm ? ppm_bit_train(codes[k], link, static_cast<int>(nbits), b)
                   : ook_bit_train(codes[k], link, static_cast<int>(nbits), b);
      if (k == 0 && ppm) cal[k].pulses.clear();
    }
    const ReceivedWaveform rx = propagate(
        cal, chans, link, c.pulse, N_0,
        derive_seed(c.seed, {16, point, static_cast<std::uint64_t>(block)}));
    for (std::size_t l = 0; l < fingers.taps.size(); ++l)
      fingers.noise_vars[l] =
          estimate_finger_noise(rx, codes[0], fingers.taps[l], link, c.pulse,
                                static_cast<int>(nbits)) /
          link.N_p;
  } else {
    fingers.noise_vars.assign(fingers.taps.size(), N_0 / 2.0);
  }
  const LinkMoments m = link_stats(fingers, link, c.variance_model);

  Rng rng(derive_seed(c.seed, {17, point, static_cast<std::uint64_t>(block)}));
  std::vector<std::uint8_t> truth(nbits);
  std::vector<std::vector<std::uint8_t>> others(K);
  for (int k = 1; k < K; ++k) {
    others[k].resize(nbits);
    for (long n = 0; n < nbits; ++n)
      others[k][n] = rng.bernoulli(c.p) ? 1 : 0;
  }
  for (long n = 0; n < nbits; ++n) truth[n] = rng.bernoulli(c.p) ? 1 : 0;

  const int n_stats = ppm ? 2 : 1;
  std::vector<double> y(static_cast<std::size_t>(nbits) * link.N_f * n_stats);
  std::vector<PulseTrain> trains(K);
  for (long n = 0; n < nbits; ++n) {
    for (int k = 0; k < K; ++k) {
      const std::uint8_t b = k == 0 ? truth[n] : others[k][n];
      trains[k] = ppm ? ppm_bit_train(codes[k], link, static_cast<int>(n), b)
                      : ook_bit_train(codes[k], link, static_cast<int>(n), b);
    }
    const ReceivedWaveform rx = propagate(
        trains, chans, link, c.pulse, N_0,
        derive_seed(c.seed, {18, point, static_cast<std::uint64_t>(block),
                             static_cast<std::uint64_t>(n)}));
    for (int j = 0; j < link.N_f; ++j) {
      if (!ppm) {
        const FingerOutput fo = correlate_fingers(rx, codes[0], fingers, link,
                                                  c.pulse, static_cast<int>(n), j);
        y[n * link.N_f + j] = mrc_combine(fo, fingers, c.variance_model, link.N_p);
      } else {
        FingerSet shifted = fingers;
        for (ChannelTap& tap : shifted.taps) tap.delay += link.delta();
        const FingerOutput f0 = correlate_fingers(rx, codes[0], fingers, link,
                                                  c.pulse, static_cast<int>(n), j);
        const FingerOutput f1 = correlate_fingers(rx, codes[0], shifted, link,
                                                  c.pulse, static_cast<int>(n), j);
        y[(n * link.N_f + j) * 2] = mrc_combine(f0, fingers, c.variance_model, 1);
        y[(n * link.N_f + j) * 2 + 1] = mrc_combine(f1, fingers, c.variance_model, 1);
      }
    }
  }

  BlockOutcome out;
  out.bits = nbits;
  std::vector<std::uint8_t> fb(link.N_f);
  if (!ppm) {
    double eta;
    if (m.sigma == 0.0) {
      out.lambda = 1.0;
      eta = m.mu / 2.0;
      out.analytic_bits = 0.0;
    } else {
      const double p_hat = resolve_sparsity(c, y, m);
      const LambdaOpt lo = optimize_lambda(p_hat, link.N_f, m.mu, m.sigma);
      out.lambda = lo.lambda_star;
      eta = lo.eta_star;
      out.analytic_bits =
          analytic_ber_at_eta(eta, c.p, link.N_f, m.mu, m.sigma).ber * nbits;
    }
    out.eta = eta;
    for (long n = 0; n < nbits; ++n) {
      for (int j = 0; j < link.N_f; ++j)
        fb[j] = static_cast<std::uint8_t>(detect_frame(y[n * link.N_f + j], eta));
      if (majority_vote(fb) != truth[n]) ++out.errors;
    }
  } else {
    out.lambda = 1.0;
    out.eta = 0.0;
    const double pf = m.sigma > 0.0
                          ? q_function(m.mu / (std::sqrt(2.0) * m.sigma))
                          : 0.0;
    out.analytic_bits = vote_error_prob(pf, link.N_f) * nbits;
    for (long n = 0; n < nbits; ++n) {
      for (int j = 0; j < link.N_f; ++j)
        fb[j] = y[(n * link.N_f + j) * 2 + 1] > y[(n * link.N_f + j) * 2] ? 1 : 0;
      if (majority_vote(fb) != truth[n]) ++out.errors;
    }
  }
  return out;
}

}  // namespace detail

inline double snr_to_n0(double E_s, double snr_db) {
  return E_s * std::pow(10.0, -snr_db / 10.0);
}

inline std::vector<SweepRow> run_ber_sweep(const ExperimentConfig& c) {
  {
    const auto errs = validate_config(c);
    if (!errs.empty()) {
      std::string msg = "run_ber_sweep: invalid config:";
      for (const auto& e : errs) msg += "\n  - " + e;
      throw config_error(msg);
    }
  }
  std::vector<SweepRow> rows;
  rows.reserve(c.snr_grid.size());
  const long block_bits = c.block_bits > 0 ? c.block_bits : c.trials;

  for (std::size_t pi = 0; pi < c.snr_grid.size(); ++pi) {
    const double snr_db = c.snr_grid[pi];
    const double N_0 = snr_to_n0(c.link.E_s, snr_db);
    const long total = c.dry_run ? 0 : c.trials;
    const long n_blocks =
        c.dry_run ? 1 : (total + block_bits - 1) / block_bits;
    std::vector<detail::BlockOutcome> outs(n_blocks);

    detail::parallel_blocks(n_blocks, c.threads, [&](long b) {
      const long nbits =
          c.dry_run ? 0
                    : std::min<long>(block_bits, total - b * block_bits);
      if (c.dry_run) {
        // analytic row only: evaluate the model on one channel draw
        FingerSet f = detail::block_fingers(c, pi, b, 0);
        f.noise_vars.assign(f.taps.size(), N_0 / 2.0);
        const LinkMoments m = link_stats(f, c.link, c.variance_model);
        detail::BlockOutcome o;
        if (scheme_is_ppm(c.scheme)) {
          o.analytic_bits =
              m.sigma > 0.0
                  ? vote_error_prob(
                        q_function(m.mu / (std::sqrt(2.0) * m.sigma)),
                        c.link.N_f)
                  : 0.0;
          o.eta = 0.0;
        } else if (m.sigma == 0.0) {
          o.lambda = 1.0;
          o.eta = m.mu / 2.0;
          o.analytic_bits = 0.0;
        } else {
          const double p_hat = std::clamp(c.p, kEpsPrior, 1.0 - kEpsPrior);
          const LambdaOpt lo = optimize_lambda(p_hat, c.link.N_f, m.mu, m.sigma);
          o.lambda = lo.lambda_star;
          o.eta = lo.eta_star;
          o.analytic_bits = lo.ber_star;
        }
        o.bits = 0;
        outs[b] = o;
        return;
      }
      if (c.level == SimLevel::statistic)
        outs[b] = scheme_is_ppm(c.scheme)
                      ? detail::stat_block_ppm(c, N_0, pi, b, nbits)
                      : detail::stat_block_ook(c, N_0, pi, b, nbits);
      else
        outs[b] = detail::wave_block(c, N_0, pi, b, nbits);
    });

    SweepRow row;
    row.snr_db = snr_db;
    row.p = c.p;
    double lam = 0.0, eta = 0.0, analytic = 0.0;
    for (const auto& o : outs) {
      row.bits += o.bits;
      row.errors += o.errors;
      lam += o.lambda;
      eta += o.eta;
      analytic += o.analytic_bits;
    }
    row.lambda_star = lam / n_blocks;
    row.eta = eta / n_blocks;
    if (c.dry_run) {
      row.analytic = analytic / n_blocks;
      row.empirical = row.ci_low = row.ci_high =
          std::numeric_limits<double>::quiet_NaN();
    } else {
      row.analytic = analytic / row.bits;
      row.empirical = static_cast<double>(row.errors) / row.bits;
      const Interval ci = wilson_interval(row.errors, row.bits);
      row.ci_low = ci.lo;
      row.ci_high = ci.hi;
    }
    rows.push_back(row);
  }
  return rows;
}

// ---- end-to-end toy inference ----

struct ResultRecord {
  std::string scheme;
  double snr_db = 0.0;
  int N_f = 0;
  int N_p = 0;
  std::string metric;
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  long trials = 0;
  std::uint64_t seed = 0;
};

// Statistic-level transmission of one frame: tile across K users, model each
// user's link with fresh quasi-static moments, sample the MRC statistics.
inline FrameStatistics transmit_frame_statistic(
    const EventFrame& frame, const ExperimentConfig& c, double N_0,
    std::uint64_t sample_idx) {
  const TileSet tiles = tile_frame(frame, c.link.K);
  FrameStatistics stats = make_frame_statistics(
      c.link.K, 2 * tiles.tile_h * tiles.tile_w, c.link.N_f);
  for (int k = 0; k < c.link.K; ++k) {
    ChannelRealization ch = sample_channel(
        c.channel, derive_seed(c.seed, {21, sample_idx}), k, sample_idx);
    FingerSet f =
        select_paths(ch, std::min<int>(c.link.L, static_cast<int>(ch.taps.size())));
    f.noise_vars.assign(f.taps.size(), N_0 / 2.0);
    stats.moments[k] = link_stats(f, c.link, c.variance_model);
    const BitStream bs = vectorize_tile(tiles.tiles[k], k);
    Rng rng(derive_seed(c.seed, {22, sample_idx, static_cast<std::uint64_t>(k)}));
    for (int n = 0; n < stats.bits; ++n)
      for (int j = 0; j < stats.frames; ++j)
        stats.at(k, n, j) = statistic_model_sample(
            bs.bits[n], stats.moments[k].mu, stats.moments[k].sigma, rng);
  }
  return stats;
}

inline double frame_bit_rate(const EventFrame& frame) {
  return static_cast<double>(frame.ones()) / frame.bit_count();
}

inline int e2e_ppm_digital_label(const ExperimentConfig& c,
                                 const SnnNetwork& net, const EventFrame& frame,
                                 double N_0, std::uint64_t sample_idx,
                                 int tile_h, int tile_w, int total_steps);
inline int e2e_ppm_analog_label(const ExperimentConfig& c,
                                const SnnNetwork& net, const EventFrame& frame,
                                double N_0, std::uint64_t sample_idx,
                                int tile_h, int tile_w, int total_steps);

// Analog slices with a noiseless fallback (sigmoid limit: exact bits).
inline std::vector<Eigen::VectorXd> analog_slices_or_limit(
    const FrameStatistics& stats, int tile_h, int tile_w) {
  bool noiseless = true;
  for (const LinkMoments& m : stats.moments)
    if (m.sigma > 0.0) noiseless = false;
  if (!noiseless) return encode_analog(stats, tile_h, tile_w);
  FrameStatistics hard = stats;
  for (int k = 0; k < stats.users; ++k) {
    const double mu = stats.moments[k].mu;
    hard.moments[k].sigma = 1.0;
    for (int n = 0; n < stats.bits; ++n)
      for (int j = 0; j < stats.frames; ++j)
        hard.at(k, n, j) =
            stats.at(k, n, j) > mu / 2.0 ? mu / 2.0 + 100.0 : mu / 2.0 - 100.0;
  }
  return encode_analog(hard, tile_h, tile_w);
}

struct E2eOutcome {
  long correct = 0;
  long total = 0;
  std::vector<int> labels;  // predicted, per sample
};

// Runs the configured scheme over the toy test set at one noise level.
inline E2eOutcome run_e2e_point(const ExperimentConfig& c, const SnnNetwork& net,
                                std::span<const ToySample> test, double N_0) {
  const int g = detail::isqrt_exact(c.link.K);
  if (g <= 0 || c.frame_h % g != 0 || c.frame_w % g != 0)
    throw config_error("run_e2e: frame dimensions must split across sqrt(K)");
  const int tile_h = c.frame_h / g;
  const int tile_w = c.frame_w / g;
  const int total_steps = c.link.N_f * c.snn_steps;

  E2eOutcome out;
  for (std::size_t s = 0; s < test.size(); ++s) {
    int label;
    if (c.scheme == Scheme::baseline) {
      label = forward_static(net, encode_digital(test[s].frame), total_steps).label;
    } else if (scheme_is_ppm(c.scheme)) {
      label = c.scheme == Scheme::ppm_digital
                  ? e2e_ppm_digital_label(c, net, test[s].frame, N_0, s,
                                          tile_h, tile_w, total_steps)
                  : e2e_ppm_analog_label(c, net, test[s].frame, N_0, s, tile_h,
                                         tile_w, total_steps);
    } else {
      const FrameStatistics stats =
          transmit_frame_statistic(test[s].frame, c, N_0, s);
      if (c.scheme == Scheme::ook_digital) {
        const double oracle_p =
            c.sparsity == SparsityMethod::oracle
                ? frame_bit_rate(test[s].frame)
                : -1.0;
        EmSparsityEstimator em;
        MomentSparsityEstimator moment;
        const SparsityEstimator* est = nullptr;
        if (c.sparsity == SparsityMethod::moment) est = &moment;
        if (c.sparsity == SparsityMethod::em) est = &em;
        const EventFrame rec =
            reconstruct_frame(stats, tile_h, tile_w, est, oracle_p);
        label = forward_static(net, encode_digital(rec), total_steps).label;
      } else {
        const auto slices = analog_slices_or_limit(stats, tile_h, tile_w);
        const auto steps = expand_slices(slices, c.snn_steps, c.presentation);
        label = forward(net, steps).label;
      }
    }
    out.labels.push_back(label);
    if (label == test[s].label) ++out.correct;
    ++out.total;
  }
  return out;
}

// PPM statistic-level paths: per-frame pairs (Y0, Y1) per bit.
inline int e2e_ppm_digital_label(const ExperimentConfig& c, const SnnNetwork& net,
                                 const EventFrame& frame, double N_0,
                                 std::uint64_t sample_idx, int tile_h,
                                 int tile_w, int total_steps) {
  const TileSet tiles = tile_frame(frame, c.link.K);
  std::vector<BitStream> detected(c.link.K);
  std::vector<std::uint8_t> fb(c.link.N_f);
  for (int k = 0; k < c.link.K; ++k) {
    ChannelRealization ch = sample_channel(
        c.channel, derive_seed(c.seed, {21, sample_idx}), k, sample_idx);
    FingerSet f =
        select_paths(ch, std::min<int>(c.link.L, static_cast<int>(ch.taps.size())));
    f.noise_vars.assign(f.taps.size(), N_0 / 2.0);
    const LinkMoments m = link_stats(f, c.link, c.variance_model);
    const BitStream bs = vectorize_tile(tiles.tiles[k], k);
    Rng rng(derive_seed(c.seed, {23, sample_idx, static_cast<std::uint64_t>(k)}));
    detected[k].user = k;
    detected[k].bits.resize(bs.bits.size());
    for (std::size_t n = 0; n < bs.bits.size(); ++n) {
      for (int j = 0; j < c.link.N_f; ++j) {
        double y0 = m.sigma > 0.0 ? rng.gaussian(0.0, m.sigma) : 0.0;
        double y1 = m.sigma > 0.0 ? rng.gaussian(0.0, m.sigma) : 0.0;
        (bs.bits[n] ? y1 : y0) += m.mu;
        fb[j] = y1 > y0 ? 1 : 0;
      }
      detected[k].bits[n] = static_cast<std::uint8_t>(majority_vote(fb));
    }
  }
  const EventFrame rec = assemble_frame(detected, c.link.K, tile_h, tile_w);
  return forward_static(net, encode_digital(rec), total_steps).label;
}

inline int e2e_ppm_analog_label(const ExperimentConfig& c, const SnnNetwork& net,
                                const EventFrame& frame, double N_0,
                                std::uint64_t sample_idx, int tile_h,
                                int tile_w, int total_steps) {
  const TileSet tiles = tile_frame(frame, c.link.K);
  // reuse the OOK analog layout on the antipodal statistic (Y1 - Y0):
  // z = sigmoid((Y1 - Y0)/(sqrt(2) sigma)) via stats with mu' = 2 mu.
  FrameStatistics stats = make_frame_statistics(
      c.link.K, 2 * tile_h * tile_w, c.link.N_f);
  for (int k = 0; k < c.link.K; ++k) {
    ChannelRealization ch = sample_channel(
        c.channel, derive_seed(c.seed, {21, sample_idx}), k, sample_idx);
    FingerSet f =
        select_paths(ch, std::min<int>(c.link.L, static_cast<int>(ch.taps.size())));
    f.noise_vars.assign(f.taps.size(), N_0 / 2.0);
    const LinkMoments m = link_stats(f, c.link, c.variance_model);
    const BitStream bs = vectorize_tile(tiles.tiles[k], k);
    Rng rng(derive_seed(c.seed, {23, sample_idx, static_cast<std::uint64_t>(k)}));
    const double s2 = std::sqrt(2.0);
    stats.moments[k] = {2.0 * m.mu, m.sigma > 0.0 ? s2 * m.sigma : 0.0};
    for (int n = 0; n < stats.bits; ++n)
      for (int j = 0; j < stats.frames; ++j) {
        double y0 = m.sigma > 0.0 ? rng.gaussian(0.0, m.sigma) : 0.0;
        double y1 = m.sigma > 0.0 ? rng.gaussian(0.0, m.sigma) : 0.0;
        (bs.bits[n] ? y1 : y0) += m.mu;
        stats.at(k, n, j) = (y1 - y0) + m.mu;  // shift: b=1 -> 2mu, b=0 -> 0
      }
  }
  const auto slices = analog_slices_or_limit(stats, tile_h, tile_w);
  const auto steps = expand_slices(slices, c.snn_steps, c.presentation);
  return forward(net, steps).label;
}

inline std::vector<ToySample> e2e_test_set(const ExperimentConfig& c) {
  return make_toy_dataset(c.toy_test_per_class, derive_seed(c.seed, {30}),
                          c.frame_h, c.frame_w);
}

inline std::vector<ResultRecord> run_e2e(const ExperimentConfig& c,
                                         const SnnNetwork& net) {
  {
    const auto errs = validate_config(c);
    if (!errs.empty()) {
      std::string msg = "run_e2e: invalid config:";
      for (const auto& e : errs) msg += "\n  - " + e;
      throw config_error(msg);
    }
  }
  if (c.level != SimLevel::statistic)
    throw config_error("run_e2e: waveform level is not supported at toy scale; "
                       "set sim.level = statistic");
  const std::vector<ToySample> test = e2e_test_set(c);
  std::vector<ResultRecord> records;

  const auto push = [&](Scheme s, double snr, const E2eOutcome& o) {
    ResultRecord r;
    r.scheme = scheme_name(s);
    r.snr_db = snr;
    r.N_f = c.link.N_f;
    r.N_p = c.link.N_p;
    r.metric = "accuracy";
    r.value = static_cast<double>(o.correct) / o.total;
    const Interval ci = wilson_interval(o.correct, o.total);
    r.ci_low = ci.lo;
    r.ci_high = ci.hi;
    r.trials = o.total;
    r.seed = c.seed;
    records.push_back(r);
  };

  // clean baseline, once
  {
    ExperimentConfig base = c;
    base.scheme = Scheme::baseline;
    const E2eOutcome o = run_e2e_point(base, net, test, 0.0);
    push(Scheme::baseline, std::numeric_limits<double>::infinity(), o);
  }
  if (c.scheme != Scheme::baseline) {
    for (double snr : c.snr_grid) {
      const double N_0 = snr_to_n0(c.link.E_s, snr);
      const E2eOutcome o = run_e2e_point(c, net, test, N_0);
      push(c.scheme, snr, o);
    }
  }
  return records;
}

// ---- output ----

namespace detail {
inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline void write_common_header(std::ostream& out, const ExperimentConfig& c,
                                const char* kind) {
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(c.config_hash));
  out << "# impulse-rake " << kind << "\n"
      << "# config_hash: " << hash << "\n"
      << "# scheme: " << scheme_name(c.scheme) << "\n"
      << "# level: " << (c.level == SimLevel::waveform ? "waveform" : "statistic")
      << "\n"
      << "# seed: " << c.seed << "\n"
      << "# trials: " << c.trials << "\n"
      << "# K: " << c.link.K << "\n"
      << "# N_f: " << c.link.N_f << "\n"
      << "# N_p: " << c.link.N_p << "\n"
      << "# snr_def: snr_db = 10*log10(E_s/N_0), unit-power channel\n";
}
}  // namespace detail

inline void write_ber_csv(std::ostream& out, const ExperimentConfig& c,
                          std::span<const SweepRow> rows) {
  detail::write_common_header(out, c, "ber-sweep");
  out << "snr_db,p,lambda_star,eta,analytic_ber,empirical_ber,ci_low,ci_high\n";
  for (const SweepRow& r : rows)
    out << detail::fmt_double(r.snr_db) << ',' << detail::fmt_double(r.p) << ','
        << detail::fmt_double(r.lambda_star) << ',' << detail::fmt_double(r.eta)
        << ',' << detail::fmt_double(r.analytic) << ','
        << detail::fmt_double(r.empirical) << ',' << detail::fmt_double(r.ci_low)
        << ',' << detail::fmt_double(r.ci_high) << '\n';
}

inline void write_records_csv(std::ostream& out, const ExperimentConfig& c,
                              std::span<const ResultRecord> records,
                              const char* kind) {
  detail::write_common_header(out, c, kind);
  out << "scheme,snr_db,N_f,N_p,metric,value,ci_low,ci_high,trials,seed\n";
  for (const ResultRecord& r : records)
    out << r.scheme << ',' << detail::fmt_double(r.snr_db) << ',' << r.N_f << ','
        << r.N_p << ',' << r.metric << ',' << detail::fmt_double(r.value) << ','
        << detail::fmt_double(r.ci_low) << ',' << detail::fmt_double(r.ci_high)
        << ',' << r.trials << ',' << r.seed << '\n';
}

inline void write_collision_csv(std::ostream& out, const ExperimentConfig& c,
                                const CollisionResult& r) {
  detail::write_common_header(out, c, "collisions");
  out << "scheme,K,N_p,N_h,active_prob,analytic,empirical,ci_low,ci_high,frames\n";
  out << scheme_name(c.scheme) << ',' << c.link.K << ',' << c.link.N_p << ','
      << c.link.n_hops() << ',' << detail::fmt_double(c.active_prob) << ','
      << detail::fmt_double(r.analytic) << ',' << detail::fmt_double(r.empirical)
      << ',' << detail::fmt_double(r.ci.lo) << ',' << detail::fmt_double(r.ci.hi)
      << ',' << r.frames << '\n';
}

inline void write_taps_csv(std::ostream& out,
                           std::span<const ChannelRealization> realizations) {
  out << "user,delay_ns,gain\n";
  for (const ChannelRealization& r : realizations)
    for (const ChannelTap& t : r.taps)
      out << r.user << ',' << detail::fmt_double(t.delay) << ','
          << detail::fmt_double(t.gain) << '\n';
}

inline void write_pulses_csv(std::ostream& out,
                             std::span<const PulseTrain> trains) {
  out << "user,bit,frame,time_ns,amplitude\n";
  for (const PulseTrain& t : trains)
    for (const PulseEntry& p : t.pulses)
      out << p.user << ',' << p.bit << ',' << p.frame << ','
          << detail::fmt_double(p.time) << ',' << detail::fmt_double(p.amplitude)
          << '\n';
}

inline void write_stats_csv(std::ostream& out, const FrameStatistics& stats) {
  out << "k,n,j,Y\n";
  for (int k = 0; k < stats.users; ++k)
    for (int n = 0; n < stats.bits; ++n)
      for (int j = 0; j < stats.frames; ++j)
        out << k << ',' << n << ',' << j << ','
            << detail::fmt_double(stats.at(k, n, j)) << '\n';
}

}  // namespace impulse
