#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "impulse/errors.hpp"
#include "impulse/rng.hpp"

namespace impulse {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

enum class EnergyMode { per_pulse, per_bit };
enum class Modulation { ook, ppm };

// Link-level parameters shared by tx, channel, rx and detector.
struct LinkConfig {
  double T_f = 100.0;  // frame duration, ns
  double T_c = 2.0;    // chip duration, ns
  int N_f = 9;         // inter-frame repetitions
  int N_p = 1;         // intra-frame repetitions
  int K = 1;           // users
  double E_s = 1.0;    // per-pulse symbol energy
  double N_0 = 0.1;    // noise PSD
  int L = 1;           // RAKE fingers
  double sample_rate = 16.0;  // samples per ns
  EnergyMode energy_mode = EnergyMode::per_pulse;
  double ppm_delta = 0.0;  // PPM shift; 0 -> T_c/2

  int n_hops() const {
    return static_cast<int>(std::lround(T_f / T_c));
  }
  int n_reps(Modulation mod = Modulation::ook) const {
    return mod == Modulation::ook ? N_f * N_p : N_f;
  }
  double delta() const { return ppm_delta > 0.0 ? ppm_delta : T_c / 2.0; }
  double block_duration() const { return N_f * T_f; }
  std::size_t block_samples() const {
    return static_cast<std::size_t>(std::llround(block_duration() * sample_rate));
  }

  // Transmit amplitude of one pulse.
  double amplitude(Modulation mod = Modulation::ook) const {
    const double e = energy_mode == EnergyMode::per_pulse
                         ? E_s
                         : E_s / static_cast<double>(n_reps(mod));
    return std::sqrt(e);
  }

  void validate() const {
    const int nh = n_hops();
    if (T_f <= 0 || T_c <= 0 || std::abs(nh * T_c - T_f) > 1e-9 * T_f)
      throw config_error("LinkConfig: T_f must be an integer multiple of T_c");
    if (N_f < 1) throw config_error("LinkConfig: N_f must be >= 1");
    if (N_p < 1 || N_p > nh)
      throw config_error("LinkConfig: N_p must be in [1, N_h]");
    if (K < 1) throw config_error("LinkConfig: K must be >= 1");
    if (E_s < 0) throw config_error("LinkConfig: E_s must be >= 0");
    if (N_0 < 0) throw config_error("LinkConfig: N_0 must be >= 0");
    if (L < 1) throw config_error("LinkConfig: L must be >= 1");
    if (sample_rate <= 0)
      throw config_error("LinkConfig: sample_rate must be > 0");
    if (ppm_delta < 0 || ppm_delta >= T_c)
      throw config_error("LinkConfig: ppm_delta must lie in [0, T_c)");
  }
};

// Second-order Gaussian derivative monocycle, unit energy.
struct PulseShape {
  double tau_p = 0.8;       // shape parameter, ns
  double half_width = 1.0;  // truncation half-width used for synthesis, ns

  // closed-form unit-energy scale: integral of the squared bracket
  // against the Gaussian envelope is 3/8 * tau_p.
  double scale() const { return std::sqrt(8.0 / (3.0 * tau_p)); }

  void validate() const {
    if (tau_p <= 0) throw config_error("PulseShape: tau_p must be > 0");
    if (half_width <= 0)
      throw config_error("PulseShape: half_width must be > 0");
  }
};

inline double monocycle(double t, const PulseShape& shape) {
  const double u = t / shape.tau_p;
  const double q = u * u;
  return shape.scale() * (1.0 - 4.0 * kPi * q) * std::exp(-2.0 * kPi * q);
}

// Per-user pseudo-random hopping sequence: N_p distinct chips per frame,
// consumed as one continuous stream across frames and bits.
struct HopCode {
  int user = 0;
  std::uint64_t seed = 0;
  int n_bits = 0;
  int n_frames = 0;  // N_f
  int n_pulses = 0;  // N_p
  std::vector<std::uint16_t> chips;  // [(n*N_f + j)*N_p + i]

  std::uint16_t chip(int n, int j, int i) const {
    return chips[(static_cast<std::size_t>(n) * n_frames + j) * n_pulses + i];
  }
};

// Draws N_p distinct chips per (bit, frame) uniformly from {0,...,chip_range-1}.
// chip_range defaults to N_h; PPM passes N_h-1 so the delta shift stays
// inside the frame.
inline HopCode gen_th_code(std::uint64_t seed, int k, const LinkConfig& cfg,
                           int n_bits, int chip_range = 0) {
  cfg.validate();
  const int range = chip_range > 0 ? chip_range : cfg.n_hops();
  if (cfg.N_p > range)
    throw config_error("gen_th_code: N_p exceeds available chips");
  HopCode code;
  code.user = k;
  code.seed = seed;
  code.n_bits = n_bits;
  code.n_frames = cfg.N_f;
  code.n_pulses = cfg.N_p;
  code.chips.resize(static_cast<std::size_t>(n_bits) * cfg.N_f * cfg.N_p);
  Rng rng(derive_seed(seed, {0x7468636f6465ULL, static_cast<std::uint64_t>(k)}));
  std::vector<std::uint16_t> pool(range);
  for (int c = 0; c < range; ++c) pool[c] = static_cast<std::uint16_t>(c);
  std::size_t w = 0;
  for (int n = 0; n < n_bits; ++n) {
    for (int j = 0; j < cfg.N_f; ++j) {
      // partial Fisher-Yates: first N_p entries are a uniform draw
      // without replacement
      for (int i = 0; i < cfg.N_p; ++i) {
        const int r = i + static_cast<int>(rng.uniform_int(range - i));
        std::swap(pool[i], pool[r]);
        code.chips[w++] = pool[i];
      }
    }
  }
  return code;
}

// One transmitted pulse. `time` is the pulse center within the bit's block
// of N_f frames: j*T_f + (c + 0.5)*T_c (+ delta for a PPM one-bit).
struct PulseEntry {
  int user = 0;
  int bit = 0;
  int frame = 0;
  double time = 0.0;
  double amplitude = 0.0;
};

struct PulseTrain {
  int user = 0;
  Modulation modulation = Modulation::ook;
  std::vector<PulseEntry> pulses;
};

inline PulseTrain modulate_ook(const std::vector<std::uint8_t>& bits,
                               const HopCode& code, const LinkConfig& cfg) {
  if (static_cast<int>(bits.size()) > code.n_bits)
    throw structural_error("modulate_ook: hop code covers " +
                           std::to_string(code.n_bits) + " bits, stream has " +
                           std::to_string(bits.size()));
  PulseTrain train;
  train.user = code.user;
  train.modulation = Modulation::ook;
  const double amp = cfg.amplitude(Modulation::ook);
  for (int n = 0; n < static_cast<int>(bits.size()); ++n) {
    if (!bits[n]) continue;  // silent for zero bits
    for (int j = 0; j < cfg.N_f; ++j)
      for (int i = 0; i < cfg.N_p; ++i)
        train.pulses.push_back(
            {code.user, n, j,
             j * cfg.T_f + (code.chip(n, j, i) + 0.5) * cfg.T_c, amp});
  }
  return train;
}

// PPM benchmark: a pulse every frame, one-bits shifted by delta.
// Intra-frame repetition is not part of the scheme (N_p treated as 1).
inline PulseTrain modulate_ppm(const std::vector<std::uint8_t>& bits,
                               const HopCode& code, const LinkConfig& cfg) {
  if (static_cast<int>(bits.size()) > code.n_bits)
    throw structural_error("modulate_ppm: hop code covers " +
                           std::to_string(code.n_bits) + " bits, stream has " +
                           std::to_string(bits.size()));
  if (code.n_pulses != 1)
    throw config_error("modulate_ppm: requires an N_p=1 hop code");
  PulseTrain train;
  train.user = code.user;
  train.modulation = Modulation::ppm;
  const double amp = cfg.amplitude(Modulation::ppm);
  const double d = cfg.delta();
  for (int n = 0; n < static_cast<int>(bits.size()); ++n)
    for (int j = 0; j < cfg.N_f; ++j)
      train.pulses.push_back(
          {code.user, n, j,
           j * cfg.T_f + (code.chip(n, j, 0) + 0.5) * cfg.T_c +
               (bits[n] ? d : 0.0),
           amp});
  return train;
}

// Pulses of one bit's block, offsets unchanged.
inline PulseTrain train_for_bit(const PulseTrain& train, int n) {
  PulseTrain out;
  out.user = train.user;
  out.modulation = train.modulation;
  for (const PulseEntry& p : train.pulses)
    if (p.bit == n) out.pulses.push_back(p);
  return out;
}

// Clean sampled waveform of one bit block (no channel, no noise).
// Midpoint sampling: sample i holds the value at t = (i + 0.5)/sample_rate.
inline std::vector<double> synth_tx_waveform(const PulseTrain& train,
                                             const LinkConfig& cfg,
                                             const PulseShape& shape) {
  shape.validate();
  std::vector<double> w(cfg.block_samples(), 0.0);
  const double dt = 1.0 / cfg.sample_rate;
  for (const PulseEntry& p : train.pulses) {
    const double lo = p.time - shape.half_width;
    const double hi = p.time + shape.half_width;
    const auto i0 = static_cast<std::int64_t>(std::floor(lo / dt));
    const auto i1 = static_cast<std::int64_t>(std::ceil(hi / dt));
    for (std::int64_t i = std::max<std::int64_t>(i0, 0);
         i < std::min<std::int64_t>(i1, static_cast<std::int64_t>(w.size()));
         ++i) {
      const double t = (i + 0.5) * dt;
      if (std::abs(t - p.time) <= shape.half_width)
        w[static_cast<std::size_t>(i)] += p.amplitude * monocycle(t - p.time, shape);
    }
  }
  return w;
}

inline double waveform_energy(const std::vector<double>& w,
                              double sample_rate) {
  double e = 0.0;
  for (double s : w) e += s * s;
  return e / sample_rate;
}

}  // namespace impulse
