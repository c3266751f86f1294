#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "impulse/errors.hpp"
#include "impulse/phy.hpp"
#include "impulse/rng.hpp"

namespace impulse {

enum class PhaseModel { sign, complex_real_part };
enum class RayCountModel { fixed, poisson };

// Cluster/ray multipath parameters (802.15.4a style).
struct ChannelParams {
  double cluster_rate = 0.047;  // Lambda, 1/ns
  double ray_rate = 1.54;       // lambda_ray, 1/ns
  double cluster_decay = 22.61; // Gamma, ns
  double ray_decay = 12.53;     // gamma, ns
  double m_nak = 1.0;           // Nakagami shape
  int n_clusters = 5;           // L_c
  int rays_per_cluster = 20;    // M_l (mean, in poisson mode)
  double max_delay = 60.0;      // truncation, ns
  PhaseModel phase_model = PhaseModel::sign;
  RayCountModel ray_count_model = RayCountModel::fixed;

  void validate() const {
    if (cluster_rate <= 0 || ray_rate <= 0)
      throw config_error("ChannelParams: arrival rates must be > 0");
    if (cluster_decay <= 0 || ray_decay <= 0)
      throw config_error("ChannelParams: decay constants must be > 0");
    if (m_nak < 0.5) throw config_error("ChannelParams: m_nak must be >= 0.5");
    if (n_clusters < 1 || rays_per_cluster < 1)
      throw config_error("ChannelParams: cluster/ray counts must be >= 1");
    if (max_delay <= 0)
      throw config_error("ChannelParams: max_delay must be > 0");
  }
};

// CM1-like preset. These numbers are an external default from the usual
// residential-LOS tables, not derived from anything in this repo; swap in
// calibrated values via the config file for serious use.
inline ChannelParams cm1_preset() { return ChannelParams{}; }

// Single ideal path; handy for AWGN-only experiments.
inline ChannelParams single_path_preset() {
  ChannelParams p;
  p.n_clusters = 1;
  p.rays_per_cluster = 1;
  return p;
}

struct ChannelTap {
  double delay = 0.0;  // ns
  double gain = 0.0;   // real
};

struct ChannelRealization {
  int user = 0;
  std::uint64_t block = 0;
  std::vector<ChannelTap> taps;  // sorted by delay

  double power() const {
    double s = 0.0;
    for (const ChannelTap& t : taps) s += t.gain * t.gain;
    return s;
  }
  double max_tap_delay() const {
    return taps.empty() ? 0.0 : taps.back().delay;
  }
};

inline ChannelRealization normalize_channel(ChannelRealization r) {
  const double p = r.power();
  if (p <= 0.0)
    throw numeric_error("normalize_channel: realization has zero power");
  const double s = 1.0 / std::sqrt(p);
  for (ChannelTap& t : r.taps) t.gain *= s;
  return r;
}

// Draws one quasi-static realization: Poisson cluster arrivals (first at 0),
// Poisson ray arrivals within each cluster (first at 0), doubly exponential
// mean power decay, Nakagami-m magnitudes, random sign or the real part of a
// uniform phase. Truncated at max_delay, then unit-power normalized.
inline ChannelRealization sample_channel(const ChannelParams& params,
                                         std::uint64_t seed, int k,
                                         std::uint64_t block = 0) {
  params.validate();
  Rng rng(derive_seed(seed, {0x6368616eULL, static_cast<std::uint64_t>(k), block}));
  ChannelRealization r;
  r.user = k;
  r.block = block;
  double t_cluster = 0.0;
  for (int l = 0; l < params.n_clusters; ++l) {
    if (l > 0) t_cluster += rng.exponential(params.cluster_rate);
    int rays = params.rays_per_cluster;
    if (params.ray_count_model == RayCountModel::poisson)
      rays = std::max<int>(1, static_cast<int>(rng.poisson(params.rays_per_cluster)));
    double t_ray = 0.0;
    for (int m = 0; m < rays; ++m) {
      if (m > 0) t_ray += rng.exponential(params.ray_rate);
      const double delay = t_cluster + t_ray;
      if (delay > params.max_delay) break;
      const double omega = std::exp(-t_cluster / params.cluster_decay) *
                           std::exp(-t_ray / params.ray_decay);
      const double mag =
          std::sqrt(rng.gamma(params.m_nak, omega / params.m_nak));
      double gain;
      if (params.phase_model == PhaseModel::sign) {
        gain = mag * rng.sign();
      } else {
        gain = mag * std::cos(2.0 * kPi * rng.uniform());
      }
      r.taps.push_back({delay, gain});
    }
    if (t_cluster > params.max_delay) break;
  }
  std::sort(r.taps.begin(), r.taps.end(),
            [](const ChannelTap& a, const ChannelTap& b) {
              return a.delay < b.delay;
            });
  return normalize_channel(std::move(r));
}

// Received block. `samples` holds the core N_f*T_f block followed by a guard
// tail that captures multipath spill from the last frame; correlators may
// read into the tail but the core length carries the block timing.
struct ReceivedWaveform {
  std::vector<double> samples;
  std::size_t core_samples = 0;
  double sample_rate = 0.0;
  double noise_psd = 0.0;
};

// Sums every user's pulses through its channel taps and adds white Gaussian
// noise of two-sided PSD N_0/2 (per-sample variance N_0/2 * sample_rate).
// Pass pulses of a single bit block per train (see train_for_bit).
inline ReceivedWaveform propagate(std::span<const PulseTrain> trains,
                                  std::span<const ChannelRealization> realizations,
                                  const LinkConfig& cfg, const PulseShape& shape,
                                  double N_0, std::uint64_t seed) {
  cfg.validate();
  shape.validate();
  if (trains.size() != realizations.size())
    throw structural_error("propagate: train/realization count mismatch");
  double guard = 2.0 * shape.half_width;
  for (const ChannelRealization& r : realizations) {
    if (r.max_tap_delay() > cfg.T_f)
      throw config_error("propagate: tap delay " +
                         std::to_string(r.max_tap_delay()) +
                         " ns exceeds the frame duration");
    guard = std::max(guard, r.max_tap_delay() + 2.0 * shape.half_width);
  }

  ReceivedWaveform rx;
  rx.core_samples = cfg.block_samples();
  rx.sample_rate = cfg.sample_rate;
  rx.noise_psd = N_0;
  const auto guard_samples =
      static_cast<std::size_t>(std::ceil(guard * cfg.sample_rate)) + 1;
  rx.samples.assign(rx.core_samples + guard_samples, 0.0);

  const double dt = 1.0 / cfg.sample_rate;
  const double block = cfg.block_duration();
  for (std::size_t u = 0; u < trains.size(); ++u) {
    for (const PulseEntry& p : trains[u].pulses) {
      if (p.time < 0.0 || p.time >= block)
        throw structural_error("propagate: pulse offset outside the block");
      for (const ChannelTap& tap : realizations[u].taps) {
        const double center = p.time + tap.delay;
        const double a = p.amplitude * tap.gain;
        const auto i0 = static_cast<std::int64_t>(
            std::floor((center - shape.half_width) / dt));
        const auto i1 = static_cast<std::int64_t>(
            std::ceil((center + shape.half_width) / dt));
        const auto hi =
            std::min<std::int64_t>(i1, static_cast<std::int64_t>(rx.samples.size()));
        for (std::int64_t i = std::max<std::int64_t>(i0, 0); i < hi; ++i) {
          const double t = (i + 0.5) * dt;
          if (std::abs(t - center) <= shape.half_width)
            rx.samples[static_cast<std::size_t>(i)] +=
                a * monocycle(t - center, shape);
        }
      }
    }
  }

  if (N_0 > 0.0) {
    Rng noise(derive_seed(seed, {0x6e6f697365ULL}));
    const double sigma = std::sqrt(0.5 * N_0 * cfg.sample_rate);
    for (double& s : rx.samples) s += noise.gaussian(0.0, sigma);
  }
  return rx;
}

}  // namespace impulse
