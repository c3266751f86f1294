#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "impulse/channel.hpp"
#include "impulse/errors.hpp"
#include "impulse/phy.hpp"
#include "impulse/rng.hpp"
#include "impulse/stats.hpp"

namespace impulse {

// Which variance bookkeeping link_stats uses. Both give the same mu/sigma
// ratio, hence identical decisions; they differ in the scale convention of
// the combined statistic.
enum class VarianceModel { as_printed, derived };

// The L strongest taps plus per-finger noise variances. noise_vars holds the
// SINGLE-pulse correlator noise variance; the N_p-pulse template sees N_p
// times that (disjoint chip supports).
struct FingerSet {
  int user = 0;
  std::vector<ChannelTap> taps;
  std::vector<double> noise_vars;

  double weight(std::size_t l,
                VarianceModel model = VarianceModel::as_printed,
                int N_p = 1) const {
    const double v = model == VarianceModel::as_printed
                         ? noise_vars[l]
                         : noise_vars[l] * N_p;
    if (v == 0.0) return taps[l].gain;  // noiseless: beta = alpha
    return taps[l].gain / v;
  }
  double power() const {
    double s = 0.0;
    for (const ChannelTap& t : taps) s += t.gain * t.gain;
    return s;
  }
};

inline FingerSet select_paths(const ChannelRealization& realization, int L) {
  if (L < 1 || L > static_cast<int>(realization.taps.size()))
    throw config_error("select_paths: L=" + std::to_string(L) + " with " +
                       std::to_string(realization.taps.size()) + " taps");
  std::vector<ChannelTap> taps = realization.taps;
  std::stable_sort(taps.begin(), taps.end(),
                   [](const ChannelTap& a, const ChannelTap& b) {
                     const double pa = a.gain * a.gain;
                     const double pb = b.gain * b.gain;
                     if (pa != pb) return pa > pb;
                     return a.delay < b.delay;  // tie: earlier energy
                   });
  FingerSet f;
  f.user = realization.user;
  f.taps.assign(taps.begin(), taps.begin() + L);
  f.noise_vars.assign(L, 1.0);
  return f;
}

// Correlates the received block against the N_p-pulse template of user
// `code.user`, frame j of bit n, delayed by the finger tap. Discrete inner
// product on the shared midpoint sample grid.
inline double correlate(const ReceivedWaveform& rx, const HopCode& code,
                        const ChannelTap& finger, const LinkConfig& cfg,
                        const PulseShape& shape, int n, int j) {
  if (rx.sample_rate != cfg.sample_rate)
    throw structural_error("correlate: sample_rate mismatch");
  const double dt = 1.0 / cfg.sample_rate;
  const double span_ns = rx.samples.size() * dt;
  double acc = 0.0;
  for (int i = 0; i < cfg.N_p; ++i) {
    const double center =
        j * cfg.T_f + (code.chip(n, j, i) + 0.5) * cfg.T_c + finger.delay;
    if (center + shape.half_width > span_ns)
      throw structural_error("correlate: template extends past the buffer");
    const auto i0 = static_cast<std::int64_t>(
        std::floor((center - shape.half_width) / dt));
    const auto i1 = static_cast<std::int64_t>(
        std::ceil((center + shape.half_width) / dt));
    const auto hi =
        std::min<std::int64_t>(i1, static_cast<std::int64_t>(rx.samples.size()));
    for (std::int64_t s = std::max<std::int64_t>(i0, 0); s < hi; ++s) {
      const double t = (s + 0.5) * dt;
      if (std::abs(t - center) <= shape.half_width)
        acc += rx.samples[static_cast<std::size_t>(s)] *
               monocycle(t - center, shape);
    }
  }
  return acc * dt;
}

// Per-finger outputs for one (user, bit, frame).
struct FingerOutput {
  int user = 0;
  int bit = 0;
  int frame = 0;
  std::vector<double> y;
};

inline FingerOutput correlate_fingers(const ReceivedWaveform& rx,
                                      const HopCode& code,
                                      const FingerSet& fingers,
                                      const LinkConfig& cfg,
                                      const PulseShape& shape, int n, int j) {
  FingerOutput out;
  out.user = fingers.user;
  out.bit = n;
  out.frame = j;
  out.y.reserve(fingers.taps.size());
  for (const ChannelTap& tap : fingers.taps)
    out.y.push_back(correlate(rx, code, tap, cfg, shape, n, j));
  return out;
}

inline double mrc_combine(const FingerOutput& fingers, const FingerSet& weights,
                          VarianceModel model = VarianceModel::as_printed,
                          int N_p = 1) {
  if (fingers.y.size() != weights.taps.size())
    throw structural_error("mrc_combine: finger count mismatch");
  double y = 0.0;
  for (std::size_t l = 0; l < fingers.y.size(); ++l)
    y += weights.weight(l, model, N_p) * fingers.y[l];
  return y;
}

// Gaussian model of the combined statistic: Y ~ N(b*mu, sigma^2).
struct LinkMoments {
  double mu = 0.0;
  double sigma = 0.0;
};

// mu = amp * N_p * sum(alpha^2 / var); the variance follows the configured
// bookkeeping. With all-zero finger variances (noiseless runs) the weights
// degenerate to alpha itself and sigma = 0.
inline LinkMoments link_stats(const FingerSet& fingers, const LinkConfig& cfg,
                              VarianceModel model = VarianceModel::as_printed) {
  const double amp = cfg.amplitude(Modulation::ook);
  std::size_t zeros = 0;
  for (double v : fingers.noise_vars) {
    if (v < 0.0) throw numeric_error("link_stats: negative finger variance");
    if (v == 0.0) ++zeros;
  }
  LinkMoments m;
  if (zeros == fingers.noise_vars.size()) {  // noiseless special case
    m.mu = amp * cfg.N_p * fingers.power();
    m.sigma = 0.0;
    return m;
  }
  if (zeros > 0)
    throw numeric_error("link_stats: zero-variance finger");
  double s = 0.0;
  for (std::size_t l = 0; l < fingers.taps.size(); ++l)
    s += fingers.taps[l].gain * fingers.taps[l].gain / fingers.noise_vars[l];
  if (model == VarianceModel::as_printed) {
    m.mu = amp * cfg.N_p * s;
    m.sigma = std::sqrt(cfg.N_p * s);
  } else {
    m.mu = amp * s;
    m.sigma = std::sqrt(s / cfg.N_p);
  }
  return m;
}

inline double statistic_model_sample(int b, double mu, double sigma,
                                     Rng& rng) {
  if (sigma < 0.0)
    throw numeric_error("statistic_model_sample: negative sigma");
  return (b ? mu : 0.0) + (sigma > 0.0 ? rng.gaussian(0.0, sigma) : 0.0);
}

inline double statistic_model_sample(int b, double mu, double sigma,
                                     std::uint64_t seed) {
  Rng rng(seed);
  return statistic_model_sample(b, mu, sigma, rng);
}

// Estimates the N_p-pulse template noise variance from correlations at chips
// this user leaves silent in each frame. Divide by N_p to get the per-pulse
// figure FingerSet stores.
inline double estimate_finger_noise(const ReceivedWaveform& rx,
                                    const HopCode& code,
                                    const ChannelTap& finger,
                                    const LinkConfig& cfg,
                                    const PulseShape& shape, int n) {
  const int nh = cfg.n_hops();
  std::vector<double> samples;
  std::vector<char> used(nh);
  for (int j = 0; j < cfg.N_f; ++j) {
    std::fill(used.begin(), used.end(), 0);
    for (int i = 0; i < cfg.N_p; ++i) used[code.chip(n, j, i)] = 1;
    for (int c = 0; c < nh; ++c) {
      if (used[c]) continue;
      const double dt = 1.0 / cfg.sample_rate;
      const double center = j * cfg.T_f + (c + 0.5) * cfg.T_c + finger.delay;
      if (center + shape.half_width > rx.samples.size() * dt) continue;
      const auto i0 = static_cast<std::int64_t>(
          std::floor((center - shape.half_width) / dt));
      const auto i1 = static_cast<std::int64_t>(
          std::ceil((center + shape.half_width) / dt));
      double acc = 0.0;
      for (std::int64_t s = std::max<std::int64_t>(i0, 0);
           s < std::min<std::int64_t>(i1, static_cast<std::int64_t>(rx.samples.size()));
           ++s) {
        const double t = (s + 0.5) * dt;
        if (std::abs(t - center) <= shape.half_width)
          acc += rx.samples[static_cast<std::size_t>(s)] *
                 monocycle(t - center, shape);
      }
      samples.push_back(acc * dt);
    }
  }
  if (samples.size() < 30)
    throw estimation_error("estimate_finger_noise: only " +
                           std::to_string(samples.size()) +
                           " silent chips available");
  return cfg.N_p * sample_variance(samples);
}

// MRC outputs for every (user, bit, frame), plus the per-user Gaussian
// moments used by the detector.
struct FrameStatistics {
  int users = 0;
  int bits = 0;
  int frames = 0;
  std::vector<double> y;             // [(k*bits + n)*frames + j]
  std::vector<LinkMoments> moments;  // per user

  double& at(int k, int n, int j) {
    return y[(static_cast<std::size_t>(k) * bits + n) * frames + j];
  }
  double at(int k, int n, int j) const {
    return y[(static_cast<std::size_t>(k) * bits + n) * frames + j];
  }
};

inline FrameStatistics make_frame_statistics(int users, int bits, int frames) {
  if (users < 1 || bits < 1 || frames < 1)
    throw config_error("make_frame_statistics: dimensions must be positive");
  FrameStatistics s;
  s.users = users;
  s.bits = bits;
  s.frames = frames;
  s.y.assign(static_cast<std::size_t>(users) * bits * frames, 0.0);
  s.moments.resize(users);
  return s;
}

}  // namespace impulse
