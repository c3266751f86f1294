#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "impulse/rake.hpp"
#include "impulse/stats.hpp"

using namespace impulse;

namespace {
ChannelRealization make_realization(std::vector<ChannelTap> taps) {
  ChannelRealization r;
  r.taps = std::move(taps);
  return r;
}
}  // namespace

TEST_CASE("select_paths keeps the L strongest taps") {
  const auto r =
      make_realization({{0.0, 0.3}, {5.0, -0.8}, {9.0, 0.5}, {12.0, 0.1}});
  const FingerSet f = select_paths(r, 2);
  REQUIRE(f.taps.size() == 2);
  REQUIRE(f.taps[0].gain == Catch::Approx(-0.8));
  REQUIRE(f.taps[1].gain == Catch::Approx(0.5));
  REQUIRE(f.noise_vars.size() == 2);
}

TEST_CASE("select_paths breaks power ties toward the earlier delay") {
  const auto r = make_realization({{3.0, 0.5}, {7.0, -0.5}});
  const FingerSet f = select_paths(r, 1);
  REQUIRE(f.taps[0].delay == Catch::Approx(3.0));
}

TEST_CASE("select_paths validates L") {
  const auto r = make_realization({{0.0, 1.0}});
  REQUIRE_THROWS_AS(select_paths(r, 0), config_error);
  REQUIRE_THROWS_AS(select_paths(r, 2), config_error);
}

TEST_CASE("finger weights follow gain over variance") {
  FingerSet f;
  f.taps = {{0.0, 0.2}, {1.0, 0.3}};
  f.noise_vars = {0.1, 0.1};
  REQUIRE(f.weight(0) == Catch::Approx(2.0));
  REQUIRE(f.weight(1) == Catch::Approx(3.0));
  // derived bookkeeping scales the variance by N_p
  REQUIRE(f.weight(0, VarianceModel::derived, 2) == Catch::Approx(1.0));
  // noiseless fallback: beta = alpha
  f.noise_vars = {0.0, 0.0};
  REQUIRE(f.weight(0) == Catch::Approx(0.2));
}

TEST_CASE("mrc_combine matches hand arithmetic") {
  FingerSet f;
  f.taps = {{0.0, 0.2}, {1.0, 0.3}};
  f.noise_vars = {0.1, 0.1};  // weights 2 and 3
  FingerOutput out;
  out.y = {0.1, 0.2};
  REQUIRE(mrc_combine(out, f) == Catch::Approx(0.8).epsilon(1e-12));
  out.y = {0.1};
  REQUIRE_THROWS_AS(mrc_combine(out, f), structural_error);
}

TEST_CASE("link_stats matches the hand-computed moments in both models") {
  LinkConfig cfg;
  cfg.E_s = 4.0;  // amp = 2
  cfg.N_p = 3;
  FingerSet f;
  f.taps = {{0.0, 0.6}, {2.0, 0.8}};
  f.noise_vars = {0.5, 0.5};
  const double S = (0.36 + 0.64) / 0.5;  // = 2
  const LinkMoments printed = link_stats(f, cfg, VarianceModel::as_printed);
  REQUIRE(printed.mu == Catch::Approx(2.0 * 3 * S));
  REQUIRE(printed.sigma == Catch::Approx(std::sqrt(3 * S)));
  const LinkMoments derived = link_stats(f, cfg, VarianceModel::derived);
  REQUIRE(derived.mu == Catch::Approx(2.0 * S));
  REQUIRE(derived.sigma == Catch::Approx(std::sqrt(S / 3.0)));
  // identical decision quality: same mu/sigma ratio
  REQUIRE(printed.mu / printed.sigma ==
          Catch::Approx(derived.mu / derived.sigma).epsilon(1e-12));
}

TEST_CASE("link_stats handles the noiseless and degenerate variance cases") {
  LinkConfig cfg;
  FingerSet f;
  f.taps = {{0.0, 0.6}, {2.0, 0.8}};
  f.noise_vars = {0.0, 0.0};
  const LinkMoments m = link_stats(f, cfg);
  REQUIRE(m.mu == Catch::Approx(cfg.amplitude() * (0.36 + 0.64)));
  REQUIRE(m.sigma == 0.0);
  f.noise_vars = {0.0, 0.5};  // mixed zero: ill-defined weights
  REQUIRE_THROWS_AS(link_stats(f, cfg), numeric_error);
  f.noise_vars = {-0.1, 0.5};
  REQUIRE_THROWS_AS(link_stats(f, cfg), numeric_error);
}

TEST_CASE("statistic_model_sample has the advertised moments") {
  Rng rng(3);
  std::vector<double> y0(20000), y1(20000);
  for (std::size_t i = 0; i < y0.size(); ++i) {
    y0[i] = statistic_model_sample(0, 2.0, 0.5, rng);
    y1[i] = statistic_model_sample(1, 2.0, 0.5, rng);
  }
  REQUIRE(std::abs(mean(y0)) < 0.02);
  REQUIRE(mean(y1) == Catch::Approx(2.0).epsilon(0.01));
  REQUIRE(sample_variance(y0) == Catch::Approx(0.25).epsilon(0.05));
  REQUIRE(statistic_model_sample(1, 2.0, 0.0, rng) == 2.0);
  REQUIRE(statistic_model_sample(0, 2.0, 0.7, std::uint64_t{4}) ==
          statistic_model_sample(0, 2.0, 0.7, std::uint64_t{4}));
}

TEST_CASE("clean correlation recovers amplitude times tap gain") {
  LinkConfig cfg;
  cfg.N_f = 2;
  cfg.N_p = 2;
  cfg.E_s = 2.25;  // amp 1.5
  cfg.sample_rate = 64.0;
  const PulseShape shape;
  const HopCode code = gen_th_code(41, 0, cfg, 1);
  const PulseTrain train = modulate_ook({1}, code, cfg);
  ChannelRealization chan;
  chan.taps = {{0.0, 0.7}};
  const std::vector<PulseTrain> trains = {train};
  const std::vector<ChannelRealization> chans = {chan};
  const ReceivedWaveform rx = propagate(trains, chans, cfg, shape, 0.0, 1);
  for (int j = 0; j < cfg.N_f; ++j) {
    const double y = correlate(rx, code, chan.taps[0], cfg, shape, 0, j);
    // N_p pulses, each contributing amp*gain*(pulse energy)
    REQUIRE(y == Catch::Approx(1.5 * 0.7 * cfg.N_p).epsilon(2e-3));
  }
}

TEST_CASE("correlation at a silent bit is near zero") {
  LinkConfig cfg;
  cfg.N_f = 1;
  cfg.sample_rate = 64.0;
  const PulseShape shape;
  const HopCode code = gen_th_code(43, 0, cfg, 2);
  const PulseTrain train = modulate_ook({0, 1}, code, cfg);
  ChannelRealization chan;
  chan.taps = {{0.0, 1.0}};
  const std::vector<PulseTrain> trains = {train_for_bit(train, 0)};
  const std::vector<ChannelRealization> chans = {chan};
  const ReceivedWaveform rx = propagate(trains, chans, cfg, shape, 0.0, 1);
  REQUIRE(std::abs(correlate(rx, code, chan.taps[0], cfg, shape, 0, 0)) <
          1e-12);
}

TEST_CASE("correlate validates sampling grid and buffer reach") {
  LinkConfig cfg;
  const PulseShape shape;
  const HopCode code = gen_th_code(47, 0, cfg, 1);
  ReceivedWaveform rx;
  rx.sample_rate = cfg.sample_rate + 1;
  rx.samples.assign(cfg.block_samples(), 0.0);
  REQUIRE_THROWS_AS(correlate(rx, code, {0.0, 1.0}, cfg, shape, 0, 0),
                    structural_error);
  rx.sample_rate = cfg.sample_rate;
  rx.samples.assign(10, 0.0);  // far too short
  REQUIRE_THROWS_AS(correlate(rx, code, {0.0, 1.0}, cfg, shape, 0, 0),
                    structural_error);
}

TEST_CASE("correlator noise variance matches the white-noise oracle") {
  // Var(Y) = N_p * N_0/2 for a unit-energy N_p-chip template
  LinkConfig cfg;
  cfg.N_f = 1;
  cfg.N_p = 2;
  cfg.sample_rate = 16.0;
  const double N_0 = 0.2;
  const PulseShape shape;
  const HopCode code = gen_th_code(53, 0, cfg, 1);
  ChannelRealization chan;
  chan.taps = {{0.0, 1.0}};
  const std::vector<PulseTrain> silent = {PulseTrain{}};
  const std::vector<ChannelRealization> chans = {chan};
  std::vector<double> ys(10000);
  for (std::size_t t = 0; t < ys.size(); ++t) {
    const ReceivedWaveform rx =
        propagate(silent, chans, cfg, shape, N_0, 1000 + t);
    ys[t] = correlate(rx, code, chan.taps[0], cfg, shape, 0, 0);
  }
  REQUIRE(std::abs(mean(ys)) < 0.01);
  REQUIRE(sample_variance(ys) ==
          Catch::Approx(cfg.N_p * N_0 / 2.0).epsilon(0.05));
}

TEST_CASE("estimate_finger_noise recovers the aggregate template variance") {
  LinkConfig cfg;
  cfg.N_f = 3;
  cfg.N_p = 2;
  cfg.sample_rate = 16.0;
  const double N_0 = 0.3;
  const PulseShape shape;
  const HopCode code = gen_th_code(59, 0, cfg, 1);
  ChannelRealization chan;
  chan.taps = {{0.0, 1.0}};
  const std::vector<PulseTrain> silent = {PulseTrain{}};
  const std::vector<ChannelRealization> chans = {chan};
  std::vector<double> est;
  for (std::uint64_t t = 0; t < 40; ++t) {
    const ReceivedWaveform rx =
        propagate(silent, chans, cfg, shape, N_0, 2000 + t);
    est.push_back(
        estimate_finger_noise(rx, code, chan.taps[0], cfg, shape, 0));
  }
  REQUIRE(mean(est) == Catch::Approx(cfg.N_p * N_0 / 2.0).epsilon(0.10));
}

TEST_CASE("estimate_finger_noise needs enough silent chips") {
  LinkConfig cfg;
  cfg.T_f = 8.0;  // only 4 chips per frame
  cfg.N_f = 1;
  cfg.N_p = 2;
  const PulseShape shape;
  const HopCode code = gen_th_code(61, 0, cfg, 1);
  ChannelRealization chan;
  chan.taps = {{0.0, 1.0}};
  const std::vector<PulseTrain> silent = {PulseTrain{}};
  const std::vector<ChannelRealization> chans = {chan};
  const ReceivedWaveform rx = propagate(silent, chans, cfg, shape, 0.1, 5);
  REQUIRE_THROWS_AS(
      estimate_finger_noise(rx, code, chan.taps[0], cfg, shape, 0),
      estimation_error);
}

TEST_CASE("waveform pipeline matches the statistic model moments") {
  // The central consistency check: MRC outputs from full waveform simulation
  // reproduce link_stats' mu and sigma. Taps are spaced beyond the pulse
  // support so the fingers stay orthogonal, which is what the closed-form
  // moments assume (dense arrivals add inter-path terms on top).
  LinkConfig cfg;
  cfg.N_f = 1;
  cfg.N_p = 1;
  cfg.L = 3;
  cfg.sample_rate = 32.0;
  const double N_0 = 0.25;
  const PulseShape shape;
  ChannelRealization chan;
  chan.user = 0;
  chan.taps = {{0.0, 0.8}, {4.0, -0.5}, {8.0, 0.3}};
  normalize_channel(chan);
  FingerSet fingers = select_paths(chan, cfg.L);
  fingers.noise_vars.assign(cfg.L, N_0 / 2.0);
  const LinkMoments m = link_stats(fingers, cfg);
  const HopCode code = gen_th_code(71, 0, cfg, 1);
  const PulseTrain train = modulate_ook({1}, code, cfg);
  const std::vector<PulseTrain> trains = {train};
  const std::vector<ChannelRealization> chans = {chan};
  std::vector<double> ys(3000);
  for (std::size_t t = 0; t < ys.size(); ++t) {
    const ReceivedWaveform rx =
        propagate(trains, chans, cfg, shape, N_0, 5000 + t);
    const FingerOutput out =
        correlate_fingers(rx, code, fingers, cfg, shape, 0, 0);
    ys[t] = mrc_combine(out, fingers);
  }
  REQUIRE(mean(ys) == Catch::Approx(m.mu).epsilon(0.03));
  REQUIRE(std::sqrt(sample_variance(ys)) ==
          Catch::Approx(m.sigma).epsilon(0.05));
}

TEST_CASE("frame statistics indexing") {
  FrameStatistics s = make_frame_statistics(2, 3, 4);
  REQUIRE(s.y.size() == 24);
  s.at(1, 2, 3) = 7.0;
  REQUIRE(s.y[(1 * 3 + 2) * 4 + 3] == 7.0);
  REQUIRE(s.at(1, 2, 3) == 7.0);
  REQUIRE_THROWS_AS(make_frame_statistics(0, 1, 1), config_error);
}
