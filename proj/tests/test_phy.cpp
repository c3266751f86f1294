#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "impulse/phy.hpp"

using namespace impulse;

namespace {
// Simpson quadrature of f on [a,b].
template <typename F>
double simpson(F&& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}
}  // namespace

TEST_CASE("monocycle has unit energy by quadrature") {
  const PulseShape shape;
  const double e = simpson(
      [&](double t) {
        const double w = monocycle(t, shape);
        return w * w;
      },
      -5.0, 5.0, 20000);
  REQUIRE(e == Catch::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("monocycle energy outside the truncation window is negligible") {
  const PulseShape shape;
  const double tail = 2.0 * simpson(
                                [&](double t) {
                                  const double w = monocycle(t, shape);
                                  return w * w;
                                },
                                shape.half_width, 6.0, 20000);
  REQUIRE(tail < 1e-6);
}

TEST_CASE("monocycle shape: symmetric, peak at zero, sign change") {
  const PulseShape shape;
  REQUIRE(monocycle(0.0, shape) ==
          Catch::Approx(std::sqrt(8.0 / (3.0 * shape.tau_p))));
  REQUIRE(monocycle(0.4, shape) == Catch::Approx(monocycle(-0.4, shape)));
  // zero crossing at t = tau_p / (2 sqrt(pi))
  const double t0 = shape.tau_p / (2.0 * std::sqrt(kPi));
  REQUIRE(monocycle(t0 - 1e-4, shape) > 0.0);
  REQUIRE(monocycle(t0 + 1e-4, shape) < 0.0);
}

TEST_CASE("link config derived quantities") {
  LinkConfig cfg;
  REQUIRE(cfg.n_hops() == 50);
  REQUIRE(cfg.block_duration() == Catch::Approx(900.0));
  REQUIRE(cfg.block_samples() == 900 * 16);
  REQUIRE(cfg.delta() == Catch::Approx(1.0));
  cfg.ppm_delta = 0.25;
  REQUIRE(cfg.delta() == Catch::Approx(0.25));
  REQUIRE(cfg.n_reps(Modulation::ook) == 9);
  REQUIRE(cfg.n_reps(Modulation::ppm) == 9);
  cfg.N_p = 3;
  REQUIRE(cfg.n_reps(Modulation::ook) == 27);
}

TEST_CASE("amplitude follows the energy mode") {
  LinkConfig cfg;
  cfg.E_s = 4.0;
  cfg.N_f = 5;
  cfg.N_p = 2;
  REQUIRE(cfg.amplitude() == Catch::Approx(2.0));  // per-pulse: sqrt(E_s)
  cfg.energy_mode = EnergyMode::per_bit;
  REQUIRE(cfg.amplitude(Modulation::ook) ==
          Catch::Approx(std::sqrt(4.0 / 10.0)));
  REQUIRE(cfg.amplitude(Modulation::ppm) ==
          Catch::Approx(std::sqrt(4.0 / 5.0)));
}

TEST_CASE("link config validation rejects inconsistent values") {
  LinkConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
  cfg.T_c = 3.0;  // 100/3 not integral
  REQUIRE_THROWS_AS(cfg.validate(), config_error);
  cfg = LinkConfig{};
  cfg.N_p = 51;
  REQUIRE_THROWS_AS(cfg.validate(), config_error);
  cfg = LinkConfig{};
  cfg.ppm_delta = 2.0;  // must stay below T_c
  REQUIRE_THROWS_AS(cfg.validate(), config_error);
  cfg = LinkConfig{};
  cfg.sample_rate = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), config_error);
}

TEST_CASE("hop codes are deterministic, in range, distinct within a frame") {
  LinkConfig cfg;
  cfg.N_f = 4;
  cfg.N_p = 3;
  const HopCode a = gen_th_code(77, 1, cfg, 10);
  const HopCode b = gen_th_code(77, 1, cfg, 10);
  REQUIRE(a.chips == b.chips);
  const HopCode c = gen_th_code(77, 2, cfg, 10);
  REQUIRE(a.chips != c.chips);
  for (int n = 0; n < 10; ++n)
    for (int j = 0; j < cfg.N_f; ++j) {
      std::set<int> seen;
      for (int i = 0; i < cfg.N_p; ++i) {
        const int ch = a.chip(n, j, i);
        REQUIRE(ch >= 0);
        REQUIRE(ch < cfg.n_hops());
        seen.insert(ch);
      }
      REQUIRE(seen.size() == static_cast<std::size_t>(cfg.N_p));
    }
}

TEST_CASE("hop code chip_range restriction keeps PPM shifts in-frame") {
  LinkConfig cfg;
  const HopCode code = gen_th_code(5, 0, cfg, 200, cfg.n_hops() - 1);
  for (auto ch : code.chips) REQUIRE(ch < cfg.n_hops() - 1);
}

TEST_CASE("hop code rejects N_p wider than the chip range") {
  LinkConfig cfg;
  cfg.N_p = 5;
  REQUIRE_THROWS_AS(gen_th_code(5, 0, cfg, 1, 4), config_error);
}

TEST_CASE("hop codes cover chips uniformly") {
  LinkConfig cfg;
  const int bits = 2000;
  const HopCode code = gen_th_code(123, 0, cfg, bits);
  std::vector<int> counts(cfg.n_hops(), 0);
  for (auto ch : code.chips) ++counts[ch];
  const double expect = double(bits * cfg.N_f) / cfg.n_hops();
  for (int c : counts) {
    REQUIRE(c > expect * 0.7);
    REQUIRE(c < expect * 1.3);
  }
}

TEST_CASE("OOK modulation: silence for zeros, chip-centered pulses for ones") {
  LinkConfig cfg;
  cfg.N_f = 3;
  cfg.N_p = 2;
  cfg.E_s = 2.25;
  const HopCode code = gen_th_code(9, 0, cfg, 4);
  const std::vector<std::uint8_t> bits = {1, 0, 1, 0};
  const PulseTrain train = modulate_ook(bits, code, cfg);
  REQUIRE(train.pulses.size() == 2u * cfg.N_f * cfg.N_p);
  for (const PulseEntry& p : train.pulses) {
    REQUIRE((p.bit == 0 || p.bit == 2));
    REQUIRE(p.amplitude == Catch::Approx(1.5));
    bool matched = false;
    for (int i = 0; i < cfg.N_p; ++i) {
      const double t =
          p.frame * cfg.T_f + (code.chip(p.bit, p.frame, i) + 0.5) * cfg.T_c;
      if (std::abs(p.time - t) < 1e-12) matched = true;
    }
    REQUIRE(matched);
  }
  const PulseTrain first = train_for_bit(train, 0);
  REQUIRE(first.pulses.size() == static_cast<std::size_t>(cfg.N_f * cfg.N_p));
  for (const PulseEntry& p : first.pulses) REQUIRE(p.bit == 0);
}

TEST_CASE("OOK modulation rejects streams longer than the code") {
  LinkConfig cfg;
  const HopCode code = gen_th_code(9, 0, cfg, 2);
  const std::vector<std::uint8_t> bits = {1, 0, 1};
  REQUIRE_THROWS_AS(modulate_ook(bits, code, cfg), structural_error);
}

TEST_CASE("PPM modulation pulses every frame and shifts ones by delta") {
  LinkConfig cfg;
  cfg.N_f = 3;
  const HopCode code = gen_th_code(11, 0, cfg, 2, cfg.n_hops() - 1);
  const std::vector<std::uint8_t> bits = {0, 1};
  const PulseTrain train = modulate_ppm(bits, code, cfg);
  REQUIRE(train.pulses.size() == 2u * cfg.N_f);
  for (const PulseEntry& p : train.pulses) {
    const double base =
        p.frame * cfg.T_f + (code.chip(p.bit, p.frame, 0) + 0.5) * cfg.T_c;
    const double expect = base + (bits[p.bit] ? cfg.delta() : 0.0);
    REQUIRE(p.time == Catch::Approx(expect));
  }
}

TEST_CASE("PPM modulation requires a single-pulse hop code") {
  LinkConfig cfg;
  cfg.N_p = 2;
  const HopCode code = gen_th_code(11, 0, cfg, 2);
  cfg.N_p = 1;
  const std::vector<std::uint8_t> bits = {0, 1};
  REQUIRE_THROWS_AS(modulate_ppm(bits, code, cfg), config_error);
}

TEST_CASE("synthesized waveform carries the configured pulse energy") {
  LinkConfig cfg;
  cfg.N_f = 3;
  cfg.N_p = 1;
  cfg.E_s = 2.0;
  cfg.sample_rate = 64.0;
  const PulseShape shape;
  const HopCode code = gen_th_code(13, 0, cfg, 1);
  const PulseTrain train = modulate_ook({1}, code, cfg);
  const auto w = synth_tx_waveform(train, cfg, shape);
  REQUIRE(w.size() == cfg.block_samples());
  // non-overlapping pulses: energies add, each pulse has energy E_s
  REQUIRE(waveform_energy(w, cfg.sample_rate) ==
          Catch::Approx(3.0 * 2.0).epsilon(5e-3));
}

TEST_CASE("zero bit synthesizes an all-zero block") {
  LinkConfig cfg;
  const PulseShape shape;
  const HopCode code = gen_th_code(13, 0, cfg, 1);
  const PulseTrain train = modulate_ook({0}, code, cfg);
  const auto w = synth_tx_waveform(train, cfg, shape);
  for (double s : w) REQUIRE(s == 0.0);
}

TEST_CASE("waveform peak sits at the hopped chip center") {
  LinkConfig cfg;
  cfg.N_f = 1;
  cfg.sample_rate = 32.0;
  const PulseShape shape;
  const HopCode code = gen_th_code(21, 0, cfg, 1);
  const PulseTrain train = modulate_ook({1}, code, cfg);
  const auto w = synth_tx_waveform(train, cfg, shape);
  std::size_t peak = 0;
  for (std::size_t i = 1; i < w.size(); ++i)
    if (std::abs(w[i]) > std::abs(w[peak])) peak = i;
  const double t_peak = (peak + 0.5) / cfg.sample_rate;
  const double center = (code.chip(0, 0, 0) + 0.5) * cfg.T_c;
  REQUIRE(std::abs(t_peak - center) <= 0.5 / cfg.sample_rate + 1e-12);
}
