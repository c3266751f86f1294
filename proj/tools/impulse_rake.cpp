// impulse-rake: link-level sweeps, collision analysis and toy end-to-end
// inference for sparse event frames over impulse-radio UWB.

#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "impulse/impulse.hpp"

namespace {

impulse::ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw impulse::config_error("cannot open config file: " + path);
  return impulse::parse_config(in);
}

std::ostream& open_out(std::ofstream& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw impulse::config_error("cannot open output file: " + path);
  return file;
}

int cmd_ber_sweep(const std::string& config_path, const std::string& out_path) {
  const impulse::ExperimentConfig cfg = load_config(config_path);
  const auto rows = impulse::run_ber_sweep(cfg);
  std::ofstream file;
  impulse::write_ber_csv(open_out(file, out_path), cfg, rows);
  return 0;
}

int cmd_collisions(const std::string& config_path, const std::string& out_path) {
  const impulse::ExperimentConfig cfg = load_config(config_path);
  const auto result = impulse::run_collision_analysis(cfg);
  std::ofstream file;
  impulse::write_collision_csv(open_out(file, out_path), cfg, result);
  return 0;
}

int cmd_e2e(const std::string& config_path, const std::string& weights_path,
            const std::string& out_path) {
  const impulse::ExperimentConfig cfg = load_config(config_path);
  std::ifstream win(weights_path, std::ios::binary);
  if (!win)
    throw impulse::config_error("cannot open weights file: " + weights_path);
  const impulse::SnnNetwork net = impulse::load_weights(win);
  const auto records = impulse::run_e2e(cfg, net);
  std::ofstream file;
  impulse::write_records_csv(open_out(file, out_path), cfg, records, "e2e");
  return 0;
}

int cmd_channel_dump(const std::string& config_path, long seed,
                     const std::string& out_path,
                     const std::string& pulse_path) {
  impulse::ExperimentConfig cfg = load_config(config_path);
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);

  std::vector<impulse::ChannelRealization> chans;
  std::vector<impulse::PulseTrain> trains;
  const bool ppm = impulse::scheme_is_ppm(cfg.scheme);
  const int chip_range = ppm ? cfg.link.n_hops() - 1 : 0;
  impulse::Rng bit_rng(impulse::derive_seed(cfg.seed, {40}));
  for (int k = 0; k < cfg.link.K; ++k) {
    chans.push_back(impulse::sample_channel(cfg.channel, cfg.seed, k, 0));
    const impulse::HopCode code = impulse::gen_th_code(
        impulse::derive_seed(cfg.seed, {41}), k, cfg.link, 1, chip_range);
    const std::uint8_t b = bit_rng.bernoulli(cfg.p) ? 1 : 0;
    trains.push_back(ppm ? impulse::detail::ppm_bit_train(code, cfg.link, 0, b)
                         : impulse::detail::ook_bit_train(code, cfg.link, 0, b));
  }
  std::ofstream file;
  impulse::write_taps_csv(open_out(file, out_path), chans);
  if (!pulse_path.empty()) {
    std::ofstream pfile;
    impulse::write_pulses_csv(open_out(pfile, pulse_path), trains);
  }
  return 0;
}

int cmd_train_toy(const std::string& config_path, const std::string& out_path) {
  const impulse::ExperimentConfig cfg = load_config(config_path);
  const auto samples = impulse::make_toy_dataset(
      cfg.toy_per_class, impulse::derive_seed(cfg.seed, {31}), cfg.frame_h,
      cfg.frame_w);
  const auto patterns = impulse::to_patterns(samples);
  impulse::SnnNetwork net = impulse::make_snn(
      {2 * cfg.frame_h * cfg.frame_w, cfg.snn_hidden, 4}, cfg.snn_beta,
      cfg.snn_zeta, impulse::derive_seed(cfg.seed, {32}));
  net.surrogate_k = cfg.snn_surrogate_k;
  const impulse::TrainResult result = impulse::train_toy(
      net, patterns, cfg.snn_epochs, cfg.snn_lr,
      cfg.link.N_f * cfg.snn_steps);
  std::cerr << "train-toy: " << result.epochs_run << " epochs, final loss "
            << result.losses.back() << ", train accuracy "
            << result.accuracies.back() << "\n";
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw impulse::config_error("cannot open weights file: " + out_path);
  impulse::save_weights(out, result.net);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"impulse-rake: UWB impulse-radio link simulator for sparse "
               "event frames"};
  app.require_subcommand(1);

  std::string config_path, out_path, weights_path, pulse_path;
  long dump_seed = -1;

  auto* ber = app.add_subcommand("ber-sweep", "BER vs SNR sweep (CSV)");
  ber->add_option("--config", config_path, "experiment config file")->required();
  ber->add_option("--out", out_path, "output CSV (default: stdout)");

  auto* e2e = app.add_subcommand("e2e", "end-to-end toy inference accuracy");
  e2e->add_option("--config", config_path, "experiment config file")->required();
  e2e->add_option("--weights", weights_path, "trained SNN weight blob")
      ->required();
  e2e->add_option("--out", out_path, "output CSV (default: stdout)");

  auto* col = app.add_subcommand("collisions", "multi-user hop collision rates");
  col->add_option("--config", config_path, "experiment config file")->required();
  col->add_option("--out", out_path, "output CSV (default: stdout)");

  auto* dump = app.add_subcommand("channel-dump",
                                  "dump channel taps and one bit's pulses");
  dump->add_option("--config", config_path, "experiment config file")
      ->required();
  dump->add_option("--seed", dump_seed, "override config seed");
  dump->add_option("--out", out_path, "taps CSV (default: stdout)");
  dump->add_option("--pulse-out", pulse_path, "pulse CSV (optional)");

  auto* train = app.add_subcommand("train-toy",
                                   "train the toy classifier, save weights");
  train->add_option("--config", config_path, "experiment config file")
      ->required();
  train->add_option("--out", out_path, "weight blob path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ber) return cmd_ber_sweep(config_path, out_path);
    if (*e2e) return cmd_e2e(config_path, weights_path, out_path);
    if (*col) return cmd_collisions(config_path, out_path);
    if (*dump) return cmd_channel_dump(config_path, dump_seed, out_path, pulse_path);
    if (*train) return cmd_train_toy(config_path, out_path);
  } catch (const impulse::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const impulse::parse_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
