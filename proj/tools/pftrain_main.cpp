// Command-line experiment runner: `train` fits weights with the particle
// filter and/or the Kalman baseline from a config file, `replay` plays a
// trained regressor forward and plots its attractor.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pftrain/harness.hpp"
#include "pftrain/henon.hpp"
#include "pftrain/version.hpp"

namespace {

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("PFTRAIN_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(raw, &pos);
    if (pos != std::string(raw).size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("PFTRAIN_SEED is not an integer: ") + raw);
  }
}

pftrain::WeightVector load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open weights file '" + path + "'");
  }
  // accept comma- or whitespace-separated values
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  for (char& ch : text) {
    if (ch == ',') ch = ' ';
  }
  pftrain::WeightVector weights;
  std::istringstream tokens(text);
  std::string token;
  while (tokens >> token) {
    try {
      std::size_t pos = 0;
      weights.push_back(std::stod(token, &pos));
      if (pos != token.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw std::runtime_error("weights file '" + path + "': bad value '" +
                               token + "'");
    }
  }
  if (weights.empty()) {
    throw std::runtime_error("weights file '" + path + "' holds no numbers");
  }
  return weights;
}

int run_train(const std::string& config_path,
              const std::optional<std::uint64_t>& seed_flag,
              const std::optional<std::string>& out_dir,
              const std::optional<std::string>& filter) {
  pftrain::ExperimentConfig cfg = pftrain::load_config(config_path);
  if (const auto seed = seed_flag ? seed_flag : env_seed()) {
    cfg.dataset.seed = *seed;
  }
  if (out_dir) cfg.output_dir = *out_dir;
  if (filter) pftrain::apply_config_entry(cfg, "filter", *filter);

  const pftrain::ExperimentReport report = pftrain::run_experiment(cfg);

  const auto print_run = [](const pftrain::FilterRun& run) {
    std::cout << run.name << ": " << run.per_step.size() << " steps, "
              << "final dataset MSE " << run.final_dataset_mse << ", "
              << run.wall_time_seconds << " s\n  final estimate:";
    for (const double w : run.final_estimate) {
      std::cout << ' ' << w;
    }
    std::cout << '\n';
    if (!run.final_error_per_weight.empty()) {
      std::cout << "  |error| per weight:";
      for (const double e : run.final_error_per_weight) {
        std::cout << ' ' << e;
      }
      std::cout << '\n';
    }
  };
  if (report.pf) print_run(*report.pf);
  if (report.kf) print_run(*report.kf);
  std::cout << "outputs written to " << cfg.output_dir << '\n';
  return 0;
}

int run_replay(const std::string& weights_path, std::size_t steps,
               const std::string& out_dir, std::pair<double, double> init) {
  const pftrain::WeightVector weights = load_weights(weights_path);
  const pftrain::ReplayResult replay =
      pftrain::simulate_trained(weights, steps, init);
  if (replay.states.size() < 2) {
    throw std::runtime_error("replay produced fewer than 2 states");
  }

  std::filesystem::create_directories(out_dir);
  const auto points = pftrain::attractor_points(replay.states);
  pftrain::write_attractor_svg(
      points, (std::filesystem::path(out_dir) / "attractor.svg").string());

  double max_abs = 0.0;
  for (const double v : replay.states) {
    max_abs = std::max(max_abs, std::abs(v));
  }
  std::cout << "replayed " << replay.states.size() << " steps, max |xi| = "
            << max_abs;
  if (replay.diverged_at) {
    std::cout << " (diverged at step " << *replay.diverged_at << ")";
  }
  std::cout << "\nattractor plot written to " << out_dir << "/attractor.svg\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-free network training by particle filtering"};
  app.set_version_flag("--version", pftrain::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::string> out_flag;
  std::optional<std::string> filter_flag;
  CLI::App* train = app.add_subcommand("train", "Run a training experiment");
  train->add_option("--config", config_path, "Experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--seed", seed_flag,
                    "Experiment seed (overrides config and PFTRAIN_SEED)");
  train->add_option("--out", out_flag, "Output directory (overrides config)");
  train->add_option("--filter", filter_flag, "Filter selection: pf, kf or both")
      ->check(CLI::IsMember({"pf", "kf", "both"}));

  std::string weights_path;
  std::size_t replay_steps = 5000;
  std::string replay_out = "out";
  std::pair<double, double> replay_init{0.1, 0.1};
  CLI::App* replay =
      app.add_subcommand("replay", "Replay a trained regressor autonomously");
  replay->add_option("--weights", weights_path, "File with the trained weights")
      ->required()
      ->check(CLI::ExistingFile);
  replay->add_option("--steps", replay_steps, "Number of replay steps");
  replay->add_option("--out", replay_out, "Output directory");
  replay->add_option("--init", replay_init, "Initial pair xi0 xi1");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      return run_train(config_path, seed_flag, out_flag, filter_flag);
    }
    return run_replay(weights_path, replay_steps, replay_out, replay_init);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
