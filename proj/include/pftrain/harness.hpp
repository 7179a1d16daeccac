#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pftrain/henon.hpp"
#include "pftrain/model.hpp"
#include "pftrain/particle_filter.hpp"

namespace pftrain {

enum class Problem { henon_affine, mlp_demo };
enum class FilterChoice { pf, kf, both };

double default_process_noise();  // 0.5 * sqrt(0.016)

struct DatasetConfig {
  std::size_t length = 2000;
  double noise_std = 0.4472135954999579;  // sqrt(0.2)
  std::size_t warmup = 100;
  std::pair<double, double> init{0.1, 0.1};
  std::uint64_t seed = 42;
};

// Flat key-value experiment description; see configs/ for the schema.
struct ExperimentConfig {
  Problem problem = Problem::henon_affine;
  DatasetConfig dataset;
  FilterChoice filter = FilterChoice::both;
  NoiseSpec tunings{};  // filled with defaults in the constructor
  std::size_t num_particles = 1000;
  double prior_mean_value = 0.0;
  double prior_cov_scale = 1.0;
  double ess_threshold_fraction = 0.5;
  double kf_prior_cov_scale = 1.0;
  std::size_t mlp_hidden = 8;
  std::size_t replay_steps = 5000;
  std::string output_dir = "out";

  ExperimentConfig();
  void validate() const;
};

// Parses the flat `key = value` format ('#' comments, dotted section keys).
// Unknown keys and malformed values raise std::runtime_error with the line.
ExperimentConfig load_config(const std::string& path);

// Applies one `key = value` assignment; shared by file and CLI overrides.
void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value);

struct StepRecord {
  std::size_t step = 0;
  WeightVector estimate;
  std::optional<double> ess;  // particle filter only
  double prediction_residual = 0.0;
};

// One filter's trajectory over the dataset plus its summary metrics.
struct FilterRun {
  std::string name;
  std::size_t dim = 0;
  std::vector<StepRecord> per_step;
  WeightVector final_estimate;
  std::vector<double> final_error_per_weight;  // |final - truth|, when known
  // ||x_hat(t) - x*||^2 when the truth is known, else the running mean of
  // squared prediction residuals.
  std::vector<double> mse_trajectory;
  double final_dataset_mse = 0.0;
  std::vector<double> posterior_std;  // KF only: sqrt(diag P) at the last step
  double wall_time_seconds = 0.0;
};

struct ExperimentReport {
  std::optional<WeightVector> true_weights;
  std::optional<FilterRun> pf;
  std::optional<FilterRun> kf;
  std::vector<std::pair<double, double>> attractor;  // replay embedding
  bool replay_diverged = false;
  double replay_max_abs = 0.0;
  double wall_time_seconds = 0.0;
};

// Deterministic given (config, seed): builds the dataset, runs the selected
// filter(s) over the identical examples, writes convergence.csv
// (+ convergence_kf.csv when both filters run), attractor.svg for the
// oscillator problem, and report.json into cfg.output_dir.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

// As run_experiment but without touching the filesystem.
ExperimentReport run_experiment_in_memory(const ExperimentConfig& cfg);

// Header `step,w1,...,wd,ess,residual`; one row per step; %.17g floats so a
// reparse reproduces the values exactly. KF rows carry "nan" for ess.
void write_convergence_csv(const FilterRun& run, const std::string& path);

// Self-contained SVG scatter plot, axes fitted to the data box plus a 5%
// margin, one marker per point.
void write_attractor_svg(std::span<const std::pair<double, double>> points,
                         const std::string& path);

void write_report_json(const ExperimentConfig& cfg, const ExperimentReport& report,
                       const std::string& path);

}  // namespace pftrain
