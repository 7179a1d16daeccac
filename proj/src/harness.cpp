#include "pftrain/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pftrain/kalman_filter.hpp"
#include "pftrain/networks.hpp"
#include "pftrain/version.hpp"

namespace pftrain {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad number for '" + key + "': " + value);
  }
  if (pos != value.size()) {
    throw std::runtime_error("config: trailing characters for '" + key + "': " +
                             value);
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad integer for '" + key + "': " + value);
  }
  if (pos != value.size()) {
    throw std::runtime_error("config: trailing characters for '" + key + "': " +
                             value);
  }
  return v;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_u64(key, value));
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double dataset_mse(const MeasurementModel& model,
                   std::span<const TrainingExample> examples,
                   const WeightVector& weights) {
  double acc = 0.0;
  for (const auto& ex : examples) {
    const double e = ex.output - model.evaluate(weights, ex.input);
    acc += e * e;
  }
  return acc / static_cast<double>(examples.size());
}

struct BuiltProblem {
  std::unique_ptr<MeasurementModel> model;
  const AffineFunctionalNetwork* affine = nullptr;  // set for the oscillator
  std::vector<TrainingExample> examples;
  std::optional<WeightVector> truth;
};

BuiltProblem build_problem(const ExperimentConfig& cfg) {
  BuiltProblem p;
  if (cfg.problem == Problem::henon_affine) {
    RngStream noise = make_stream(cfg.dataset.seed, RngRole::dataset_noise);
    Dataset ds = generate_dataset(HenonParams{}, cfg.dataset.length,
                                  cfg.dataset.noise_std, cfg.dataset.warmup,
                                  cfg.dataset.init, noise);
    auto net = std::make_unique<AffineFunctionalNetwork>(
        AffineFunctionalNetwork::henon_regressor());
    p.affine = net.get();
    p.model = std::move(net);
    p.examples = std::move(ds.examples);
    p.truth = henon_true_weights();
  } else {
    // Scalar regression demo: y = sin(2*pi*u) + noise, u uniform on [-1, 1].
    // Draw order per example: u first, then the output noise.
    RngStream noise = make_stream(cfg.dataset.seed, RngRole::dataset_noise);
    p.model = std::make_unique<MultiLayerPerceptron>(
        std::vector<std::size_t>{1, cfg.mlp_hidden, 1});
    p.examples.reserve(cfg.dataset.length);
    for (std::size_t i = 0; i < cfg.dataset.length; ++i) {
      const double u = 2.0 * noise.uniform_unit() - 1.0;
      const double clean = std::sin(2.0 * 3.141592653589793238462643 * u);
      TrainingExample ex;
      ex.input = {u};
      ex.output = clean + cfg.dataset.noise_std * noise.standard_normal();
      p.examples.push_back(std::move(ex));
    }
  }
  return p;
}

FilterRun run_pf(const ExperimentConfig& cfg, const BuiltProblem& problem) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t d = problem.model->weight_dim();

  PFConfig pfc;
  pfc.num_particles = cfg.num_particles;
  pfc.noise = cfg.tunings;
  pfc.prior_mean.assign(d, cfg.prior_mean_value);
  pfc.prior_cov_scale = cfg.prior_cov_scale;
  pfc.ess_threshold_fraction = cfg.ess_threshold_fraction;
  pfc.rng_seed = cfg.dataset.seed;

  PfRng rng(pfc.rng_seed);
  ParticleEnsemble ens = init_ensemble(pfc, rng.prior);

  FilterRun run;
  run.name = "pf";
  run.dim = d;
  run.per_step.reserve(problem.examples.size());
  double residual_sq_sum = 0.0;
  for (std::size_t t = 0; t < problem.examples.size(); ++t) {
    auto [next, out] = pf_step(ens, *problem.model, problem.examples[t], pfc, rng);
    ens = std::move(next);

    StepRecord rec;
    rec.step = t;
    rec.estimate = out.estimate;
    rec.ess = out.ess;
    rec.prediction_residual = problem.examples[t].output - out.predicted_output;
    residual_sq_sum += rec.prediction_residual * rec.prediction_residual;
    if (problem.truth) {
      run.mse_trajectory.push_back(
          EstimationError::between(*problem.truth, out.estimate).squared_norm);
    } else {
      run.mse_trajectory.push_back(residual_sq_sum / static_cast<double>(t + 1));
    }
    run.per_step.push_back(std::move(rec));
  }
  run.final_estimate = run.per_step.back().estimate;
  if (problem.truth) {
    run.final_error_per_weight.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      run.final_error_per_weight[j] =
          std::abs(run.final_estimate[j] - (*problem.truth)[j]);
    }
  }
  run.final_dataset_mse =
      dataset_mse(*problem.model, problem.examples, run.final_estimate);
  run.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return run;
}

FilterRun run_kf(const ExperimentConfig& cfg, const BuiltProblem& problem) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t d = problem.model->weight_dim();
  const AffineFunctionalNetwork& net = *problem.affine;

  FilterRun run;
  run.name = "kf";
  run.dim = d;
  run.per_step.reserve(problem.examples.size());

  KalmanState state =
      KalmanState::isotropic(d, cfg.kf_prior_cov_scale, cfg.prior_mean_value);
  std::vector<double> features(d);
  for (std::size_t t = 0; t < problem.examples.size(); ++t) {
    const TrainingExample& ex = problem.examples[t];
    state = kf_predict(state, cfg.tunings.q);
    net.basis(ex.input, features);
    double predicted = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      predicted += features[j] * state.mean[j];
    }
    state = kf_update(state, features, ex.output, cfg.tunings.r);

    StepRecord rec;
    rec.step = t;
    rec.estimate = state.mean;
    rec.prediction_residual = ex.output - predicted;
    if (problem.truth) {
      run.mse_trajectory.push_back(
          EstimationError::between(*problem.truth, state.mean).squared_norm);
    }
    run.per_step.push_back(std::move(rec));
  }
  run.final_estimate = state.mean;
  if (problem.truth) {
    run.final_error_per_weight.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      run.final_error_per_weight[j] =
          std::abs(run.final_estimate[j] - (*problem.truth)[j]);
    }
  }
  run.posterior_std.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    run.posterior_std[j] = std::sqrt(state.cov(j, j));
  }
  run.final_dataset_mse =
      dataset_mse(*problem.model, problem.examples, run.final_estimate);
  run.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return run;
}

}  // namespace

double default_process_noise() { return 0.5 * std::sqrt(0.016); }

ExperimentConfig::ExperimentConfig() {
  tunings.q = default_process_noise();
  tunings.r = 0.2;
}

void ExperimentConfig::validate() const {
  if (dataset.length < 3) {
    throw std::invalid_argument("config: dataset.length must be >= 3");
  }
  if (dataset.noise_std < 0.0 || !std::isfinite(dataset.noise_std)) {
    throw std::invalid_argument("config: dataset.noise_std must be >= 0");
  }
  tunings.validate();
  if (problem == Problem::mlp_demo && filter != FilterChoice::pf) {
    throw std::invalid_argument(
        "config: the Kalman baseline needs a model affine in the weights; use "
        "filter = pf for mlp_demo");
  }
  if (num_particles == 0) {
    throw std::invalid_argument("config: pf.num_particles must be >= 1");
  }
  if (!(prior_cov_scale > 0.0)) {
    throw std::invalid_argument("config: pf.prior_cov_scale must be > 0");
  }
  if (!(ess_threshold_fraction > 0.0) || !(ess_threshold_fraction <= 1.0)) {
    throw std::invalid_argument(
        "config: pf.ess_threshold_fraction must lie in (0, 1]");
  }
  if (!(kf_prior_cov_scale > 0.0)) {
    throw std::invalid_argument("config: kf.prior_cov_scale must be > 0");
  }
  if (mlp_hidden == 0) {
    throw std::invalid_argument("config: mlp.hidden must be >= 1");
  }
  if (replay_steps < 2) {
    throw std::invalid_argument("config: replay.steps must be >= 2");
  }
}

void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value) {
  if (key == "problem") {
    if (value == "henon_affine") {
      cfg.problem = Problem::henon_affine;
    } else if (value == "mlp_demo") {
      cfg.problem = Problem::mlp_demo;
    } else {
      throw std::runtime_error("config: unknown problem '" + value + "'");
    }
  } else if (key == "filter") {
    if (value == "pf") {
      cfg.filter = FilterChoice::pf;
    } else if (value == "kf") {
      cfg.filter = FilterChoice::kf;
    } else if (value == "both") {
      cfg.filter = FilterChoice::both;
    } else {
      throw std::runtime_error("config: unknown filter '" + value + "'");
    }
  } else if (key == "dataset.length") {
    cfg.dataset.length = parse_size(key, value);
  } else if (key == "dataset.noise_std") {
    cfg.dataset.noise_std = parse_double(key, value);
  } else if (key == "dataset.warmup") {
    cfg.dataset.warmup = parse_size(key, value);
  } else if (key == "dataset.init") {
    std::istringstream in(value);
    double a = 0.0, b = 0.0;
    if (!(in >> a >> b)) {
      throw std::runtime_error("config: dataset.init needs two numbers, got '" +
                               value + "'");
    }
    std::string rest;
    if (in >> rest) {
      throw std::runtime_error("config: dataset.init needs exactly two numbers");
    }
    cfg.dataset.init = {a, b};
  } else if (key == "dataset.seed") {
    cfg.dataset.seed = parse_u64(key, value);
  } else if (key == "tunings.q") {
    cfg.tunings.q = parse_double(key, value);
  } else if (key == "tunings.r") {
    cfg.tunings.r = parse_double(key, value);
  } else if (key == "pf.num_particles") {
    cfg.num_particles = parse_size(key, value);
  } else if (key == "pf.prior_mean") {
    cfg.prior_mean_value = parse_double(key, value);
  } else if (key == "pf.prior_cov_scale") {
    cfg.prior_cov_scale = parse_double(key, value);
  } else if (key == "pf.ess_threshold_fraction") {
    cfg.ess_threshold_fraction = parse_double(key, value);
  } else if (key == "kf.prior_cov_scale") {
    cfg.kf_prior_cov_scale = parse_double(key, value);
  } else if (key == "mlp.hidden") {
    cfg.mlp_hidden = parse_size(key, value);
  } else if (key == "replay.steps") {
    cfg.replay_steps = parse_size(key, value);
  } else if (key == "output_dir") {
    cfg.output_dir = value;
  } else {
    throw std::runtime_error("config: unknown key '" + key + "'");
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("config: cannot open '" + path + "'");
  }
  ExperimentConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: " + path + ":" + std::to_string(line_no) +
                               ": expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    try {
      apply_config_entry(cfg, key, value);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  return cfg;
}

ExperimentReport run_experiment_in_memory(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();

  BuiltProblem problem = build_problem(cfg);
  ExperimentReport report;
  report.true_weights = problem.truth;

  const bool want_pf =
      cfg.filter == FilterChoice::pf || cfg.filter == FilterChoice::both;
  const bool want_kf =
      cfg.filter == FilterChoice::kf || cfg.filter == FilterChoice::both;
  if (want_pf) {
    report.pf = run_pf(cfg, problem);
  }
  if (want_kf) {
    report.kf = run_kf(cfg, problem);
  }

  if (cfg.problem == Problem::henon_affine) {
    const WeightVector& weights =
        report.pf ? report.pf->final_estimate : report.kf->final_estimate;
    const ReplayResult replay =
        simulate_trained(weights, cfg.replay_steps, cfg.dataset.init);
    report.replay_diverged = replay.diverged_at.has_value();
    for (const double v : replay.states) {
      report.replay_max_abs = std::max(report.replay_max_abs, std::abs(v));
    }
    if (replay.states.size() >= 2) {
      report.attractor = attractor_points(replay.states);
    }
  }

  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  ExperimentReport report = run_experiment_in_memory(cfg);

  const fs::path out_dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory '" +
                             out_dir.string() + "': " + ec.message());
  }

  const FilterRun& primary = report.pf ? *report.pf : *report.kf;
  write_convergence_csv(primary, (out_dir / "convergence.csv").string());
  if (report.pf && report.kf) {
    write_convergence_csv(*report.kf, (out_dir / "convergence_kf.csv").string());
  }
  if (!report.attractor.empty()) {
    write_attractor_svg(report.attractor, (out_dir / "attractor.svg").string());
  }
  write_report_json(cfg, report, (out_dir / "report.json").string());
  return report;
}

void write_convergence_csv(const FilterRun& run, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  out << "step";
  for (std::size_t j = 1; j <= run.dim; ++j) {
    out << ",w" << j;
  }
  out << ",ess,residual\n";
  for (const StepRecord& rec : run.per_step) {
    out << rec.step;
    for (std::size_t j = 0; j < run.dim; ++j) {
      out << ',' << format_double(rec.estimate[j]);
    }
    out << ',' << (rec.ess ? format_double(*rec.ess) : "nan");
    out << ',' << format_double(rec.prediction_residual) << '\n';
  }
  if (!out) {
    throw std::runtime_error("write failed for '" + path + "'");
  }
}

void write_attractor_svg(std::span<const std::pair<double, double>> points,
                         const std::string& path) {
  if (points.empty()) {
    throw std::invalid_argument("write_attractor_svg: no points");
  }
  double min_x = points[0].first, max_x = points[0].first;
  double min_y = points[0].second, max_y = points[0].second;
  for (const auto& [x, y] : points) {
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  }
  double span_x = max_x - min_x;
  double span_y = max_y - min_y;
  if (span_x <= 0.0) span_x = 1.0;
  if (span_y <= 0.0) span_y = 1.0;
  const double margin_x = 0.05 * span_x;
  const double margin_y = 0.05 * span_y;
  const double x0 = min_x - margin_x;
  const double y0 = min_y - margin_y;
  const double width = span_x + 2.0 * margin_x;
  const double height = span_y + 2.0 * margin_y;
  const double radius = std::max(width, height) / 320.0;

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" "
      << "viewBox=\"" << format_double(x0) << ' ' << format_double(y0) << ' '
      << format_double(width) << ' ' << format_double(height) << "\">\n";
  // y grows downward in SVG: reflect within the padded box so the plot reads
  // like a normal scatter.
  const double y_sum = y0 + (y0 + height);
  for (const auto& [x, y] : points) {
    out << "  <circle cx=\"" << format_double(x) << "\" cy=\""
        << format_double(y_sum - y) << "\" r=\"" << format_double(radius)
        << "\" fill=\"black\"/>\n";
  }
  out << "</svg>\n";
  if (!out) {
    throw std::runtime_error("write failed for '" + path + "'");
  }
}

void write_report_json(const ExperimentConfig& cfg, const ExperimentReport& report,
                       const std::string& path) {
  json j;
  j["version"] = kVersion;
  j["problem"] = cfg.problem == Problem::henon_affine ? "henon_affine" : "mlp_demo";
  j["filter"] = cfg.filter == FilterChoice::pf   ? "pf"
                : cfg.filter == FilterChoice::kf ? "kf"
                                                 : "both";
  j["dataset"] = {{"length", cfg.dataset.length},
                  {"noise_std", cfg.dataset.noise_std},
                  {"warmup", cfg.dataset.warmup},
                  {"init", {cfg.dataset.init.first, cfg.dataset.init.second}},
                  {"seed", cfg.dataset.seed}};
  j["tunings"] = {{"q", cfg.tunings.q}, {"r", cfg.tunings.r}};
  if (report.true_weights) {
    j["true_weights"] = *report.true_weights;
  }

  const auto run_to_json = [](const FilterRun& run) {
    json r;
    r["steps"] = run.per_step.size();
    r["final_estimate"] = run.final_estimate;
    if (!run.final_error_per_weight.empty()) {
      r["final_error_per_weight"] = run.final_error_per_weight;
    }
    r["final_dataset_mse"] = run.final_dataset_mse;
    r["mse_trajectory"] = run.mse_trajectory;
    if (!run.mse_trajectory.empty()) {
      double acc = 0.0;
      for (const double v : run.mse_trajectory) acc += v;
      r["mean_squared_error"] = acc / static_cast<double>(run.mse_trajectory.size());
    }
    if (!run.posterior_std.empty()) {
      r["posterior_std"] = run.posterior_std;
    }
    r["wall_time_seconds"] = run.wall_time_seconds;
    return r;
  };

  if (report.pf) {
    j["pf"] = run_to_json(*report.pf);
    j["pf"]["num_particles"] = cfg.num_particles;
    j["pf"]["prior_cov_scale"] = cfg.prior_cov_scale;
    j["pf"]["ess_threshold_fraction"] = cfg.ess_threshold_fraction;
  }
  if (report.kf) {
    j["kf"] = run_to_json(*report.kf);
    j["kf"]["prior_cov_scale"] = cfg.kf_prior_cov_scale;
  }
  if (!report.attractor.empty()) {
    j["replay"] = {{"steps", cfg.replay_steps},
                   {"max_abs", report.replay_max_abs},
                   {"diverged", report.replay_diverged}};
  }
  j["wall_time_seconds"] = report.wall_time_seconds;

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  out << j.dump(2) << '\n';
  if (!out) {
    throw std::runtime_error("write failed for '" + path + "'");
  }
}

}  // namespace pftrain
