#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pftrain/harness.hpp"

using namespace pftrain;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pftrain_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

fs::path write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  return path;
}

ExperimentConfig small_henon_config() {
  ExperimentConfig cfg;
  cfg.problem = Problem::henon_affine;
  cfg.dataset.length = 52;
  cfg.dataset.noise_std = 0.1;
  cfg.dataset.warmup = 20;
  cfg.dataset.seed = 5;
  cfg.filter = FilterChoice::both;
  cfg.num_particles = 64;
  cfg.replay_steps = 50;
  return cfg;
}

}  // namespace

TEST_CASE("load_config parses the flat key-value schema") {
  const auto dir = temp_dir("config");
  const auto path = write_file(dir / "exp.cfg",
                               "# comment line\n"
                               "problem = henon_affine\n"
                               "filter = both\n"
                               "\n"
                               "dataset.length = 123\n"
                               "dataset.noise_std = 0.25\n"
                               "dataset.warmup = 7\n"
                               "dataset.init = 0.2 -0.3\n"
                               "dataset.seed = 99\n"
                               "tunings.q = 0.001\n"
                               "tunings.r = 0.4\n"
                               "pf.num_particles = 256\n"
                               "pf.prior_mean = 0.5\n"
                               "pf.prior_cov_scale = 2\n"
                               "pf.ess_threshold_fraction = 0.6\n"
                               "kf.prior_cov_scale = 3\n"
                               "replay.steps = 100\n"
                               "output_dir = somewhere\n");
  const ExperimentConfig cfg = load_config(path.string());
  CHECK(cfg.problem == Problem::henon_affine);
  CHECK(cfg.filter == FilterChoice::both);
  CHECK(cfg.dataset.length == 123);
  CHECK(cfg.dataset.noise_std == 0.25);
  CHECK(cfg.dataset.warmup == 7);
  CHECK(cfg.dataset.init.first == 0.2);
  CHECK(cfg.dataset.init.second == -0.3);
  CHECK(cfg.dataset.seed == 99);
  CHECK(cfg.tunings.q == 0.001);
  CHECK(cfg.tunings.r == 0.4);
  CHECK(cfg.num_particles == 256);
  CHECK(cfg.prior_mean_value == 0.5);
  CHECK(cfg.prior_cov_scale == 2.0);
  CHECK(cfg.ess_threshold_fraction == 0.6);
  CHECK(cfg.kf_prior_cov_scale == 3.0);
  CHECK(cfg.replay_steps == 100);
  CHECK(cfg.output_dir == "somewhere");
}

TEST_CASE("load_config rejects unknown keys and bad values with context") {
  const auto dir = temp_dir("badconfig");
  const auto unknown = write_file(dir / "u.cfg", "no.such.key = 1\n");
  CHECK_THROWS_WITH_AS(load_config(unknown.string()),
                       doctest::Contains("unknown key"), std::runtime_error);

  const auto bad_number = write_file(dir / "n.cfg", "tunings.q = fast\n");
  CHECK_THROWS_WITH_AS(load_config(bad_number.string()),
                       doctest::Contains(":1:"), std::runtime_error);

  const auto no_eq = write_file(dir / "e.cfg", "tunings.q 0.5\n");
  CHECK_THROWS_AS(load_config(no_eq.string()), std::runtime_error);

  CHECK_THROWS_AS(load_config((dir / "missing.cfg").string()),
                  std::runtime_error);

  const auto bad_init = write_file(dir / "i.cfg", "dataset.init = 0.1\n");
  CHECK_THROWS_AS(load_config(bad_init.string()), std::runtime_error);
}

TEST_CASE("config validation: Kalman baseline needs the affine problem") {
  ExperimentConfig cfg;
  cfg.problem = Problem::mlp_demo;
  cfg.filter = FilterChoice::both;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.filter = FilterChoice::pf;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("write_convergence_csv: shape and exact round-trip") {
  FilterRun run;
  run.name = "pf";
  run.dim = 5;

  SUBCASE("zero steps give a header-only file") {
    const auto dir = temp_dir("csv_empty");
    const auto path = dir / "convergence.csv";
    write_convergence_csv(run, path.string());
    CHECK(slurp(path) == "step,w1,w2,w3,w4,w5,ess,residual\n");
  }

  SUBCASE("rows reparse to the exact values") {
    StepRecord rec;
    rec.step = 0;
    rec.estimate = {0.1, -0.2, 1.0 / 3.0, 4e-17, 12345.6789};
    rec.ess = 617.0321;
    rec.prediction_residual = -0.987654321e-5;
    run.per_step.push_back(rec);
    rec.step = 1;
    rec.estimate[2] = 0.7071067811865476;
    rec.ess.reset();
    run.per_step.push_back(rec);

    const auto dir = temp_dir("csv_rows");
    const auto path = dir / "convergence.csv";
    write_convergence_csv(run, path.string());

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,w1,w2,w3,w4,w5,ess,residual");
    // 8 columns per row
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      REQUIRE(cells.size() == 8);
      CHECK(std::stoull(cells[0]) == run.per_step[row].step);
      for (std::size_t j = 0; j < 5; ++j) {
        CHECK(std::stod(cells[1 + j]) == run.per_step[row].estimate[j]);
      }
      if (run.per_step[row].ess) {
        CHECK(std::stod(cells[6]) == *run.per_step[row].ess);
      } else {
        CHECK(cells[6] == "nan");
      }
      CHECK(std::stod(cells[7]) == run.per_step[row].prediction_residual);
      ++row;
    }
    CHECK(row == 2);
  }
}

TEST_CASE("write_attractor_svg: markers and padded viewBox") {
  const auto dir = temp_dir("svg");

  SUBCASE("one point, one marker") {
    const std::vector<std::pair<double, double>> pts{{0.5, 0.25}};
    const auto path = dir / "one.svg";
    write_attractor_svg(pts, path.string());
    const std::string svg = slurp(path);
    std::size_t markers = 0;
    for (std::size_t pos = svg.find("<circle"); pos != std::string::npos;
         pos = svg.find("<circle", pos + 1)) {
      ++markers;
    }
    CHECK(markers == 1);
    CHECK(svg.find("<svg xmlns=") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
  }

  SUBCASE("viewBox covers the data box with a 5% margin") {
    const std::vector<std::pair<double, double>> pts{{-1.5, -0.4}, {1.5, 0.4}};
    const auto path = dir / "box.svg";
    write_attractor_svg(pts, path.string());
    const std::string svg = slurp(path);
    const auto start = svg.find("viewBox=\"");
    REQUIRE(start != std::string::npos);
    const auto end = svg.find('"', start + 9);
    std::stringstream box(svg.substr(start + 9, end - start - 9));
    double x0 = 0, y0 = 0, w = 0, h = 0;
    box >> x0 >> y0 >> w >> h;
    CHECK(x0 == doctest::Approx(-1.65));
    CHECK(y0 == doctest::Approx(-0.44));
    CHECK(w == doctest::Approx(3.3));
    CHECK(h == doctest::Approx(0.88));
  }

  SUBCASE("empty input is rejected") {
    const std::vector<std::pair<double, double>> none;
    CHECK_THROWS_AS(write_attractor_svg(none, (dir / "no.svg").string()),
                    std::invalid_argument);
  }
}

TEST_CASE("run_experiment: repeated runs are byte-identical") {
  ExperimentConfig cfg = small_henon_config();
  const auto dir_a = temp_dir("det_a");
  const auto dir_b = temp_dir("det_b");

  cfg.output_dir = dir_a.string();
  run_experiment(cfg);
  cfg.output_dir = dir_b.string();
  run_experiment(cfg);

  CHECK(slurp(dir_a / "convergence.csv") == slurp(dir_b / "convergence.csv"));
  CHECK(slurp(dir_a / "convergence_kf.csv") ==
        slurp(dir_b / "convergence_kf.csv"));
  CHECK(slurp(dir_a / "attractor.svg") == slurp(dir_b / "attractor.svg"));
}

TEST_CASE("run_experiment: both filters walk the same examples") {
  ExperimentConfig cfg = small_henon_config();
  const ExperimentReport report = run_experiment_in_memory(cfg);
  REQUIRE(report.pf.has_value());
  REQUIRE(report.kf.has_value());
  CHECK(report.pf->per_step.size() == cfg.dataset.length - 2);
  CHECK(report.pf->per_step.size() == report.kf->per_step.size());
  for (std::size_t t = 0; t < report.pf->per_step.size(); ++t) {
    CHECK(report.pf->per_step[t].step == report.kf->per_step[t].step);
    CHECK(report.pf->per_step[t].ess.has_value());
    CHECK_FALSE(report.kf->per_step[t].ess.has_value());
  }
  REQUIRE(report.true_weights.has_value());
  CHECK(report.pf->final_error_per_weight.size() == 5);
}

TEST_CASE("run_experiment: noiseless Kalman recovers the weights") {
  ExperimentConfig cfg;
  cfg.problem = Problem::henon_affine;
  cfg.filter = FilterChoice::kf;
  cfg.dataset.length = 202;
  cfg.dataset.noise_std = 0.0;
  cfg.dataset.warmup = 100;
  cfg.tunings.q = 0.0;
  cfg.kf_prior_cov_scale = 1e6;
  const ExperimentReport report = run_experiment_in_memory(cfg);
  REQUIRE(report.kf.has_value());
  for (const double err : report.kf->final_error_per_weight) {
    CHECK(err < 1e-6);
  }
  CHECK_FALSE(report.pf.has_value());
  CHECK(report.replay_max_abs <= 2.0);
}

TEST_CASE("run_experiment: estimation error settles (median over windows)") {
  ExperimentConfig cfg;  // paper tunings by default
  cfg.problem = Problem::henon_affine;
  cfg.filter = FilterChoice::both;
  cfg.dataset.length = 802;
  cfg.dataset.seed = 42;
  cfg.num_particles = 300;
  const ExperimentReport report = run_experiment_in_memory(cfg);
  for (const auto& run : {*report.pf, *report.kf}) {
    REQUIRE(run.mse_trajectory.size() == 800);
    const std::vector<double> first(run.mse_trajectory.begin(),
                                    run.mse_trajectory.begin() + 100);
    const std::vector<double> last(run.mse_trajectory.end() - 100,
                                   run.mse_trajectory.end());
    CHECK(oracles::median(last) <= oracles::median(first));
  }
}

TEST_CASE("run_experiment: mlp demo records prediction-mse trajectory") {
  ExperimentConfig cfg;
  cfg.problem = Problem::mlp_demo;
  cfg.filter = FilterChoice::pf;
  cfg.dataset.length = 40;
  cfg.dataset.noise_std = 0.1;
  cfg.dataset.seed = 3;
  cfg.num_particles = 128;
  cfg.tunings = NoiseSpec{0.005, 0.05};
  const ExperimentReport report = run_experiment_in_memory(cfg);
  REQUIRE(report.pf.has_value());
  CHECK(report.pf->per_step.size() == 40);
  CHECK_FALSE(report.true_weights.has_value());
  CHECK(report.pf->final_error_per_weight.empty());
  CHECK(report.pf->mse_trajectory.size() == 40);
  CHECK(report.attractor.empty());
  CHECK(report.pf->final_estimate.size() == 25);
}

TEST_CASE("report json is written alongside the csv outputs") {
  ExperimentConfig cfg = small_henon_config();
  const auto dir = temp_dir("outputs");
  cfg.output_dir = dir.string();
  run_experiment(cfg);
  CHECK(fs::exists(dir / "convergence.csv"));
  CHECK(fs::exists(dir / "convergence_kf.csv"));
  CHECK(fs::exists(dir / "attractor.svg"));
  const std::string json = slurp(dir / "report.json");
  CHECK(json.find("\"true_weights\"") != std::string::npos);
  CHECK(json.find("\"final_estimate\"") != std::string::npos);
  CHECK(json.find("\"posterior_std\"") != std::string::npos);
}
