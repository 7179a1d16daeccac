// Times the per-particle kernels on the serial reference lane and the
// OpenMP lane over a range of ensemble sizes, and checks that both lanes
// produce bit-identical estimates.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "pftrain/henon.hpp"
#include "pftrain/networks.hpp"
#include "pftrain/particle_filter.hpp"

namespace {

using namespace pftrain;

struct LaneResult {
  double ms_per_step = 0.0;
  WeightVector final_estimate;
};

LaneResult run_lane(const MeasurementModel& model,
                    const std::vector<TrainingExample>& examples,
                    std::size_t num_particles, Exec exec) {
  PFConfig cfg;
  cfg.num_particles = num_particles;
  cfg.noise = NoiseSpec{0.01, 0.2};
  cfg.prior_mean.assign(model.weight_dim(), 0.0);
  cfg.rng_seed = 7;

  PfRng rng(cfg.rng_seed);
  ParticleEnsemble ens = init_ensemble(cfg, rng.prior);

  LaneResult result;
  const auto start = std::chrono::steady_clock::now();
  for (const TrainingExample& ex : examples) {
    auto [next, out] = pf_step(ens, model, ex, cfg, rng, exec);
    ens = std::move(next);
    result.final_estimate = std::move(out.estimate);
  }
  const double elapsed =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                start)
          .count();
  result.ms_per_step = elapsed / static_cast<double>(examples.size());
  return result;
}

bool bitwise_equal(const WeightVector& a, const WeightVector& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

void bench_problem(const std::string& label, const MeasurementModel& model,
                   const std::vector<TrainingExample>& examples,
                   const std::vector<std::size_t>& particle_counts) {
  std::printf("%s (d = %zu, %zu steps)\n", label.c_str(), model.weight_dim(),
              examples.size());
  std::printf("%12s %14s %14s %9s %7s\n", "particles", "serial ms/step",
              "openmp ms/step", "speedup", "match");
  for (const std::size_t n : particle_counts) {
    const LaneResult serial = run_lane(model, examples, n, Exec::serial);
    const LaneResult parallel = run_lane(model, examples, n, Exec::parallel);
    std::printf("%12zu %14.3f %14.3f %8.2fx %7s\n", n, serial.ms_per_step,
                parallel.ms_per_step, serial.ms_per_step / parallel.ms_per_step,
                bitwise_equal(serial.final_estimate, parallel.final_estimate)
                    ? "yes"
                    : "NO");
  }
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial vs OpenMP particle-kernel benchmark"};
  std::vector<std::size_t> particle_counts{1000, 10000, 100000};
  std::size_t steps = 50;
  int threads = 0;
  app.add_option("--particles", particle_counts, "Ensemble sizes to time")
      ->delimiter(',');
  app.add_option("--steps", steps, "Assimilation steps per timing run");
  app.add_option("--threads", threads, "OpenMP thread count (0 = default)");
  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
  std::printf("OpenMP enabled, max threads = %d\n\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP, both lanes run serially\n\n");
#endif

  RngStream noise = make_stream(7, RngRole::dataset_noise);
  const Dataset ds =
      generate_dataset(HenonParams{}, steps + 2, 0.1, 100, {0.1, 0.1}, noise);
  const auto affine = AffineFunctionalNetwork::henon_regressor();
  bench_problem("affine regressor", affine, ds.examples, particle_counts);

  const MultiLayerPerceptron mlp(std::vector<std::size_t>{1, 16, 1});
  std::vector<TrainingExample> mlp_examples;
  RngStream mlp_rng = make_stream(11, RngRole::dataset_noise);
  mlp_examples.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double u = 2.0 * mlp_rng.uniform_unit() - 1.0;
    mlp_examples.push_back(
        {{u}, std::sin(2.0 * 3.14159265358979323846 * u) +
                  0.1 * mlp_rng.standard_normal()});
  }
  bench_problem("mlp [1,16,1]", mlp, mlp_examples, particle_counts);
  return 0;
}
