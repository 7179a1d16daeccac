#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "pftrain/henon.hpp"
#include "pftrain/kalman_filter.hpp"
#include "pftrain/rng.hpp"

using namespace pftrain;

namespace {

void check_symmetric_psd(const KalmanState& s, RngStream& rng) {
  const std::size_t d = s.dim();
  double scale = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      scale = std::max(scale, std::abs(s.cov(i, j)));
      CHECK(std::abs(s.cov(i, j) - s.cov(j, i)) <= 1e-10 * std::max(1.0, scale));
    }
  }
  // PSD probe: x^T P x >= -tol for random directions.
  std::vector<double> x(d);
  for (int probe = 0; probe < 50; ++probe) {
    double norm = 0.0;
    for (double& v : x) {
      v = rng.standard_normal();
      norm += v * v;
    }
    double quad = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        quad += x[i] * s.cov(i, j) * x[j];
      }
    }
    CHECK(quad >= -1e-10 * scale * norm);
  }
}

double trace(const KalmanState& s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.dim(); ++i) acc += s.cov(i, i);
  return acc;
}

}  // namespace

TEST_CASE("kf_predict: inflates the diagonal, keeps the mean") {
  KalmanState s = KalmanState::isotropic(2, 1.0);
  s.mean = {3.0, -1.0};

  const KalmanState same = kf_predict(s, 0.0);
  CHECK(same.mean == s.mean);
  CHECK(same.covariance == s.covariance);

  const KalmanState doubled = kf_predict(s, 1.0);
  CHECK(doubled.cov(0, 0) == 2.0);
  CHECK(doubled.cov(1, 1) == 2.0);
  CHECK(doubled.cov(0, 1) == 0.0);
  CHECK(doubled.mean == s.mean);

  const KalmanState big = kf_predict(s, 123.5);
  CHECK(big.mean == s.mean);
}

TEST_CASE("kf_update: diffuse prior forces the measurement") {
  KalmanState s = KalmanState::isotropic(3, 1e12);
  const std::vector<double> c{1.0, 0.0, 0.0};
  const double y = 5.0;
  const KalmanState next = kf_update(s, c, y, 0.2);
  CHECK(next.mean[0] == doctest::Approx(y).epsilon(1e-6));
  CHECK(next.mean[1] == 0.0);
  CHECK(next.mean[2] == 0.0);
}

TEST_CASE("kf_update: zero regressor row leaves the state unchanged") {
  KalmanState s = KalmanState::isotropic(2, 2.0);
  s.mean = {1.0, -1.0};
  const std::vector<double> c{0.0, 0.0};
  const KalmanState next = kf_update(s, c, 7.0, 0.5);
  CHECK(next.mean == s.mean);
  CHECK(next.covariance == s.covariance);
}

TEST_CASE("kf_update: scalar hand-computed case") {
  KalmanState s = KalmanState::isotropic(1, 1.0);
  const std::vector<double> c{1.0};
  // gain = 1/2: mean 0 -> 1, variance 1 -> 0.25 + 0.25 = 0.5 (Joseph form)
  const KalmanState next = kf_update(s, c, 2.0, 1.0);
  CHECK(next.mean[0] == 1.0);
  CHECK(next.cov(0, 0) == 0.5);
}

TEST_CASE("kf_update: validates inputs") {
  KalmanState s = KalmanState::isotropic(2, 1.0);
  const std::vector<double> short_c{1.0};
  CHECK_THROWS_AS(kf_update(s, short_c, 1.0, 0.5), std::invalid_argument);
  const std::vector<double> c{1.0, 0.0};
  CHECK_THROWS_AS(kf_update(s, c, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(kf_update(s, c, std::nan(""), 0.5), std::runtime_error);
}

TEST_CASE("kf_run: single example equals predict then update") {
  const auto net = AffineFunctionalNetwork::henon_regressor();
  const std::vector<TrainingExample> data{{{0.3, -0.2}, 0.9}};
  const NoiseSpec noise{0.1, 0.2};
  const KalmanState init = KalmanState::isotropic(5, 1.0);

  const auto traj = kf_run(net, data, noise, init);
  REQUIRE(traj.size() == 1);

  std::vector<double> c(5);
  net.basis(data[0].input, c);
  const KalmanState manual = kf_update(kf_predict(init, noise.q), c,
                                       data[0].output, noise.r);
  CHECK(traj[0].mean == manual.mean);
  CHECK(traj[0].covariance == manual.covariance);

  CHECK_THROWS_AS(kf_run(net, {}, noise, init), std::invalid_argument);
}

TEST_CASE("kf_run: noiseless identification nails the true weights") {
  RngStream rng(0);
  const Dataset ds =
      generate_dataset(HenonParams{}, 202, 0.0, 100, {0.1, 0.1}, rng);
  const auto net = AffineFunctionalNetwork::henon_regressor();
  const NoiseSpec noise{0.0, 0.2};
  const KalmanState init = KalmanState::isotropic(5, 1e6);

  const auto traj = kf_run(net, ds.examples, noise, init);
  const WeightVector x_star = henon_true_weights();
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(std::abs(traj.back().mean[j] - x_star[j]) < 1e-6);
  }

  // Closed-form regularized least squares is the independent optimum.
  const auto closed = oracles::ridge_solution(net, ds.examples, noise.r, 1e6);
  double scale = 0.0;
  for (const double v : closed) scale = std::max(scale, std::abs(v));
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(std::abs(traj.back().mean[j] - closed[j]) <= 1e-8 * scale);
  }
}

TEST_CASE("kf_run: covariance stays symmetric PSD, trace never grows on update") {
  RngStream data_rng(77);
  const Dataset ds =
      generate_dataset(HenonParams{}, 102, 0.3, 100, {0.1, 0.1}, data_rng);
  const auto net = AffineFunctionalNetwork::henon_regressor();
  const NoiseSpec noise{0.05, 0.2};

  RngStream probe_rng(123);
  KalmanState state = KalmanState::isotropic(5, 1.0);
  std::vector<double> c(5);
  for (const auto& ex : ds.examples) {
    const KalmanState predicted = kf_predict(state, noise.q);
    net.basis(ex.input, c);
    state = kf_update(predicted, c, ex.output, noise.r);
    CHECK(trace(state) <= trace(predicted) + 1e-12);
    check_symmetric_psd(state, probe_rng);
  }
}
