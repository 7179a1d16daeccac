#include "pftrain/henon.hpp"

#include <cmath>
#include <string>

#include "pftrain/networks.hpp"

namespace pftrain {

namespace {
constexpr double kBasinBound = 10.0;
}

WeightVector henon_true_weights(const HenonParams& params) {
  return {params.c, params.b, 0.0, 0.0, -params.a};
}

DivergedTrajectory::DivergedTrajectory(std::size_t step, double value)
    : std::runtime_error("henon trajectory left the basin at step " +
                         std::to_string(step) + " (|xi| = " +
                         std::to_string(std::abs(value)) + " > 10)"),
      step_(step) {}

double henon_step(const HenonParams& params, double xi_prev, double xi_prev2) {
  // Accumulation order mirrors the regressor dot product with the true
  // weights, so noiseless datasets satisfy output == C(u) . x* bit for bit.
  const double sq = xi_prev * xi_prev;
  return params.c + params.b * xi_prev2 - params.a * sq;
}

Dataset generate_dataset(const HenonParams& params, std::size_t length,
                         double noise_std, std::size_t warmup,
                         std::pair<double, double> init, RngStream& rng) {
  if (length < 2) {
    throw std::invalid_argument("generate_dataset: length must be >= 2");
  }
  if (noise_std < 0.0 || !std::isfinite(noise_std)) {
    throw std::invalid_argument("generate_dataset: noise_std must be >= 0");
  }

  const std::size_t total = warmup + length;
  std::vector<double> xi(total);
  xi[0] = init.first;
  if (total > 1) xi[1] = init.second;
  for (std::size_t t = 0; t < std::min<std::size_t>(2, total); ++t) {
    if (std::abs(xi[t]) > kBasinBound) throw DivergedTrajectory(t, xi[t]);
  }
  for (std::size_t t = 2; t < total; ++t) {
    xi[t] = henon_step(params, xi[t - 1], xi[t - 2]);
    if (std::abs(xi[t]) > kBasinBound) throw DivergedTrajectory(t, xi[t]);
  }

  Dataset ds;
  ds.measurement_noise_std = noise_std;
  ds.clean_states.assign(xi.begin() + static_cast<std::ptrdiff_t>(warmup), xi.end());

  std::vector<double> noisy(ds.clean_states.size());
  for (std::size_t t = 0; t < noisy.size(); ++t) {
    noisy[t] = ds.clean_states[t] + noise_std * rng.standard_normal();
  }

  ds.examples.reserve(length - 2);
  for (std::size_t t = 2; t < noisy.size(); ++t) {
    TrainingExample ex;
    ex.input = {noisy[t - 1], noisy[t - 2]};
    ex.output = noisy[t];
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

ReplayResult simulate_trained(const WeightVector& x_hat, std::size_t steps,
                              std::pair<double, double> init) {
  if (x_hat.size() != 5) {
    throw std::invalid_argument("simulate_trained: expected 5 weights, got " +
                                std::to_string(x_hat.size()));
  }
  ReplayResult result;
  result.states.reserve(steps);
  double prev2 = init.first;   // xi(t-2)
  double prev = init.second;   // xi(t-1)
  for (std::size_t t = 0; t < steps; ++t) {
    const double u[2] = {prev, prev2};
    const auto row = henon_basis(u);
    double next = 0.0;
    for (std::size_t k = 0; k < 5; ++k) {
      next += row[k] * x_hat[k];
    }
    result.states.push_back(next);
    if (std::abs(next) > kBasinBound) {
      result.diverged_at = t;
      break;
    }
    prev2 = prev;
    prev = next;
  }
  return result;
}

std::vector<std::pair<double, double>> attractor_points(
    std::span<const double> seq) {
  if (seq.size() < 2) {
    throw std::invalid_argument("attractor_points: need at least 2 values, got " +
                                std::to_string(seq.size()));
  }
  std::vector<std::pair<double, double>> points;
  points.reserve(seq.size() - 1);
  for (std::size_t t = 1; t < seq.size(); ++t) {
    points.emplace_back(seq[t - 1], seq[t]);
  }
  return points;
}

}  // namespace pftrain
