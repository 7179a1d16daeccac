#include "pftrain/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pftrain {

void NoiseSpec::validate() const {
  if (!(q >= 0.0) || !std::isfinite(q)) {
    throw std::invalid_argument("NoiseSpec: q must be finite and >= 0, got " +
                                std::to_string(q));
  }
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw std::invalid_argument("NoiseSpec: r must be finite and > 0, got " +
                                std::to_string(r));
  }
}

EstimationError EstimationError::between(std::span<const double> truth,
                                         std::span<const double> estimate) {
  if (truth.size() != estimate.size()) {
    throw std::invalid_argument("EstimationError: dimension mismatch");
  }
  EstimationError err;
  err.per_step_error.resize(truth.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = truth[i] - estimate[i];
    err.per_step_error[i] = e;
    sum += e * e;
  }
  err.squared_norm = sum;
  return err;
}

WeightVector propagate(const WeightVector& x, double q,
                       std::span<const double> noise_draw) {
  if (noise_draw.size() != x.size()) {
    throw std::invalid_argument("propagate: noise draw length " +
                                std::to_string(noise_draw.size()) +
                                " != state dimension " + std::to_string(x.size()));
  }
  const double scale = std::sqrt(q);
  WeightVector next(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    next[i] = x[i] + scale * noise_draw[i];
  }
  return next;
}

double residual(const MeasurementModel& model, const WeightVector& x,
                const TrainingExample& example) {
  if (x.size() != model.weight_dim()) {
    throw std::invalid_argument("residual: weight dimension mismatch");
  }
  if (example.input.size() != model.input_dim()) {
    throw std::invalid_argument("residual: input dimension mismatch");
  }
  return example.output - model.evaluate(x, example.input);
}

double mean_squared_error(std::span<const EstimationError> errors) {
  if (errors.empty()) {
    throw std::invalid_argument("mean_squared_error: empty error sequence");
  }
  double sum = 0.0;
  for (const auto& e : errors) {
    sum += e.squared_norm;
  }
  return sum / static_cast<double>(errors.size());
}

}  // namespace pftrain
