#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pftrain {

// Network weights treated as the state vector of a random walk.
using WeightVector = std::vector<double>;

// One input pattern with its observed scalar output.
struct TrainingExample {
  std::vector<double> input;
  double output = 0.0;
};

// Intensities of the artificial process noise driving the weight walk (q,
// variance per coordinate per step) and of the measurement noise (r).
struct NoiseSpec {
  double q = 0.0;
  double r = 1.0;

  // Throws std::invalid_argument unless q >= 0, r > 0 and both finite.
  void validate() const;
};

// Scalar-output measurement function g(x, u). Implementations must be pure:
// identical (x, u) give identical output, safe to call from any thread.
class MeasurementModel {
 public:
  virtual ~MeasurementModel() = default;

  virtual std::size_t weight_dim() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual double evaluate(std::span<const double> weights,
                          std::span<const double> input) const = 0;
};

// Weight-estimation error at one step, e(t) = x_true - x_hat(t).
struct EstimationError {
  std::vector<double> per_step_error;
  double squared_norm = 0.0;

  static EstimationError between(std::span<const double> truth,
                                 std::span<const double> estimate);
};

// Random-walk evolution x + sqrt(q) * noise_draw, entrywise. The caller
// supplies the standard-normal draw so the operation stays pure.
WeightVector propagate(const WeightVector& x, double q,
                       std::span<const double> noise_draw);

// Realized measurement noise y - g(x, u).
double residual(const MeasurementModel& model, const WeightVector& x,
                const TrainingExample& example);

// Arithmetic mean of squared error norms; empirical mean-square estimation
// error over a run.
double mean_squared_error(std::span<const EstimationError> errors);

}  // namespace pftrain
