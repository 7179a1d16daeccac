#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pftrain/model.hpp"
#include "pftrain/rng.hpp"

namespace pftrain {

// xi(t) = c - a*xi(t-1)^2 + b*xi(t-2); chaotic at the defaults.
struct HenonParams {
  double a = 1.4;
  double b = 0.3;
  double c = 1.0;
};

// True regressor weights implied by HenonParams through the weight order
// [c11+c21, c12, c13, c22, c23].
WeightVector henon_true_weights(const HenonParams& params = {});

// Training set built from delayed noisy outputs: examples[t].input =
// [y(t-1), y(t-2)], output y(t). Inputs carry the measurement noise; the
// clean states are retained for evaluation only.
struct Dataset {
  std::vector<TrainingExample> examples;
  std::vector<double> clean_states;
  double measurement_noise_std = 0.0;
};

// Trajectories leaving |xi| <= 10 have escaped the attractor's basin.
class DivergedTrajectory : public std::runtime_error {
 public:
  DivergedTrajectory(std::size_t step, double value);
  std::size_t step() const { return step_; }

 private:
  std::size_t step_ = 0;
};

double henon_step(const HenonParams& params, double xi_prev, double xi_prev2);

// Iterates the oscillator from init, discards `warmup` leading states, adds
// N(0, noise_std^2) measurement noise, and packages delayed-output examples.
// clean_states has exactly `length` entries (the first two are the delays).
// Throws DivergedTrajectory (naming the absolute step index) if any state,
// warmup included, leaves |xi| <= 10.
Dataset generate_dataset(const HenonParams& params, std::size_t length,
                         double noise_std, std::size_t warmup,
                         std::pair<double, double> init, RngStream& rng);

struct ReplayResult {
  std::vector<double> states;  // the generated values, init excluded
  std::optional<std::size_t> diverged_at;
};

// Autonomous replay of the trained regressor
// xi(t) = x1 + x2*xi(t-2) + x3*xi(t-2)^2 + x4*xi(t-1) + x5*xi(t-1)^2.
// Divergence (|xi| > 10) is reported, not thrown; iteration stops there.
ReplayResult simulate_trained(const WeightVector& x_hat, std::size_t steps,
                              std::pair<double, double> init);

// Delay-embedding pairs (seq[t-1], seq[t]) for attractor plots.
std::vector<std::pair<double, double>> attractor_points(
    std::span<const double> seq);

}  // namespace pftrain
