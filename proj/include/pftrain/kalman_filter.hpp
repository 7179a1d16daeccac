#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pftrain/model.hpp"
#include "pftrain/networks.hpp"

namespace pftrain {

// Gaussian belief over the weights: mean and d x d covariance (row-major).
struct KalmanState {
  WeightVector mean;
  std::vector<double> covariance;

  std::size_t dim() const { return mean.size(); }
  double cov(std::size_t i, std::size_t j) const {
    return covariance[i * dim() + j];
  }

  static KalmanState isotropic(std::size_t dim, double variance,
                               double mean_value = 0.0);
};

// Identity transition with random-walk inflation: P <- P + q * I.
KalmanState kf_predict(const KalmanState& s, double q);

// Scalar-measurement update for y = c . x + v, var(v) = r. Covariance in
// Joseph form (I - k c) P (I - k c)^T + r k k^T, which stays symmetric PSD;
// no matrix inversion, the innovation variance is a scalar.
KalmanState kf_update(const KalmanState& s, std::span<const double> c, double y,
                      double r);

// Exact recursive MMSE baseline for models affine in the weights. Returns
// one posterior state per example.
std::vector<KalmanState> kf_run(const AffineFunctionalNetwork& model,
                                std::span<const TrainingExample> data,
                                const NoiseSpec& noise, const KalmanState& init);

}  // namespace pftrain
