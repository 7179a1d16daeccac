#include "pftrain/kalman_filter.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pftrain {

KalmanState KalmanState::isotropic(std::size_t dim, double variance,
                                   double mean_value) {
  KalmanState s;
  s.mean.assign(dim, mean_value);
  s.covariance.assign(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    s.covariance[i * dim + i] = variance;
  }
  return s;
}

KalmanState kf_predict(const KalmanState& s, double q) {
  KalmanState next = s;
  const std::size_t d = s.dim();
  for (std::size_t i = 0; i < d; ++i) {
    next.covariance[i * d + i] += q;
  }
  return next;
}

KalmanState kf_update(const KalmanState& s, std::span<const double> c, double y,
                      double r) {
  const std::size_t d = s.dim();
  if (c.size() != d) {
    throw std::invalid_argument("kf_update: regressor length " +
                                std::to_string(c.size()) + " != state dim " +
                                std::to_string(d));
  }
  if (!(r > 0.0)) {
    throw std::invalid_argument("kf_update: r must be > 0");
  }
  for (const double v : c) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("kf_update: non-finite regressor");
    }
  }
  if (!std::isfinite(y)) {
    throw std::runtime_error("kf_update: non-finite measurement");
  }

  // Scalar innovation: no matrix inversion anywhere.
  std::vector<double> pc(d, 0.0);  // P c^T
  for (std::size_t i = 0; i < d; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      acc += s.covariance[i * d + j] * c[j];
    }
    pc[i] = acc;
  }
  double innovation_var = r;
  for (std::size_t i = 0; i < d; ++i) {
    innovation_var += c[i] * pc[i];
  }
  std::vector<double> gain(d);
  for (std::size_t i = 0; i < d; ++i) {
    gain[i] = pc[i] / innovation_var;
  }

  KalmanState next = s;
  double predicted = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    predicted += c[i] * s.mean[i];
  }
  const double innovation = y - predicted;
  for (std::size_t i = 0; i < d; ++i) {
    next.mean[i] = s.mean[i] + gain[i] * innovation;
  }

  // Joseph form: (I - k c) P (I - k c)^T + r k k^T.
  std::vector<double> a(d * d);  // I - k c
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      a[i * d + j] = (i == j ? 1.0 : 0.0) - gain[i] * c[j];
    }
  }
  std::vector<double> ap(d * d, 0.0);  // A P
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double aik = a[i * d + k];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) {
        ap[i * d + j] += aik * s.covariance[k * d + j];
      }
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = r * gain[i] * gain[j];
      for (std::size_t k = 0; k < d; ++k) {
        acc += ap[i * d + k] * a[j * d + k];
      }
      next.covariance[i * d + j] = acc;
    }
  }
  return next;
}

std::vector<KalmanState> kf_run(const AffineFunctionalNetwork& model,
                                std::span<const TrainingExample> data,
                                const NoiseSpec& noise, const KalmanState& init) {
  if (data.empty()) {
    throw std::invalid_argument("kf_run: empty dataset");
  }
  noise.validate();
  if (init.dim() != model.weight_dim()) {
    throw std::invalid_argument("kf_run: state dimension mismatch");
  }
  std::vector<KalmanState> trajectory;
  trajectory.reserve(data.size());
  KalmanState state = init;
  std::vector<double> features(model.weight_dim());
  for (const TrainingExample& ex : data) {
    state = kf_predict(state, noise.q);
    model.basis(ex.input, features);
    state = kf_update(state, features, ex.output, noise.r);
    trajectory.push_back(state);
  }
  return trajectory;
}

}  // namespace pftrain
