#include "pftrain/particle_filter.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pftrain {

namespace {

// Fixed-order reductions only: every sum below runs serially so the result
// does not depend on the number of threads. The parallel lane workshares
// element-wise loops and model evaluations, nothing else.

void check_normalized(const ParticleEnsemble& ens) {
  if (ens.count == 0 || ens.weights.size() != ens.count) {
    throw std::invalid_argument("ParticleEnsemble: weights not initialized");
  }
}

// Softmax of the (already shifted) log-weights; returns the ESS-ready
// normalized weights and stores the shifted logs back.
void normalize_from_log(ParticleEnsemble& ens) {
  const std::size_t n = ens.count;
  double max_log = ens.log_weights[0];
  for (std::size_t i = 1; i < n; ++i) {
    max_log = std::max(max_log, ens.log_weights[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    ens.log_weights[i] -= max_log;
    ens.weights[i] = std::exp(ens.log_weights[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += ens.weights[i];
  }
  // max-shift guarantees sum >= 1, so the division is always safe
  for (std::size_t i = 0; i < n; ++i) {
    ens.weights[i] /= sum;
  }
}

void evaluate_outputs(const ParticleEnsemble& ens, const MeasurementModel& model,
                      std::span<const double> input, Exec exec,
                      std::vector<double>& out) {
  const std::size_t n = ens.count;
  out.resize(n);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      out[static_cast<std::size_t>(i)] =
          model.evaluate(ens.particle(static_cast<std::size_t>(i)), input);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = model.evaluate(ens.particle(i), input);
    }
  }
}

// Likelihood exponent accumulation shared by update_step and pf_step.
ParticleEnsemble apply_likelihood(const ParticleEnsemble& ens,
                                  std::span<const double> outputs, double y,
                                  double r) {
  ParticleEnsemble next = ens;
  const double inv_2r = 1.0 / (2.0 * r);
  for (std::size_t i = 0; i < next.count; ++i) {
    const double res = y - outputs[i];
    if (std::isnan(res)) {
      throw std::runtime_error("update_step: NaN residual at particle " +
                               std::to_string(i));
    }
    next.log_weights[i] -= res * res * inv_2r;
  }
  normalize_from_log(next);
  return next;
}

}  // namespace

Exec default_exec() {
#ifdef _OPENMP
  return Exec::parallel;
#else
  return Exec::serial;
#endif
}

void PFConfig::validate() const {
  if (num_particles == 0) {
    throw std::invalid_argument("PFConfig: num_particles must be >= 1");
  }
  noise.validate();
  if (prior_mean.empty()) {
    throw std::invalid_argument("PFConfig: prior_mean fixes the dimension and "
                                "must not be empty");
  }
  for (const double v : prior_mean) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("PFConfig: prior_mean must be finite");
    }
  }
  if (!(prior_cov_scale > 0.0) || !std::isfinite(prior_cov_scale)) {
    throw std::invalid_argument("PFConfig: prior_cov_scale must be > 0");
  }
  if (!(ess_threshold_fraction > 0.0) || !(ess_threshold_fraction <= 1.0)) {
    throw std::invalid_argument(
        "PFConfig: ess_threshold_fraction must lie in (0, 1]");
  }
}

ParticleEnsemble init_ensemble(const PFConfig& cfg, RngStream& prior_rng) {
  cfg.validate();
  const std::size_t n = cfg.num_particles;
  const std::size_t d = cfg.prior_mean.size();
  ParticleEnsemble ens;
  ens.count = n;
  ens.dim = d;
  ens.particles.resize(n * d);
  ens.log_weights.assign(n, 0.0);
  ens.weights.assign(n, 1.0 / static_cast<double>(n));
  const double scale = std::sqrt(cfg.prior_cov_scale);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = ens.particles.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = cfg.prior_mean[j] + scale * prior_rng.standard_normal();
    }
  }
  return ens;
}

ParticleEnsemble predict_step(const ParticleEnsemble& ens, double q,
                              RngStream& rng, Exec exec) {
  check_normalized(ens);
  const std::size_t n = ens.count;
  const std::size_t d = ens.dim;
  // Noise is drawn sequentially up front; the parallel lane only applies it.
  std::vector<double> noise(n * d);
  for (double& v : noise) {
    v = rng.standard_normal();
  }
  ParticleEnsemble next = ens;
  const double scale = std::sqrt(q);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (long long k = 0; k < static_cast<long long>(n * d); ++k) {
      next.particles[static_cast<std::size_t>(k)] +=
          scale * noise[static_cast<std::size_t>(k)];
    }
  } else {
    for (std::size_t k = 0; k < n * d; ++k) {
      next.particles[k] += scale * noise[k];
    }
  }
  return next;
}

ParticleEnsemble update_step(const ParticleEnsemble& ens,
                             const MeasurementModel& model,
                             const TrainingExample& example, double r,
                             Exec exec) {
  check_normalized(ens);
  if (!(r > 0.0)) {
    throw std::invalid_argument("update_step: r must be > 0");
  }
  if (ens.dim != model.weight_dim()) {
    throw std::invalid_argument("update_step: particle dimension " +
                                std::to_string(ens.dim) + " != model weight_dim " +
                                std::to_string(model.weight_dim()));
  }
  if (example.input.size() != model.input_dim()) {
    throw std::invalid_argument("update_step: input dimension mismatch");
  }
  std::vector<double> outputs;
  evaluate_outputs(ens, model, example.input, exec, outputs);
  return apply_likelihood(ens, outputs, example.output, r);
}

double effective_sample_size(const ParticleEnsemble& ens) {
  check_normalized(ens);
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < ens.count; ++i) {
    sum_sq += ens.weights[i] * ens.weights[i];
  }
  return 1.0 / sum_sq;
}

ParticleEnsemble systematic_resample(const ParticleEnsemble& ens, RngStream& rng,
                                     Exec exec) {
  check_normalized(ens);
  const std::size_t n = ens.count;
  const std::size_t d = ens.dim;
  const double step = 1.0 / static_cast<double>(n);
  const double u0 = rng.uniform_unit() * step;

  // Inverse-CDF walk with equally spaced selection points.
  std::vector<std::size_t> index(n);
  std::size_t i = 0;
  double acc = ens.weights[0];
  for (std::size_t j = 0; j < n; ++j) {
    const double point = u0 + static_cast<double>(j) * step;
    while (point > acc && i + 1 < n) {
      ++i;
      acc += ens.weights[i];
    }
    index[j] = i;
  }

  ParticleEnsemble next;
  next.count = n;
  next.dim = d;
  next.particles.resize(n * d);
  next.log_weights.assign(n, 0.0);
  next.weights.assign(n, step);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (long long j = 0; j < static_cast<long long>(n); ++j) {
      const double* src = ens.particles.data() + index[static_cast<std::size_t>(j)] * d;
      double* dst = next.particles.data() + static_cast<std::size_t>(j) * d;
      for (std::size_t k = 0; k < d; ++k) {
        dst[k] = src[k];
      }
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      const double* src = ens.particles.data() + index[j] * d;
      double* dst = next.particles.data() + j * d;
      for (std::size_t k = 0; k < d; ++k) {
        dst[k] = src[k];
      }
    }
  }
  return next;
}

WeightVector posterior_mean(const ParticleEnsemble& ens, Exec exec) {
  check_normalized(ens);
  const std::size_t n = ens.count;
  const std::size_t d = ens.dim;
  WeightVector mean(d, 0.0);
  // Parallel over coordinates: each sum still runs over particles in fixed
  // order, so the result is thread-count independent.
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (long long j = 0; j < static_cast<long long>(d); ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += ens.weights[i] * ens.particles[i * d + static_cast<std::size_t>(j)];
      }
      mean[static_cast<std::size_t>(j)] = acc;
    }
  } else {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += ens.weights[i] * ens.particles[i * d + j];
      }
      mean[j] = acc;
    }
  }
  return mean;
}

std::pair<ParticleEnsemble, PFStepOutput> pf_step(const ParticleEnsemble& ens,
                                                  const MeasurementModel& model,
                                                  const TrainingExample& example,
                                                  const PFConfig& cfg, PfRng& rng,
                                                  Exec exec) {
  ParticleEnsemble predicted = predict_step(ens, cfg.noise.q, rng.propagation, exec);

  std::vector<double> outputs;
  evaluate_outputs(predicted, model, example.input, exec, outputs);
  double predicted_output = 0.0;
  for (std::size_t i = 0; i < predicted.count; ++i) {
    predicted_output += predicted.weights[i] * outputs[i];
  }

  ParticleEnsemble updated =
      apply_likelihood(predicted, outputs, example.output, cfg.noise.r);

  PFStepOutput out;
  out.predicted_output = predicted_output;
  out.ess = effective_sample_size(updated);
  out.resampled =
      out.ess < cfg.ess_threshold_fraction * static_cast<double>(updated.count);
  if (out.resampled) {
    updated = systematic_resample(updated, rng.resampling, exec);
  }
  out.estimate = posterior_mean(updated, exec);
  return {std::move(updated), std::move(out)};
}

}  // namespace pftrain
