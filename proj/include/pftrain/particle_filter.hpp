#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pftrain/model.hpp"
#include "pftrain/rng.hpp"

namespace pftrain {

// Execution lane for the per-particle kernels. Results are identical bit
// for bit: all randomness is pre-drawn sequentially and reductions run in a
// fixed order, so `parallel` only changes wall time.
enum class Exec {
  serial,    // plain-loop reference implementation
  parallel,  // OpenMP worksharing (falls back to serial without OpenMP)
};

Exec default_exec();

// Weighted sample representation of the weight posterior p(x_t | Y_t).
// particles is N x dim, row-major; log_weights are kept max-shifted;
// weights is their softmax (all >= 0, sum 1 within 1e-12).
struct ParticleEnsemble {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<double> particles;
  std::vector<double> log_weights;
  std::vector<double> weights;

  std::span<const double> particle(std::size_t i) const {
    return {particles.data() + i * dim, dim};
  }
  std::span<double> particle(std::size_t i) {
    return {particles.data() + i * dim, dim};
  }
};

struct PFConfig {
  std::size_t num_particles = 1000;
  NoiseSpec noise{};
  WeightVector prior_mean;        // fixes the state dimension
  double prior_cov_scale = 1.0;   // isotropic prior variance
  double ess_threshold_fraction = 0.5;
  std::uint64_t rng_seed = 0;

  void validate() const;  // throws std::invalid_argument
};

struct PFStepOutput {
  WeightVector estimate;          // posterior mean
  double ess = 0.0;               // effective sample size after the update
  bool resampled = false;
  double predicted_output = 0.0;  // weighted mean of g over predicted particles
};

// Sub-streams per randomness role (see RngRole offsets).
struct PfRng {
  RngStream prior;
  RngStream propagation;
  RngStream resampling;

  explicit PfRng(std::uint64_t seed)
      : prior(make_stream(seed, RngRole::pf_prior)),
        propagation(make_stream(seed, RngRole::pf_propagation)),
        resampling(make_stream(seed, RngRole::pf_resampling)) {}
};

// N i.i.d. draws from N(prior_mean, prior_cov_scale * I), uniform weights.
ParticleEnsemble init_ensemble(const PFConfig& cfg, RngStream& prior_rng);

// Random-walk prediction: every particle perturbed with variance q per
// coordinate. Weights untouched. Noise is pre-drawn from `rng` in row-major
// particle order before any parallel section.
ParticleEnsemble predict_step(const ParticleEnsemble& ens, double q,
                              RngStream& rng, Exec exec = default_exec());

// Bayes update with Gaussian likelihood N(y; g(x,u), r): log-weights gain
// -(y - g)^2 / (2r); normalization is shift-invariant (max subtracted
// before exponentiation, so underflow of the whole ensemble is impossible).
ParticleEnsemble update_step(const ParticleEnsemble& ens,
                             const MeasurementModel& model,
                             const TrainingExample& example, double r,
                             Exec exec = default_exec());

// Degeneracy diagnostic 1 / sum(w_i^2), in [1, N].
double effective_sample_size(const ParticleEnsemble& ens);

// Low-variance resampling: one uniform offset u0 in [0, 1/N), selection
// points u0 + i/N against the cumulative weights. Resets weights to 1/N.
ParticleEnsemble systematic_resample(const ParticleEnsemble& ens, RngStream& rng,
                                     Exec exec = default_exec());

// Weighted mean of the particle rows (the MMSE estimate).
WeightVector posterior_mean(const ParticleEnsemble& ens,
                            Exec exec = default_exec());

// One full assimilation step: predict -> record predicted output ->
// update -> resample when ESS < threshold * N -> posterior mean.
std::pair<ParticleEnsemble, PFStepOutput> pf_step(
    const ParticleEnsemble& ens, const MeasurementModel& model,
    const TrainingExample& example, const PFConfig& cfg, PfRng& rng,
    Exec exec = default_exec());

}  // namespace pftrain
