#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pftrain {

// Deterministic random stream: mt19937_64 plus an in-house Box-Muller
// transform. The engine is bit-stable per the C++ standard and the normal
// transform is pinned here (std::normal_distribution is implementation
// defined), so a seed reproduces the same draw sequence on any platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1), 53-bit resolution.
  double uniform_unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Standard normal draw. Consumes exactly two uniforms per pair.
  double standard_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 =
        (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * pi() * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  static constexpr double pi() { return 3.141592653589793238462643383279502884; }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// One experiment seed governs every randomness source through fixed role
// offsets, so each source is independently reproducible.
enum class RngRole : std::uint64_t {
  dataset_noise = 1,
  pf_prior = 2,
  pf_propagation = 3,
  pf_resampling = 4,
};

inline RngStream make_stream(std::uint64_t seed, RngRole role) {
  return RngStream(seed + static_cast<std::uint64_t>(role));
}

}  // namespace pftrain
