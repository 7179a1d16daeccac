#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "pftrain/model.hpp"

namespace pftrain {

// Feature row for the two-delay quadratic regressor:
// [1, u2, u2^2, u1, u1^2]. Weight order matches
// x = col{c11+c21, c12, c13, c22, c23}.
std::array<double, 5> henon_basis(std::span<const double> u);

// Network affine in its weights: g(x, u) = dot(C(u), x). The constant term
// rides inside C(u) as a leading 1.
class AffineFunctionalNetwork final : public MeasurementModel {
 public:
  using BasisFn =
      std::function<void(std::span<const double> input, std::span<double> features)>;

  AffineFunctionalNetwork(std::size_t weight_dim, std::size_t input_dim,
                          BasisFn basis);

  // The d=5, m=2 regressor that reproduces the Henon recursion.
  static AffineFunctionalNetwork henon_regressor();

  std::size_t weight_dim() const override { return weight_dim_; }
  std::size_t input_dim() const override { return input_dim_; }

  // Writes C(u) into `features` (length weight_dim).
  void basis(std::span<const double> input, std::span<double> features) const;

  double evaluate(std::span<const double> weights,
                  std::span<const double> input) const override;

 private:
  std::size_t weight_dim_;
  std::size_t input_dim_;
  BasisFn basis_;
};

// Per-layer parameters: row-major weight matrix (fan_out x fan_in) followed
// by the bias vector. This is also the flat packing order.
struct LayerParams {
  std::vector<double> weights;
  std::vector<double> bias;
};

// Feed-forward net, tanh hidden activations, identity output. Genuinely
// nonlinear in its weights; exists to show the filter trains without any
// derivative information.
class MultiLayerPerceptron final : public MeasurementModel {
 public:
  // layer_sizes = [input_dim, hidden..., 1].
  explicit MultiLayerPerceptron(std::vector<std::size_t> layer_sizes);

  std::size_t weight_dim() const override { return weight_dim_; }
  std::size_t input_dim() const override { return layer_sizes_.front(); }
  const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }

  double evaluate(std::span<const double> weights,
                  std::span<const double> input) const override;

 private:
  std::vector<std::size_t> layer_sizes_;
  std::size_t weight_dim_ = 0;
  std::size_t max_width_ = 0;
};

double mlp_forward(const MultiLayerPerceptron& net, const WeightVector& x,
                   std::span<const double> input);
double affine_forward(const AffineFunctionalNetwork& net, const WeightVector& x,
                      std::span<const double> input);

// Flat layout: layer by layer, row-major weights then bias. pack/unpack are
// exact inverses.
WeightVector pack_mlp_weights(std::span<const LayerParams> layers,
                              std::span<const std::size_t> layer_sizes);
std::vector<LayerParams> unpack_mlp_weights(const WeightVector& x,
                                            std::span<const std::size_t> layer_sizes);

// Total parameter count sum(fan_in * fan_out + fan_out).
std::size_t mlp_weight_dim(std::span<const std::size_t> layer_sizes);

}  // namespace pftrain
