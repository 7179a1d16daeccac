#include "pftrain/networks.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace pftrain {

std::array<double, 5> henon_basis(std::span<const double> u) {
  if (u.size() != 2) {
    throw std::invalid_argument("henon_basis: expected input of length 2, got " +
                                std::to_string(u.size()));
  }
  const double u1 = u[0];
  const double u2 = u[1];
  return {1.0, u2, u2 * u2, u1, u1 * u1};
}

AffineFunctionalNetwork::AffineFunctionalNetwork(std::size_t weight_dim,
                                                 std::size_t input_dim,
                                                 BasisFn basis)
    : weight_dim_(weight_dim), input_dim_(input_dim), basis_(std::move(basis)) {
  if (weight_dim_ == 0 || input_dim_ == 0) {
    throw std::invalid_argument("AffineFunctionalNetwork: zero dimension");
  }
}

AffineFunctionalNetwork AffineFunctionalNetwork::henon_regressor() {
  return AffineFunctionalNetwork(
      5, 2, [](std::span<const double> input, std::span<double> features) {
        const auto row = henon_basis(input);
        for (std::size_t i = 0; i < row.size(); ++i) {
          features[i] = row[i];
        }
      });
}

void AffineFunctionalNetwork::basis(std::span<const double> input,
                                    std::span<double> features) const {
  if (input.size() != input_dim_) {
    throw std::invalid_argument("AffineFunctionalNetwork: input length " +
                                std::to_string(input.size()) + " != " +
                                std::to_string(input_dim_));
  }
  if (features.size() != weight_dim_) {
    throw std::invalid_argument("AffineFunctionalNetwork: feature buffer size");
  }
  basis_(input, features);
}

double AffineFunctionalNetwork::evaluate(std::span<const double> weights,
                                         std::span<const double> input) const {
  if (weights.size() != weight_dim_) {
    throw std::invalid_argument("AffineFunctionalNetwork: weight length " +
                                std::to_string(weights.size()) + " != " +
                                std::to_string(weight_dim_));
  }
  // Stack buffer covers every practical regressor width.
  constexpr std::size_t kMaxStack = 64;
  double stack[kMaxStack];
  std::vector<double> heap;
  std::span<double> features;
  if (weight_dim_ <= kMaxStack) {
    features = {stack, weight_dim_};
  } else {
    heap.resize(weight_dim_);
    features = heap;
  }
  basis(input, features);
  double acc = 0.0;
  for (std::size_t i = 0; i < weight_dim_; ++i) {
    acc += features[i] * weights[i];
  }
  return acc;
}

double affine_forward(const AffineFunctionalNetwork& net, const WeightVector& x,
                      std::span<const double> input) {
  return net.evaluate(x, input);
}

std::size_t mlp_weight_dim(std::span<const std::size_t> layer_sizes) {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("mlp_weight_dim: need at least two layers");
  }
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    if (layer_sizes[l] == 0 || layer_sizes[l + 1] == 0) {
      throw std::invalid_argument("mlp_weight_dim: zero layer width");
    }
    total += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return total;
}

MultiLayerPerceptron::MultiLayerPerceptron(std::vector<std::size_t> layer_sizes)
    : layer_sizes_(std::move(layer_sizes)) {
  if (layer_sizes_.size() < 2) {
    throw std::invalid_argument("MultiLayerPerceptron: need at least two layers");
  }
  if (layer_sizes_.back() != 1) {
    throw std::invalid_argument("MultiLayerPerceptron: output must be scalar");
  }
  weight_dim_ = mlp_weight_dim(layer_sizes_);
  for (const std::size_t w : layer_sizes_) {
    max_width_ = std::max(max_width_, w);
  }
}

double MultiLayerPerceptron::evaluate(std::span<const double> weights,
                                      std::span<const double> input) const {
  if (weights.size() != weight_dim_) {
    throw std::invalid_argument("MultiLayerPerceptron: weight length " +
                                std::to_string(weights.size()) + " != " +
                                std::to_string(weight_dim_));
  }
  if (input.size() != layer_sizes_.front()) {
    throw std::invalid_argument("MultiLayerPerceptron: input length " +
                                std::to_string(input.size()) + " != " +
                                std::to_string(layer_sizes_.front()));
  }
  constexpr std::size_t kMaxStack = 64;
  double buf_a[kMaxStack];
  double buf_b[kMaxStack];
  std::vector<double> heap_a, heap_b;
  std::span<double> cur, next;
  if (max_width_ <= kMaxStack) {
    cur = {buf_a, max_width_};
    next = {buf_b, max_width_};
  } else {
    heap_a.resize(max_width_);
    heap_b.resize(max_width_);
    cur = heap_a;
    next = heap_b;
  }

  for (std::size_t i = 0; i < input.size(); ++i) {
    cur[i] = input[i];
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    const std::size_t fan_in = layer_sizes_[l];
    const std::size_t fan_out = layer_sizes_[l + 1];
    const double* w = weights.data() + offset;
    const double* b = w + fan_in * fan_out;
    for (std::size_t o = 0; o < fan_out; ++o) {
      double acc = b[o];
      const double* row = w + o * fan_in;
      for (std::size_t i = 0; i < fan_in; ++i) {
        acc += row[i] * cur[i];
      }
      next[o] = (l + 2 < layer_sizes_.size()) ? std::tanh(acc) : acc;
    }
    std::swap(cur, next);
    offset += fan_in * fan_out + fan_out;
  }
  return cur[0];
}

double mlp_forward(const MultiLayerPerceptron& net, const WeightVector& x,
                   std::span<const double> input) {
  return net.evaluate(x, input);
}

WeightVector pack_mlp_weights(std::span<const LayerParams> layers,
                              std::span<const std::size_t> layer_sizes) {
  if (layers.size() + 1 != layer_sizes.size()) {
    throw std::invalid_argument("pack_mlp_weights: layer count mismatch");
  }
  WeightVector x;
  x.reserve(mlp_weight_dim(layer_sizes));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::size_t fan_in = layer_sizes[l];
    const std::size_t fan_out = layer_sizes[l + 1];
    if (layers[l].weights.size() != fan_in * fan_out) {
      throw std::invalid_argument("pack_mlp_weights: weight matrix shape at layer " +
                                  std::to_string(l));
    }
    if (layers[l].bias.size() != fan_out) {
      throw std::invalid_argument("pack_mlp_weights: bias length at layer " +
                                  std::to_string(l));
    }
    x.insert(x.end(), layers[l].weights.begin(), layers[l].weights.end());
    x.insert(x.end(), layers[l].bias.begin(), layers[l].bias.end());
  }
  return x;
}

std::vector<LayerParams> unpack_mlp_weights(
    const WeightVector& x, std::span<const std::size_t> layer_sizes) {
  if (x.size() != mlp_weight_dim(layer_sizes)) {
    throw std::invalid_argument("unpack_mlp_weights: flat length " +
                                std::to_string(x.size()) + " != expected " +
                                std::to_string(mlp_weight_dim(layer_sizes)));
  }
  std::vector<LayerParams> layers;
  layers.reserve(layer_sizes.size() - 1);
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t fan_in = layer_sizes[l];
    const std::size_t fan_out = layer_sizes[l + 1];
    LayerParams p;
    p.weights.assign(x.begin() + offset, x.begin() + offset + fan_in * fan_out);
    offset += fan_in * fan_out;
    p.bias.assign(x.begin() + offset, x.begin() + offset + fan_out);
    offset += fan_out;
    layers.push_back(std::move(p));
  }
  return layers;
}

}  // namespace pftrain
