#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dialtraffic/errors.hpp"
#include "dialtraffic/nn/graph.hpp"
#include "dialtraffic/nn/tensor.hpp"
#include "dialtraffic/rng.hpp"

namespace dialtraffic::nn {

/// One affine layer plus its Adam moment accumulators.
struct DenseLayer {
  Tensor weight;  // out x in
  Tensor bias;    // 1 x out
  Matrix weight_m, weight_v;
  Matrix bias_m, bias_v;

  DenseLayer() = default;
  DenseLayer(Eigen::Index in, Eigen::Index out)
      : weight(Tensor::zeros(out, in)),
        bias(Tensor::zeros(1, out)),
        weight_m(Matrix::Zero(out, in)),
        weight_v(Matrix::Zero(out, in)),
        bias_m(Matrix::Zero(1, out)),
        bias_v(Matrix::Zero(1, out)) {}

  Eigen::Index in_width() const { return weight.value.cols(); }
  Eigen::Index out_width() const { return weight.value.rows(); }
};

/// Parameters of a fully connected network: ReLU on every hidden layer, linear
/// output. `step` is the Adam step counter.
struct NetworkParams {
  std::vector<DenseLayer> layers;
  std::uint64_t step = 0;

  /// Zero-initialised network with the given layer widths (input first).
  static NetworkParams zeros(std::span<const std::size_t> widths) {
    if (widths.size() < 2) throw DimensionError("a network needs at least an input and an output width");
    NetworkParams p;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      p.layers.emplace_back(static_cast<Eigen::Index>(widths[i]), static_cast<Eigen::Index>(widths[i + 1]));
    }
    return p;
  }

  /// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
  static NetworkParams uniform(std::span<const std::size_t> widths, Rng& rng) {
    NetworkParams p = zeros(widths);
    for (auto& layer : p.layers) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_width()));
      Matrix& w = layer.weight.value;
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
    }
    return p;
  }

  Eigen::Index input_width() const { return layers.front().in_width(); }
  Eigen::Index output_width() const { return layers.back().out_width(); }

  std::vector<std::pair<std::size_t, std::size_t>> layer_shapes() const {
    std::vector<std::pair<std::size_t, std::size_t>> s;
    for (const auto& l : layers) s.emplace_back(l.out_width(), l.in_width());
    return s;
  }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> ps;
    for (auto& l : layers) {
      ps.push_back(&l.weight);
      ps.push_back(&l.bias);
    }
    return ps;
  }

  void clear_grads() {
    for (auto* t : parameters()) t->clear_grad();
  }

  /// Checks the chaining and moment-shape invariants.
  void validate() const {
    if (layers.empty()) throw DimensionError("network has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.bias.value.rows() != 1 || l.bias.value.cols() != l.out_width())
        throw DimensionError("layer " + std::to_string(i) + " bias " + shape_string(l.bias.value) +
                             " does not match weight " + shape_string(l.weight.value));
      if (l.weight_m.rows() != l.out_width() || l.weight_m.cols() != l.in_width() ||
          l.weight_v.rows() != l.out_width() || l.weight_v.cols() != l.in_width() ||
          l.bias_m.cols() != l.out_width() || l.bias_v.cols() != l.out_width())
        throw DimensionError("layer " + std::to_string(i) + " optimizer moments do not match parameters");
      if (i + 1 < layers.size() && l.out_width() != layers[i + 1].in_width())
        throw DimensionError("layer " + std::to_string(i) + " output width " + std::to_string(l.out_width()) +
                             " != layer " + std::to_string(i + 1) + " input width " +
                             std::to_string(layers[i + 1].in_width()));
    }
  }
};

/// y = x·Wᵀ + b, untracked.
inline Matrix linear_forward(const Matrix& x, const DenseLayer& layer) {
  const Matrix& w = layer.weight.value;
  if (x.cols() != w.cols()) {
    throw DimensionError("linear: input " + shape_string(x) + " does not match weight " + shape_string(w));
  }
  Matrix y(x.rows(), w.rows());
  y.noalias() = x * w.transpose();
  y.rowwise() += layer.bias.value.row(0);
  return y;
}

/// Tracked linear layer; the layer's tensors become graph parameters.
inline Var linear_forward(Graph& g, Var x, DenseLayer& layer) {
  return g.linear(x, g.parameter(layer.weight), g.parameter(layer.bias));
}

/// Forward pass over a batch (one sample per row), untracked.
inline Matrix mlp_forward(const Matrix& input, const NetworkParams& params) {
  Matrix h = input;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    h = linear_forward(h, params.layers[i]);
    if (i + 1 < params.layers.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

inline Var mlp_forward(Graph& g, Var input, NetworkParams& params) {
  Var h = input;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    h = linear_forward(g, h, params.layers[i]);
    if (i + 1 < params.layers.size()) h = g.relu(h);
  }
  return h;
}

}  // namespace dialtraffic::nn
