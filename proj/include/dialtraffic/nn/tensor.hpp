#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dialtraffic::nn {

/// Row-major dense matrix of doubles. Batches are laid out one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return "[" + std::to_string(rows) + " x " + std::to_string(cols) + "]";
}

inline std::string shape_string(const Matrix& m) { return shape_string(m.rows(), m.cols()); }

/// A 2-D tensor of values with an optional same-shape gradient. The gradient is
/// only present while something is accumulating into it.
struct Tensor {
  Matrix value;
  std::optional<Matrix> grad;

  Tensor() = default;
  explicit Tensor(Matrix v) : value(std::move(v)) {}

  static Tensor zeros(Eigen::Index rows, Eigen::Index cols) { return Tensor(Matrix::Zero(rows, cols)); }

  std::vector<std::size_t> shape() const {
    return {static_cast<std::size_t>(value.rows()), static_cast<std::size_t>(value.cols())};
  }
  std::size_t numel() const { return static_cast<std::size_t>(value.size()); }

  void accumulate_grad(const Matrix& g) {
    if (!grad) grad = Matrix::Zero(value.rows(), value.cols());
    *grad += g;
  }
  void clear_grad() { grad.reset(); }
};

}  // namespace dialtraffic::nn
