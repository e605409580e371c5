#pragma once

#include "dialtraffic/errors.hpp"
#include "dialtraffic/nn/graph.hpp"

namespace dialtraffic::nn {

/// Mean squared TD error over steps: mean_t (target_t - q_t)^2.
/// `q_taken` is an n x 1 tracked column; `targets` is treated as a constant.
inline Var td_loss(Graph& g, Var q_taken, const Matrix& targets) {
  const Matrix& q = g.value(q_taken);
  if (q.size() == 0) throw UsageError("td_loss: empty sequence");
  if (q.rows() != targets.rows() || q.cols() != targets.cols()) {
    throw DimensionError("td_loss: q " + shape_string(q) + " vs targets " + shape_string(targets));
  }
  return g.mean(g.square(g.sub(q_taken, g.constant(targets))));
}

}  // namespace dialtraffic::nn
