#pragma once

#include <cmath>

#include "dialtraffic/errors.hpp"
#include "dialtraffic/nn/mlp.hpp"

namespace dialtraffic::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

namespace detail {

inline void adam_update(Tensor& p, Matrix& m, Matrix& v, double lr, double c1, double c2, const AdamOptions& o) {
  const Matrix& g = *p.grad;
  m = o.beta1 * m + (1.0 - o.beta1) * g;
  v = o.beta2 * v + (1.0 - o.beta2) * g.cwiseProduct(g);
  p.value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + o.epsilon);
}

}  // namespace detail

/// One bias-corrected Adam step over every parameter of `params`, then clears
/// the gradients. All parameters must carry a gradient.
inline void adam_step(NetworkParams& params, double lr, const AdamOptions& opts = {}) {
  for (auto* t : params.parameters()) {
    if (!t->grad) throw UsageError("adam_step: a parameter has no gradient; run backward first");
  }
  params.step += 1;
  const double t = static_cast<double>(params.step);
  const double c1 = 1.0 - std::pow(opts.beta1, t);
  const double c2 = 1.0 - std::pow(opts.beta2, t);
  for (auto& l : params.layers) {
    detail::adam_update(l.weight, l.weight_m, l.weight_v, lr, c1, c2, opts);
    detail::adam_update(l.bias, l.bias_m, l.bias_v, lr, c1, c2, opts);
  }
  params.clear_grads();
}

}  // namespace dialtraffic::nn
