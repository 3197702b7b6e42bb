#pragma once

#include <cstdint>

#include "neid/tensor.hpp"

namespace neid {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  ParamMap<T> m;  // first moments
  ParamMap<T> v;  // second moments
  std::int64_t step = 0;
};

/// One bias-corrected Adam update:
/// m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2;
/// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
/// Moments are created lazily (zeros) on the first step. Throws KeyMismatch
/// when grads and params do not carry identical names and shapes.
template <typename T>
void adam_step(ParamMap<T>& params, const ParamMap<T>& grads,
               AdamState<T>& state, double lr, const AdamHyper& hyper);

}  // namespace neid
