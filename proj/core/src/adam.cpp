#include "neid/adam.hpp"

#include <cmath>

namespace neid {

template <typename T>
void adam_step(ParamMap<T>& params, const ParamMap<T>& grads,
               AdamState<T>& state, double lr, const AdamHyper& hyper) {
  if (grads.size() != params.size()) {
    throw KeyMismatch("adam_step: gradient map size differs from params");
  }
  for (auto& [name, theta] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) throw KeyMismatch("adam_step: missing gradient for " + name);
    if (!git->second.same_shape(theta)) {
      throw KeyMismatch("adam_step: gradient shape mismatch for " + name);
    }
  }

  if (state.m.empty()) {
    for (const auto& [name, theta] : params) {
      state.m.emplace(name, Tensor<T>::zeros_like(theta));
      state.v.emplace(name, Tensor<T>::zeros_like(theta));
    }
  }

  state.step += 1;
  const double b1 = hyper.beta1;
  const double b2 = hyper.beta2;
  const T corr1 = static_cast<T>(1.0 - std::pow(b1, static_cast<double>(state.step)));
  const T corr2 = static_cast<T>(1.0 - std::pow(b2, static_cast<double>(state.step)));
  const T tb1 = static_cast<T>(b1);
  const T tb2 = static_cast<T>(b2);
  const T tlr = static_cast<T>(lr);
  const T teps = static_cast<T>(hyper.eps);

  for (auto& [name, theta] : params) {
    const Tensor<T>& g = grads.at(name);
    Tensor<T>& m = state.m.at(name);
    Tensor<T>& v = state.v.at(name);
    T* mp = m.data.data();
    T* vp = v.data.data();
    T* tp = theta.data.data();
    const T* gp = g.data.data();
    const std::int64_t count = theta.size();
    for (std::int64_t i = 0; i < count; ++i) {
      mp[i] = tb1 * mp[i] + (T(1) - tb1) * gp[i];
      vp[i] = tb2 * vp[i] + (T(1) - tb2) * gp[i] * gp[i];
      const T m_hat = mp[i] / corr1;
      const T v_hat = vp[i] / corr2;
      tp[i] -= tlr * m_hat / (std::sqrt(v_hat) + teps);
    }
  }
}

template void adam_step<float>(ParamMap<float>&, const ParamMap<float>&,
                               AdamState<float>&, double, const AdamHyper&);
template void adam_step<double>(ParamMap<double>&, const ParamMap<double>&,
                                AdamState<double>&, double, const AdamHyper&);

}  // namespace neid
