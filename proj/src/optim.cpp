#include "helio/optim.hpp"

#include <cmath>

namespace helio::nn {

template <typename T>
LossResult<T> mse_loss(const Tensor<T>& prediction, const Tensor<T>& target) {
  if (prediction.dims() != target.dims()) {
    throw ShapeError("mse_loss: prediction " + shape_string(prediction.dims()) + " vs target " +
                     shape_string(target.dims()));
  }
  const double n = static_cast<double>(prediction.size());
  LossResult<T> r{0.0, Tensor<T>(prediction.dims())};
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double d = static_cast<double>(prediction[i]) - static_cast<double>(target[i]);
    r.loss += d * d;
    r.grad[i] = static_cast<T>(2.0 * d / n);
  }
  r.loss /= n;
  return r;
}

template <typename T>
AdamState<T> AdamState<T>::create(std::span<Parameter<T>* const> params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto* p : params) {
    s.names.push_back(p->name);
    s.first_moment.emplace_back(p->value.dims());
    s.second_moment.emplace_back(p->value.dims());
  }
  return s;
}

template <typename T>
void adam_step(std::span<Parameter<T>* const> params, AdamState<T>& state) {
  if (params.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but state tracks " +
                     std::to_string(state.first_moment.size()));
  }
  const auto& c = state.config;
  const std::uint64_t t = state.step + 1;
  const double corr1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double corr2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<T>& p = *params[k];
    Tensor<T>& m = state.first_moment[k];
    Tensor<T>& v = state.second_moment[k];
    if (p.value.dims() != m.dims() || p.grad.dims() != m.dims()) {
      throw ShapeError("adam_step: shape mismatch for " + p.name);
    }
    T* w = p.value.raw();
    const T* g = p.grad.raw();
    T* mm = m.raw();
    T* vv = v.raw();
    const std::size_t n = m.size();
    const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
    const T ob1 = static_cast<T>(1.0 - c.beta1), ob2 = static_cast<T>(1.0 - c.beta2);
    const T step_size = static_cast<T>(c.learning_rate / corr1);
    const T inv_corr2 = static_cast<T>(1.0 / corr2);
    const T eps = static_cast<T>(c.epsilon);
    for (std::size_t i = 0; i < n; ++i) {
      const T mi = b1 * mm[i] + ob1 * g[i];
      const T vi = b2 * vv[i] + ob2 * g[i] * g[i];
      mm[i] = mi;
      vv[i] = vi;
      w[i] -= step_size * mi / (std::sqrt(vi * inv_corr2) + eps);
    }
  }
  state.step = t;
}

template LossResult<float> mse_loss(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> mse_loss(const Tensor<double>&, const Tensor<double>&);
template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(std::span<Parameter<float>* const>, AdamState<float>&);
template void adam_step(std::span<Parameter<double>* const>, AdamState<double>&);

}  // namespace helio::nn
