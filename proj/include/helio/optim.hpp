// Mean squared error and the Adam optimizer.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "helio/tensor.hpp"

namespace helio::nn {

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;  ///< dLoss/dPrediction
};

/// mean((pred - target)^2) and its gradient 2 (pred - target) / N.
template <typename T>
LossResult<T> mse_loss(const Tensor<T>& prediction, const Tensor<T>& target);

struct AdamConfig {
  double learning_rate = 3e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for one parameter list, in the same order.
template <typename T>
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::string> names;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;

  static AdamState create(std::span<Parameter<T>* const> params, AdamConfig config);
};

/// One bias-corrected Adam update using each parameter's `grad`.
template <typename T>
void adam_step(std::span<Parameter<T>* const> params, AdamState<T>& state);

}  // namespace helio::nn
