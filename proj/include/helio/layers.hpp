// Layers with hand-written forward and backward passes.
#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "helio/random.hpp"
#include "helio/tensor.hpp"

namespace helio::nn {

enum class Mode { train, infer };

/// A differentiable stage. `backward` takes dLoss/dOutput of the most recent
/// `forward`, accumulates parameter gradients and returns dLoss/dInput.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor<T> forward(const Tensor<T>& input, Mode mode) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_output) = 0;

  virtual std::vector<Parameter<T>*> parameters() { return {}; }
  /// Non-trainable state that belongs in a checkpoint.
  virtual std::vector<std::pair<std::string, Tensor<T>*>> buffers() { return {}; }
  virtual std::string kind() const = 0;
};

/// Weight/bias init: uniform in +-1/sqrt(fan_in).
template <typename T>
Tensor<T> fan_in_uniform(Shape dims, std::size_t fan_in, Rng& rng);

/// 3x3 convolution, stride 1, zero padding 1. Input [N,C,H,W] -> [N,F,H,W].
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(const std::string& name, std::size_t in_channels, std::size_t filters, Rng& rng);

  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }
  std::string kind() const override { return "conv2d"; }

  /// The first layer of a network has no use for an input gradient.
  void set_input_grad(bool enabled) { input_grad_ = enabled; }

  std::size_t in_channels() const { return in_channels_; }
  std::size_t filters() const { return filters_; }
  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  std::size_t in_channels_;
  std::size_t filters_;
  Parameter<T> weight_;  // [F, C, 3, 3]
  Parameter<T> bias_;    // [F]
  Tensor<T> input_;
  bool have_input_ = false;
  bool input_grad_ = true;
};

/// Per-channel batch normalization over (N, H, W).
template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  static constexpr double kMomentum = 0.1;
  static constexpr double kEpsilon = 1e-5;

  BatchNorm2d(const std::string& name, std::size_t channels);

  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  std::vector<Parameter<T>*> parameters() override { return {&scale_, &shift_}; }
  std::vector<std::pair<std::string, Tensor<T>*>> buffers() override {
    return {{name_ + ".running_mean", &running_mean_}, {name_ + ".running_var", &running_var_}};
  }
  std::string kind() const override { return "batchnorm2d"; }

  Parameter<T>& scale() { return scale_; }
  Parameter<T>& shift() { return shift_; }
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }

 private:
  std::string name_;
  std::size_t channels_;
  Parameter<T> scale_;
  Parameter<T> shift_;
  Tensor<T> running_mean_;
  Tensor<T> running_var_;
  // Forward cache.
  Tensor<T> normalized_;
  std::vector<T> inv_std_;
  Mode mode_ = Mode::infer;
  bool have_cache_ = false;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  std::string kind() const override { return "relu"; }

 private:
  Tensor<T> output_;
  bool have_cache_ = false;
};

/// 2x2 max pooling, stride 2. Spatial extents must be even.
template <typename T>
class MaxPool2x2 final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  std::string kind() const override { return "maxpool2x2"; }

 private:
  Shape input_dims_;
  std::vector<std::size_t> argmax_;
};

/// [N, ...] -> [N, prod(...)].
template <typename T>
class Flatten final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  std::string kind() const override { return "flatten"; }

 private:
  Shape input_dims_;
};

/// Fully connected: [N, in] -> [N, out], weight stored [out, in].
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(const std::string& name, std::size_t in_features, std::size_t out_features, Rng& rng);

  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }
  std::string kind() const override { return "dense"; }

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  std::size_t in_;
  std::size_t out_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor<T> input_;
  bool have_input_ = false;
};

/// Inverted dropout: in training, zeroes with probability `rate` and scales
/// survivors by 1/(1-rate). Identity at inference.
template <typename T>
class Dropout final : public Layer<T> {
 public:
  Dropout(double rate, std::uint64_t seed);

  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  std::string kind() const override { return "dropout"; }

  /// While frozen, training-mode forwards reuse the last mask.
  void freeze_mask(bool frozen) { frozen_ = frozen; }
  void reseed(std::uint64_t seed) { rng_.seed(seed); }
  double rate() const { return rate_; }
  const std::vector<T>& mask() const { return mask_; }

 private:
  double rate_;
  Rng rng_;
  std::vector<T> mask_;
  bool frozen_ = false;
  bool applied_ = false;
};

}  // namespace helio::nn
