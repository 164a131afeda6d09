// Nowcast and forecast networks built from the numcore layers.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "helio/htns.hpp"
#include "helio/layers.hpp"
#include "helio/optim.hpp"

namespace helio::model {

enum class Task { nowcast, forecast };

Task parse_task(const std::string& name);
std::string task_name(Task task);

struct NowcastConfig {
  std::size_t image_side = 64;
  std::array<std::size_t, 2> conv_filters{24, 48};
  std::size_t dense_units = 1024;
  double dropout = 0.4;
  std::size_t feature_length = 0;  ///< meteorological + sun scalars

  void validate() const;
};

struct ForecastConfig {
  NowcastConfig base;
  int history_minutes = 15;
  int interval_minutes = 1;
  int horizon_minutes = 15;
  std::size_t frames = 16;
  std::size_t pv_history_length = 16;

  void validate() const;
};

/// Everything needed to rebuild a network: the task plus its config. For a
/// nowcast model only `config.base` is used.
struct ModelConfig {
  Task task = Task::nowcast;
  ForecastConfig config;
};

/// Input layout of the shared trunk+head.
struct NetworkShape {
  std::size_t input_channels = 3;
  std::size_t image_side = 64;
  std::array<std::size_t, 2> conv_filters{24, 48};
  std::size_t dense_units = 1024;
  double dropout = 0.4;
  std::size_t extra_features = 0;  ///< scalars concatenated after the flattened trunk

  std::size_t trunk_width() const { return conv_filters[1] * (image_side / 4) * (image_side / 4); }
  std::size_t concat_width() const { return trunk_width() + extra_features; }
};

NetworkShape nowcast_shape(const NowcastConfig& config);
/// Frames stacked along channels; PV history precedes the met/sun features.
NetworkShape forecast_shape(const ForecastConfig& config);
NetworkShape network_shape(const ModelConfig& config);

/// conv(F1) -> BN -> ReLU -> pool -> conv(F2) -> BN -> ReLU -> pool -> flatten
/// -> concat(extras) -> [dense -> ReLU -> dropout] x2 -> dense(1).
template <typename T>
class Network {
 public:
  Network(const NetworkShape& shape, std::uint64_t seed);

  /// images [N, C, S, S], extras [N, E] (ignored when E = 0). Returns [N, 1].
  /// In infer mode every sample is evaluated on its own, so a prediction
  /// never depends on the rest of the batch.
  Tensor<T> forward(const Tensor<T>& images, const Tensor<T>& extras, nn::Mode mode);

  /// Accumulates parameter gradients for the last training-mode forward.
  void backward(const Tensor<T>& grad_prediction);

  std::vector<Parameter<T>*> parameters();
  std::vector<std::pair<std::string, Tensor<T>*>> buffers();
  void zero_grad();
  std::size_t parameter_count();

  const NetworkShape& shape() const { return shape_; }
  std::array<nn::Dropout<T>*, 2> dropouts() { return {&drop1_, &drop2_}; }
  /// Layer kinds in evaluation order, for structural comparisons.
  std::vector<std::string> layer_kinds() const;

  htns::Container to_container(htns::DType dtype);
  void load(const htns::Container& container);

  /// Copies parameters and running statistics from a network of equal shape.
  template <typename U>
  void copy_from(Network<U>& other);

 private:
  Network(const NetworkShape& shape, std::uint64_t seed, Rng rng);
  Tensor<T> forward_batch(const Tensor<T>& images, const Tensor<T>& extras, nn::Mode mode);

  NetworkShape shape_;
  nn::Conv2d<T> conv1_;
  nn::BatchNorm2d<T> bn1_;
  nn::ReLU<T> relu1_;
  nn::MaxPool2x2<T> pool1_;
  nn::Conv2d<T> conv2_;
  nn::BatchNorm2d<T> bn2_;
  nn::ReLU<T> relu2_;
  nn::MaxPool2x2<T> pool2_;
  nn::Flatten<T> flatten_;
  nn::Dense<T> fc1_;
  nn::ReLU<T> relu3_;
  nn::Dropout<T> drop1_;
  nn::Dense<T> fc2_;
  nn::ReLU<T> relu4_;
  nn::Dropout<T> drop2_;
  nn::Dense<T> out_;
  bool trained_forward_ = false;
};

struct Prediction {
  double pv_power_kw = 0.0;
};

/// Single-sample nowcast: image [3, S, S] scaled to [0, 1].
template <typename T>
Prediction nowcast_forward(Network<T>& net, const NowcastConfig& config, const Tensor<T>& image,
                           std::span<const double> features);

/// Single-sample forecast: frames [16, 3, S, S] or channel-stacked [48, S, S].
template <typename T>
Prediction forecast_forward(Network<T>& net, const ForecastConfig& config, const Tensor<T>& frames,
                            std::span<const double> pv_history, std::span<const double> features);

/// Training data accessed by index.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual std::size_t image_channels() const = 0;
  virtual std::size_t image_side() const = 0;
  virtual std::size_t extra_width() const = 0;
  /// Writes samples `indices` into row-major buffers sized for the batch.
  virtual void gather(std::span<const std::size_t> indices, float* images, float* extras, float* targets) const = 0;
};

/// Dense samples held in memory.
class InMemorySource final : public SampleSource {
 public:
  InMemorySource(std::size_t channels, std::size_t side, std::size_t extra_width);

  void add(std::span<const float> image, std::span<const float> extras, float target);

  std::size_t size() const override { return targets_.size(); }
  std::size_t image_channels() const override { return channels_; }
  std::size_t image_side() const override { return side_; }
  std::size_t extra_width() const override { return extra_width_; }
  void gather(std::span<const std::size_t> indices, float* images, float* extras, float* targets) const override;

 private:
  std::size_t channels_, side_, extra_width_;
  std::vector<float> images_, extras_, targets_;
};

/// Batch tensors for `indices`.
template <typename T>
struct Batch {
  Tensor<T> images;
  Tensor<T> extras;  ///< empty when the source has no extras
  Tensor<T> targets;  ///< [N, 1]
};

template <typename T>
Batch<T> make_batch(const SampleSource& source, std::span<const std::size_t> indices);

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double learning_rate = 3e-6;
};

template <typename T>
struct TrainResult {
  std::vector<double> loss_trace;  ///< sample-weighted mean training loss per epoch
  nn::AdamState<T> optimizer;
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

/// Adam/MSE training with a seeded shuffle each epoch. A trailing batch of
/// one sample is merged into the previous batch (batch norm needs two).
template <typename T>
TrainResult<T> train(Network<T>& net, const SampleSource& data, const TrainOptions& options,
                     const EpochCallback& on_epoch = {});

/// Inference-mode predictions for every sample, in order.
template <typename T>
std::vector<double> predict_all(Network<T>& net, const SampleSource& data, std::size_t chunk = 64);

/// Inference-mode mean squared error over the whole source.
template <typename T>
double evaluate_mse(Network<T>& net, const SampleSource& data);

/// Adam moments in HTNS layout: "adam.m/<param>", "adam.v/<param>",
/// "adam.step" and "adam.hyper" = [lr, beta1, beta2, epsilon].
template <typename T>
htns::Container adam_to_container(const nn::AdamState<T>& state, htns::DType dtype);
template <typename T>
nn::AdamState<T> adam_from_container(const htns::Container& container);

}  // namespace helio::model
