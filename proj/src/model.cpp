#include "helio/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helio/random.hpp"

namespace helio::model {

Task parse_task(const std::string& name) {
  if (name == "nowcast") return Task::nowcast;
  if (name == "forecast") return Task::forecast;
  throw UsageError("unknown task '" + name + "' (expected nowcast or forecast)");
}

std::string task_name(Task task) { return task == Task::nowcast ? "nowcast" : "forecast"; }

void NowcastConfig::validate() const {
  if (image_side == 0 || image_side % 4 != 0) throw RangeError("image side must be a positive multiple of 4");
  if (conv_filters[0] == 0 || conv_filters[1] == 0 || dense_units == 0) {
    throw RangeError("layer widths must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw RangeError("dropout must lie in [0, 1)");
}

void ForecastConfig::validate() const {
  base.validate();
  if (interval_minutes <= 0 || history_minutes < 0) throw RangeError("history spacing must be positive");
  if (horizon_minutes <= 0) throw RangeError("forecast horizon must be positive");
  if (history_minutes % interval_minutes != 0 ||
      frames != static_cast<std::size_t>(history_minutes / interval_minutes + 1)) {
    throw RangeError("frame count must equal history/interval + 1");
  }
  if (pv_history_length != frames) throw RangeError("PV history length must equal the frame count");
}

NetworkShape nowcast_shape(const NowcastConfig& config) {
  config.validate();
  return {3, config.image_side, config.conv_filters, config.dense_units, config.dropout, config.feature_length};
}

NetworkShape forecast_shape(const ForecastConfig& config) {
  config.validate();
  const auto& b = config.base;
  return {3 * config.frames, b.image_side, b.conv_filters, b.dense_units, b.dropout,
          config.pv_history_length + b.feature_length};
}

NetworkShape network_shape(const ModelConfig& config) {
  return config.task == Task::nowcast ? nowcast_shape(config.config.base) : forecast_shape(config.config);
}

namespace {

Rng& init_rng(Rng& rng, std::uint64_t seed) {
  rng.seed(seed);
  return rng;
}

}  // namespace

// Members are initialized in declaration order, so all weights draw from one
// seeded stream in layer order.
template <typename T>
Network<T>::Network(const NetworkShape& shape, std::uint64_t seed)
    : Network(shape, seed, Rng{}) {}

template <typename T>
Network<T>::Network(const NetworkShape& shape, std::uint64_t seed, Rng rng)
    : shape_(shape),
      conv1_("conv1", shape.input_channels, shape.conv_filters[0], init_rng(rng, seed)),
      bn1_("bn1", shape.conv_filters[0]),
      conv2_("conv2", shape.conv_filters[0], shape.conv_filters[1], rng),
      bn2_("bn2", shape.conv_filters[1]),
      fc1_("fc1", shape.concat_width(), shape.dense_units, rng),
      drop1_(shape.dropout, seed ^ 0x9e3779b97f4a7c15ULL),
      fc2_("fc2", shape.dense_units, shape.dense_units, rng),
      drop2_(shape.dropout, seed ^ 0xc2b2ae3d27d4eb4fULL),
      out_("out", shape.dense_units, 1, rng) {
  if (shape.image_side == 0 || shape.image_side % 4 != 0) {
    throw RangeError("image side must be a positive multiple of 4");
  }
  conv1_.set_input_grad(false);
}

template <typename T>
Tensor<T> Network<T>::forward_batch(const Tensor<T>& images, const Tensor<T>& extras, nn::Mode mode) {
  Tensor<T> h = conv1_.forward(images, mode);
  h = relu1_.forward(bn1_.forward(h, mode), mode);
  h = pool1_.forward(h, mode);
  h = conv2_.forward(h, mode);
  h = relu2_.forward(bn2_.forward(h, mode), mode);
  h = pool2_.forward(h, mode);
  h = flatten_.forward(h, mode);

  const std::size_t n = images.dim(0);
  const std::size_t tw = shape_.trunk_width(), ew = shape_.extra_features;
  Tensor<T> z({n, tw + ew});
  for (std::size_t s = 0; s < n; ++s) {
    std::copy_n(h.raw() + s * tw, tw, z.raw() + s * (tw + ew));
    if (ew) std::copy_n(extras.raw() + s * ew, ew, z.raw() + s * (tw + ew) + tw);
  }
  Tensor<T> d = drop1_.forward(relu3_.forward(fc1_.forward(z, mode), mode), mode);
  d = drop2_.forward(relu4_.forward(fc2_.forward(d, mode), mode), mode);
  return out_.forward(d, mode);
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& images, const Tensor<T>& extras, nn::Mode mode) {
  const std::size_t side = shape_.image_side;
  if (images.rank() != 4 || images.dim(1) != shape_.input_channels || images.dim(2) != side || images.dim(3) != side) {
    throw ShapeError("network: expected images [N," + std::to_string(shape_.input_channels) + "," +
                     std::to_string(side) + "," + std::to_string(side) + "], got " + shape_string(images.dims()));
  }
  const std::size_t n = images.dim(0);
  if (shape_.extra_features > 0) {
    require_shape(extras, {n, shape_.extra_features}, "network extras");
  } else if (!extras.empty()) {
    throw ShapeError("network: expects no extra features, got " + shape_string(extras.dims()));
  }

  if (mode == nn::Mode::train) {
    trained_forward_ = true;
    return forward_batch(images, extras, mode);
  }
  trained_forward_ = false;
  const std::size_t per_image = images.size() / n;
  const std::size_t ew = shape_.extra_features;
  Tensor<T> out({n, 1});
  for (std::size_t s = 0; s < n; ++s) {
    Tensor<T> one({1, shape_.input_channels, side, side},
                  AlignedVector<T>(images.raw() + s * per_image, images.raw() + (s + 1) * per_image));
    Tensor<T> one_extra;
    if (ew) one_extra = Tensor<T>({1, ew}, AlignedVector<T>(extras.raw() + s * ew, extras.raw() + (s + 1) * ew));
    out[s] = forward_batch(one, one_extra, mode)[0];
  }
  return out;
}

template <typename T>
void Network<T>::backward(const Tensor<T>& grad_prediction) {
  if (!trained_forward_) throw StateError("network: backward requires a preceding training-mode forward");
  Tensor<T> g = out_.backward(grad_prediction);
  g = fc2_.backward(relu4_.backward(drop2_.backward(g)));
  g = fc1_.backward(relu3_.backward(drop1_.backward(g)));

  const std::size_t n = g.dim(0);
  const std::size_t tw = shape_.trunk_width(), ew = shape_.extra_features;
  Tensor<T> gt({n, tw});
  for (std::size_t s = 0; s < n; ++s) std::copy_n(g.raw() + s * (tw + ew), tw, gt.raw() + s * tw);

  Tensor<T> h = flatten_.backward(gt);
  h = pool2_.backward(h);
  h = bn2_.backward(relu2_.backward(h));
  h = conv2_.backward(h);
  h = pool1_.backward(h);
  h = bn1_.backward(relu1_.backward(h));
  conv1_.backward(h);
}

template <typename T>
std::vector<Parameter<T>*> Network<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (nn::Layer<T>* layer : std::initializer_list<nn::Layer<T>*>{&conv1_, &bn1_, &conv2_, &bn2_, &fc1_, &fc2_, &out_}) {
    for (auto* p : layer->parameters()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> Network<T>::buffers() {
  auto out = bn1_.buffers();
  for (auto& b : bn2_.buffers()) out.push_back(b);
  return out;
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <typename T>
std::size_t Network<T>::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += p->value.size();
  return n;
}

template <typename T>
std::vector<std::string> Network<T>::layer_kinds() const {
  return {conv1_.kind(), bn1_.kind(),     relu1_.kind(), pool1_.kind(), conv2_.kind(), bn2_.kind(),
          relu2_.kind(), pool2_.kind(),   flatten_.kind(), "concat",    fc1_.kind(),   relu3_.kind(),
          drop1_.kind(), fc2_.kind(),     relu4_.kind(), drop2_.kind(), out_.kind()};
}

template <typename T>
htns::Container Network<T>::to_container(htns::DType dtype) {
  htns::Container c(dtype);
  for (auto* p : parameters()) c.add(p->name, p->value);
  for (auto& [name, t] : buffers()) c.add(name, *t);
  return c;
}

template <typename T>
void Network<T>::load(const htns::Container& container) {
  for (auto* p : parameters()) {
    auto t = container.get<T>(p->name);
    require_shape(t, p->value.dims(), "checkpoint entry " + p->name);
    p->value = std::move(t);
  }
  for (auto& [name, buf] : buffers()) {
    auto t = container.get<T>(name);
    require_shape(t, buf->dims(), "checkpoint entry " + name);
    *buf = std::move(t);
  }
}

template <typename T>
template <typename U>
void Network<T>::copy_from(Network<U>& other) {
  auto dst = parameters();
  auto src = other.parameters();
  if (dst.size() != src.size()) throw ShapeError("copy_from: parameter lists differ");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    require_shape(dst[i]->value, src[i]->value.dims(), "copy_from " + dst[i]->name);
    dst[i]->value = src[i]->value.template cast<T>();
  }
  auto dbuf = buffers();
  auto sbuf = other.buffers();
  for (std::size_t i = 0; i < dbuf.size(); ++i) *dbuf[i].second = sbuf[i].second->template cast<T>();
}

// ------------------------------------------------------------ task wrappers

template <typename T>
Prediction nowcast_forward(Network<T>& net, const NowcastConfig& config, const Tensor<T>& image,
                           std::span<const double> features) {
  const std::size_t s = config.image_side;
  require_shape(image, {3, s, s}, "nowcast image");
  if (features.size() != config.feature_length) {
    throw ShapeError("nowcast: expected " + std::to_string(config.feature_length) + " features, got " +
                     std::to_string(features.size()));
  }
  Tensor<T> extras;
  if (!features.empty()) extras = Tensor<T>({1, features.size()}, AlignedVector<T>(features.begin(), features.end()));
  const auto out = net.forward(image.reshaped({1, 3, s, s}), extras, nn::Mode::infer);
  return {static_cast<double>(out[0])};
}

template <typename T>
Prediction forecast_forward(Network<T>& net, const ForecastConfig& config, const Tensor<T>& frames,
                            std::span<const double> pv_history, std::span<const double> features) {
  const std::size_t s = config.base.image_side;
  std::size_t frame_count = 0;
  if (frames.rank() == 4 && frames.dim(1) == 3 && frames.dim(2) == s && frames.dim(3) == s) {
    frame_count = frames.dim(0);
  } else if (frames.rank() == 3 && frames.dim(0) % 3 == 0 && frames.dim(1) == s && frames.dim(2) == s) {
    frame_count = frames.dim(0) / 3;
  } else {
    throw ShapeError("forecast: frames must be [F,3,S,S] or [3F,S,S], got " + shape_string(frames.dims()));
  }
  if (frame_count != config.frames) {
    throw ShapeError("forecast: expected " + std::to_string(config.frames) + " frames, got " +
                     std::to_string(frame_count));
  }
  if (pv_history.size() != config.pv_history_length) {
    throw ShapeError("forecast: expected " + std::to_string(config.pv_history_length) + " PV history values");
  }
  if (features.size() != config.base.feature_length) {
    throw ShapeError("forecast: expected " + std::to_string(config.base.feature_length) + " features, got " +
                     std::to_string(features.size()));
  }
  AlignedVector<T> extra(pv_history.begin(), pv_history.end());
  extra.insert(extra.end(), features.begin(), features.end());
  const std::size_t width = extra.size();
  const auto out = net.forward(frames.reshaped({1, 3 * frame_count, s, s}), Tensor<T>({1, width}, std::move(extra)),
                               nn::Mode::infer);
  return {static_cast<double>(out[0])};
}

// ------------------------------------------------------------------ data

InMemorySource::InMemorySource(std::size_t channels, std::size_t side, std::size_t extra_width)
    : channels_(channels), side_(side), extra_width_(extra_width) {}

void InMemorySource::add(std::span<const float> image, std::span<const float> extras, float target) {
  if (image.size() != channels_ * side_ * side_) throw ShapeError("in-memory source: image size mismatch");
  if (extras.size() != extra_width_) throw ShapeError("in-memory source: extras width mismatch");
  images_.insert(images_.end(), image.begin(), image.end());
  extras_.insert(extras_.end(), extras.begin(), extras.end());
  targets_.push_back(target);
}

void InMemorySource::gather(std::span<const std::size_t> indices, float* images, float* extras,
                            float* targets) const {
  const std::size_t per = channels_ * side_ * side_;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    std::copy_n(images_.data() + i * per, per, images + k * per);
    if (extra_width_) std::copy_n(extras_.data() + i * extra_width_, extra_width_, extras + k * extra_width_);
    targets[k] = targets_[i];
  }
}

template <typename T>
Batch<T> make_batch(const SampleSource& source, std::span<const std::size_t> indices) {
  const std::size_t n = indices.size(), c = source.image_channels(), s = source.image_side(),
                    e = source.extra_width();
  std::vector<float> images(n * c * s * s), extras(n * e), targets(n);
  source.gather(indices, images.data(), extras.data(), targets.data());
  Batch<T> b;
  b.images = Tensor<T>({n, c, s, s}, AlignedVector<T>(images.begin(), images.end()));
  if (e) b.extras = Tensor<T>({n, e}, AlignedVector<T>(extras.begin(), extras.end()));
  b.targets = Tensor<T>({n, 1}, AlignedVector<T>(targets.begin(), targets.end()));
  return b;
}

template <typename T>
TrainResult<T> train(Network<T>& net, const SampleSource& data, const TrainOptions& options,
                     const EpochCallback& on_epoch) {
  if (data.size() == 0) throw RangeError("train: empty dataset");
  if (options.batch_size < 2) throw RangeError("train: batch size must be at least 2");
  if (data.size() < 2) throw RangeError("train: need at least 2 samples");
  if (data.image_channels() != net.shape().input_channels || data.extra_width() != net.shape().extra_features) {
    throw ShapeError("train: data layout does not match the network");
  }

  auto params = net.parameters();
  TrainResult<T> result{{}, nn::AdamState<T>::create(params, {options.learning_rate})};
  Rng order_rng(options.seed ^ 0x5851f42d4c957f2dULL);
  std::vector<std::size_t> order(data.size());

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    helio::shuffle(order.begin(), order.end(), order_rng);
    double total = 0.0;
    std::size_t start = 0;
    while (start < order.size()) {
      std::size_t end = std::min(start + options.batch_size, order.size());
      if (order.size() - end == 1) end = order.size();
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Batch<T> batch = make_batch<T>(data, idx);
      net.zero_grad();
      const Tensor<T> pred = net.forward(batch.images, batch.extras, nn::Mode::train);
      const auto loss = nn::mse_loss(pred, batch.targets);
      net.backward(loss.grad);
      nn::adam_step<T>(params, result.optimizer);
      total += loss.loss * static_cast<double>(idx.size());
      start = end;
    }
    const double mean = total / static_cast<double>(order.size());
    result.loss_trace.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

template <typename T>
std::vector<double> predict_all(Network<T>& net, const SampleSource& data, std::size_t chunk) {
  std::vector<double> out;
  out.reserve(data.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t end = std::min(start + chunk, data.size());
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Batch<T> b = make_batch<T>(data, idx);
    const Tensor<T> pred = net.forward(b.images, b.extras, nn::Mode::infer);
    for (std::size_t i = 0; i < pred.size(); ++i) out.push_back(static_cast<double>(pred[i]));
  }
  return out;
}

template <typename T>
double evaluate_mse(Network<T>& net, const SampleSource& data) {
  if (data.size() == 0) throw RangeError("evaluate_mse: empty dataset");
  const auto pred = predict_all(net, data);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const Batch<float> b = make_batch<float>(data, idx);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - static_cast<double>(b.targets[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(pred.size());
}

template <typename T>
htns::Container adam_to_container(const nn::AdamState<T>& state, htns::DType dtype) {
  htns::Container c(dtype);
  for (std::size_t i = 0; i < state.names.size(); ++i) c.add("adam.m/" + state.names[i], state.first_moment[i]);
  for (std::size_t i = 0; i < state.names.size(); ++i) c.add("adam.v/" + state.names[i], state.second_moment[i]);
  c.add("adam.step", Tensor<double>({1}, std::vector<double>{static_cast<double>(state.step)}));
  const auto& k = state.config;
  c.add("adam.hyper", Tensor<double>({4}, std::vector<double>{k.learning_rate, k.beta1, k.beta2, k.epsilon}));
  return c;
}

template <typename T>
nn::AdamState<T> adam_from_container(const htns::Container& container) {
  nn::AdamState<T> s;
  for (const auto& e : container.entries()) {
    if (e.name.rfind("adam.m/", 0) == 0) {
      const std::string name = e.name.substr(7);
      s.names.push_back(name);
      s.first_moment.push_back(container.get<T>(e.name));
      s.second_moment.push_back(container.get<T>("adam.v/" + name));
    }
  }
  s.step = static_cast<std::uint64_t>(container.get<double>("adam.step")[0]);
  const auto h = container.get<double>("adam.hyper");
  s.config = {h[0], h[1], h[2], h[3]};
  return s;
}

#define HELIO_INSTANTIATE(T)                                                                                   \
  template class Network<T>;                                                                                   \
  template Prediction nowcast_forward(Network<T>&, const NowcastConfig&, const Tensor<T>&,                     \
                                      std::span<const double>);                                                \
  template Prediction forecast_forward(Network<T>&, const ForecastConfig&, const Tensor<T>&,                   \
                                       std::span<const double>, std::span<const double>);                      \
  template Batch<T> make_batch<T>(const SampleSource&, std::span<const std::size_t>);                          \
  template TrainResult<T> train(Network<T>&, const SampleSource&, const TrainOptions&, const EpochCallback&); \
  template std::vector<double> predict_all(Network<T>&, const SampleSource&, std::size_t);                     \
  template double evaluate_mse(Network<T>&, const SampleSource&);                                              \
  template htns::Container adam_to_container(const nn::AdamState<T>&, htns::DType);                            \
  template nn::AdamState<T> adam_from_container<T>(const htns::Container&);

HELIO_INSTANTIATE(float)
HELIO_INSTANTIATE(double)
#undef HELIO_INSTANTIATE

template void Network<float>::copy_from(Network<double>&);
template void Network<double>::copy_from(Network<float>&);
template void Network<float>::copy_from(Network<float>&);
template void Network<double>::copy_from(Network<double>&);

}  // namespace helio::model
