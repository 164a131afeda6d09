#include "helio/layers.hpp"

#include <Eigen/Core>
#include <cmath>
#include <limits>

namespace helio::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* who) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(who) + ": expected rank " + std::to_string(rank) + " input, got " +
                     shape_string(t.dims()));
  }
}

// cols[(c*9 + ky*3 + kx), y*W + x] = img[c, y+ky-1, x+kx-1] (zero outside).
template <typename T>
void im2col3x3(const T* img, std::size_t channels, std::size_t h, std::size_t w, T* cols) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = img + c * hw;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        T* row = cols + (c * 9 + ky * 3 + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + static_cast<long>(ky) - 1;
          T* dst = row + y * w;
          if (sy < 0 || sy >= static_cast<long>(h)) {
            std::fill(dst, dst + w, T{0});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(sy) * w;
          if (kx == 0) {
            dst[0] = T{0};
            std::copy(src, src + w - 1, dst + 1);
          } else if (kx == 1) {
            std::copy(src, src + w, dst);
          } else {
            std::copy(src + 1, src + w, dst);
            dst[w - 1] = T{0};
          }
        }
      }
    }
  }
}

// Adjoint of im2col3x3: scatter-add columns back onto the image.
template <typename T>
void col2im3x3(const T* cols, std::size_t channels, std::size_t h, std::size_t w, T* img) {
  const std::size_t hw = h * w;
  std::fill(img, img + channels * hw, T{0});
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = img + c * hw;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const T* row = cols + (c * 9 + ky * 3 + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + static_cast<long>(ky) - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          const T* src = row + y * w;
          T* dst = plane + static_cast<std::size_t>(sy) * w;
          if (kx == 0) {
            for (std::size_t x = 1; x < w; ++x) dst[x - 1] += src[x];
          } else if (kx == 1) {
            for (std::size_t x = 0; x < w; ++x) dst[x] += src[x];
          } else {
            for (std::size_t x = 0; x + 1 < w; ++x) dst[x + 1] += src[x];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> fan_in_uniform(Shape dims, std::size_t fan_in, Rng& rng) {
  Tensor<T> t(std::move(dims));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.data()) v = static_cast<T>(uniform(rng, -bound, bound));
  return t;
}

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(const std::string& name, std::size_t in_channels, std::size_t filters, Rng& rng)
    : in_channels_(in_channels),
      filters_(filters),
      weight_(name + ".weight", fan_in_uniform<T>({filters, in_channels, 3, 3}, in_channels * 9, rng)),
      bias_(name + ".bias", fan_in_uniform<T>({filters}, in_channels * 9, rng)) {}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& input, Mode) {
  require_rank(input, 4, "conv2d");
  if (input.dim(1) != in_channels_) {
    throw ShapeError("conv2d: expected " + std::to_string(in_channels_) + " input channels, got " +
                     shape_string(input.dims()));
  }
  const std::size_t n = input.dim(0), h = input.dim(2), w = input.dim(3), hw = h * w;
  const std::size_t k = in_channels_ * 9;
  Tensor<T> out({n, filters_, h, w});
  AlignedVector<T> cols(k * hw);
  const ConstMatMap<T> wmat(weight_.value.raw(), filters_, k);
  for (std::size_t s = 0; s < n; ++s) {
    im2col3x3(input.raw() + s * in_channels_ * hw, in_channels_, h, w, cols.data());
    MatMap<T> o(out.raw() + s * filters_ * hw, filters_, hw);
    o.noalias() = wmat * ConstMatMap<T>(cols.data(), k, hw);
    for (std::size_t f = 0; f < filters_; ++f) o.row(f).array() += bias_.value[f];
  }
  input_ = input;
  have_input_ = true;
  return out;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_output) {
  if (!have_input_) throw StateError("conv2d: backward called before forward");
  const std::size_t n = input_.dim(0), h = input_.dim(2), w = input_.dim(3), hw = h * w;
  require_shape(grad_output, {n, filters_, h, w}, "conv2d backward");
  const std::size_t k = in_channels_ * 9;
  AlignedVector<T> cols(k * hw);
  MatMap<T> dw(weight_.grad.raw(), filters_, k);
  const ConstMatMap<T> wmat(weight_.value.raw(), filters_, k);
  Tensor<T> grad_input;
  if (input_grad_) grad_input = Tensor<T>(input_.dims());
  AlignedVector<T> dcols(input_grad_ ? k * hw : 0);
  for (std::size_t s = 0; s < n; ++s) {
    im2col3x3(input_.raw() + s * in_channels_ * hw, in_channels_, h, w, cols.data());
    const ConstMatMap<T> go(grad_output.raw() + s * filters_ * hw, filters_, hw);
    dw.noalias() += go * ConstMatMap<T>(cols.data(), k, hw).transpose();
    for (std::size_t f = 0; f < filters_; ++f) {
      const T* row = grad_output.raw() + (s * filters_ + f) * hw;
      T acc{0};
      for (std::size_t i = 0; i < hw; ++i) acc += row[i];
      bias_.grad[f] += acc;
    }
    if (input_grad_) {
      MatMap<T>(dcols.data(), k, hw).noalias() = wmat.transpose() * go;
      col2im3x3(dcols.data(), in_channels_, h, w, grad_input.raw() + s * in_channels_ * hw);
    }
  }
  return grad_input;
}

// ----------------------------------------------------------- BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(const std::string& name, std::size_t channels)
    : name_(name),
      channels_(channels),
      scale_(name + ".scale", Tensor<T>({channels}, T{1})),
      shift_(name + ".shift", Tensor<T>({channels}, T{0})),
      running_mean_({channels}, T{0}),
      running_var_({channels}, T{1}) {}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& input, Mode mode) {
  require_rank(input, 4, "batchnorm2d");
  if (input.dim(1) != channels_) throw ShapeError("batchnorm2d: channel count mismatch " + shape_string(input.dims()));
  const std::size_t n = input.dim(0), hw = input.dim(2) * input.dim(3);
  if (mode == Mode::train && n < 2) throw ShapeError("batchnorm2d: training mode needs a batch of at least 2");

  Tensor<T> out(input.dims());
  normalized_ = Tensor<T>(input.dims());
  inv_std_.assign(channels_, T{0});
  const double count = static_cast<double>(n * hw);
  for (std::size_t c = 0; c < channels_; ++c) {
    double mean = 0.0, var = 0.0;
    if (mode == Mode::train) {
      for (std::size_t s = 0; s < n; ++s) {
        const T* p = input.raw() + (s * channels_ + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) mean += p[i];
      }
      mean /= count;
      for (std::size_t s = 0; s < n; ++s) {
        const T* p = input.raw() + (s * channels_ + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          const double d = p[i] - mean;
          var += d * d;
        }
      }
      var /= count;
      running_mean_[c] = static_cast<T>((1.0 - kMomentum) * running_mean_[c] + kMomentum * mean);
      running_var_[c] =
          static_cast<T>((1.0 - kMomentum) * running_var_[c] + kMomentum * var * count / (count - 1.0));
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const double inv = 1.0 / std::sqrt(var + kEpsilon);
    inv_std_[c] = static_cast<T>(inv);
    const T g = scale_.value[c], b = shift_.value[c];
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t off = (s * channels_ + c) * hw;
      const T* p = input.raw() + off;
      T* xh = normalized_.raw() + off;
      T* o = out.raw() + off;
      for (std::size_t i = 0; i < hw; ++i) {
        xh[i] = static_cast<T>((p[i] - mean) * inv);
        o[i] = g * xh[i] + b;
      }
    }
  }
  mode_ = mode;
  have_cache_ = true;
  return out;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& grad_output) {
  if (!have_cache_) throw StateError("batchnorm2d: backward called before forward");
  require_shape(grad_output, normalized_.dims(), "batchnorm2d backward");
  const std::size_t n = normalized_.dim(0), hw = normalized_.dim(2) * normalized_.dim(3);
  const double count = static_cast<double>(n * hw);
  Tensor<T> grad_input(normalized_.dims());
  for (std::size_t c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t off = (s * channels_ + c) * hw;
      const T* dy = grad_output.raw() + off;
      const T* xh = normalized_.raw() + off;
      for (std::size_t i = 0; i < hw; ++i) {
        sum_dy += dy[i];
        sum_dy_xh += static_cast<double>(dy[i]) * xh[i];
      }
    }
    scale_.grad[c] += static_cast<T>(sum_dy_xh);
    shift_.grad[c] += static_cast<T>(sum_dy);
    const double g = scale_.value[c];
    const double inv = inv_std_[c];
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t off = (s * channels_ + c) * hw;
      const T* dy = grad_output.raw() + off;
      const T* xh = normalized_.raw() + off;
      T* dx = grad_input.raw() + off;
      if (mode_ == Mode::train) {
        const double mean_dy = sum_dy / count, mean_dy_xh = sum_dy_xh / count;
        for (std::size_t i = 0; i < hw; ++i) {
          dx[i] = static_cast<T>(g * inv * (dy[i] - mean_dy - xh[i] * mean_dy_xh));
        }
      } else {
        for (std::size_t i = 0; i < hw; ++i) dx[i] = static_cast<T>(g * inv * dy[i]);
      }
    }
  }
  return grad_input;
}

// ------------------------------------------------------------------ ReLU

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& input, Mode) {
  output_ = input;
  for (auto& v : output_.data()) v = v > T{0} ? v : T{0};
  have_cache_ = true;
  return output_;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& grad_output) {
  if (!have_cache_) throw StateError("relu: backward called before forward");
  require_shape(grad_output, output_.dims(), "relu backward");
  Tensor<T> grad_input = grad_output;
  for (std::size_t i = 0; i < grad_input.size(); ++i) {
    if (!(output_[i] > T{0})) grad_input[i] = T{0};
  }
  return grad_input;
}

// ------------------------------------------------------------ MaxPool2x2

template <typename T>
Tensor<T> MaxPool2x2<T>::forward(const Tensor<T>& input, Mode) {
  require_rank(input, 4, "maxpool2x2");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0) throw ShapeError("maxpool2x2: odd spatial extents " + shape_string(input.dims()));
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor<T> out({n, c, oh, ow});
  argmax_.assign(out.size(), 0);
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const T* src = input.raw() + plane * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = (2 * y) * w + 2 * x;
        const std::size_t cand[3] = {best + 1, best + w, best + w + 1};
        for (std::size_t i : cand) {
          if (src[i] > src[best]) best = i;
        }
        const std::size_t o = plane * oh * ow + y * ow + x;
        out[o] = src[best];
        argmax_[o] = plane * h * w + best;
      }
    }
  }
  input_dims_ = input.dims();
  return out;
}

template <typename T>
Tensor<T> MaxPool2x2<T>::backward(const Tensor<T>& grad_output) {
  if (input_dims_.empty()) throw StateError("maxpool2x2: backward called before forward");
  if (grad_output.size() != argmax_.size()) throw ShapeError("maxpool2x2 backward: gradient shape mismatch");
  Tensor<T> grad_input(input_dims_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) grad_input[argmax_[o]] += grad_output[o];
  return grad_input;
}

// --------------------------------------------------------------- Flatten

template <typename T>
Tensor<T> Flatten<T>::forward(const Tensor<T>& input, Mode) {
  if (input.rank() < 2) throw ShapeError("flatten: need a batch dimension");
  input_dims_ = input.dims();
  return input.reshaped({input.dim(0), input.size() / input.dim(0)});
}

template <typename T>
Tensor<T> Flatten<T>::backward(const Tensor<T>& grad_output) {
  if (input_dims_.empty()) throw StateError("flatten: backward called before forward");
  return grad_output.reshaped(input_dims_);
}

// ----------------------------------------------------------------- Dense

template <typename T>
Dense<T>::Dense(const std::string& name, std::size_t in_features, std::size_t out_features, Rng& rng)
    : in_(in_features),
      out_(out_features),
      weight_(name + ".weight", fan_in_uniform<T>({out_features, in_features}, in_features, rng)),
      bias_(name + ".bias", fan_in_uniform<T>({out_features}, in_features, rng)) {}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& input, Mode) {
  require_rank(input, 2, "dense");
  if (input.dim(1) != in_) {
    throw ShapeError("dense: expected " + std::to_string(in_) + " input features, got " + shape_string(input.dims()));
  }
  const std::size_t n = input.dim(0);
  // out^T = W x^T streams the weight matrix once, which dominates at small N.
  RowMat<T> out_t(out_, n);
  out_t.noalias() = ConstMatMap<T>(weight_.value.raw(), out_, in_) * ConstMatMap<T>(input.raw(), n, in_).transpose();
  Tensor<T> out({n, out_});
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < out_; ++j) out[s * out_ + j] = out_t(j, s) + bias_.value[j];
  }
  input_ = input;
  have_input_ = true;
  return out;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& grad_output) {
  if (!have_input_) throw StateError("dense: backward called before forward");
  const std::size_t n = input_.dim(0);
  require_shape(grad_output, {n, out_}, "dense backward");
  const ConstMatMap<T> go(grad_output.raw(), n, out_);
  MatMap<T>(weight_.grad.raw(), out_, in_).noalias() += go.transpose() * ConstMatMap<T>(input_.raw(), n, in_);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < out_; ++j) bias_.grad[j] += grad_output[s * out_ + j];
  }
  Tensor<T> grad_input({n, in_});
  MatMap<T> gi(grad_input.raw(), n, in_);
  const ConstMatMap<T> wmat(weight_.value.raw(), out_, in_);
  constexpr std::size_t kBlock = 512;
  for (std::size_t k0 = 0; k0 < in_; k0 += kBlock) {
    const std::size_t kb = std::min(kBlock, in_ - k0);
    gi.middleCols(k0, kb).noalias() = go * wmat.middleCols(k0, kb);
  }
  return grad_input;
}

// --------------------------------------------------------------- Dropout

template <typename T>
Dropout<T>::Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw RangeError("dropout rate must lie in [0, 1)");
}

template <typename T>
Tensor<T> Dropout<T>::forward(const Tensor<T>& input, Mode mode) {
  if (mode == Mode::infer) {
    applied_ = false;
    return input;
  }
  if (!frozen_ || mask_.size() != input.size()) {
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
    mask_.resize(input.size());
    for (auto& m : mask_) m = uniform01(rng_) < rate_ ? T{0} : keep_scale;
  }
  Tensor<T> out = input;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask_[i];
  applied_ = true;
  return out;
}

template <typename T>
Tensor<T> Dropout<T>::backward(const Tensor<T>& grad_output) {
  if (!applied_) return grad_output;
  if (grad_output.size() != mask_.size()) throw ShapeError("dropout backward: gradient shape mismatch");
  Tensor<T> grad_input = grad_output;
  for (std::size_t i = 0; i < grad_input.size(); ++i) grad_input[i] *= mask_[i];
  return grad_input;
}

#define HELIO_INSTANTIATE(T)                                                \
  template Tensor<T> fan_in_uniform<T>(Shape, std::size_t, Rng&);          \
  template class Conv2d<T>;                                                 \
  template class BatchNorm2d<T>;                                            \
  template class ReLU<T>;                                                   \
  template class MaxPool2x2<T>;                                             \
  template class Flatten<T>;                                                \
  template class Dense<T>;                                                  \
  template class Dropout<T>;

HELIO_INSTANTIATE(float)
HELIO_INSTANTIATE(double)

#undef HELIO_INSTANTIATE

}  // namespace helio::nn
