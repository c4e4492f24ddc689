#include "skelgroup/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "skelgroup/error.hpp"

namespace skelgroup {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

void require_cache(bool cached, const char* layer) {
  if (!cached) throw ConfigError(std::string(layer) + ": backward called without a cached forward pass");
}

void check_params(const LayerParams& params, const Shape& weight, const Shape& bias, const char* layer) {
  if (params.weight.shape() != weight || params.bias.shape() != bias) {
    throw ConfigError(std::string(layer) + ": parameter shapes " + shape_string(params.weight.shape()) + "/" +
                      shape_string(params.bias.shape()) + " do not match geometry " + shape_string(weight) + "/" +
                      shape_string(bias));
  }
}

}  // namespace

LayerParams LayerParams::zeros_like() const { return {Tensor(weight.shape()), Tensor(bias.shape())}; }

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(ConvGeometry geometry) : geometry_(geometry) {
  if (geometry_.in_channels == 0 || geometry_.out_channels == 0 || geometry_.kernel_h == 0 ||
      geometry_.kernel_w == 0 || geometry_.stride == 0) {
    throw ConfigError("conv2d: channel counts, kernel size and stride must be positive");
  }
}

Shape Conv2d::weight_shape() const {
  return {geometry_.out_channels, geometry_.in_channels, geometry_.kernel_h, geometry_.kernel_w};
}

std::size_t Conv2d::pad_top() const {
  return geometry_.padding == Padding::same ? (geometry_.kernel_h - 1) / 2 : 0;
}

std::size_t Conv2d::pad_left() const {
  return geometry_.padding == Padding::same ? (geometry_.kernel_w - 1) / 2 : 0;
}

std::size_t Conv2d::output_height(std::size_t height) const {
  const std::size_t padded = geometry_.padding == Padding::same ? height + geometry_.kernel_h - 1 : height;
  if (padded < geometry_.kernel_h) {
    throw ConfigError("conv2d: kernel height " + std::to_string(geometry_.kernel_h) + " exceeds input height " +
                      std::to_string(height));
  }
  return (padded - geometry_.kernel_h) / geometry_.stride + 1;
}

std::size_t Conv2d::output_width(std::size_t width) const {
  const std::size_t padded = geometry_.padding == Padding::same ? width + geometry_.kernel_w - 1 : width;
  if (padded < geometry_.kernel_w) {
    throw ConfigError("conv2d: kernel width " + std::to_string(geometry_.kernel_w) + " exceeds input width " +
                      std::to_string(width));
  }
  return (padded - geometry_.kernel_w) / geometry_.stride + 1;
}

Tensor Conv2d::forward(const Tensor& input, const LayerParams& params) {
  check_params(params, weight_shape(), bias_shape(), "conv2d");
  const bool single = input.rank() == 3;
  if (!single && input.rank() != 4) throw ConfigError("conv2d: expected [B,C,H,W] input, got " + shape_string(input.shape()));
  const std::size_t batch = single ? 1 : input.dim(0);
  const std::size_t channels = input.dim(single ? 0 : 1);
  const std::size_t height = input.dim(single ? 1 : 2);
  const std::size_t width = input.dim(single ? 2 : 3);
  if (channels != geometry_.in_channels) {
    throw ConfigError("conv2d: input has " + std::to_string(channels) + " channels, layer expects " +
                      std::to_string(geometry_.in_channels));
  }
  const std::size_t out_h = output_height(height);
  const std::size_t out_w = output_width(width);
  const std::size_t plane = out_h * out_w;
  const std::size_t rows = fan_in();
  const std::size_t cols = batch * plane;
  const std::size_t kh = geometry_.kernel_h;
  const std::size_t kw = geometry_.kernel_w;
  const std::size_t stride = geometry_.stride;
  const auto top = static_cast<std::ptrdiff_t>(pad_top());
  const auto left = static_cast<std::ptrdiff_t>(pad_left());

  cols_.assign(rows * cols, 0.0);
  const double* in = input.data();
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        double* row = cols_.data() + ((c * kh + i) * kw + j) * cols;
        for (std::size_t b = 0; b < batch; ++b) {
          const double* image = in + (b * channels + c) * height * width;
          double* dst = row + b * plane;
          for (std::size_t oy = 0; oy < out_h; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + i) - top;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
            const double* src = image + static_cast<std::size_t>(iy) * width;
            for (std::size_t ox = 0; ox < out_w; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + j) - left;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) continue;
              dst[oy * out_w + ox] = src[ix];
            }
          }
        }
      }
    }
  }

  const std::size_t out_c = geometry_.out_channels;
  RowMatrix product(out_c, cols);
  product.noalias() = ConstMatrixMap(params.weight.data(), out_c, rows) * ConstMatrixMap(cols_.data(), rows, cols);

  Tensor output(single ? Shape{out_c, out_h, out_w} : Shape{batch, out_c, out_h, out_w});
  double* out = output.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out_c; ++o) {
      const double bias = params.bias[o];
      const double* src = product.data() + o * cols + b * plane;
      double* dst = out + (b * out_c + o) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = src[p] + bias;
    }
  }

  input_shape_ = input.shape();
  batch_ = batch;
  out_h_ = out_h;
  out_w_ = out_w;
  cached_ = true;
  return output;
}

Tensor Conv2d::backward(const Tensor& grad_output, const LayerParams& params, LayerParams& grads,
                        bool need_input_grad) {
  require_cache(cached_, "conv2d");
  const std::size_t out_c = geometry_.out_channels;
  const std::size_t plane = out_h_ * out_w_;
  const std::size_t cols = batch_ * plane;
  const std::size_t rows = fan_in();
  if (grad_output.size() != batch_ * out_c * plane) {
    throw ConfigError("conv2d: upstream gradient " + shape_string(grad_output.shape()) + " does not match output");
  }

  RowMatrix upstream(out_c, cols);
  const double* g = grad_output.data();
  for (std::size_t b = 0; b < batch_; ++b) {
    for (std::size_t o = 0; o < out_c; ++o) {
      const double* src = g + (b * out_c + o) * plane;
      double* dst = upstream.data() + o * cols + b * plane;
      std::copy(src, src + plane, dst);
    }
  }

  ConstMatrixMap col_matrix(cols_.data(), rows, cols);
  MatrixMap(grads.weight.data(), out_c, rows).noalias() += upstream * col_matrix.transpose();
  VectorMap(grads.bias.data(), static_cast<Eigen::Index>(out_c)) += upstream.rowwise().sum();

  if (!need_input_grad) return {};

  RowMatrix grad_cols(rows, cols);
  grad_cols.noalias() = ConstMatrixMap(params.weight.data(), out_c, rows).transpose() * upstream;

  Tensor grad_input(input_shape_);
  const bool single = input_shape_.size() == 3;
  const std::size_t channels = geometry_.in_channels;
  const std::size_t height = input_shape_[single ? 1 : 2];
  const std::size_t width = input_shape_[single ? 2 : 3];
  const std::size_t kh = geometry_.kernel_h;
  const std::size_t kw = geometry_.kernel_w;
  const std::size_t stride = geometry_.stride;
  const auto top = static_cast<std::ptrdiff_t>(pad_top());
  const auto left = static_cast<std::ptrdiff_t>(pad_left());
  double* gin = grad_input.data();
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        const double* row = grad_cols.data() + ((c * kh + i) * kw + j) * cols;
        for (std::size_t b = 0; b < batch_; ++b) {
          double* image = gin + (b * channels + c) * height * width;
          const double* src = row + b * plane;
          for (std::size_t oy = 0; oy < out_h_; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + i) - top;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
            double* dst = image + static_cast<std::size_t>(iy) * width;
            for (std::size_t ox = 0; ox < out_w_; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + j) - left;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) continue;
              dst[ix] += src[oy * out_w_ + ox];
            }
          }
        }
      }
    }
  }
  return grad_input;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(std::size_t in_features, std::size_t out_features) : in_(in_features), out_(out_features) {
  if (in_ == 0 || out_ == 0) throw ConfigError("linear: feature counts must be positive");
}

Tensor Linear::forward(const Tensor& input, const LayerParams& params) {
  check_params(params, weight_shape(), bias_shape(), "linear");
  if (input.size() % in_ != 0 || input.empty()) {
    throw ConfigError("linear: input " + shape_string(input.shape()) + " is not a multiple of " + std::to_string(in_));
  }
  const std::size_t batch = input.size() / in_;
  Tensor output({batch, out_});
  MatrixMap out(output.data(), batch, out_);
  out.noalias() = ConstMatrixMap(input.data(), batch, in_) * ConstMatrixMap(params.weight.data(), out_, in_).transpose();
  out.rowwise() += ConstVectorMap(params.bias.data(), static_cast<Eigen::Index>(out_)).transpose();
  input_ = input;
  input_.reshape({batch, in_});
  cached_ = true;
  return output;
}

Tensor Linear::backward(const Tensor& grad_output, const LayerParams& params, LayerParams& grads,
                        bool need_input_grad) {
  require_cache(cached_, "linear");
  const std::size_t batch = input_.dim(0);
  if (grad_output.size() != batch * out_) {
    throw ConfigError("linear: upstream gradient " + shape_string(grad_output.shape()) + " does not match output");
  }
  ConstMatrixMap upstream(grad_output.data(), batch, out_);
  ConstMatrixMap x(input_.data(), batch, in_);
  MatrixMap(grads.weight.data(), out_, in_).noalias() += upstream.transpose() * x;
  VectorMap(grads.bias.data(), static_cast<Eigen::Index>(out_)) += upstream.colwise().sum().transpose();
  if (!need_input_grad) return {};
  Tensor grad_input({batch, in_});
  MatrixMap(grad_input.data(), batch, in_).noalias() = upstream * ConstMatrixMap(params.weight.data(), out_, in_);
  return grad_input;
}

// ---------------------------------------------------------------- Relu

Tensor Relu::forward(const Tensor& input) {
  output_ = input;
  for (double& v : output_.values()) v = v > 0.0 ? v : 0.0;
  cached_ = true;
  return output_;
}

Tensor Relu::backward(const Tensor& grad_output) const {
  require_cache(cached_, "relu");
  if (grad_output.size() != output_.size()) throw ConfigError("relu: upstream gradient size mismatch");
  Tensor grad_input(output_.shape());
  for (std::size_t i = 0; i < grad_input.size(); ++i) grad_input[i] = output_[i] > 0.0 ? grad_output[i] : 0.0;
  return grad_input;
}

// ---------------------------------------------------------------- ActorMaxPool

Tensor ActorMaxPool::forward(const Tensor& input, std::span<const std::uint8_t> mask) {
  if (input.rank() != 3) throw ConfigError("actor max-pool: expected [B,K,F], got " + shape_string(input.shape()));
  const std::size_t batch = input.dim(0);
  const std::size_t actors = input.dim(1);
  const std::size_t features = input.dim(2);
  if (mask.size() != batch * actors) throw ConfigError("actor max-pool: mask size does not match input");
  Tensor output({batch, features});
  argmax_.assign(batch * features, 0);
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t first = actors;
    for (std::size_t k = 0; k < actors; ++k) {
      if (mask[b * actors + k]) {
        first = k;
        break;
      }
    }
    if (first == actors) throw ConfigError("actor max-pool: every actor is masked out");
    for (std::size_t f = 0; f < features; ++f) {
      std::size_t best = first;
      double best_value = input(b, first, f);
      for (std::size_t k = first + 1; k < actors; ++k) {
        if (mask[b * actors + k] && input(b, k, f) > best_value) {
          best = k;
          best_value = input(b, k, f);
        }
      }
      output(b, f) = best_value;
      argmax_[b * features + f] = best;
    }
  }
  input_shape_ = input.shape();
  cached_ = true;
  return output;
}

Tensor ActorMaxPool::backward(const Tensor& grad_output) const {
  require_cache(cached_, "actor max-pool");
  const std::size_t batch = input_shape_[0];
  const std::size_t features = input_shape_[2];
  if (grad_output.size() != batch * features) throw ConfigError("actor max-pool: upstream gradient size mismatch");
  Tensor grad_input(input_shape_);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t f = 0; f < features; ++f) {
      grad_input(b, argmax_[b * features + f], f) += grad_output[b * features + f];
    }
  }
  return grad_input;
}

// ---------------------------------------------------------------- helpers

Tensor permute_axes(const Tensor& input, const std::array<std::size_t, 4>& perm) {
  if (input.rank() != 4) throw ConfigError("permute_axes: expected a rank-4 tensor");
  const Shape& in = input.shape();
  const Shape out_shape = {in[perm[0]], in[perm[1]], in[perm[2]], in[perm[3]]};
  std::array<std::size_t, 4> in_strides{in[1] * in[2] * in[3], in[2] * in[3], in[3], 1};
  std::array<std::size_t, 4> stride{in_strides[perm[0]], in_strides[perm[1]], in_strides[perm[2]],
                                    in_strides[perm[3]]};
  Tensor output(out_shape);
  double* dst = output.data();
  const double* src = input.data();
  for (std::size_t a = 0; a < out_shape[0]; ++a) {
    for (std::size_t b = 0; b < out_shape[1]; ++b) {
      for (std::size_t c = 0; c < out_shape[2]; ++c) {
        const double* base = src + a * stride[0] + b * stride[1] + c * stride[2];
        for (std::size_t d = 0; d < out_shape[3]; ++d) *dst++ = base[d * stride[3]];
      }
    }
  }
  return output;
}

std::array<std::size_t, 4> inverse_permutation(const std::array<std::size_t, 4>& perm) {
  std::array<std::size_t, 4> inverse{};
  for (std::size_t i = 0; i < 4; ++i) inverse[perm[i]] = i;
  return inverse;
}

CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t target) {
  if (logits.empty()) throw ConfigError("softmax_cross_entropy: no logits");
  if (target >= logits.size()) {
    throw ConfigError("softmax_cross_entropy: target " + std::to_string(target) + " out of range [0, " +
                      std::to_string(logits.size()) + ")");
  }
  const double shift = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - shift);
  const double log_sum = std::log(sum) + shift;
  CrossEntropy result;
  result.loss = log_sum - logits[target];
  result.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) result.grad[i] = std::exp(logits[i] - log_sum);
  result.grad[target] -= 1.0;
  return result;
}

void init_fan_in_normal(LayerParams& params, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (double& w : params.weight.values()) w = normal(rng);
  params.bias.fill(0.0);
}

}  // namespace skelgroup
