#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "skelgroup/tensor.hpp"

namespace skelgroup {

// Trainable parameters of one layer. Convolution weights are stored as
// [out_channels, in_channels, kernel_h, kernel_w]; linear weights as
// [out_features, in_features]. Bias is [out].
struct LayerParams {
  Tensor weight;
  Tensor bias;

  std::size_t parameter_count() const { return weight.size() + bias.size(); }
  LayerParams zeros_like() const;
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

enum class Padding { valid, same };

struct ConvGeometry {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  Padding padding = Padding::valid;
};

// 2D cross-correlation over a batch [B, C, H, W], lowered to one matrix
// product through an im2col buffer that doubles as the backward cache.
class Conv2d {
 public:
  explicit Conv2d(ConvGeometry geometry);

  const ConvGeometry& geometry() const { return geometry_; }
  std::size_t output_height(std::size_t height) const;
  std::size_t output_width(std::size_t width) const;
  Shape weight_shape() const;
  Shape bias_shape() const { return {geometry_.out_channels}; }
  std::size_t fan_in() const { return geometry_.in_channels * geometry_.kernel_h * geometry_.kernel_w; }

  // Accepts [B, C, H, W] or a single [C, H, W] image.
  Tensor forward(const Tensor& input, const LayerParams& params);
  // Adds parameter gradients into `grads` and returns the input gradient
  // (empty when `need_input_grad` is false).
  Tensor backward(const Tensor& grad_output, const LayerParams& params, LayerParams& grads,
                  bool need_input_grad = true);

 private:
  std::size_t pad_top() const;
  std::size_t pad_left() const;

  ConvGeometry geometry_;
  Shape input_shape_;
  std::size_t batch_ = 0;
  std::size_t out_h_ = 0;
  std::size_t out_w_ = 0;
  AlignedBuffer cols_;
  bool cached_ = false;
};

// Affine map on rows: [B, in] -> [B, out].
class Linear {
 public:
  Linear(std::size_t in_features, std::size_t out_features);

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Shape weight_shape() const { return {out_, in_}; }
  Shape bias_shape() const { return {out_}; }
  std::size_t fan_in() const { return in_; }

  Tensor forward(const Tensor& input, const LayerParams& params);
  Tensor backward(const Tensor& grad_output, const LayerParams& params, LayerParams& grads,
                  bool need_input_grad = true);

 private:
  std::size_t in_;
  std::size_t out_;
  Tensor input_;
  bool cached_ = false;
};

// max(x, 0); the subgradient at exactly 0 is 0.
class Relu {
 public:
  Tensor forward(const Tensor& input);
  Tensor backward(const Tensor& grad_output) const;

 private:
  Tensor output_;
  bool cached_ = false;
};

// Elementwise max over the actor axis of [B, K, F], restricted to actors
// whose mask bit is set. Ties go to the lowest actor index.
class ActorMaxPool {
 public:
  // `mask` holds B*K flags, row-major.
  Tensor forward(const Tensor& input, std::span<const std::uint8_t> mask);
  Tensor backward(const Tensor& grad_output) const;

 private:
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
  bool cached_ = false;
};

// Reorders the axes of a rank-4 tensor: out.dim(i) = in.dim(perm[i]).
Tensor permute_axes(const Tensor& input, const std::array<std::size_t, 4>& perm);
std::array<std::size_t, 4> inverse_permutation(const std::array<std::size_t, 4>& perm);

struct CrossEntropy {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logits = softmax - onehot
};

CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t target);

// Normal(0, sqrt(2 / fan_in)) weights; the bias is zeroed.
void init_fan_in_normal(LayerParams& params, std::size_t fan_in, std::mt19937_64& rng);

}  // namespace skelgroup
