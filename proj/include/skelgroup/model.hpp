#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "skelgroup/layers.hpp"
#include "skelgroup/params.hpp"
#include "skelgroup/streams.hpp"
#include "skelgroup/tensor.hpp"

namespace skelgroup {

// Per-branch CNN over one stream of one actor, treated as a 3-channel
// T x N image: 1x1 conv, temporal conv, joints moved into channels, then two
// stride-2 3x3 convs. Every conv is followed by ReLU.
struct BranchSpec {
  std::size_t point_channels = 32;
  std::size_t temporal_channels = 16;
  std::size_t temporal_kernel = 3;
  std::size_t spatial_channels = 32;
  std::size_t deep_channels = 64;
};

// Two 1x1 convolutions (per-actor affine maps shared across actors).
struct FusionSpec {
  std::size_t hidden = 256;
  std::size_t features = 256;  // F
};

struct ModelConfig {
  std::size_t actors = 12;  // K
  std::size_t frames = 10;  // T
  std::size_t joints = 25;  // N
  BranchSpec branch;
  FusionSpec fusion;
  std::size_t action_classes = 9;  // A, or k pseudo-classes
  std::size_t group_classes = 8;   // G
  double lambda = 0.7;

  std::size_t branch_output_dim() const;
  // Throws ConfigError on inconsistent geometry.
  void validate() const;
};

inline constexpr std::array<const char*, 3> kStreamNames = {"gs", "gm", "gd"};

// Network input for B clips: each stream is [B*K, 3, T, N] and the mask holds
// B*K flags.
struct ModelInput {
  std::array<Tensor, 3> streams;
  std::vector<std::uint8_t> mask;
  std::size_t batch = 0;
  std::size_t actors = 0;
};

ModelInput make_input(std::span<const StreamTensors* const> clips, std::span<const std::vector<std::uint8_t>> masks);
ModelInput make_input(const StreamTensors& clip, std::span<const std::uint8_t> mask);

struct ModelOutputs {
  Tensor individual_logits;  // [B, K, A]
  Tensor group_logits;       // [B, G]
  Tensor actor_features;     // [B, K, F]
  std::vector<std::uint8_t> mask;
};

struct OutputGrads {
  Tensor individual_logits;
  Tensor group_logits;
};

struct LossTerms {
  double total = 0.0;
  double group = 0.0;
  double individual = 0.0;
  std::size_t labeled_actors = 0;
};

struct LossResult {
  std::vector<LossTerms> per_clip;
  OutputGrads grads;
};

// Per clip: total = group_weight * L_G + lambda * L_I, with L_I the mean
// cross-entropy over masked-in actors carrying a label. `action_labels` holds
// B*K entries (kNoLabel where absent) or is empty to skip the individual
// term. Gradients are scaled by `sample_weight`.
LossResult total_loss(const ModelOutputs& outputs, std::span<const int> group_labels,
                      std::span<const int> action_labels, double lambda, double sample_weight = 1.0,
                      double group_weight = 1.0);

enum class BackwardScope {
  full,
  // Stops after the fusion layers; branch parameters get no gradient.
  fusion_and_heads,
};

// Owns the layer objects and their forward caches. One instance per worker;
// parameters are passed in so many workers can share them read-only.
class GroupModel {
 public:
  explicit GroupModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }

  ModelParams init_params(std::uint64_t seed) const;
  // Zero-initialized parameters with the right layout.
  ModelParams zero_params() const;

  ModelOutputs forward(const ModelInput& input, const ModelParams& params);
  ModelOutputs forward(const StreamTensors& clip, std::span<const std::uint8_t> mask, const ModelParams& params);
  // Adds parameter gradients of the last forward into `grads`.
  void backward(const OutputGrads& grads_out, const ModelParams& params, ModelParams& grads,
                BackwardScope scope = BackwardScope::full);

  std::string summary() const;

  static std::string layer_name(std::size_t stream, std::size_t conv);
  static std::vector<std::string> branch_layer_names();
  static constexpr const char* kFusion1 = "fusion1";
  static constexpr const char* kFusion2 = "fusion2";
  static constexpr const char* kIndividualHead = "individual_head";
  static constexpr const char* kGroupHead = "group_head";

 private:
  struct Branch {
    std::array<Conv2d, 4> convs;
    std::array<Relu, 4> relus;
    Shape deep_shape;
  };

  ModelConfig config_;
  std::vector<Branch> branches_;
  Linear fusion1_;
  Linear fusion2_;
  Relu fusion1_relu_;
  Relu fusion2_relu_;
  Linear individual_head_;
  Linear group_head_;
  ActorMaxPool pool_;
  std::size_t batch_ = 0;
  std::size_t rows_ = 0;
  bool cached_ = false;
};

}  // namespace skelgroup
