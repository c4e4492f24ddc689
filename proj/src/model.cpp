#include "skelgroup/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "skelgroup/dataset.hpp"
#include "skelgroup/error.hpp"

namespace skelgroup {

namespace {

constexpr double kHeadInitGain = 0.01;

constexpr std::array<std::size_t, 4> kJointsToChannels = {0, 3, 2, 1};

std::size_t halve_up(std::size_t n) { return (n + 1) / 2; }

std::array<ConvGeometry, 4> branch_geometry(const ModelConfig& c) {
  const BranchSpec& b = c.branch;
  return {ConvGeometry{3, b.point_channels, 1, 1, 1, Padding::valid},
          ConvGeometry{b.point_channels, b.temporal_channels, b.temporal_kernel, 1, 1, Padding::same},
          ConvGeometry{c.joints, b.spatial_channels, 3, 3, 2, Padding::same},
          ConvGeometry{b.spatial_channels, b.deep_channels, 3, 3, 2, Padding::same}};
}

}  // namespace

std::size_t ModelConfig::branch_output_dim() const {
  return branch.deep_channels * halve_up(halve_up(frames)) * halve_up(halve_up(branch.temporal_channels));
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("model config: ") + name + " must be positive");
  };
  positive(actors, "actors");
  positive(frames, "frames");
  positive(joints, "joints");
  positive(branch.point_channels, "branch.point_channels");
  positive(branch.temporal_channels, "branch.temporal_channels");
  positive(branch.spatial_channels, "branch.spatial_channels");
  positive(branch.deep_channels, "branch.deep_channels");
  positive(fusion.hidden, "fusion.hidden");
  positive(fusion.features, "fusion.features");
  if (branch.temporal_kernel == 0 || branch.temporal_kernel % 2 == 0) {
    throw ConfigError("model config: branch.temporal_kernel must be odd");
  }
  if (action_classes < 1) throw ConfigError("model config: action_classes must be at least 1");
  if (group_classes < 2) throw ConfigError("model config: group_classes must be at least 2");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("model config: lambda must be >= 0");
}

// ---------------------------------------------------------------- input

ModelInput make_input(std::span<const StreamTensors* const> clips, std::span<const std::vector<std::uint8_t>> masks) {
  if (clips.empty() || clips.size() != masks.size()) throw ConfigError("make_input: need one mask per clip");
  const Shape& shape = clips.front()->gs.shape();
  if (shape.size() != 4 || shape[3] != 3) throw ConfigError("make_input: streams must be [K,T,N,3]");
  const std::size_t K = shape[0];
  const std::size_t T = shape[1];
  const std::size_t N = shape[2];
  ModelInput input;
  input.batch = clips.size();
  input.actors = K;
  for (auto& s : input.streams) s = Tensor({clips.size() * K, 3, T, N});
  input.mask.reserve(clips.size() * K);
  for (std::size_t b = 0; b < clips.size(); ++b) {
    const StreamTensors& clip = *clips[b];
    const std::array<const Tensor*, 3> src = {&clip.gs, &clip.gm, &clip.gd};
    for (std::size_t s = 0; s < 3; ++s) {
      if (src[s]->shape() != shape) {
        throw ConfigError("make_input: stream " + std::string(kStreamNames[s]) + " has shape " +
                          shape_string(src[s]->shape()) + ", expected " + shape_string(shape));
      }
      const double* in = src[s]->data();
      double* out = input.streams[s].data() + b * K * 3 * T * N;
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t t = 0; t < T; ++t) {
          for (std::size_t j = 0; j < N; ++j) {
            for (std::size_t c = 0; c < 3; ++c) {
              out[((k * 3 + c) * T + t) * N + j] = in[((k * T + t) * N + j) * 3 + c];
            }
          }
        }
      }
    }
    if (masks[b].size() != K) throw ConfigError("make_input: mask length does not match K");
    input.mask.insert(input.mask.end(), masks[b].begin(), masks[b].end());
  }
  return input;
}

ModelInput make_input(const StreamTensors& clip, std::span<const std::uint8_t> mask) {
  const StreamTensors* ptr = &clip;
  std::vector<std::vector<std::uint8_t>> masks{std::vector<std::uint8_t>(mask.begin(), mask.end())};
  return make_input(std::span<const StreamTensors* const>(&ptr, 1), masks);
}

// ---------------------------------------------------------------- loss

LossResult total_loss(const ModelOutputs& outputs, std::span<const int> group_labels,
                      std::span<const int> action_labels, double lambda, double sample_weight, double group_weight) {
  const std::size_t B = outputs.group_logits.dim(0);
  const std::size_t G = outputs.group_logits.dim(1);
  const std::size_t K = outputs.individual_logits.dim(1);
  const std::size_t A = outputs.individual_logits.dim(2);
  if (group_labels.size() != B) throw ConfigError("total_loss: need one group label per clip");
  const bool use_individual = !action_labels.empty();
  if (use_individual && action_labels.size() != B * K) {
    throw ConfigError("total_loss: need one action label slot per actor");
  }

  LossResult result;
  result.per_clip.resize(B);
  result.grads.group_logits = Tensor(outputs.group_logits.shape());
  result.grads.individual_logits = Tensor(outputs.individual_logits.shape());
  for (std::size_t b = 0; b < B; ++b) {
    LossTerms& terms = result.per_clip[b];
    const int y = group_labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= G) {
      throw ConfigError("total_loss: group label " + std::to_string(y) + " out of range");
    }
    const auto ce = softmax_cross_entropy(
        std::span<const double>(outputs.group_logits.data() + b * G, G), static_cast<std::size_t>(y));
    terms.group = ce.loss;
    for (std::size_t g = 0; g < G; ++g) result.grads.group_logits(b, g) = sample_weight * group_weight * ce.grad[g];

    if (use_individual) {
      std::vector<std::size_t> labeled;
      for (std::size_t k = 0; k < K; ++k) {
        const int label = action_labels[b * K + k];
        if (!outputs.mask[b * K + k] || label == kNoLabel) continue;
        if (label < 0 || static_cast<std::size_t>(label) >= A) {
          throw ConfigError("total_loss: action label " + std::to_string(label) + " out of range");
        }
        labeled.push_back(k);
      }
      terms.labeled_actors = labeled.size();
      if (!labeled.empty()) {
        const double inv = 1.0 / static_cast<double>(labeled.size());
        double sum = 0.0;
        for (std::size_t k : labeled) {
          const auto ice = softmax_cross_entropy(
              std::span<const double>(outputs.individual_logits.data() + (b * K + k) * A, A),
              static_cast<std::size_t>(action_labels[b * K + k]));
          sum += ice.loss;
          for (std::size_t a = 0; a < A; ++a) {
            result.grads.individual_logits(b, k, a) = sample_weight * lambda * inv * ice.grad[a];
          }
        }
        terms.individual = sum * inv;
      }
    }
    terms.total = group_weight * terms.group + lambda * terms.individual;
  }
  return result;
}

// ---------------------------------------------------------------- model

std::string GroupModel::layer_name(std::size_t stream, std::size_t conv) {
  return std::string(kStreamNames.at(stream)) + ".conv" + std::to_string(conv + 1);
}

std::vector<std::string> GroupModel::branch_layer_names() {
  std::vector<std::string> names;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t c = 0; c < 4; ++c) names.push_back(layer_name(s, c));
  }
  return names;
}

namespace {

std::size_t validated_feature_in(const ModelConfig& c) {
  c.validate();
  return 3 * c.branch_output_dim();
}

}  // namespace

GroupModel::GroupModel(ModelConfig config)
    : config_(config),
      fusion1_(validated_feature_in(config_), config_.fusion.hidden),
      fusion2_(config_.fusion.hidden, config_.fusion.features),
      individual_head_(config_.fusion.features, config_.action_classes),
      group_head_(config_.fusion.features, config_.group_classes) {
  const auto geom = branch_geometry(config_);
  for (std::size_t s = 0; s < 3; ++s) {
    branches_.push_back(Branch{{Conv2d(geom[0]), Conv2d(geom[1]), Conv2d(geom[2]), Conv2d(geom[3])}, {}, {}});
  }
}

ModelParams GroupModel::zero_params() const {
  ModelParams params;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t c = 0; c < 4; ++c) {
      const Conv2d& conv = branches_[s].convs[c];
      params.layers.push_back({layer_name(s, c), {Tensor(conv.weight_shape()), Tensor(conv.bias_shape())}});
    }
  }
  for (const auto& [name, layer] : {std::pair<const char*, const Linear*>{kFusion1, &fusion1_},
                                    {kFusion2, &fusion2_},
                                    {kIndividualHead, &individual_head_},
                                    {kGroupHead, &group_head_}}) {
    params.layers.push_back({name, {Tensor(layer->weight_shape()), Tensor(layer->bias_shape())}});
  }
  return params;
}

ModelParams GroupModel::init_params(std::uint64_t seed) const {
  ModelParams params = zero_params();
  std::mt19937_64 rng(seed);
  std::size_t i = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t c = 0; c < 4; ++c) init_fan_in_normal(params.layers[i++].params, branches_[s].convs[c].fan_in(), rng);
  }
  init_fan_in_normal(params.layers[i++].params, fusion1_.fan_in(), rng);
  init_fan_in_normal(params.layers[i++].params, fusion2_.fan_in(), rng);
  // The heads start much smaller: at full fan-in scale the max-pooled
  // features give logits of several units, and the first updates are spent
  // undoing a confident random guess.
  for (std::size_t head = 0; head < 2; ++head) {
    LayerParams& p = params.layers[i++].params;
    init_fan_in_normal(p, p.weight.dim(1), rng);
    p.weight *= kHeadInitGain;
  }
  return params;
}

ModelOutputs GroupModel::forward(const StreamTensors& clip, std::span<const std::uint8_t> mask,
                                 const ModelParams& params) {
  return forward(make_input(clip, mask), params);
}

ModelOutputs GroupModel::forward(const ModelInput& input, const ModelParams& params) {
  const std::size_t B = input.batch;
  const std::size_t K = input.actors;
  const std::size_t rows = B * K;
  const Shape expected = {rows, 3, config_.frames, config_.joints};
  if (K != config_.actors) {
    throw ConfigError("forward: input has K=" + std::to_string(K) + ", model expects " + std::to_string(config_.actors));
  }
  if (params.layers.size() != 16) throw ConfigError("forward: parameter store does not match the model");

  const std::size_t branch_dim = config_.branch_output_dim();
  Tensor concat({rows, 3 * branch_dim});
  for (std::size_t s = 0; s < 3; ++s) {
    if (input.streams[s].shape() != expected) {
      throw ConfigError("forward: stream " + std::string(kStreamNames[s]) + " has shape " +
                        shape_string(input.streams[s].shape()) + ", expected " + shape_string(expected));
    }
    Branch& br = branches_[s];
    Tensor h = br.relus[0].forward(br.convs[0].forward(input.streams[s], params.layers[s * 4 + 0].params));
    h = br.relus[1].forward(br.convs[1].forward(h, params.layers[s * 4 + 1].params));
    h = permute_axes(h, kJointsToChannels);
    h = br.relus[2].forward(br.convs[2].forward(h, params.layers[s * 4 + 2].params));
    h = br.relus[3].forward(br.convs[3].forward(h, params.layers[s * 4 + 3].params));
    br.deep_shape = h.shape();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(h.data() + r * branch_dim, h.data() + (r + 1) * branch_dim,
                concat.data() + r * 3 * branch_dim + s * branch_dim);
    }
  }

  Tensor hidden = fusion1_relu_.forward(fusion1_.forward(concat, params.layers[12].params));
  Tensor features = fusion2_relu_.forward(fusion2_.forward(hidden, params.layers[13].params));

  ModelOutputs out;
  out.mask = input.mask;
  out.individual_logits = individual_head_.forward(features, params.layers[14].params);
  out.individual_logits.reshape({B, K, config_.action_classes});
  features.reshape({B, K, config_.fusion.features});
  Tensor pooled = pool_.forward(features, input.mask);
  out.group_logits = group_head_.forward(pooled, params.layers[15].params);
  out.actor_features = std::move(features);

  batch_ = B;
  rows_ = rows;
  cached_ = true;
  return out;
}

void GroupModel::backward(const OutputGrads& grads_out, const ModelParams& params, ModelParams& grads,
                          BackwardScope scope) {
  if (!cached_) throw ConfigError("backward: no cached forward pass");
  if (grads.layers.size() != params.layers.size()) throw ConfigError("backward: gradient store does not match");
  const std::size_t F = config_.fusion.features;

  Tensor d_pooled = group_head_.backward(grads_out.group_logits, params.layers[15].params, grads.layers[15].params);
  Tensor d_features = pool_.backward(d_pooled);
  d_features.reshape({rows_, F});
  Tensor d_indiv = individual_head_.backward(grads_out.individual_logits, params.layers[14].params,
                                             grads.layers[14].params);
  d_features += d_indiv;

  Tensor d_hidden = fusion2_.backward(fusion2_relu_.backward(d_features), params.layers[13].params,
                                      grads.layers[13].params);
  const bool into_branches = scope == BackwardScope::full;
  Tensor d_concat = fusion1_.backward(fusion1_relu_.backward(d_hidden), params.layers[12].params,
                                      grads.layers[12].params, into_branches);
  if (!into_branches) return;

  const std::size_t branch_dim = config_.branch_output_dim();
  for (std::size_t s = 0; s < 3; ++s) {
    Branch& br = branches_[s];
    Tensor d(br.deep_shape);
    for (std::size_t r = 0; r < rows_; ++r) {
      std::copy(d_concat.data() + r * 3 * branch_dim + s * branch_dim,
                d_concat.data() + r * 3 * branch_dim + (s + 1) * branch_dim, d.data() + r * branch_dim);
    }
    d = br.convs[3].backward(br.relus[3].backward(d), params.layers[s * 4 + 3].params, grads.layers[s * 4 + 3].params);
    d = br.convs[2].backward(br.relus[2].backward(d), params.layers[s * 4 + 2].params, grads.layers[s * 4 + 2].params);
    d = permute_axes(d, inverse_permutation(kJointsToChannels));
    d = br.convs[1].backward(br.relus[1].backward(d), params.layers[s * 4 + 1].params, grads.layers[s * 4 + 1].params);
    br.convs[0].backward(br.relus[0].backward(d), params.layers[s * 4 + 0].params, grads.layers[s * 4 + 0].params,
                         false);
  }
}

std::string GroupModel::summary() const {
  std::ostringstream out;
  const ModelParams params = zero_params();
  out << "group model: K=" << config_.actors << " T=" << config_.frames << " N=" << config_.joints
      << " A=" << config_.action_classes << " G=" << config_.group_classes << " F=" << config_.fusion.features
      << " lambda=" << config_.lambda << "\n";
  out << "branch output dim " << config_.branch_output_dim() << " per stream\n";
  for (const auto& layer : params.layers) {
    out << "  " << layer.name << " weight " << shape_string(layer.params.weight.shape()) << " bias "
        << shape_string(layer.params.bias.shape()) << " (" << layer.params.parameter_count() << ")\n";
  }
  out << "total parameters " << params.parameter_count() << "\n";
  return out.str();
}

}  // namespace skelgroup
