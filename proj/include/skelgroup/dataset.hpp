#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace skelgroup {

// One 2D keypoint with its detector confidence.
struct Joint {
  double x = 0.0;
  double y = 0.0;
  double p = 0.0;
  friend bool operator==(const Joint&, const Joint&) = default;
};

using SkeletonFrame = std::vector<Joint>;

struct ActorSequence {
  std::vector<SkeletonFrame> frames;
  bool valid = true;  // false for padding actors
  friend bool operator==(const ActorSequence&, const ActorSequence&) = default;
};

inline constexpr int kNoLabel = -1;

struct ClipRecord {
  std::string clip_id;
  std::vector<ActorSequence> actors;
  int group_label = 0;
  // Empty when the clip carries no individual labels; otherwise one entry per
  // actor, kNoLabel for padding actors.
  std::vector<int> action_labels;
  // Ground-truth individual labels kept aside when `action_labels` has been
  // replaced by pseudo-labels. Evaluation only.
  std::vector<int> reference_action_labels;

  std::size_t actor_count() const { return actors.size(); }
  std::size_t frame_count() const { return actors.empty() ? 0 : actors.front().frames.size(); }
  std::size_t joint_count() const;
  bool has_action_labels() const { return !action_labels.empty(); }
  std::vector<std::uint8_t> actor_mask() const;
  std::size_t real_actor_count() const;

  friend bool operator==(const ClipRecord&, const ClipRecord&) = default;
};

// Names the joints the normalization needs plus the left/right mirror table.
struct SkeletonLayout {
  std::size_t n_joints = 25;
  std::size_t mid_hip_index = 8;
  std::size_t neck_index = 1;
  std::vector<std::size_t> lr_swap;

  // OpenPose BODY_25 ordering.
  static SkeletonLayout body25();
  // The first `n_joints` joints of BODY_25 (needs n_joints >= 9); swap pairs
  // whose partner falls outside the prefix map to themselves.
  static SkeletonLayout body25_prefix(std::size_t n_joints);

  // Empty when the layout is consistent.
  std::vector<std::string> problems() const;

  friend bool operator==(const SkeletonLayout&, const SkeletonLayout&) = default;
};

// Class-id permutations applied when a clip is mirrored horizontally.
struct LabelFlipMap {
  std::vector<int> group;
  std::vector<int> action;  // empty means identity
  friend bool operator==(const LabelFlipMap&, const LabelFlipMap&) = default;
};

struct Dataset {
  std::vector<ClipRecord> clips;
  SkeletonLayout layout;
  std::vector<std::string> group_classes;
  std::vector<std::string> action_classes;
  std::optional<LabelFlipMap> label_flip_map;
  std::size_t actors_per_clip = 0;  // K
  std::size_t frames_per_clip = 0;  // T
  bool pseudo_labeled = false;

  std::size_t group_class_count() const { return group_classes.size(); }
  std::size_t action_class_count() const { return action_classes.size(); }
  std::size_t joint_count() const { return layout.n_joints; }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// A single invariant breach: which field, and a readable explanation.
struct Violation {
  std::string field;
  std::string message;
};

std::vector<Violation> validate_clip(const ClipRecord& clip, const SkeletonLayout& layout,
                                     std::size_t group_classes = 0, std::size_t action_classes = 0);

// Throws ConfigError listing the problems when the dataset is inconsistent.
void validate_dataset(const Dataset& ds);

struct LoadOptions {
  std::optional<SkeletonLayout> layout;    // overrides the manifest layout
  std::optional<std::size_t> actors;       // overrides manifest K
  std::optional<std::size_t> frames;       // overrides manifest T
};

// `path` is a manifest file or a directory holding manifest.json.
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});

// Writes manifest.json and clips/<clip_id>.json under `dir`. Padding actors
// are not written; the loader restores them from K.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);

// Per-class shuffle and cut; both halves keep the original clip order.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed);

// Copy of `ds` with only the clips at `indices` (in that order).
Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices);

}  // namespace skelgroup
