#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>

#include "skelgroup/dataset.hpp"
#include "skelgroup/tensor.hpp"

namespace skelgroup {

inline constexpr double kMinTorsoLength = 1e-6;

// The three network inputs, each [K, T, N, 3] with channels (x, y, p).
struct StreamTensors {
  Tensor gs;  // mid-hip centred, torso-scaled poses
  Tensor gm;  // frame-to-frame motion of gs
  Tensor gd;  // joint offsets from the pivot actor
  std::size_t pivot_index = 0;
};

struct NormalizedFrame {
  SkeletonFrame frame;
  bool degenerate = false;  // torso shorter than kMinTorsoLength
};

NormalizedFrame normalize_skeleton(const SkeletonFrame& frame, const SkeletonLayout& layout);

// [T, N, 3]; entry t holds frame t+1 minus frame t and the final entry is
// zero. Padding actors give all zeros. Throws when T < 2.
Tensor compute_motion(const ActorSequence& normalized);

// Valid actor whose time-averaged joint centroid lies closest to the mean of
// all actor centroids. Ties resolve to the lowest index.
std::size_t select_pivot(const ClipRecord& clip);

// [K, T, N, 3] on raw coordinates: (actor - pivot) / mean pivot torso length
// for x, y, and the product of both confidences for p.
Tensor compute_pivot_diffs(const ClipRecord& clip, std::size_t pivot, const SkeletonLayout& layout);

struct StreamToggles {
  bool use_gd = true;
};

StreamTensors assemble_streams(const ClipRecord& clip, const SkeletonLayout& layout, StreamToggles toggles = {});

// Mirrors x, swaps left/right joints and remaps labels through `flip_map`.
ClipRecord horizontal_flip(const ClipRecord& clip, const SkeletonLayout& layout,
                           const std::optional<LabelFlipMap>& flip_map);

// Flat dump: per tensor, four little-endian uint32 shape fields followed by
// row-major float32 values. Written in the order gs, gm, gd.
void write_stream_dump(const StreamTensors& streams, const std::filesystem::path& path);
std::vector<Tensor> read_tensor_dump(const std::filesystem::path& path);

}  // namespace skelgroup
