#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "skelgroup/dataset.hpp"

namespace skelgroup {

struct SyntheticConfig {
  std::size_t n_clips = 200;
  std::size_t actors = 8;   // K
  std::size_t frames = 10;  // T
  std::size_t joints = 15;  // N, a BODY_25 prefix
  std::size_t group_classes = 4;
  std::size_t action_classes = 4;
  double noise_std = 0.02;
  std::uint64_t seed = 0;
};

// Body-part movement families used by the generator.
enum class MotionPrimitive { arm_swing, squat, arm_reach, step };

// One individual action: a periodic movement of a body part at a frequency
// (cycles per clip window).
struct MotifSpec {
  std::string name;
  MotionPrimitive primitive = MotionPrimitive::arm_swing;
  double cycles = 1.0;
};

// The generator's lookup tables. Group class g combines formation g % 2
// (0: line rising to the right, 1: its mirror) with a motif pattern g / 2;
// pattern m means one or two actors perform key motif `key_motifs[m]` while
// the others draw from `background_motifs`.
struct SyntheticDesign {
  std::vector<MotifSpec> motifs;
  std::vector<int> key_motifs;
  std::vector<int> background_motifs;
  std::vector<std::string> group_names;
  std::size_t formations = 2;
};

SyntheticDesign synthetic_design(std::size_t group_classes, std::size_t action_classes);

// Neutral standing pose (BODY_25 prefix, y pointing down, torso length 0.5).
SkeletonFrame rest_pose(std::size_t joints);

// Displacement of every joint for `motif` at phase angle `angle` (radians)
// and amplitude `amplitude`.
std::vector<Joint> motif_displacement(const MotifSpec& motif, std::size_t joints, double angle, double amplitude);

Dataset generate_synthetic(const SyntheticConfig& config);

}  // namespace skelgroup
