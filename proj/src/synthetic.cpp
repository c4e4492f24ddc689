#include "skelgroup/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <iomanip>

#include "skelgroup/error.hpp"

namespace skelgroup {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Motion amplitudes are kept small against the pose noise so the motif must
// actually be learned rather than read off a single frame.
constexpr double kMotifGain = 0.8;

const char* primitive_name(MotionPrimitive p) {
  switch (p) {
    case MotionPrimitive::arm_swing: return "swing";
    case MotionPrimitive::squat: return "squat";
    case MotionPrimitive::arm_reach: return "reach";
    case MotionPrimitive::step: return "step";
  }
  return "?";
}

std::string cycles_suffix(double cycles) {
  std::ostringstream out;
  out << std::setprecision(3) << cycles;
  return out.str();
}

}  // namespace

SyntheticDesign synthetic_design(std::size_t group_classes, std::size_t action_classes) {
  if (group_classes < 2 || action_classes < 2) throw ConfigError("synthetic design: need G >= 2 and A >= 2");
  SyntheticDesign design;
  const std::size_t patterns = (group_classes + 1) / 2;
  const std::size_t n_key = std::min(patterns, action_classes - 1);
  const std::size_t n_background = action_classes - n_key;

  // Background motifs cycle through the non-step primitives; key motifs are
  // all steps that differ only in tempo.
  static const MotionPrimitive background_cycle[] = {MotionPrimitive::arm_swing, MotionPrimitive::squat,
                                                     MotionPrimitive::arm_reach};
  for (std::size_t a = 0; a < n_background; ++a) {
    MotifSpec m;
    m.primitive = background_cycle[a % 3];
    m.cycles = 1.0 + 0.5 * static_cast<double>(a / 3);
    m.name = std::string(primitive_name(m.primitive)) + "@" + cycles_suffix(m.cycles);
    design.motifs.push_back(m);
    design.background_motifs.push_back(static_cast<int>(a));
  }
  for (std::size_t j = 0; j < n_key; ++j) {
    MotifSpec m;
    m.primitive = MotionPrimitive::step;
    m.cycles = 1.0 + 0.75 * static_cast<double>(j);
    m.name = std::string(primitive_name(m.primitive)) + "@" + cycles_suffix(m.cycles);
    design.motifs.push_back(m);
  }
  for (std::size_t m = 0; m < patterns; ++m) {
    design.key_motifs.push_back(static_cast<int>(n_background + (m % n_key)));
  }
  static const char* formation_names[] = {"left-form", "right-form"};
  for (std::size_t g = 0; g < group_classes; ++g) {
    design.group_names.push_back(std::string(formation_names[g % 2]) + ":" +
                                 design.motifs[static_cast<std::size_t>(design.key_motifs[g / 2])].name);
  }
  return design;
}

SkeletonFrame rest_pose(std::size_t joints) {
  // Right side at negative x, left side mirrored.
  static const Joint body[25] = {
      {0.0, -0.68, 1},    {0.0, -0.5, 1},     {-0.18, -0.5, 1},  {-0.22, -0.25, 1}, {-0.24, -0.02, 1},
      {0.18, -0.5, 1},    {0.22, -0.25, 1},   {0.24, -0.02, 1},  {0.0, 0.0, 1},     {-0.1, 0.0, 1},
      {-0.11, 0.42, 1},   {-0.12, 0.85, 1},   {0.1, 0.0, 1},     {0.11, 0.42, 1},   {0.12, 0.85, 1},
      {-0.04, -0.72, 1},  {0.04, -0.72, 1},   {-0.08, -0.7, 1},  {0.08, -0.7, 1},   {0.16, 0.9, 1},
      {0.2, 0.9, 1},      {0.1, 0.88, 1},     {-0.16, 0.9, 1},   {-0.2, 0.9, 1},    {-0.1, 0.88, 1}};
  if (joints > 25) throw ConfigError("rest_pose: at most 25 joints");
  return SkeletonFrame(body, body + joints);
}

std::vector<Joint> motif_displacement(const MotifSpec& motif, std::size_t joints, double angle, double amplitude) {
  std::vector<Joint> d(joints, Joint{0.0, 0.0, 0.0});
  auto move = [&](std::size_t j, double dx, double dy) {
    if (j < joints) {
      d[j].x += kMotifGain * amplitude * dx;
      d[j].y += kMotifGain * amplitude * dy;
    }
  };
  const double s = std::sin(angle);
  switch (motif.primitive) {
    case MotionPrimitive::arm_swing:
      move(3, 0.0, -0.12 * s);
      move(6, 0.0, -0.12 * s);
      move(4, 0.0, -0.28 * s);
      move(7, 0.0, -0.28 * s);
      break;
    case MotionPrimitive::squat:
      for (std::size_t j : {0, 1, 2, 3, 4, 5, 6, 7, 15, 16, 17, 18}) move(j, 0.0, 0.1 * s);
      move(10, -0.06 * s, -0.05 * s);
      move(13, 0.06 * s, -0.05 * s);
      for (std::size_t j : {11, 14, 19, 20, 21, 22, 23, 24}) move(j, 0.0, -0.1 * s);
      break;
    case MotionPrimitive::arm_reach:
      move(3, -0.1 * s, 0.0);
      move(6, 0.1 * s, 0.0);
      move(4, -0.22 * s, 0.0);
      move(7, 0.22 * s, 0.0);
      break;
    case MotionPrimitive::step:
      move(10, 0.0, -0.12 * s);
      move(11, 0.0, -0.16 * s);
      for (std::size_t j : {22, 23, 24}) move(j, 0.0, -0.16 * s);
      move(13, 0.0, 0.12 * s);
      move(14, 0.0, 0.16 * s);
      for (std::size_t j : {19, 20, 21}) move(j, 0.0, 0.16 * s);
      // counter-swinging arms
      move(4, 0.0, 0.08 * s);
      move(7, 0.0, -0.08 * s);
      break;
  }
  return d;
}

Dataset generate_synthetic(const SyntheticConfig& config) {
  if (config.group_classes < 2 || config.action_classes < 2 || config.actors < 2) {
    throw ConfigError("generate_synthetic: need G >= 2, A >= 2 and K >= 2");
  }
  if (config.frames < 2) throw ConfigError("generate_synthetic: need T >= 2");
  if (config.joints < 9 || config.joints > 25) throw ConfigError("generate_synthetic: N must lie in [9, 25]");
  if (!(config.noise_std >= 0.0) || !std::isfinite(config.noise_std)) {
    throw ConfigError("generate_synthetic: noise_std must be finite and non-negative");
  }

  const SyntheticDesign design = synthetic_design(config.group_classes, config.action_classes);
  Dataset ds;
  ds.layout = SkeletonLayout::body25_prefix(config.joints);
  ds.group_classes = design.group_names;
  for (const MotifSpec& m : design.motifs) ds.action_classes.push_back(m.name);
  ds.actors_per_clip = config.actors;
  ds.frames_per_clip = config.frames;
  if (config.group_classes % 2 == 0) {
    LabelFlipMap map;
    for (std::size_t g = 0; g < config.group_classes; ++g) map.group.push_back(static_cast<int>(g ^ 1U));
    ds.label_flip_map = std::move(map);
  }

  const std::size_t K = config.actors;
  const std::size_t T = config.frames;
  const std::size_t N = config.joints;
  const SkeletonFrame rest = rest_pose(N);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  constexpr double spacing = 1.2;
  constexpr double slope = 0.35;
  constexpr double anchor_jitter = 0.15;

  for (std::size_t i = 0; i < config.n_clips; ++i) {
    const auto g = static_cast<int>(i % config.group_classes);
    const std::size_t formation = static_cast<std::size_t>(g) % 2;
    const std::size_t pattern = static_cast<std::size_t>(g) / 2;

    // Motif per formation slot: one or two key actors, background for the rest.
    std::vector<int> motifs(K);
    const std::size_t n_key = 1 + static_cast<std::size_t>(unit(rng) < 0.5 && K > 2);
    for (std::size_t k = 0; k < K; ++k) {
      if (k < n_key) {
        motifs[k] = design.key_motifs[pattern];
      } else {
        const auto pick = static_cast<std::size_t>(unit(rng) * static_cast<double>(design.background_motifs.size()));
        motifs[k] = design.background_motifs[std::min(pick, design.background_motifs.size() - 1)];
      }
    }
    std::vector<std::size_t> slot(K);
    std::iota(slot.begin(), slot.end(), std::size_t{0});
    std::shuffle(slot.begin(), slot.end(), rng);

    const double zoom = uniform(0.8, 1.25);
    const double tx = uniform(-5.0, 5.0);
    const double ty = uniform(-3.0, 3.0);
    const double pan_x = uniform(-0.05, 0.05);
    const double pan_y = uniform(-0.02, 0.02);
    const double dir = formation == 0 ? -slope : slope;

    ClipRecord clip;
    std::ostringstream id;
    id << "syn" << std::setw(6) << std::setfill('0') << i;
    clip.clip_id = id.str();
    clip.group_label = g;
    clip.actors.resize(K);
    clip.action_labels.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
      // Actor k stands at line position slot[k] and performs motifs[slot[k]].
      const std::size_t pos = slot[k];
      const int motif = motifs[pos];
      const double along = (static_cast<double>(pos) - 0.5 * static_cast<double>(K - 1)) * spacing;
      const double ax = along + anchor_jitter * gauss(rng);
      const double ay = dir * along + anchor_jitter * gauss(rng);
      const double body = uniform(0.9, 1.1);
      const double amplitude = uniform(0.8, 1.2);
      const double phase = uniform(0.0, kTwoPi);
      const MotifSpec& spec = design.motifs[static_cast<std::size_t>(motif)];

      ActorSequence& actor = clip.actors[k];
      actor.valid = true;
      actor.frames.resize(T);
      for (std::size_t t = 0; t < T; ++t) {
        const double angle = phase + kTwoPi * spec.cycles * static_cast<double>(t) / static_cast<double>(T);
        const std::vector<Joint> disp = motif_displacement(spec, N, angle, amplitude);
        SkeletonFrame frame(N);
        for (std::size_t j = 0; j < N; ++j) {
          const double bx = ax + body * (rest[j].x + disp[j].x);
          const double by = ay + body * (rest[j].y + disp[j].y);
          frame[j].x = zoom * bx + tx + pan_x * static_cast<double>(t) + config.noise_std * gauss(rng);
          frame[j].y = zoom * by + ty + pan_y * static_cast<double>(t) + config.noise_std * gauss(rng);
          frame[j].p = uniform(0.7, 1.0);
        }
        actor.frames[t] = std::move(frame);
      }
      clip.action_labels[k] = motif;
    }
    ds.clips.push_back(std::move(clip));
  }
  return ds;
}

}  // namespace skelgroup
