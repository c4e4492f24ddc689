#include "skelgroup/streams.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "skelgroup/error.hpp"

namespace skelgroup {

namespace {

double torso_length(const SkeletonFrame& frame, const SkeletonLayout& layout) {
  const Joint& neck = frame[layout.neck_index];
  const Joint& hip = frame[layout.mid_hip_index];
  return std::hypot(neck.x - hip.x, neck.y - hip.y);
}

}  // namespace

NormalizedFrame normalize_skeleton(const SkeletonFrame& frame, const SkeletonLayout& layout) {
  if (frame.size() != layout.n_joints) {
    throw ConfigError("normalize_skeleton: frame has " + std::to_string(frame.size()) + " joints, layout expects " +
                      std::to_string(layout.n_joints));
  }
  NormalizedFrame out;
  double torso = torso_length(frame, layout);
  if (!(torso >= kMinTorsoLength)) {
    torso = kMinTorsoLength;
    out.degenerate = true;
  }
  const Joint hip = frame[layout.mid_hip_index];
  out.frame.resize(frame.size());
  for (std::size_t j = 0; j < frame.size(); ++j) {
    const Joint& in = frame[j];
    if (in.p == 0.0) {
      out.frame[j] = {0.0, 0.0, 0.0};
    } else {
      out.frame[j] = {(in.x - hip.x) / torso, (in.y - hip.y) / torso, in.p};
    }
  }
  return out;
}

Tensor compute_motion(const ActorSequence& normalized) {
  const std::size_t T = normalized.frames.size();
  if (T < 2) throw ConfigError("compute_motion: need at least 2 frames, got " + std::to_string(T));
  const std::size_t N = normalized.frames.front().size();
  Tensor motion({T, N, 3});
  if (!normalized.valid) return motion;
  for (std::size_t t = 0; t + 1 < T; ++t) {
    const SkeletonFrame& now = normalized.frames[t];
    const SkeletonFrame& next = normalized.frames[t + 1];
    for (std::size_t j = 0; j < N; ++j) {
      motion(t, j, 0) = next[j].x - now[j].x;
      motion(t, j, 1) = next[j].y - now[j].y;
      motion(t, j, 2) = next[j].p - now[j].p;
    }
  }
  return motion;
}

std::size_t select_pivot(const ClipRecord& clip) {
  struct Centroid {
    std::size_t actor;
    double x;
    double y;
  };
  std::vector<Centroid> centroids;
  for (std::size_t k = 0; k < clip.actors.size(); ++k) {
    const ActorSequence& actor = clip.actors[k];
    if (!actor.valid) continue;
    double sx = 0.0;
    double sy = 0.0;
    std::size_t count = 0;
    for (const SkeletonFrame& frame : actor.frames) {
      for (const Joint& j : frame) {
        if (j.p > 0.0) {
          sx += j.x;
          sy += j.y;
          ++count;
        }
      }
    }
    if (count > 0) centroids.push_back({k, sx / static_cast<double>(count), sy / static_cast<double>(count)});
  }
  if (centroids.empty()) throw ConfigError("select_pivot: clip " + clip.clip_id + " has no valid actor");

  double gx = 0.0;
  double gy = 0.0;
  for (const Centroid& c : centroids) {
    gx += c.x;
    gy += c.y;
  }
  gx /= static_cast<double>(centroids.size());
  gy /= static_cast<double>(centroids.size());

  std::size_t best = centroids.front().actor;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const Centroid& c : centroids) {
    const double d = std::hypot(c.x - gx, c.y - gy);
    if (d < best_dist) {
      best_dist = d;
      best = c.actor;
    }
  }
  return best;
}

Tensor compute_pivot_diffs(const ClipRecord& clip, std::size_t pivot, const SkeletonLayout& layout) {
  if (pivot >= clip.actors.size() || !clip.actors[pivot].valid) {
    throw ConfigError("compute_pivot_diffs: pivot " + std::to_string(pivot) + " is not a valid actor of clip " +
                      clip.clip_id);
  }
  const std::size_t K = clip.actor_count();
  const std::size_t T = clip.frame_count();
  const std::size_t N = layout.n_joints;
  const ActorSequence& ref = clip.actors[pivot];

  double torso_sum = 0.0;
  std::size_t torso_frames = 0;
  for (const SkeletonFrame& frame : ref.frames) {
    if (frame[layout.neck_index].p > 0.0 && frame[layout.mid_hip_index].p > 0.0) {
      torso_sum += torso_length(frame, layout);
      ++torso_frames;
    }
  }
  double scale = torso_frames > 0 ? torso_sum / static_cast<double>(torso_frames) : 0.0;
  if (!(scale >= kMinTorsoLength)) scale = kMinTorsoLength;

  Tensor diffs({K, T, N, 3});
  for (std::size_t k = 0; k < K; ++k) {
    const ActorSequence& actor = clip.actors[k];
    if (!actor.valid || k == pivot) continue;
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t j = 0; j < N; ++j) {
        const Joint& a = actor.frames[t][j];
        const Joint& b = ref.frames[t][j];
        const double p = a.p * b.p;
        if (p == 0.0) continue;
        diffs(k, t, j, 0) = (a.x - b.x) / scale;
        diffs(k, t, j, 1) = (a.y - b.y) / scale;
        diffs(k, t, j, 2) = p;
      }
    }
  }
  // The pivot row keeps only the confidence channel.
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < N; ++j) {
      const double p = ref.frames[t][j].p;
      diffs(pivot, t, j, 2) = p * p;
    }
  }
  return diffs;
}

StreamTensors assemble_streams(const ClipRecord& clip, const SkeletonLayout& layout, StreamToggles toggles) {
  const std::size_t K = clip.actor_count();
  const std::size_t T = clip.frame_count();
  const std::size_t N = layout.n_joints;
  if (K == 0 || T == 0 || clip.joint_count() != N) {
    throw ConfigError("assemble_streams: clip " + clip.clip_id + " does not match the layout");
  }
  StreamTensors out;
  out.gs = Tensor({K, T, N, 3});
  out.gm = Tensor({K, T, N, 3});
  const std::size_t per_actor = T * N * 3;
  for (std::size_t k = 0; k < K; ++k) {
    const ActorSequence& actor = clip.actors[k];
    if (!actor.valid) continue;
    ActorSequence normalized;
    normalized.valid = true;
    normalized.frames.reserve(T);
    for (const SkeletonFrame& frame : actor.frames) normalized.frames.push_back(normalize_skeleton(frame, layout).frame);
    double* gs = out.gs.data() + k * per_actor;
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t j = 0; j < N; ++j) {
        const Joint& jt = normalized.frames[t][j];
        gs[(t * N + j) * 3 + 0] = jt.x;
        gs[(t * N + j) * 3 + 1] = jt.y;
        gs[(t * N + j) * 3 + 2] = jt.p;
      }
    }
    const Tensor motion = compute_motion(normalized);
    std::copy(motion.values().begin(), motion.values().end(), out.gm.data() + k * per_actor);
  }
  out.pivot_index = select_pivot(clip);
  out.gd = toggles.use_gd ? compute_pivot_diffs(clip, out.pivot_index, layout) : Tensor({K, T, N, 3});
  return out;
}

ClipRecord horizontal_flip(const ClipRecord& clip, const SkeletonLayout& layout,
                           const std::optional<LabelFlipMap>& flip_map) {
  ClipRecord out = clip;
  for (std::size_t k = 0; k < clip.actors.size(); ++k) {
    for (std::size_t t = 0; t < clip.actors[k].frames.size(); ++t) {
      const SkeletonFrame& src = clip.actors[k].frames[t];
      SkeletonFrame& dst = out.actors[k].frames[t];
      for (std::size_t j = 0; j < src.size(); ++j) {
        const Joint& in = src[j];
        dst[layout.lr_swap[j]] = {-in.x, in.y, in.p};
      }
    }
  }
  if (flip_map) {
    if (!flip_map->group.empty()) out.group_label = flip_map->group.at(static_cast<std::size_t>(clip.group_label));
    if (!flip_map->action.empty()) {
      for (int& label : out.action_labels) {
        if (label != kNoLabel) label = flip_map->action.at(static_cast<std::size_t>(label));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- dump io

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

void put_f32(std::ostream& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) return false;
  v = static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
      (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
  return true;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  if (t.rank() > 4) throw ConfigError("tensor dump supports rank <= 4");
  for (std::size_t i = 0; i < 4; ++i) put_u32(out, static_cast<std::uint32_t>(i < t.rank() ? t.dim(i) : 1));
  for (double v : t.values()) put_f32(out, static_cast<float>(v));
}

}  // namespace

void write_stream_dump(const StreamTensors& streams, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_tensor(out, streams.gs);
  write_tensor(out, streams.gm);
  write_tensor(out, streams.gd);
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<Tensor> read_tensor_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("path not found: " + path.string());
  std::vector<Tensor> tensors;
  while (true) {
    std::uint32_t dims[4];
    if (!get_u32(in, dims[0])) break;
    for (int i = 1; i < 4; ++i) {
      if (!get_u32(in, dims[i])) throw IoError("truncated tensor header in " + path.string());
    }
    Tensor t(Shape{dims[0], dims[1], dims[2], dims[3]});
    for (double& v : t.values()) {
      std::uint32_t bits;
      if (!get_u32(in, bits)) throw IoError("truncated tensor data in " + path.string());
      v = static_cast<double>(std::bit_cast<float>(bits));
    }
    tensors.push_back(std::move(t));
  }
  return tensors;
}

}  // namespace skelgroup
