#include "skelgroup/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "skelgroup/error.hpp"

namespace skelgroup {

using nlohmann::json;
namespace fs = std::filesystem;

std::size_t ClipRecord::joint_count() const {
  if (actors.empty() || actors.front().frames.empty()) return 0;
  return actors.front().frames.front().size();
}

std::vector<std::uint8_t> ClipRecord::actor_mask() const {
  std::vector<std::uint8_t> mask(actors.size());
  for (std::size_t k = 0; k < actors.size(); ++k) mask[k] = actors[k].valid ? 1 : 0;
  return mask;
}

std::size_t ClipRecord::real_actor_count() const {
  return static_cast<std::size_t>(std::count_if(actors.begin(), actors.end(), [](const auto& a) { return a.valid; }));
}

// ---------------------------------------------------------------- layout

SkeletonLayout SkeletonLayout::body25() { return body25_prefix(25); }

SkeletonLayout SkeletonLayout::body25_prefix(std::size_t n_joints) {
  if (n_joints < 9 || n_joints > 25) {
    throw ConfigError("body25_prefix: joint count must be in [9, 25], got " + std::to_string(n_joints));
  }
  // 0 nose, 1 neck, 2-4 right arm, 5-7 left arm, 8 mid-hip, 9-11 right leg,
  // 12-14 left leg, 15/16 eyes, 17/18 ears, 19-21 left foot, 22-24 right foot.
  static const std::vector<std::pair<std::size_t, std::size_t>> pairs = {
      {2, 5}, {3, 6}, {4, 7}, {9, 12}, {10, 13}, {11, 14}, {15, 16}, {17, 18}, {19, 22}, {20, 23}, {21, 24}};
  SkeletonLayout layout;
  layout.n_joints = n_joints;
  layout.mid_hip_index = 8;
  layout.neck_index = 1;
  layout.lr_swap.resize(n_joints);
  std::iota(layout.lr_swap.begin(), layout.lr_swap.end(), std::size_t{0});
  for (auto [a, b] : pairs) {
    if (a < n_joints && b < n_joints) {
      layout.lr_swap[a] = b;
      layout.lr_swap[b] = a;
    }
  }
  return layout;
}

std::vector<std::string> SkeletonLayout::problems() const {
  std::vector<std::string> out;
  if (n_joints == 0) out.push_back("n_joints must be positive");
  if (mid_hip_index >= n_joints) out.push_back("mid_hip_index out of range");
  if (neck_index >= n_joints) out.push_back("neck_index out of range");
  if (mid_hip_index == neck_index) out.push_back("mid_hip_index and neck_index coincide");
  if (lr_swap.size() != n_joints) {
    out.push_back("lr_swap has " + std::to_string(lr_swap.size()) + " entries, expected " + std::to_string(n_joints));
  } else {
    for (std::size_t j = 0; j < n_joints; ++j) {
      if (lr_swap[j] >= n_joints || lr_swap[lr_swap[j]] != j) {
        out.push_back("lr_swap is not an involution at joint " + std::to_string(j));
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- validation

std::vector<Violation> validate_clip(const ClipRecord& clip, const SkeletonLayout& layout, std::size_t group_classes,
                                     std::size_t action_classes) {
  std::vector<Violation> out;
  auto add = [&out](std::string field, std::string message) { out.push_back({std::move(field), std::move(message)}); };

  if (clip.actors.empty()) {
    add("actors", "clip has no actors");
    return out;
  }
  if (clip.real_actor_count() == 0) add("actors", "clip has no valid actor");
  if (group_classes > 0 && (clip.group_label < 0 || static_cast<std::size_t>(clip.group_label) >= group_classes)) {
    add("group_label", "group label " + std::to_string(clip.group_label) + " out of range [0, " +
                           std::to_string(group_classes) + ")");
  } else if (clip.group_label < 0) {
    add("group_label", "negative group label");
  }

  const std::size_t frames = clip.actors.front().frames.size();
  if (frames == 0) add("actors[0].frames", "actor has no frames");
  for (std::size_t k = 0; k < clip.actors.size(); ++k) {
    const ActorSequence& actor = clip.actors[k];
    const std::string prefix = "actors[" + std::to_string(k) + "]";
    if (actor.frames.size() != frames) {
      add(prefix + ".frames", "has " + std::to_string(actor.frames.size()) + " frames, expected " + std::to_string(frames));
      continue;
    }
    for (std::size_t t = 0; t < actor.frames.size(); ++t) {
      const SkeletonFrame& frame = actor.frames[t];
      const std::string fprefix = prefix + ".frames[" + std::to_string(t) + "]";
      if (frame.size() != layout.n_joints) {
        add(fprefix, "has " + std::to_string(frame.size()) + " joints, expected " + std::to_string(layout.n_joints));
        continue;
      }
      for (std::size_t j = 0; j < frame.size(); ++j) {
        const Joint& joint = frame[j];
        const std::string jfield = fprefix + "[" + std::to_string(j) + "]";
        if (!std::isfinite(joint.x) || !std::isfinite(joint.y)) add(jfield + ".xy", "non-finite coordinate");
        if (!(joint.p >= 0.0 && joint.p <= 1.0)) add(jfield + ".p", "confidence outside [0, 1]");
        if (!actor.valid && (joint.x != 0.0 || joint.y != 0.0 || joint.p != 0.0)) {
          add(jfield, "padding actor joint is not zero");
        }
      }
    }
  }

  if (clip.has_action_labels()) {
    if (clip.action_labels.size() != clip.actors.size()) {
      add("action_labels", "has " + std::to_string(clip.action_labels.size()) + " entries for " +
                               std::to_string(clip.actors.size()) + " actors");
    } else {
      for (std::size_t k = 0; k < clip.actors.size(); ++k) {
        const int label = clip.action_labels[k];
        const std::string field = "action_labels[" + std::to_string(k) + "]";
        if (!clip.actors[k].valid) {
          if (label != kNoLabel) add(field, "masked-out actor carries a label");
        } else if (label == kNoLabel) {
          add(field, "real actor is missing its label");
        } else if (label < 0 || (action_classes > 0 && static_cast<std::size_t>(label) >= action_classes)) {
          add(field, "action label " + std::to_string(label) + " out of range");
        }
      }
    }
  }
  return out;
}

void validate_dataset(const Dataset& ds) {
  std::ostringstream msg;
  bool bad = false;
  for (const std::string& p : ds.layout.problems()) {
    msg << "\n  layout: " << p;
    bad = true;
  }
  if (ds.group_classes.size() < 2) {
    msg << "\n  fewer than 2 group classes";
    bad = true;
  }
  std::set<std::string> ids;
  for (const ClipRecord& clip : ds.clips) {
    if (!ids.insert(clip.clip_id).second) {
      msg << "\n  duplicate clip_id " << clip.clip_id;
      bad = true;
    }
    if (clip.actor_count() != ds.actors_per_clip || clip.frame_count() != ds.frames_per_clip) {
      msg << "\n  " << clip.clip_id << ": shape K=" << clip.actor_count() << " T=" << clip.frame_count()
          << " differs from dataset K=" << ds.actors_per_clip << " T=" << ds.frames_per_clip;
      bad = true;
      continue;
    }
    for (const Violation& v : validate_clip(clip, ds.layout, ds.group_classes.size(), ds.action_classes.size())) {
      msg << "\n  " << clip.clip_id << ": " << v.field << ": " << v.message;
      bad = true;
    }
  }
  if (bad) throw ConfigError("invalid dataset:" + msg.str());
}

// ---------------------------------------------------------------- JSON io

namespace {

json layout_to_json(const SkeletonLayout& layout) {
  return json{{"n_joints", layout.n_joints},
              {"mid_hip_index", layout.mid_hip_index},
              {"neck_index", layout.neck_index},
              {"lr_swap", layout.lr_swap}};
}

SkeletonLayout layout_from_json(const json& j) {
  SkeletonLayout layout;
  layout.n_joints = j.at("n_joints").get<std::size_t>();
  layout.mid_hip_index = j.at("mid_hip_index").get<std::size_t>();
  layout.neck_index = j.at("neck_index").get<std::size_t>();
  layout.lr_swap = j.at("lr_swap").get<std::vector<std::size_t>>();
  return layout;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("path not found: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

ClipRecord clip_from_json(const json& j, const fs::path& file, std::size_t n_joints) {
  ClipRecord clip;
  std::string where = file.string();
  auto fail = [&](const std::string& field, const std::string& why) -> IoError {
    return IoError("malformed clip " + (clip.clip_id.empty() ? where : clip.clip_id) + ": field " + field + ": " + why);
  };
  if (!j.is_object()) throw fail("<root>", "expected an object");
  if (!j.contains("clip_id") || !j["clip_id"].is_string()) throw fail("clip_id", "missing or not a string");
  clip.clip_id = j["clip_id"].get<std::string>();
  if (!j.contains("group_label") || !j["group_label"].is_number_integer()) {
    throw fail("group_label", "missing or not an integer");
  }
  clip.group_label = j["group_label"].get<int>();
  if (!j.contains("actors") || !j["actors"].is_array()) throw fail("actors", "missing or not an array");

  bool any_label = false;
  std::vector<int> labels;
  for (std::size_t k = 0; k < j["actors"].size(); ++k) {
    const json& a = j["actors"][k];
    const std::string field = "actors[" + std::to_string(k) + "]";
    if (!a.is_object() || !a.contains("frames") || !a["frames"].is_array()) throw fail(field + ".frames", "missing");
    ActorSequence actor;
    actor.valid = true;
    for (std::size_t t = 0; t < a["frames"].size(); ++t) {
      const json& f = a["frames"][t];
      const std::string ffield = field + ".frames[" + std::to_string(t) + "]";
      if (!f.is_array() || f.size() != n_joints) {
        throw fail(ffield, "expected " + std::to_string(n_joints) + " joints");
      }
      SkeletonFrame frame(n_joints);
      for (std::size_t n = 0; n < n_joints; ++n) {
        const json& jt = f[n];
        if (!jt.is_array() || jt.size() != 3 || !jt[0].is_number() || !jt[1].is_number() || !jt[2].is_number()) {
          throw fail(ffield + "[" + std::to_string(n) + "]", "expected [x, y, p]");
        }
        frame[n] = {jt[0].get<double>(), jt[1].get<double>(), jt[2].get<double>()};
      }
      actor.frames.push_back(std::move(frame));
    }
    int label = kNoLabel;
    if (a.contains("action_label") && !a["action_label"].is_null()) {
      if (!a["action_label"].is_number_integer()) throw fail(field + ".action_label", "not an integer");
      label = a["action_label"].get<int>();
      any_label = true;
    }
    labels.push_back(label);
    clip.actors.push_back(std::move(actor));
  }
  if (any_label) clip.action_labels = std::move(labels);
  return clip;
}

json clip_to_json(const ClipRecord& clip) {
  json actors = json::array();
  for (std::size_t k = 0; k < clip.actors.size(); ++k) {
    const ActorSequence& actor = clip.actors[k];
    if (!actor.valid) continue;
    json frames = json::array();
    for (const SkeletonFrame& frame : actor.frames) {
      json joints = json::array();
      for (const Joint& jt : frame) joints.push_back(json::array({jt.x, jt.y, jt.p}));
      frames.push_back(std::move(joints));
    }
    json a;
    a["action_label"] = clip.has_action_labels() ? json(clip.action_labels[k]) : json(nullptr);
    a["frames"] = std::move(frames);
    actors.push_back(std::move(a));
  }
  return json{{"clip_id", clip.clip_id}, {"group_label", clip.group_label}, {"actors", std::move(actors)}};
}

// Crops to `frames` (center) and pads to `actors` with zero, invalid actors.
void conform_clip(ClipRecord& clip, std::size_t actors, std::size_t frames, std::size_t n_joints) {
  if (clip.actors.size() > actors) {
    throw IoError("clip " + clip.clip_id + ": " + std::to_string(clip.actors.size()) + " actors exceed K=" +
                  std::to_string(actors));
  }
  if (clip.actors.empty()) throw IoError("clip " + clip.clip_id + ": field actors: empty");
  for (std::size_t k = 0; k < clip.actors.size(); ++k) {
    auto& seq = clip.actors[k].frames;
    if (seq.size() < frames) {
      throw IoError("clip " + clip.clip_id + ": field actors[" + std::to_string(k) + "].frames: " +
                    std::to_string(seq.size()) + " frames, need at least T=" + std::to_string(frames));
    }
    if (seq.size() > frames) {
      const std::size_t start = (seq.size() - frames) / 2;
      seq = std::vector<SkeletonFrame>(seq.begin() + static_cast<std::ptrdiff_t>(start),
                                       seq.begin() + static_cast<std::ptrdiff_t>(start + frames));
    }
  }
  while (clip.actors.size() < actors) {
    ActorSequence pad;
    pad.valid = false;
    pad.frames.assign(frames, SkeletonFrame(n_joints));
    clip.actors.push_back(std::move(pad));
    if (clip.has_action_labels()) clip.action_labels.push_back(kNoLabel);
  }
}

}  // namespace

Dataset load_dataset(const fs::path& path, const LoadOptions& options) {
  if (!fs::exists(path)) throw IoError("path not found: " + path.string());
  const fs::path manifest_path = fs::is_directory(path) ? path / "manifest.json" : path;
  if (!fs::exists(manifest_path)) throw IoError("path not found: " + manifest_path.string());
  const fs::path root = manifest_path.parent_path();
  const json manifest = read_json_file(manifest_path);

  Dataset ds;
  try {
    if (options.layout) {
      ds.layout = *options.layout;
    } else if (manifest.contains("layout")) {
      ds.layout = layout_from_json(manifest["layout"]);
    } else {
      ds.layout = SkeletonLayout::body25();
    }
    ds.group_classes = manifest.at("group_classes").get<std::vector<std::string>>();
    ds.action_classes = manifest.value("action_classes", std::vector<std::string>{});
    ds.actors_per_clip = options.actors.value_or(manifest.at("actors_per_clip").get<std::size_t>());
    ds.frames_per_clip = options.frames.value_or(manifest.at("frames_per_clip").get<std::size_t>());
    if (manifest.contains("label_flip_map") && !manifest["label_flip_map"].is_null()) {
      LabelFlipMap map;
      map.group = manifest["label_flip_map"].at("group").get<std::vector<int>>();
      map.action = manifest["label_flip_map"].value("action", std::vector<int>{});
      ds.label_flip_map = std::move(map);
    }
  } catch (const json::exception& e) {
    throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  for (const std::string& p : ds.layout.problems()) throw IoError("manifest layout: " + p);
  if (ds.actors_per_clip == 0 || ds.frames_per_clip == 0) throw IoError("manifest: K and T must be positive");

  if (!manifest.contains("clips") || !manifest["clips"].is_array()) {
    throw IoError("malformed manifest " + manifest_path.string() + ": missing clips list");
  }
  for (const json& entry : manifest["clips"]) {
    if (!entry.is_string()) throw IoError("malformed manifest: clip entries must be file paths");
    const fs::path file = root / entry.get<std::string>();
    if (!fs::exists(file)) throw IoError("path not found: " + file.string());
    ClipRecord clip = clip_from_json(read_json_file(file), file, ds.layout.n_joints);
    conform_clip(clip, ds.actors_per_clip, ds.frames_per_clip, ds.layout.n_joints);
    const auto violations = validate_clip(clip, ds.layout, ds.group_classes.size(), ds.action_classes.size());
    if (!violations.empty()) {
      throw IoError("clip " + clip.clip_id + ": field " + violations.front().field + ": " + violations.front().message);
    }
    ds.clips.push_back(std::move(clip));
  }
  try {
    validate_dataset(ds);
  } catch (const ConfigError& e) {
    throw IoError(e.what());
  }
  return ds;
}

void write_dataset(const Dataset& ds, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "clips", ec);
  if (ec) throw IoError("cannot create " + (dir / "clips").string() + ": " + ec.message());
  json clips = json::array();
  for (const ClipRecord& clip : ds.clips) {
    const std::string rel = "clips/" + clip.clip_id + ".json";
    write_text_file(dir / rel, clip_to_json(clip).dump() + "\n");
    clips.push_back(rel);
  }
  json manifest;
  manifest["format"] = "skelgroup-dataset";
  manifest["version"] = 1;
  manifest["actors_per_clip"] = ds.actors_per_clip;
  manifest["frames_per_clip"] = ds.frames_per_clip;
  manifest["layout"] = layout_to_json(ds.layout);
  manifest["group_classes"] = ds.group_classes;
  manifest["action_classes"] = ds.action_classes;
  if (ds.label_flip_map) {
    manifest["label_flip_map"] = json{{"group", ds.label_flip_map->group}, {"action", ds.label_flip_map->action}};
  } else {
    manifest["label_flip_map"] = nullptr;
  }
  manifest["clips"] = std::move(clips);
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset out = ds;
  out.clips.clear();
  out.clips.reserve(indices.size());
  for (std::size_t i : indices) out.clips.push_back(ds.clips.at(i));
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("split_dataset: train_fraction must lie in (0, 1)");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.clips.size(); ++i) by_class[ds.clips[i].group_label].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  for (auto& [label, members] : by_class) {
    if (members.size() < 2) {
      throw ConfigError("split_dataset: group class " + std::to_string(label) + " has " +
                        std::to_string(members.size()) + " clip(s); stratification needs at least 2");
    }
    std::shuffle(members.begin(), members.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
    train_idx.insert(train_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    val_idx.insert(val_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  return {subset(ds, train_idx), subset(ds, val_idx)};
}

}  // namespace skelgroup
