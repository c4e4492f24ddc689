#include "skelgroup/features.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "skelgroup/error.hpp"
#include "skelgroup/streams.hpp"
#include "skelgroup/tensor.hpp"
#include "skelgroup/text.hpp"

namespace skelgroup {

void FeatureMatrix::validate() const {
  if (ids.size() != rows()) {
    throw ConfigError("features: " + std::to_string(ids.size()) + " ids for " + std::to_string(rows()) + " rows");
  }
  std::set<std::pair<std::string, std::size_t>> seen;
  for (const FeatureId& id : ids) {
    if (!seen.emplace(id.clip_id, id.actor).second) {
      throw ConfigError("features: duplicate id " + id.clip_id + " " + std::to_string(id.actor));
    }
  }
  if (!values.allFinite()) throw ConfigError("features: non-finite values");
}

std::vector<FeatureId> canonical_ids(const Dataset& ds) {
  std::vector<FeatureId> ids;
  for (const ClipRecord& clip : ds.clips) {
    for (std::size_t k = 0; k < clip.actors.size(); ++k) {
      if (clip.actors[k].valid) ids.push_back({clip.clip_id, k});
    }
  }
  return ids;
}

FeatureMatrix stand_in_features(const Dataset& ds) {
  const std::size_t N = ds.joint_count();
  FeatureMatrix out;
  out.ids = canonical_ids(ds);
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out.ids.size()), static_cast<Eigen::Index>(9 * N));
  Eigen::Index row = 0;
  for (const ClipRecord& clip : ds.clips) {
    for (const ActorSequence& actor : clip.actors) {
      if (!actor.valid) continue;
      ActorSequence norm;
      norm.valid = true;
      for (const SkeletonFrame& frame : actor.frames) norm.frames.push_back(normalize_skeleton(frame, ds.layout).frame);
      const std::size_t T = norm.frames.size();
      auto feat = out.values.row(row);
      for (std::size_t j = 0; j < N; ++j) {
        double sum[3] = {0, 0, 0};
        double sq[3] = {0, 0, 0};
        for (const SkeletonFrame& f : norm.frames) {
          const double v[3] = {f[j].x, f[j].y, f[j].p};
          for (int c = 0; c < 3; ++c) {
            sum[c] += v[c];
            sq[c] += v[c] * v[c];
          }
        }
        for (int c = 0; c < 3; ++c) {
          const double mean = sum[c] / static_cast<double>(T);
          // Two-pass variance would be marginally more accurate; values here
          // are O(1) so the one-pass form is fine.
          const double var = std::max(0.0, sq[c] / static_cast<double>(T) - mean * mean);
          feat(static_cast<Eigen::Index>(3 * j + c)) = mean;
          feat(static_cast<Eigen::Index>(3 * N + 3 * j + c)) = std::sqrt(var);
        }
      }
      if (T >= 2) {
        const Tensor motion = compute_motion(norm);
        for (std::size_t j = 0; j < N; ++j) {
          for (std::size_t c = 0; c < 3; ++c) {
            double acc = 0.0;
            for (std::size_t t = 0; t + 1 < T; ++t) acc += std::abs(motion(t, j, c));
            feat(static_cast<Eigen::Index>(6 * N + 3 * j + c)) = acc / static_cast<double>(T - 1);
          }
        }
      }
      ++row;
    }
  }
  return out;
}

void write_features_text(const FeatureMatrix& f, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << f.rows() << " " << f.dim() << "\n";
  for (std::size_t i = 0; i < f.rows(); ++i) {
    out << f.ids[i].clip_id << " " << f.ids[i].actor;
    for (std::size_t d = 0; d < f.dim(); ++d) {
      out << " " << format_double(f.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)));
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_features_binary(const FeatureMatrix& f, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  auto put_u32 = [&](std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  put_u32(static_cast<std::uint32_t>(f.rows()));
  put_u32(static_cast<std::uint32_t>(f.dim()));
  put_u32(1);
  put_u32(1);
  for (std::size_t i = 0; i < f.rows(); ++i) {
    for (std::size_t d = 0; d < f.dim(); ++d) {
      const float v = static_cast<float>(f.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)));
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(bits);
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

FeatureMatrix read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("path not found: " + path.string());
  std::size_t n = 0;
  std::size_t dim = 0;
  if (!(in >> n >> dim)) throw ConfigError(path.string() + ": bad header, expected 'n_samples dim'");
  FeatureMatrix f;
  f.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  f.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> f.ids[i].clip_id >> f.ids[i].actor)) {
      throw ConfigError(path.string() + ": row " + std::to_string(i) + " is missing its id");
    }
    for (std::size_t d = 0; d < dim; ++d) {
      if (!(in >> f.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)))) {
        throw ConfigError(path.string() + ": row " + std::to_string(i) + " has fewer than " + std::to_string(dim) +
                          " values");
      }
    }
  }
  std::string extra;
  if (in >> extra) throw ConfigError(path.string() + ": more rows than the header's " + std::to_string(n));
  return f;
}

}  // namespace

FeatureMatrix read_features(const std::filesystem::path& path, const Dataset& ds) {
  FeatureMatrix f;
  if (path.extension() == ".bin") {
    if (!std::filesystem::exists(path)) throw IoError("path not found: " + path.string());
    const std::vector<Tensor> tensors = read_tensor_dump(path);
    if (tensors.size() != 1) throw ConfigError(path.string() + ": expected exactly one tensor");
    const Tensor& t = tensors.front();
    const std::size_t n = t.dim(0);
    const std::size_t dim = t.size() / std::max<std::size_t>(n, 1);
    f.ids = canonical_ids(ds);
    if (f.ids.size() != n) {
      throw ConfigError(path.string() + ": " + std::to_string(n) + " rows but the dataset has " +
                        std::to_string(f.ids.size()) + " valid actors");
    }
    f.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < dim; ++d) {
        f.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = t.data()[i * dim + d];
      }
    }
  } else {
    f = read_text(path);
  }
  f.validate();
  return f;
}

}  // namespace skelgroup
