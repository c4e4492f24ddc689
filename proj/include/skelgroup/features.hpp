#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "skelgroup/dataset.hpp"

namespace skelgroup {

struct FeatureId {
  std::string clip_id;
  std::size_t actor = 0;
  friend bool operator==(const FeatureId&, const FeatureId&) = default;
};

// One row per (clip, actor).
struct FeatureMatrix {
  Eigen::MatrixXd values;  // n_samples x dim
  std::vector<FeatureId> ids;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
  // Throws ConfigError on duplicate ids, a row/id count mismatch or
  // non-finite values.
  void validate() const;
};

// Ids of every valid actor in dataset order.
std::vector<FeatureId> canonical_ids(const Dataset& ds);

// Hand-made per-actor descriptor of dimension 9N: temporal mean of the
// normalized pose, its population std, and the mean absolute frame-to-frame
// motion, each N x (x, y, p).
FeatureMatrix stand_in_features(const Dataset& ds);

// Text: "n dim" header, then "clip_id actor v1 ... v_dim" per line.
void write_features_text(const FeatureMatrix& f, const std::filesystem::path& path);
// Binary: a single [n, dim, 1, 1] tensor in the flat dump layout, rows in
// canonical dataset order.
void write_features_binary(const FeatureMatrix& f, const std::filesystem::path& path);
// Files ending in ".bin" are read as binary, with ids taken from `ds`;
// anything else as text.
FeatureMatrix read_features(const std::filesystem::path& path, const Dataset& ds);

}  // namespace skelgroup
