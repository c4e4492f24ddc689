#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "skelgroup/dataset.hpp"
#include "skelgroup/features.hpp"

namespace skelgroup {

struct PseudoConfig {
  std::size_t pca_dim = 256;
  std::size_t k = 20;
  std::size_t max_iters = 100;
  std::size_t restarts = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Whitening {
  FeatureMatrix features;
  Eigen::RowVectorXd mean;
  Eigen::MatrixXd projection;  // dim x kept; already divided by the per-component scale
  std::vector<double> variances;  // of the kept components
  std::size_t dropped = 0;        // components discarded as numerically empty
  std::vector<std::string> warnings;
};

// Centres, projects onto the leading `pca_dim` principal components and
// rescales each to unit variance on this sample. Needs n_samples > pca_dim.
Whitening pca_whiten(const FeatureMatrix& feats, std::size_t pca_dim);

struct Normalized {
  FeatureMatrix features;
  std::vector<std::size_t> zero_rows;
};

Normalized l2_normalize(const FeatureMatrix& feats);

struct KMeansResult {
  std::vector<int> assignments;
  Eigen::MatrixXd centroids;  // k x dim
  double inertia = 0.0;
  std::size_t best_restart = 0;
  // Inertia after every assignment step, one trace per restart.
  std::vector<std::vector<double>> traces;
  std::vector<bool> converged;
};

KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, std::size_t max_iters, std::size_t restarts,
                    std::uint64_t seed);

struct Assignment {
  std::string clip_id;
  std::size_t actor = 0;
  int cluster = 0;
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

// Replaces individual labels with cluster ids (action classes become k
// clusters). The original labels move to reference_action_labels. Every valid
// actor needs exactly one assignment; ids not present in the dataset are
// ignored.
Dataset assign_pseudolabels(const Dataset& ds, const std::vector<Assignment>& assignments, std::size_t k);

struct PseudoResult {
  std::vector<Assignment> assignments;
  KMeansResult clustering;
  std::size_t used_pca_dim = 0;
  std::vector<std::size_t> zero_rows;
  std::vector<std::string> warnings;
};

// PCA-whiten, L2-normalize, cluster. pca_dim is clamped to what the sample
// supports (with a warning).
PseudoResult run_pseudo_pipeline(const FeatureMatrix& feats, const PseudoConfig& cfg);

void write_assignments(const std::vector<Assignment>& assignments, const std::filesystem::path& path);
std::vector<Assignment> read_assignments(const std::filesystem::path& path);

}  // namespace skelgroup
