#include "skelgroup/pseudo_label.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "skelgroup/error.hpp"

namespace skelgroup {

void PseudoConfig::validate() const {
  if (k < 1) throw ConfigError("pseudo: k must be >= 1");
  if (pca_dim < 1) throw ConfigError("pseudo: pca_dim must be >= 1");
  if (max_iters < 1) throw ConfigError("pseudo: max_iters must be >= 1");
  if (restarts < 1) throw ConfigError("pseudo: restarts must be >= 1");
}

Whitening pca_whiten(const FeatureMatrix& feats, std::size_t pca_dim) {
  const auto n = static_cast<Eigen::Index>(feats.rows());
  if (feats.rows() <= pca_dim) {
    throw ConfigError("pca_whiten: need more samples (" + std::to_string(feats.rows()) + ") than pca_dim (" +
                      std::to_string(pca_dim) + ")");
  }
  if (pca_dim > feats.dim()) {
    throw ConfigError("pca_whiten: pca_dim " + std::to_string(pca_dim) + " exceeds feature dim " +
                      std::to_string(feats.dim()));
  }
  Whitening w;
  w.mean = feats.values.colwise().mean();
  const Eigen::MatrixXd centred = feats.values.rowwise() - w.mean;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double denom = static_cast<double>(n - 1);
  const double lead = s.size() > 0 ? s(0) * s(0) / denom : 0.0;

  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(pca_dim) && i < s.size(); ++i) {
    const double var = s(i) * s(i) / denom;
    if (lead > 0.0 && var >= 1e-10 * lead) {
      kept.push_back(i);
      w.variances.push_back(var);
    }
  }
  w.dropped = pca_dim - kept.size();
  if (w.dropped > 0) {
    w.warnings.push_back("pca_whiten: dropped " + std::to_string(w.dropped) +
                         " near-zero-variance components, output dim " + std::to_string(kept.size()));
  }
  w.projection.resize(feats.values.cols(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t c = 0; c < kept.size(); ++c) {
    w.projection.col(static_cast<Eigen::Index>(c)) = svd.matrixV().col(kept[c]) / std::sqrt(w.variances[c]);
  }
  w.features.ids = feats.ids;
  w.features.values = centred * w.projection;
  return w;
}

Normalized l2_normalize(const FeatureMatrix& feats) {
  Normalized out;
  out.features = feats;
  for (Eigen::Index i = 0; i < out.features.values.rows(); ++i) {
    const double norm = out.features.values.row(i).norm();
    if (norm == 0.0) {
      out.zero_rows.push_back(static_cast<std::size_t>(i));
    } else {
      out.features.values.row(i) /= norm;
    }
  }
  return out;
}

namespace {

struct LloydRun {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
  std::vector<double> trace;
  bool converged = false;
};

// Nearest centroid per row (lowest index on ties); returns the inertia.
double assign_rows(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c, std::vector<int>& labels,
                   std::vector<double>& dist) {
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index j = 0; j < c.rows(); ++j) {
      const double d = (x.row(i) - c.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(j);
      }
    }
    labels[static_cast<std::size_t>(i)] = arg;
    dist[static_cast<std::size_t>(i)] = best;
    inertia += best;
  }
  return inertia;
}

Eigen::MatrixXd seed_plus_plus(const Eigen::MatrixXd& x, std::size_t k, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  Eigen::MatrixXd c(static_cast<Eigen::Index>(k), x.cols());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto first = std::min(n - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(n)));
  c.row(0) = x.row(static_cast<Eigen::Index>(first));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (x.row(static_cast<Eigen::Index>(i)) - c.row(0)).squaredNorm();
  for (std::size_t j = 1; j < k; ++j) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = unit(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > r && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::min(n - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(n)));
    }
    c.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (x.row(static_cast<Eigen::Index>(i)) - c.row(static_cast<Eigen::Index>(j))).squaredNorm());
    }
  }
  return c;
}

LloydRun lloyd(const Eigen::MatrixXd& x, std::size_t k, std::size_t max_iters, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  LloydRun run;
  run.centroids = seed_plus_plus(x, k, rng);
  run.labels.assign(n, 0);
  std::vector<double> dist(n);
  run.trace.push_back(assign_rows(x, run.centroids, run.labels, dist));

  std::vector<int> next(n);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(run.centroids.rows(), x.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(run.labels[i]) += x.row(static_cast<Eigen::Index>(i));
      ++counts[static_cast<std::size_t>(run.labels[i])];
    }
    std::vector<std::uint8_t> taken(n, 0);
    for (std::size_t j = 0; j < k; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (counts[j] > 0) {
        run.centroids.row(jj) = sums.row(jj) / static_cast<double>(counts[j]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      taken[far] = 1;
      run.centroids.row(jj) = x.row(static_cast<Eigen::Index>(far));
    }
    run.trace.push_back(assign_rows(x, run.centroids, next, dist));
    if (next == run.labels) {
      run.converged = true;
      break;
    }
    run.labels.swap(next);
  }
  return run;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, std::size_t max_iters, std::size_t restarts,
                    std::uint64_t seed) {
  if (k < 1) throw ConfigError("kmeans: k must be >= 1");
  if (static_cast<std::size_t>(points.rows()) < k) {
    throw ConfigError("kmeans: " + std::to_string(points.rows()) + " samples for k = " + std::to_string(k));
  }
  if (restarts < 1) throw ConfigError("kmeans: restarts must be >= 1");
  if (!points.allFinite()) throw NumericError("kmeans: non-finite input");
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    LloydRun run = lloyd(points, k, max_iters, rng);
    best.traces.push_back(run.trace);
    best.converged.push_back(run.converged);
    if (run.trace.back() < best.inertia) {
      best.inertia = run.trace.back();
      best.assignments = std::move(run.labels);
      best.centroids = std::move(run.centroids);
      best.best_restart = r;
    }
  }
  return best;
}

Dataset assign_pseudolabels(const Dataset& ds, const std::vector<Assignment>& assignments, std::size_t k) {
  if (k < 1) throw ConfigError("assign_pseudolabels: k must be >= 1");
  std::map<std::pair<std::string, std::size_t>, int> lookup;
  for (const Assignment& a : assignments) {
    if (a.cluster < 0 || static_cast<std::size_t>(a.cluster) >= k) {
      throw ConfigError("assign_pseudolabels: cluster " + std::to_string(a.cluster) + " of " + a.clip_id + " " +
                        std::to_string(a.actor) + " outside [0, " + std::to_string(k) + ")");
    }
    if (!lookup.emplace(std::make_pair(a.clip_id, a.actor), a.cluster).second) {
      throw ConfigError("assign_pseudolabels: duplicate assignment for " + a.clip_id + " actor " +
                        std::to_string(a.actor));
    }
  }
  Dataset out = ds;
  for (ClipRecord& clip : out.clips) {
    if (!ds.pseudo_labeled) clip.reference_action_labels = clip.action_labels;
    clip.action_labels.assign(clip.actors.size(), kNoLabel);
    for (std::size_t a = 0; a < clip.actors.size(); ++a) {
      if (!clip.actors[a].valid) continue;
      const auto it = lookup.find({clip.clip_id, a});
      if (it == lookup.end()) {
        throw ConfigError("assign_pseudolabels: no assignment for " + clip.clip_id + " actor " + std::to_string(a));
      }
      clip.action_labels[a] = it->second;
    }
  }
  out.action_classes.clear();
  for (std::size_t c = 0; c < k; ++c) out.action_classes.push_back("cluster" + std::to_string(c));
  // Clusters carry no left/right meaning, so mirroring keeps them.
  if (out.label_flip_map) out.label_flip_map->action.clear();
  out.pseudo_labeled = true;
  return out;
}

PseudoResult run_pseudo_pipeline(const FeatureMatrix& feats, const PseudoConfig& cfg) {
  cfg.validate();
  feats.validate();
  PseudoResult result;
  std::size_t dim = cfg.pca_dim;
  const std::size_t cap = std::min(feats.dim(), feats.rows() > 0 ? feats.rows() - 1 : 0);
  if (dim > cap) {
    result.warnings.push_back("pca_dim " + std::to_string(dim) + " clamped to " + std::to_string(cap));
    dim = cap;
  }
  if (dim == 0) throw ConfigError("pseudo pipeline: not enough samples to whiten");
  Whitening w = pca_whiten(feats, dim);
  result.warnings.insert(result.warnings.end(), w.warnings.begin(), w.warnings.end());
  result.used_pca_dim = w.features.dim();
  Normalized norm = l2_normalize(w.features);
  result.zero_rows = norm.zero_rows;
  if (!norm.zero_rows.empty()) {
    result.warnings.push_back(std::to_string(norm.zero_rows.size()) + " all-zero feature rows after whitening");
  }
  result.clustering = kmeans(norm.features.values, cfg.k, cfg.max_iters, cfg.restarts, cfg.seed);
  for (std::size_t i = 0; i < feats.rows(); ++i) {
    result.assignments.push_back({feats.ids[i].clip_id, feats.ids[i].actor, result.clustering.assignments[i]});
  }
  return result;
}

void write_assignments(const std::vector<Assignment>& assignments, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const Assignment& a : assignments) out << a.clip_id << " " << a.actor << " " << a.cluster << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Assignment> read_assignments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("path not found: " + path.string());
  std::vector<Assignment> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    Assignment a;
    std::string extra;
    if (!(row >> a.clip_id >> a.actor >> a.cluster) || (row >> extra)) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected 'clip_id actor_index cluster_id'");
    }
    out.push_back(a);
  }
  return out;
}

}  // namespace skelgroup
