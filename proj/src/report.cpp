#include "skelgroup/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "skelgroup/error.hpp"
#include "skelgroup/text.hpp"

namespace skelgroup {

namespace {

std::vector<int> flat_labels(const Dataset& ds, bool reference) {
  std::vector<int> out;
  for (const ClipRecord& clip : ds.clips) {
    const std::vector<int>& labels = reference ? clip.reference_action_labels : clip.action_labels;
    for (std::size_t k = 0; k < clip.actors.size(); ++k) {
      if (clip.actors[k].valid && k < labels.size()) out.push_back(labels[k]);
    }
  }
  return out;
}

}  // namespace

RunOutcome train_and_evaluate(const Dataset& train_ds, const Dataset& val_ds, ModelConfig model_cfg,
                              const TrainConfig& train_cfg, const PseudoConfig& pseudo_cfg,
                              const std::optional<FeatureMatrix>& features) {
  RunOutcome outcome;
  const Dataset* train_set = &train_ds;
  Dataset pseudo_ds;
  if (train_cfg.mode != TrainingMode::group_only && train_cfg.label_source == LabelSource::pseudo &&
      !train_ds.pseudo_labeled) {
    const FeatureMatrix feats = features ? *features : stand_in_features(train_ds);
    const PseudoResult pr = run_pseudo_pipeline(feats, pseudo_cfg);
    pseudo_ds = assign_pseudolabels(train_ds, pr.assignments, pseudo_cfg.k);
    train_set = &pseudo_ds;
    const std::vector<int> reference = flat_labels(pseudo_ds, true);
    const std::vector<int> clusters = flat_labels(pseudo_ds, false);
    if (!reference.empty() && reference.size() == clusters.size()) {
      outcome.cluster_ari = adjusted_rand_index(reference, clusters);
    }
  }
  if (train_set->action_class_count() > 0) model_cfg.action_classes = train_set->action_class_count();
  outcome.training = train(*train_set, val_ds, model_cfg, train_cfg);
  if (!val_ds.clips.empty()) {
    outcome.report = evaluate(outcome.training.params, val_ds, model_cfg, train_cfg.use_gd, train_cfg.threads);
    outcome.val_accuracy = outcome.report.group_accuracy;
  }
  return outcome;
}

std::vector<SweepPoint> sweep_k(const Dataset& train_ds, const Dataset& val_ds, const std::vector<std::size_t>& ks,
                                const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                                const PseudoConfig& pseudo_cfg, const std::vector<std::uint64_t>& seeds,
                                const std::optional<FeatureMatrix>& features) {
  if (ks.empty()) throw ConfigError("sweep_k: no k values");
  for (std::size_t k : ks) {
    if (k < 1) throw ConfigError("sweep_k: every k must be >= 1");
  }
  if (train_cfg.mode == TrainingMode::group_only) throw ConfigError("sweep_k: group_only mode ignores clusters");
  std::vector<SweepPoint> points;
  for (std::size_t k : ks) {
    for (std::uint64_t seed : seeds) {
      TrainConfig tc = train_cfg;
      tc.label_source = LabelSource::pseudo;
      tc.seed = seed;
      PseudoConfig pc = pseudo_cfg;
      pc.k = k;
      pc.seed = seed;
      points.push_back({k, seed, train_and_evaluate(train_ds, val_ds, model_cfg, tc, pc, features).val_accuracy});
    }
  }
  return points;
}

std::vector<AblationResult> run_ablation_suite(const Dataset& train_ds, const Dataset& val_ds,
                                               const ModelConfig& model_cfg, const std::vector<AblationRow>& rows,
                                               const std::vector<std::uint64_t>& seeds) {
  for (const AblationRow& row : rows) {
    row.train.validate();
    if (row.train.label_source == LabelSource::pseudo) row.pseudo.validate();
  }
  std::vector<AblationResult> results;
  for (const AblationRow& row : rows) {
    for (std::uint64_t seed : seeds) {
      TrainConfig tc = row.train;
      tc.seed = seed;
      PseudoConfig pc = row.pseudo;
      pc.seed = seed;
      results.push_back({row.name, seed, train_and_evaluate(train_ds, val_ds, model_cfg, tc, pc).val_accuracy});
    }
  }
  return results;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

std::vector<std::pair<std::size_t, Summary>> summarize_sweep(const std::vector<SweepPoint>& points) {
  std::vector<std::size_t> order;
  for (const SweepPoint& p : points) {
    if (std::find(order.begin(), order.end(), p.k) == order.end()) order.push_back(p.k);
  }
  std::vector<std::pair<std::size_t, Summary>> out;
  for (std::size_t k : order) {
    std::vector<double> acc;
    for (const SweepPoint& p : points) {
      if (p.k == k) acc.push_back(p.val_accuracy);
    }
    out.emplace_back(k, summarize(acc));
  }
  return out;
}

std::vector<std::pair<std::string, Summary>> summarize_ablation(const std::vector<AblationResult>& results) {
  std::vector<std::string> order;
  for (const AblationResult& r : results) {
    if (std::find(order.begin(), order.end(), r.name) == order.end()) order.push_back(r.name);
  }
  std::vector<std::pair<std::string, Summary>> out;
  for (const std::string& name : order) {
    std::vector<double> acc;
    for (const AblationResult& r : results) {
      if (r.name == name) acc.push_back(r.val_accuracy);
    }
    out.emplace_back(name, summarize(acc));
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
  std::ostringstream out;
  out << "k,seed,val_acc\n";
  for (const SweepPoint& p : points) out << p.k << "," << p.seed << "," << format_double(p.val_accuracy) << "\n";
  return out.str();
}

std::string ablation_csv(const std::vector<AblationResult>& results) {
  std::ostringstream out;
  out << "name,seed,val_acc\n";
  for (const AblationResult& r : results) out << r.name << "," << r.seed << "," << format_double(r.val_accuracy) << "\n";
  return out.str();
}

std::string ablation_table(const std::vector<AblationResult>& results) {
  const auto rows = summarize_ablation(results);
  std::size_t width = 6;
  for (const auto& [name, s] : rows) width = std::max(width, name.size());
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-*s  %8s  %6s  %5s\n", static_cast<int>(width), "Method", "Acc (%)", "std", "seeds");
  out << buf << std::string(width + 27, '-') << "\n";
  for (const auto& [name, s] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %8.2f  %6.2f  %5zu\n", static_cast<int>(width), name.c_str(), 100.0 * s.mean,
                  100.0 * s.std, s.count);
    out << buf;
  }
  return out.str();
}

std::string sweep_svg(const std::vector<SweepPoint>& points) {
  const auto rows = summarize_sweep(points);
  constexpr double W = 480;
  constexpr double H = 320;
  constexpr double left = 60;
  constexpr double right = 20;
  constexpr double top = 20;
  constexpr double bottom = 50;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << " " << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (rows.empty()) {
    out << "</svg>\n";
    return out.str();
  }
  std::vector<std::pair<std::size_t, Summary>> sorted = rows;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double lo = 1.0;
  double hi = 0.0;
  for (const auto& [k, s] : sorted) {
    lo = std::min(lo, s.mean - s.std);
    hi = std::max(hi, s.mean + s.std);
  }
  lo = std::max(0.0, std::floor(lo * 20.0 - 1.0) / 20.0);
  hi = std::min(1.0, std::ceil(hi * 20.0 + 1.0) / 20.0);
  if (hi <= lo) hi = lo + 0.05;
  const double kmin = static_cast<double>(sorted.front().first);
  const double kmax = static_cast<double>(sorted.back().first);
  auto px = [&](double k) {
    return kmax > kmin ? left + (W - left - right) * (k - kmin) / (kmax - kmin) : left + (W - left - right) / 2;
  };
  auto py = [&](double a) { return top + (H - top - bottom) * (hi - a) / (hi - lo); };
  char buf[256];
  out << "<g stroke=\"black\" stroke-width=\"1\">\n";
  std::snprintf(buf, sizeof buf, "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\"/>\n", left, H - bottom,
                W - right, H - bottom);
  out << buf;
  std::snprintf(buf, sizeof buf, "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\"/>\n", left, top, left,
                H - bottom);
  out << buf << "</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double a = lo + (hi - lo) * i / 4.0;
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.1f</text>\n", left - 6,
                  py(a) + 4, 100.0 * a);
    out << buf;
  }
  for (const auto& [k, s] : sorted) {
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%zu</text>\n",
                  px(static_cast<double>(k)), H - bottom + 16, k);
    out << buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">number of clusters k</text>\n"
                "<text x=\"14\" y=\"%.1f\" transform=\"rotate(-90 14 %.1f)\" text-anchor=\"middle\">"
                "group accuracy (%%)</text>\n",
                (left + W - right) / 2, H - 12, (top + H - bottom) / 2, (top + H - bottom) / 2);
  out << buf << "</g>\n";

  std::string band_up;
  std::string band_down;
  std::string line;
  for (const auto& [k, s] : sorted) {
    std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(static_cast<double>(k)), py(s.mean + s.std));
    band_up += buf;
    std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(static_cast<double>(k)), py(s.mean));
    line += buf;
  }
  for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
    std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(static_cast<double>(it->first)), py(it->second.mean - it->second.std));
    band_down += buf;
  }
  out << "<polygon fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\" points=\"" << band_up << band_down << "\"/>\n";
  out << "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\" points=\"" << line << "\"/>\n";
  for (const auto& [k, s] : sorted) {
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3\" fill=\"#08519c\"/>\n",
                  px(static_cast<double>(k)), py(s.mean));
    out << buf;
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace skelgroup
