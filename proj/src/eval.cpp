#include "skelgroup/eval.hpp"

#include <map>
#include <sstream>

#include "skelgroup/error.hpp"

namespace skelgroup {

EvalReport report_from_predictions(const Dataset& ds, const Predictions& pred) {
  if (ds.clips.empty()) throw ConfigError("evaluate: empty dataset");
  if (pred.group_logits.size() != ds.clips.size()) throw ConfigError("evaluate: prediction count mismatch");
  const std::size_t G = ds.group_class_count();
  EvalReport r;
  r.class_names = ds.group_classes;
  r.clips = ds.clips.size();
  r.confusion.assign(G, std::vector<std::size_t>(G, 0));
  std::size_t correct = 0;
  std::size_t ind_correct = 0;
  std::size_t ind_total = 0;
  for (std::size_t i = 0; i < ds.clips.size(); ++i) {
    const ClipRecord& clip = ds.clips[i];
    const std::size_t p = argmax(pred.group_logits[i]);
    const auto t = static_cast<std::size_t>(clip.group_label);
    if (t >= G || p >= G) throw ConfigError("evaluate: class id out of range in clip " + clip.clip_id);
    ++r.confusion[t][p];
    if (p == t) ++correct;
    if (ds.pseudo_labeled || !clip.has_action_labels()) continue;
    const std::size_t K = clip.actors.size();
    const std::size_t A = pred.individual_logits[i].size() / std::max<std::size_t>(K, 1);
    for (std::size_t k = 0; k < K; ++k) {
      if (!clip.actors[k].valid || clip.action_labels[k] == kNoLabel) continue;
      ++ind_total;
      if (static_cast<int>(argmax(pred.individual_logits[i].data() + k * A, A)) == clip.action_labels[k]) {
        ++ind_correct;
      }
    }
  }
  r.group_accuracy = static_cast<double>(correct) / static_cast<double>(ds.clips.size());
  if (ind_total > 0) r.individual_accuracy = static_cast<double>(ind_correct) / static_cast<double>(ind_total);
  for (std::size_t g = 0; g < G; ++g) {
    std::size_t support = 0;
    for (std::size_t c : r.confusion[g]) support += c;
    r.per_class_recall.push_back(support ? static_cast<double>(r.confusion[g][g]) / static_cast<double>(support) : 0.0);
  }
  return r;
}

EvalReport evaluate(const ModelParams& params, const Dataset& ds, const ModelConfig& model_cfg, bool use_gd,
                    std::size_t threads) {
  if (ds.clips.empty()) throw ConfigError("evaluate: empty dataset");
  return report_from_predictions(ds, predict(ds, model_cfg, params, use_gd, threads));
}

std::string confusion_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "true\\predicted";
  for (const std::string& name : report.class_names) out << "," << name;
  out << "\n";
  for (std::size_t g = 0; g < report.confusion.size(); ++g) {
    out << (g < report.class_names.size() ? report.class_names[g] : std::to_string(g));
    for (std::size_t c : report.confusion[g]) out << "," << c;
    out << "\n";
  }
  return out.str();
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw ConfigError("adjusted_rand_index: labelings differ in length");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows;
  std::map<int, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto pairs = [](double m) { return m * (m - 1.0) / 2.0; };
  double index = 0.0;
  for (const auto& [key, m] : table) index += pairs(m);
  double sum_a = 0.0;
  double sum_b = 0.0;
  for (const auto& [key, m] : rows) sum_a += pairs(m);
  for (const auto& [key, m] : cols) sum_b += pairs(m);
  const double expected = sum_a * sum_b / pairs(n);
  const double max_index = 0.5 * (sum_a + sum_b);
  // Both labelings trivial (all one cluster or all singletons): identical
  // partitions score 1.
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace skelgroup
