#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skelgroup/dataset.hpp"
#include "skelgroup/eval.hpp"
#include "skelgroup/features.hpp"
#include "skelgroup/model.hpp"
#include "skelgroup/pseudo_label.hpp"
#include "skelgroup/train.hpp"

namespace skelgroup {

struct RunOutcome {
  double val_accuracy = 0.0;  // group accuracy of the final parameters
  EvalReport report;
  TrainResult training;
  std::optional<double> cluster_ari;  // pseudo runs with reference labels
};

// One full train + evaluate cycle. For label_source pseudo the training
// set's individual labels are replaced by clusters of `features` (stand-in
// descriptors of the training set when absent) and the individual head gets
// pseudo_cfg.k outputs.
RunOutcome train_and_evaluate(const Dataset& train_ds, const Dataset& val_ds, ModelConfig model_cfg,
                              const TrainConfig& train_cfg, const PseudoConfig& pseudo_cfg,
                              const std::optional<FeatureMatrix>& features = std::nullopt);

struct SweepPoint {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double val_accuracy = 0.0;
  friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

// Pseudo-label training for every k and seed. train_cfg.label_source is
// forced to pseudo.
std::vector<SweepPoint> sweep_k(const Dataset& train_ds, const Dataset& val_ds, const std::vector<std::size_t>& ks,
                                const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                                const PseudoConfig& pseudo_cfg, const std::vector<std::uint64_t>& seeds,
                                const std::optional<FeatureMatrix>& features = std::nullopt);

struct AblationRow {
  std::string name;
  TrainConfig train;
  PseudoConfig pseudo;  // used when train.label_source is pseudo
};

struct AblationResult {
  std::string name;
  std::uint64_t seed = 0;
  double val_accuracy = 0.0;
  friend bool operator==(const AblationResult&, const AblationResult&) = default;
};

// Every row is trained once per seed (the seed replaces the row's training
// and clustering seeds).
std::vector<AblationResult> run_ablation_suite(const Dataset& train_ds, const Dataset& val_ds,
                                               const ModelConfig& model_cfg, const std::vector<AblationRow>& rows,
                                               const std::vector<std::uint64_t>& seeds);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t count = 0;
};

Summary summarize(const std::vector<double>& values);
// Mean accuracy of every k in first-seen order.
std::vector<std::pair<std::size_t, Summary>> summarize_sweep(const std::vector<SweepPoint>& points);
std::vector<std::pair<std::string, Summary>> summarize_ablation(const std::vector<AblationResult>& results);

std::string sweep_csv(const std::vector<SweepPoint>& points);
std::string ablation_csv(const std::vector<AblationResult>& results);
// Fixed-width text table: method, mean accuracy in percent, std, seeds.
std::string ablation_table(const std::vector<AblationResult>& results);
// Line plot of mean accuracy against k with a std band, as standalone SVG.
std::string sweep_svg(const std::vector<SweepPoint>& points);

}  // namespace skelgroup
