#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "skelgroup/dataset.hpp"
#include "skelgroup/model.hpp"
#include "skelgroup/train.hpp"

namespace skelgroup {

struct EvalReport {
  double group_accuracy = 0.0;
  std::optional<double> individual_accuracy;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<double> per_class_recall;             // 0 for classes without support
  std::vector<std::string> class_names;
  std::size_t clips = 0;
};

// Argmax predictions against the dataset labels. Individual accuracy is
// reported only for ground-truth individual labels.
EvalReport report_from_predictions(const Dataset& ds, const Predictions& pred);

EvalReport evaluate(const ModelParams& params, const Dataset& ds, const ModelConfig& model_cfg, bool use_gd = true,
                    std::size_t threads = 1);

// Row-major counts with a class-name header row.
std::string confusion_csv(const EvalReport& report);

// Chance-corrected agreement of two labelings of the same items.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace skelgroup
