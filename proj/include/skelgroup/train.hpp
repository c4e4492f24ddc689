#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "skelgroup/dataset.hpp"
#include "skelgroup/model.hpp"
#include "skelgroup/optim.hpp"

namespace skelgroup {

enum class TrainingMode { end_to_end, two_stage, group_only };
enum class LabelSource { ground_truth, pseudo, none };

std::string to_string(TrainingMode mode);
std::string to_string(LabelSource source);
TrainingMode parse_training_mode(const std::string& text);
LabelSource parse_label_source(const std::string& text);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  AdamHyper hyper;
  std::size_t lr_decay_every = 30;
  double lambda = 0.7;
  TrainingMode mode = TrainingMode::end_to_end;
  bool use_gd = true;
  bool augment = true;
  LabelSource label_source = LabelSource::ground_truth;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
  double effective_lambda() const { return mode == TrainingMode::group_only ? 0.0 : lambda; }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double group_loss = 0.0;
  std::optional<double> individual_loss;  // absent in group_only mode
  double train_group_accuracy = 0.0;
  std::optional<double> train_individual_accuracy;
  std::optional<double> val_group_accuracy;  // absent without a validation set
};

struct TrainResult {
  ModelParams params;       // after the last epoch
  ModelParams best_params;  // best validation epoch (last epoch without validation)
  std::optional<std::size_t> best_epoch;
  std::vector<EpochRecord> history;
};

struct TrainHooks {
  // Called after every epoch; `improved` marks a new best validation accuracy.
  std::function<void(const EpochRecord&, const ModelParams&, bool improved)> on_epoch;
};

// Group logits (and individual logits) for every clip of a dataset.
struct Predictions {
  std::vector<std::vector<double>> group_logits;
  std::vector<std::vector<double>> individual_logits;  // K*A per clip
};

Predictions predict(const Dataset& ds, const ModelConfig& model_cfg, const ModelParams& params, bool use_gd,
                    std::size_t threads = 1);

// Lowest index among the maximal entries.
std::size_t argmax(const std::vector<double>& values);
std::size_t argmax(const double* values, std::size_t n);

TrainResult train(const Dataset& train_ds, const Dataset& val_ds, const ModelConfig& model_cfg,
                  const TrainConfig& train_cfg, const TrainHooks& hooks = {});

// Per-layer trainable flags used by the two-stage regime.
std::vector<std::uint8_t> stage_one_trainable(const ModelParams& params);
std::vector<std::uint8_t> stage_two_trainable(const ModelParams& params);

// History as CSV: epoch,lr,L_G,L_I,train_acc_group,train_acc_indiv,val_acc_group.
// The L_I and train_acc_indiv columns are left out when no epoch has them.
std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace skelgroup
