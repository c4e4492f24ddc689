#include "skelgroup/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "skelgroup/error.hpp"
#include "skelgroup/parallel.hpp"
#include "skelgroup/streams.hpp"
#include "skelgroup/text.hpp"

namespace skelgroup {

std::string to_string(TrainingMode mode) {
  switch (mode) {
    case TrainingMode::end_to_end: return "end_to_end";
    case TrainingMode::two_stage: return "two_stage";
    case TrainingMode::group_only: return "group_only";
  }
  return "?";
}

std::string to_string(LabelSource source) {
  switch (source) {
    case LabelSource::ground_truth: return "ground_truth";
    case LabelSource::pseudo: return "pseudo";
    case LabelSource::none: return "none";
  }
  return "?";
}

TrainingMode parse_training_mode(const std::string& text) {
  if (text == "end_to_end") return TrainingMode::end_to_end;
  if (text == "two_stage") return TrainingMode::two_stage;
  if (text == "group_only") return TrainingMode::group_only;
  throw ConfigError("unknown training mode '" + text + "' (end_to_end, two_stage, group_only)");
}

LabelSource parse_label_source(const std::string& text) {
  if (text == "ground_truth") return LabelSource::ground_truth;
  if (text == "pseudo") return LabelSource::pseudo;
  if (text == "none") return LabelSource::none;
  throw ConfigError("unknown label source '" + text + "' (ground_truth, pseudo, none)");
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train: epochs must be positive");
  if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("train: lambda must be >= 0");
  if (threads == 0) throw ConfigError("train: threads must be positive");
  hyper.validate();
  if (label_source == LabelSource::none && mode != TrainingMode::group_only) {
    throw ConfigError("train: label_source none requires mode group_only");
  }
  if (mode == TrainingMode::two_stage && epochs < 2) throw ConfigError("train: two_stage needs at least 2 epochs");
}

std::size_t argmax(const double* values, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t argmax(const std::vector<double>& values) { return argmax(values.data(), values.size()); }

std::vector<std::uint8_t> stage_one_trainable(const ModelParams& params) {
  std::vector<std::uint8_t> flags(params.layers.size(), 1);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    if (params.layers[i].name == GroupModel::kGroupHead) flags[i] = 0;
  }
  return flags;
}

std::vector<std::uint8_t> stage_two_trainable(const ModelParams& params) {
  std::vector<std::uint8_t> flags(params.layers.size(), 0);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const std::string& n = params.layers[i].name;
    if (n == GroupModel::kFusion1 || n == GroupModel::kFusion2 || n == GroupModel::kGroupHead) flags[i] = 1;
  }
  return flags;
}

namespace {

// Fixed number of clips per forward/backward pass. Chunk boundaries never
// depend on the thread count, so results are bitwise independent of it.
constexpr std::size_t kChunk = 8;

void check_geometry(const Dataset& ds, const ModelConfig& cfg, const char* what) {
  if (ds.clips.empty()) return;
  if (ds.actors_per_clip != cfg.actors || ds.frames_per_clip != cfg.frames || ds.joint_count() != cfg.joints) {
    throw ConfigError(std::string(what) + ": dataset geometry K=" + std::to_string(ds.actors_per_clip) +
                      " T=" + std::to_string(ds.frames_per_clip) + " N=" + std::to_string(ds.joint_count()) +
                      " does not match the model (K=" + std::to_string(cfg.actors) + " T=" +
                      std::to_string(cfg.frames) + " N=" + std::to_string(cfg.joints) + ")");
  }
  if (ds.group_class_count() != cfg.group_classes) {
    throw ConfigError(std::string(what) + ": dataset has " + std::to_string(ds.group_class_count()) +
                      " group classes, model has " + std::to_string(cfg.group_classes));
  }
}

struct Item {
  std::size_t clip = 0;
  bool flipped = false;
};

struct ChunkResult {
  Gradients grads;
  std::vector<LossTerms> terms;
  std::vector<std::size_t> predicted;
  std::size_t individual_correct = 0;
  std::size_t individual_total = 0;
};

}  // namespace

Predictions predict(const Dataset& ds, const ModelConfig& model_cfg, const ModelParams& params, bool use_gd,
                    std::size_t threads) {
  check_geometry(ds, model_cfg, "predict");
  Predictions out;
  out.group_logits.resize(ds.clips.size());
  out.individual_logits.resize(ds.clips.size());
  const std::size_t n_chunks = (ds.clips.size() + kChunk - 1) / kChunk;
  std::vector<GroupModel> workers(std::max<std::size_t>(1, std::min(threads, n_chunks)), GroupModel(model_cfg));
  const std::size_t G = model_cfg.group_classes;
  const std::size_t KA = model_cfg.actors * model_cfg.action_classes;
  parallel_for(n_chunks, threads, [&](std::size_t chunk, std::size_t worker) {
    const std::size_t begin = chunk * kChunk;
    const std::size_t end = std::min(ds.clips.size(), begin + kChunk);
    std::vector<StreamTensors> streams;
    std::vector<std::vector<std::uint8_t>> masks;
    for (std::size_t i = begin; i < end; ++i) {
      streams.push_back(assemble_streams(ds.clips[i], ds.layout, {use_gd}));
      masks.push_back(ds.clips[i].actor_mask());
    }
    std::vector<const StreamTensors*> ptrs;
    for (const auto& s : streams) ptrs.push_back(&s);
    const ModelOutputs outputs = workers[worker].forward(make_input(ptrs, masks), params);
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t b = i - begin;
      out.group_logits[i].assign(outputs.group_logits.data() + b * G, outputs.group_logits.data() + (b + 1) * G);
      out.individual_logits[i].assign(outputs.individual_logits.data() + b * KA,
                                      outputs.individual_logits.data() + (b + 1) * KA);
    }
  });
  return out;
}

namespace {

double group_accuracy(const Dataset& ds, const Predictions& pred) {
  if (ds.clips.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.clips.size(); ++i) {
    if (static_cast<int>(argmax(pred.group_logits[i])) == ds.clips[i].group_label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.clips.size());
}

class Trainer {
 public:
  Trainer(const Dataset& train_ds, const ModelConfig& model_cfg, const TrainConfig& cfg)
      : ds_(train_ds), model_cfg_(model_cfg), cfg_(cfg) {
    const std::size_t max_items = cfg.batch_size * (cfg.augment ? 2 : 1);
    const std::size_t max_chunks = (max_items + kChunk - 1) / kChunk;
    workers_.assign(std::max<std::size_t>(1, std::min(cfg.threads, max_chunks)), GroupModel(model_cfg));
    chunks_.resize(max_chunks);
  }

  struct StageSettings {
    double group_weight = 1.0;
    double lambda = 0.0;
    bool use_individual = false;
    BackwardScope scope = BackwardScope::full;
    std::vector<std::uint8_t> trainable;
  };

  struct EpochTotals {
    double group_loss = 0.0;
    double individual_loss = 0.0;
    std::size_t items = 0;
    std::size_t group_correct = 0;
    std::size_t originals = 0;
    std::size_t individual_correct = 0;
    std::size_t individual_total = 0;
  };

  EpochTotals run_epoch(ModelParams& params, AdamState& adam, const StageSettings& stage, std::size_t epoch,
                        double lr, std::mt19937_64& rng) {
    std::vector<std::size_t> order(ds_.clips.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    EpochTotals totals;
    Gradients grads = params.zeros_like();
    for (std::size_t start = 0, batch = 0; start < order.size(); start += cfg_.batch_size, ++batch) {
      const std::size_t stop = std::min(order.size(), start + cfg_.batch_size);
      std::vector<Item> items;
      for (std::size_t i = start; i < stop; ++i) {
        items.push_back({order[i], false});
        if (cfg_.augment) items.push_back({order[i], true});
      }
      const double weight = 1.0 / static_cast<double>(items.size());
      const std::size_t n_chunks = (items.size() + kChunk - 1) / kChunk;
      parallel_for(n_chunks, cfg_.threads, [&](std::size_t c, std::size_t w) {
        run_chunk(params, stage, items, c, weight, workers_[w], chunks_[c]);
      });

      grads.set_zero();
      for (std::size_t c = 0; c < n_chunks; ++c) {
        grads += chunks_[c].grads;
        const std::size_t base = c * kChunk;
        for (std::size_t i = 0; i < chunks_[c].terms.size(); ++i) {
          const LossTerms& t = chunks_[c].terms[i];
          if (!std::isfinite(t.total)) {
            throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batch));
          }
          totals.group_loss += t.group;
          totals.individual_loss += t.individual;
          ++totals.items;
          const Item& item = items[base + i];
          if (!item.flipped) {
            ++totals.originals;
            if (static_cast<int>(chunks_[c].predicted[i]) == ds_.clips[item.clip].group_label) ++totals.group_correct;
          }
        }
        totals.individual_correct += chunks_[c].individual_correct;
        totals.individual_total += chunks_[c].individual_total;
      }
      try {
        adam_step(params, grads, adam, cfg_.hyper, lr, stage.trainable);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch) + ")");
      }
    }
    return totals;
  }

 private:
  void run_chunk(const ModelParams& params, const StageSettings& stage, const std::vector<Item>& items,
                 std::size_t chunk, double weight, GroupModel& model, ChunkResult& result) {
    const std::size_t begin = chunk * kChunk;
    const std::size_t end = std::min(items.size(), begin + kChunk);
    const std::size_t K = model_cfg_.actors;
    const std::size_t A = model_cfg_.action_classes;
    const std::size_t G = model_cfg_.group_classes;

    std::vector<StreamTensors> streams;
    std::vector<std::vector<std::uint8_t>> masks;
    std::vector<int> group_labels;
    std::vector<int> action_labels;
    for (std::size_t i = begin; i < end; ++i) {
      const ClipRecord& original = ds_.clips[items[i].clip];
      const ClipRecord clip = items[i].flipped ? horizontal_flip(original, ds_.layout, ds_.label_flip_map) : original;
      streams.push_back(assemble_streams(clip, ds_.layout, {cfg_.use_gd}));
      masks.push_back(clip.actor_mask());
      group_labels.push_back(clip.group_label);
      if (stage.use_individual) {
        action_labels.insert(action_labels.end(), clip.action_labels.begin(), clip.action_labels.end());
      }
    }
    std::vector<const StreamTensors*> ptrs;
    for (const auto& s : streams) ptrs.push_back(&s);

    const ModelOutputs outputs = model.forward(make_input(ptrs, masks), params);
    const LossResult loss = total_loss(outputs, group_labels, action_labels, stage.lambda, weight, stage.group_weight);
    if (result.grads.layers.empty()) {
      result.grads = params.zeros_like();
    } else {
      result.grads.set_zero();
    }
    model.backward(loss.grads, params, result.grads, stage.scope);

    result.terms = loss.per_clip;
    result.predicted.clear();
    result.individual_correct = 0;
    result.individual_total = 0;
    for (std::size_t b = 0; b < end - begin; ++b) {
      result.predicted.push_back(argmax(outputs.group_logits.data() + b * G, G));
      if (!stage.use_individual) continue;
      for (std::size_t k = 0; k < K; ++k) {
        const int label = action_labels[b * K + k];
        if (!masks[b][k] || label == kNoLabel) continue;
        ++result.individual_total;
        if (static_cast<int>(argmax(outputs.individual_logits.data() + (b * K + k) * A, A)) == label) {
          ++result.individual_correct;
        }
      }
    }
  }

  const Dataset& ds_;
  const ModelConfig& model_cfg_;
  const TrainConfig& cfg_;
  std::vector<GroupModel> workers_;
  std::vector<ChunkResult> chunks_;
};

void check_labels(const Dataset& ds, const ModelConfig& model_cfg, const TrainConfig& cfg) {
  if (cfg.mode == TrainingMode::group_only) return;
  if (cfg.label_source == LabelSource::pseudo && !ds.pseudo_labeled) {
    throw ConfigError("train: label_source pseudo needs a pseudo-labeled training set");
  }
  if (cfg.label_source == LabelSource::ground_truth && ds.pseudo_labeled) {
    throw ConfigError("train: label_source ground_truth given a pseudo-labeled training set");
  }
  for (const ClipRecord& clip : ds.clips) {
    if (!clip.has_action_labels()) {
      throw ConfigError("train: clip " + clip.clip_id + " has no individual labels but mode " + to_string(cfg.mode) +
                        " needs them");
    }
  }
  if (ds.action_class_count() != model_cfg.action_classes) {
    throw ConfigError("train: dataset has " + std::to_string(ds.action_class_count()) +
                      " individual classes, model has " + std::to_string(model_cfg.action_classes));
  }
}

}  // namespace

TrainResult train(const Dataset& train_ds, const Dataset& val_ds, const ModelConfig& model_cfg,
                  const TrainConfig& train_cfg, const TrainHooks& hooks) {
  train_cfg.validate();
  model_cfg.validate();
  if (train_ds.clips.empty()) throw ConfigError("train: empty training set");
  check_geometry(train_ds, model_cfg, "train");
  check_geometry(val_ds, model_cfg, "train (validation)");
  check_labels(train_ds, model_cfg, train_cfg);

  GroupModel reference(model_cfg);
  TrainResult result;
  result.params = reference.init_params(train_cfg.seed);
  result.best_params = result.params;
  std::mt19937_64 rng(train_cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  Trainer trainer(train_ds, model_cfg, train_cfg);

  std::vector<Trainer::StageSettings> stages;
  std::vector<std::size_t> stage_epochs;
  const std::size_t n_layers = result.params.layers.size();
  switch (train_cfg.mode) {
    case TrainingMode::end_to_end:
      stages.push_back({1.0, train_cfg.lambda, true, BackwardScope::full, std::vector<std::uint8_t>(n_layers, 1)});
      stage_epochs.push_back(train_cfg.epochs);
      break;
    case TrainingMode::group_only: {
      std::vector<std::uint8_t> flags(n_layers, 1);
      for (std::size_t i = 0; i < n_layers; ++i) {
        if (result.params.layers[i].name == GroupModel::kIndividualHead) flags[i] = 0;
      }
      stages.push_back({1.0, 0.0, false, BackwardScope::full, flags});
      stage_epochs.push_back(train_cfg.epochs);
      break;
    }
    case TrainingMode::two_stage:
      stages.push_back({0.0, 1.0, true, BackwardScope::full, stage_one_trainable(result.params)});
      stages.push_back({1.0, 0.0, false, BackwardScope::fusion_and_heads, stage_two_trainable(result.params)});
      stage_epochs.push_back((train_cfg.epochs + 1) / 2);
      stage_epochs.push_back(train_cfg.epochs / 2);
      break;
  }

  double best_val = -1.0;
  std::size_t epoch = 0;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    AdamState adam = AdamState::for_params(result.params);
    for (std::size_t e = 0; e < stage_epochs[s]; ++e, ++epoch) {
      const double lr = lr_schedule(epoch, train_cfg.hyper.lr0, train_cfg.lr_decay_every);
      const auto totals = trainer.run_epoch(result.params, adam, stages[s], epoch, lr, rng);

      EpochRecord rec;
      rec.epoch = epoch;
      rec.lr = lr;
      rec.group_loss = totals.group_loss / static_cast<double>(totals.items);
      rec.train_group_accuracy = static_cast<double>(totals.group_correct) / static_cast<double>(totals.originals);
      if (train_cfg.mode != TrainingMode::group_only) {
        rec.individual_loss = totals.individual_loss / static_cast<double>(totals.items);
        if (totals.individual_total > 0) {
          rec.train_individual_accuracy =
              static_cast<double>(totals.individual_correct) / static_cast<double>(totals.individual_total);
        }
      }
      bool improved = false;
      if (!val_ds.clips.empty()) {
        const Predictions pred = predict(val_ds, model_cfg, result.params, train_cfg.use_gd, train_cfg.threads);
        rec.val_group_accuracy = group_accuracy(val_ds, pred);
        if (*rec.val_group_accuracy > best_val) {
          best_val = *rec.val_group_accuracy;
          result.best_params = result.params;
          result.best_epoch = epoch;
          improved = true;
        }
      }
      result.history.push_back(rec);
      if (hooks.on_epoch) hooks.on_epoch(rec, result.params, improved);
    }
  }
  if (val_ds.clips.empty()) {
    result.best_params = result.params;
    result.best_epoch = epoch - 1;
  }
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  const bool has_individual = std::any_of(history.begin(), history.end(), [](const auto& r) {
    return r.individual_loss.has_value();
  });
  std::ostringstream out;
  out << "epoch,lr,L_G";
  if (has_individual) out << ",L_I";
  out << ",train_acc_group";
  if (has_individual) out << ",train_acc_indiv";
  out << ",val_acc_group\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const EpochRecord& r : history) {
    out << r.epoch << "," << format_double(r.lr) << "," << format_double(r.group_loss);
    if (has_individual) out << "," << opt(r.individual_loss);
    out << "," << format_double(r.train_group_accuracy);
    if (has_individual) out << "," << opt(r.train_individual_accuracy);
    out << "," << opt(r.val_group_accuracy) << "\n";
  }
  return out.str();
}

}  // namespace skelgroup
