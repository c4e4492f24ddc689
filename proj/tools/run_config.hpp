#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "skelgroup/model.hpp"
#include "skelgroup/pseudo_label.hpp"
#include "skelgroup/synthetic.hpp"
#include "skelgroup/train.hpp"

namespace skelgroup::cli {

struct SplitConfig {
  double train_fraction = 0.75;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<std::size_t> ks;  // empty: A, 2A, 4A of the dataset
};

struct AblationSpec {
  std::string name;
  nlohmann::json train_overrides = nlohmann::json::object();
  nlohmann::json pseudo_overrides = nlohmann::json::object();
};

// Merged view of every config section. K, T, N, A and G of the model are
// taken from the data, so the model section only holds layer widths.
struct RunConfig {
  SyntheticConfig synthetic;
  ModelConfig model;
  TrainConfig train;
  PseudoConfig pseudo;
  SplitConfig split;
  ExperimentConfig experiment;
  std::vector<AblationSpec> ablation;
};

nlohmann::json default_config_json();
// Throws ConfigError naming the first unknown key or ill-typed value.
RunConfig parse_config(const nlohmann::json& doc);
nlohmann::json to_json(const RunConfig& cfg);

// "section.key=value"; the value is read as JSON, or as a bare string when
// that fails.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Defaults, then the file (when given), then the overrides.
nlohmann::json load_config_json(const std::filesystem::path& path, const std::vector<std::string>& overrides);

// Applies a JSON object of train/pseudo keys on top of existing settings.
TrainConfig apply_train_overrides(TrainConfig base, const nlohmann::json& overrides);
PseudoConfig apply_pseudo_overrides(PseudoConfig base, const nlohmann::json& overrides);

nlohmann::json model_to_json(const ModelConfig& m);
ModelConfig model_from_json(const nlohmann::json& j);

}  // namespace skelgroup::cli
