#include "run_config.hpp"

#include <fstream>
#include <set>

#include "skelgroup/error.hpp"

namespace skelgroup::cli {

using nlohmann::json;

namespace {

void check_keys(const json& section, const std::string& name, const std::set<std::string>& allowed) {
  if (!section.is_object()) throw ConfigError("config: section '" + name + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    if (!allowed.count(key)) throw ConfigError("config: unknown key '" + name + "." + key + "'");
  }
}

template <typename T>
void read(const json& section, const std::string& sec, const char* key, T& out) {
  if (!section.contains(key)) return;
  try {
    const json& v = section.at(key);
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("");
    }
    out = v.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config: bad value for '" + sec + "." + key + "': " + section.at(key).dump());
  }
}

std::string read_string(const json& section, const std::string& sec, const char* key, const std::string& fallback) {
  if (!section.contains(key)) return fallback;
  if (!section.at(key).is_string()) {
    throw ConfigError("config: '" + sec + "." + key + "' must be a string, got " + section.at(key).dump());
  }
  return section.at(key).get<std::string>();
}

const std::set<std::string> kTrainKeys = {"epochs", "batch_size", "lr", "beta1", "beta2", "epsilon", "lr_decay_every",
                                          "lambda", "mode", "use_gd", "augment", "label_source", "seed", "threads"};
const std::set<std::string> kPseudoKeys = {"pca_dim", "k", "max_iters", "restarts", "seed"};

}  // namespace

json model_to_json(const ModelConfig& m) {
  return {{"actors", m.actors},
          {"frames", m.frames},
          {"joints", m.joints},
          {"point_channels", m.branch.point_channels},
          {"temporal_channels", m.branch.temporal_channels},
          {"temporal_kernel", m.branch.temporal_kernel},
          {"spatial_channels", m.branch.spatial_channels},
          {"deep_channels", m.branch.deep_channels},
          {"fusion_hidden", m.fusion.hidden},
          {"fusion_features", m.fusion.features},
          {"action_classes", m.action_classes},
          {"group_classes", m.group_classes}};
}

ModelConfig model_from_json(const json& j) {
  check_keys(j, "model", {"actors", "frames", "joints", "point_channels", "temporal_channels", "temporal_kernel",
                          "spatial_channels", "deep_channels", "fusion_hidden", "fusion_features", "action_classes",
                          "group_classes"});
  ModelConfig m;
  read(j, "model", "actors", m.actors);
  read(j, "model", "frames", m.frames);
  read(j, "model", "joints", m.joints);
  read(j, "model", "point_channels", m.branch.point_channels);
  read(j, "model", "temporal_channels", m.branch.temporal_channels);
  read(j, "model", "temporal_kernel", m.branch.temporal_kernel);
  read(j, "model", "spatial_channels", m.branch.spatial_channels);
  read(j, "model", "deep_channels", m.branch.deep_channels);
  read(j, "model", "fusion_hidden", m.fusion.hidden);
  read(j, "model", "fusion_features", m.fusion.features);
  read(j, "model", "action_classes", m.action_classes);
  read(j, "model", "group_classes", m.group_classes);
  return m;
}

TrainConfig apply_train_overrides(TrainConfig t, const json& j) {
  check_keys(j, "train", kTrainKeys);
  read(j, "train", "epochs", t.epochs);
  read(j, "train", "batch_size", t.batch_size);
  read(j, "train", "lr", t.hyper.lr0);
  read(j, "train", "beta1", t.hyper.beta1);
  read(j, "train", "beta2", t.hyper.beta2);
  read(j, "train", "epsilon", t.hyper.epsilon);
  read(j, "train", "lr_decay_every", t.lr_decay_every);
  read(j, "train", "lambda", t.lambda);
  t.mode = parse_training_mode(read_string(j, "train", "mode", to_string(t.mode)));
  read(j, "train", "use_gd", t.use_gd);
  read(j, "train", "augment", t.augment);
  t.label_source = parse_label_source(read_string(j, "train", "label_source", to_string(t.label_source)));
  read(j, "train", "seed", t.seed);
  read(j, "train", "threads", t.threads);
  return t;
}

PseudoConfig apply_pseudo_overrides(PseudoConfig p, const json& j) {
  check_keys(j, "pseudo", kPseudoKeys);
  read(j, "pseudo", "pca_dim", p.pca_dim);
  read(j, "pseudo", "k", p.k);
  read(j, "pseudo", "max_iters", p.max_iters);
  read(j, "pseudo", "restarts", p.restarts);
  read(j, "pseudo", "seed", p.seed);
  return p;
}

json default_config_json() { return to_json(RunConfig{}); }

json to_json(const RunConfig& c) {
  const SyntheticConfig& s = c.synthetic;
  const TrainConfig& t = c.train;
  const PseudoConfig& p = c.pseudo;
  const ModelConfig& m = c.model;
  json ablation = json::array();
  for (const AblationSpec& row : c.ablation) {
    ablation.push_back({{"name", row.name}, {"train", row.train_overrides}, {"pseudo", row.pseudo_overrides}});
  }
  return {{"synthetic",
           {{"n_clips", s.n_clips},
            {"actors", s.actors},
            {"frames", s.frames},
            {"joints", s.joints},
            {"group_classes", s.group_classes},
            {"action_classes", s.action_classes},
            {"noise_std", s.noise_std},
            {"seed", s.seed}}},
          {"model",
           {{"point_channels", m.branch.point_channels},
            {"temporal_channels", m.branch.temporal_channels},
            {"temporal_kernel", m.branch.temporal_kernel},
            {"spatial_channels", m.branch.spatial_channels},
            {"deep_channels", m.branch.deep_channels},
            {"fusion_hidden", m.fusion.hidden},
            {"fusion_features", m.fusion.features}}},
          {"train",
           {{"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"lr", t.hyper.lr0},
            {"beta1", t.hyper.beta1},
            {"beta2", t.hyper.beta2},
            {"epsilon", t.hyper.epsilon},
            {"lr_decay_every", t.lr_decay_every},
            {"lambda", t.lambda},
            {"mode", to_string(t.mode)},
            {"use_gd", t.use_gd},
            {"augment", t.augment},
            {"label_source", to_string(t.label_source)},
            {"seed", t.seed},
            {"threads", t.threads}}},
          {"pseudo",
           {{"pca_dim", p.pca_dim}, {"k", p.k}, {"max_iters", p.max_iters}, {"restarts", p.restarts}, {"seed", p.seed}}},
          {"split", {{"train_fraction", c.split.train_fraction}, {"seed", c.split.seed}}},
          {"experiment", {{"seeds", c.experiment.seeds}, {"ks", c.experiment.ks}}},
          {"ablation", ablation}};
}

RunConfig parse_config(const json& doc) {
  check_keys(doc, "config", {"synthetic", "model", "train", "pseudo", "split", "experiment", "ablation"});
  RunConfig c;
  const json empty = json::object();
  auto section = [&](const char* name) -> const json& { return doc.contains(name) ? doc.at(name) : empty; };

  const json& s = section("synthetic");
  check_keys(s, "synthetic",
             {"n_clips", "actors", "frames", "joints", "group_classes", "action_classes", "noise_std", "seed"});
  read(s, "synthetic", "n_clips", c.synthetic.n_clips);
  read(s, "synthetic", "actors", c.synthetic.actors);
  read(s, "synthetic", "frames", c.synthetic.frames);
  read(s, "synthetic", "joints", c.synthetic.joints);
  read(s, "synthetic", "group_classes", c.synthetic.group_classes);
  read(s, "synthetic", "action_classes", c.synthetic.action_classes);
  read(s, "synthetic", "noise_std", c.synthetic.noise_std);
  read(s, "synthetic", "seed", c.synthetic.seed);

  const json& m = section("model");
  check_keys(m, "model",
             {"point_channels", "temporal_channels", "temporal_kernel", "spatial_channels", "deep_channels",
              "fusion_hidden", "fusion_features"});
  c.model = model_from_json(m);

  c.train = apply_train_overrides(c.train, section("train"));
  c.pseudo = apply_pseudo_overrides(c.pseudo, section("pseudo"));

  const json& sp = section("split");
  check_keys(sp, "split", {"train_fraction", "seed"});
  read(sp, "split", "train_fraction", c.split.train_fraction);
  read(sp, "split", "seed", c.split.seed);
  if (!(c.split.train_fraction > 0.0 && c.split.train_fraction < 1.0)) {
    throw ConfigError("config: split.train_fraction must lie in (0, 1)");
  }

  const json& e = section("experiment");
  check_keys(e, "experiment", {"seeds", "ks"});
  try {
    if (e.contains("seeds")) c.experiment.seeds = e.at("seeds").get<std::vector<std::uint64_t>>();
    if (e.contains("ks")) c.experiment.ks = e.at("ks").get<std::vector<std::size_t>>();
  } catch (const json::exception&) {
    throw ConfigError("config: experiment.seeds and experiment.ks must be lists of non-negative integers");
  }
  if (c.experiment.seeds.empty()) throw ConfigError("config: experiment.seeds must not be empty");

  if (doc.contains("ablation")) {
    if (!doc.at("ablation").is_array()) throw ConfigError("config: 'ablation' must be a list of rows");
    for (const json& row : doc.at("ablation")) {
      check_keys(row, "ablation[]", {"name", "train", "pseudo"});
      AblationSpec spec;
      spec.name = read_string(row, "ablation[]", "name", "");
      if (spec.name.empty()) throw ConfigError("config: every ablation row needs a name");
      if (row.contains("train")) spec.train_overrides = row.at("train");
      if (row.contains("pseudo")) spec.pseudo_overrides = row.at("pseudo");
      // Validate the keys now rather than after hours of earlier rows.
      apply_train_overrides(c.train, spec.train_overrides).validate();
      apply_pseudo_overrides(c.pseudo, spec.pseudo_overrides).validate();
      c.ablation.push_back(std::move(spec));
    }
  }
  c.train.validate();
  c.pseudo.validate();
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq || dot == 0 || dot + 1 == eq) {
    throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
  }
  const std::string section = assignment.substr(0, dot);
  const std::string key = assignment.substr(dot + 1, eq - dot - 1);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  if (!doc.contains(section) || !doc[section].is_object()) {
    throw ConfigError("config: unknown section '" + section + "' in --set " + assignment);
  }
  doc[section][key] = value;
}

json load_config_json(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json doc = default_config_json();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError("path not found: " + path.string());
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config " + path.string() + ": " + e.what());
    }
    if (!file.is_object()) throw ConfigError("config " + path.string() + ": top level must be an object");
    for (const auto& [section, body] : file.items()) {
      if (!doc.contains(section)) throw ConfigError("config: unknown key '" + section + "'");
      if (body.is_object() && doc[section].is_object()) {
        for (const auto& [key, value] : body.items()) doc[section][key] = value;
      } else {
        doc[section] = body;
      }
    }
  }
  for (const std::string& o : overrides) apply_override(doc, o);
  return doc;
}

}  // namespace skelgroup::cli
