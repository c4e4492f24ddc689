#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "run_config.hpp"
#include "skelgroup/params.hpp"
#include "skelgroup/dataset.hpp"
#include "skelgroup/error.hpp"
#include "skelgroup/eval.hpp"
#include "skelgroup/features.hpp"
#include "skelgroup/gradcheck_suite.hpp"
#include "skelgroup/pseudo_label.hpp"
#include "skelgroup/report.hpp"
#include "skelgroup/streams.hpp"
#include "skelgroup/synthetic.hpp"
#include "skelgroup/text.hpp"
#include "skelgroup/train.hpp"

namespace skelgroup::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::size_t threads = 0;  // 0: keep config value
  std::string mode;
  long long seed = -1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--set", c.sets, "Override a config value: section.key=value")->take_all();
  cmd->add_option("--threads", c.threads, "Worker threads (results do not depend on it)");
}

RunConfig resolve(const Common& c) {
  json doc = load_config_json(c.config, c.sets);
  if (!c.mode.empty()) doc["train"]["mode"] = c.mode;
  if (c.seed >= 0) doc["train"]["seed"] = c.seed;
  if (c.threads > 0) doc["train"]["threads"] = c.threads;
  RunConfig cfg = parse_config(doc);
  if (cfg.train.mode == TrainingMode::group_only && cfg.train.label_source == LabelSource::pseudo) {
    cfg.train.label_source = LabelSource::none;
  }
  return cfg;
}

// The effective config as written next to results; threads is dropped so
// output files do not depend on it.
std::string config_record(const RunConfig& cfg) {
  json doc = to_json(cfg);
  doc["train"].erase("threads");
  return doc.dump(2) + "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

ModelConfig model_for(const Dataset& ds, const ModelConfig& widths) {
  ModelConfig m = widths;
  m.actors = ds.actors_per_clip;
  m.frames = ds.frames_per_clip;
  m.joints = ds.joint_count();
  m.group_classes = ds.group_class_count();
  m.action_classes = std::max<std::size_t>(2, ds.action_class_count());
  return m;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const RunConfig& cfg) {
  return split_dataset(ds, cfg.split.train_fraction, cfg.split.seed);
}

Dataset apply_assignments(const Dataset& train_ds, const fs::path& file, std::size_t k) {
  return assign_pseudolabels(train_ds, read_assignments(file), k);
}

std::string fmt(double v) { return format_double(v); }

// ---------------------------------------------------------------- generate
int cmd_generate(const Common& c, const std::string& out_dir, std::ostream& out) {
  const RunConfig cfg = resolve(c);
  const Dataset ds = generate_synthetic(cfg.synthetic);
  ensure_dir(out_dir);
  write_dataset(ds, out_dir);
  out << "generated " << ds.clips.size() << " clips, G=" << ds.group_class_count()
      << " A=" << ds.action_class_count() << " K=" << ds.actors_per_clip << " T=" << ds.frames_per_clip
      << " N=" << ds.joint_count() << "\n";
  out << "RESULT clips=" << ds.clips.size() << " G=" << ds.group_class_count() << " A=" << ds.action_class_count()
      << " K=" << ds.actors_per_clip << " T=" << ds.frames_per_clip << " N=" << ds.joint_count() << "\n";
  return kOk;
}

// ----------------------------------------------------------------- convert
int cmd_convert(const std::string& in, const std::string& out_dir, std::size_t actors, std::size_t frames,
                std::ostream& out) {
  LoadOptions opts;
  if (actors > 0) opts.actors = actors;
  if (frames > 0) opts.frames = frames;
  const Dataset ds = load_dataset(in, opts);
  validate_dataset(ds);
  ensure_dir(out_dir);
  write_dataset(ds, out_dir);
  out << "RESULT clips=" << ds.clips.size() << " K=" << ds.actors_per_clip << " T=" << ds.frames_per_clip
      << " N=" << ds.joint_count() << "\n";
  return kOk;
}

// ------------------------------------------------------------------- train
int cmd_train(const Common& c, const std::string& data, const std::string& out_dir, const std::string& assignments,
              std::ostream& out) {
  const RunConfig cfg = resolve(c);
  if (cfg.train.label_source == LabelSource::pseudo && assignments.empty()) {
    throw ConfigError("train: label_source pseudo needs --assignments (see the pseudolabel command)");
  }
  const Dataset ds = load_dataset(data);
  validate_dataset(ds);
  auto [train_ds, val_ds] = split(ds, cfg);
  if (cfg.train.label_source == LabelSource::pseudo) {
    train_ds = apply_assignments(train_ds, assignments, cfg.pseudo.k);
  }
  ModelConfig model = model_for(train_ds, cfg.model);
  ensure_dir(out_dir);

  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r, const ModelParams&, bool) {
    out << "epoch " << r.epoch << " lr=" << fmt(r.lr) << " L_G=" << fmt(r.group_loss);
    if (r.individual_loss) out << " L_I=" << fmt(*r.individual_loss);
    out << " train_acc=" << fmt(r.train_group_accuracy);
    if (r.val_group_accuracy) out << " val_acc=" << fmt(*r.val_group_accuracy);
    out << "\n";
  };
  const TrainResult result = train(train_ds, val_ds, model, cfg.train, hooks);
  write_checkpoint(result.params, fs::path(out_dir) / "checkpoint.bin");
  write_checkpoint(result.best_params, fs::path(out_dir) / "best.bin");
  write_text(fs::path(out_dir) / "history.csv", history_csv(result.history));
  json model_doc = model_to_json(model);
  model_doc["use_gd"] = cfg.train.use_gd;
  write_text(fs::path(out_dir) / "model.json", model_doc.dump(2) + "\n");
  write_text(fs::path(out_dir) / "config.json", config_record(cfg));

  const EpochRecord& last = result.history.back();
  out << "RESULT epochs=" << result.history.size() << " train_acc=" << fmt(last.train_group_accuracy)
      << " val_acc=" << (last.val_group_accuracy ? fmt(*last.val_group_accuracy) : std::string("na"))
      << " best_epoch=" << (result.best_epoch ? std::to_string(*result.best_epoch) : std::string("na")) << "\n";
  return kOk;
}

// -------------------------------------------------------------------- eval
int cmd_eval(const Common& c, const std::string& data, const std::string& model_dir, const std::string& subset,
             const std::string& checkpoint, const std::string& out_dir, std::ostream& out) {
  RunConfig cfg = resolve(c);
  const fs::path saved = fs::path(model_dir) / "config.json";
  if (c.config.empty() && fs::exists(saved)) {
    Common again = c;
    again.config = saved.string();
    cfg = resolve(again);
  }
  std::ifstream model_in(fs::path(model_dir) / "model.json");
  if (!model_in) throw IoError("path not found: " + (fs::path(model_dir) / "model.json").string());
  json model_doc;
  try {
    model_doc = json::parse(model_in);
  } catch (const json::exception& e) {
    throw IoError(std::string("model.json: ") + e.what());
  }
  const bool use_gd = model_doc.value("use_gd", true);
  model_doc.erase("use_gd");
  const ModelConfig model = model_from_json(model_doc);
  const ModelParams params =
      read_checkpoint(checkpoint.empty() ? fs::path(model_dir) / "checkpoint.bin" : fs::path(checkpoint));

  const Dataset ds = load_dataset(data);
  validate_dataset(ds);
  Dataset target;
  if (subset == "all") {
    target = ds;
  } else {
    auto [tr, va] = split(ds, cfg);
    target = subset == "train" ? tr : va;
  }
  const EvalReport r = evaluate(params, target, model, use_gd, cfg.train.threads);
  out << "group accuracy " << fmt(r.group_accuracy) << " over " << r.clips << " clips\n";
  for (std::size_t g = 0; g < r.per_class_recall.size(); ++g) {
    out << "  recall " << r.class_names[g] << " = " << fmt(r.per_class_recall[g]) << "\n";
  }
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_text(fs::path(out_dir) / "confusion.csv", confusion_csv(r));
    json doc = {{"group_accuracy", r.group_accuracy},
                {"per_class_recall", r.per_class_recall},
                {"confusion", r.confusion},
                {"clips", r.clips}};
    if (r.individual_accuracy) doc["individual_accuracy"] = *r.individual_accuracy;
    write_text(fs::path(out_dir) / "eval.json", doc.dump(2) + "\n");
  }
  out << "RESULT group_acc=" << fmt(r.group_accuracy);
  if (r.individual_accuracy) out << " indiv_acc=" << fmt(*r.individual_accuracy);
  out << " clips=" << r.clips << "\n";
  return kOk;
}

// ------------------------------------------------------------- pseudolabel
int cmd_pseudolabel(const Common& c, const std::string& data, const std::string& features, bool stand_in,
                    const std::string& subset, const std::string& out_file, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve(c);
  if (features.empty() == !stand_in) throw ConfigError("pseudolabel: give exactly one of --features or --stand-in");
  const Dataset ds = load_dataset(data);
  validate_dataset(ds);
  Dataset target;
  if (subset == "all") {
    target = ds;
  } else {
    auto [tr, va] = split(ds, cfg);
    target = subset == "train" ? tr : va;
  }
  FeatureMatrix feats = stand_in ? stand_in_features(target) : read_features(features, target);
  if (!stand_in) {
    // Keep the rows of this subset and insist on full coverage.
    std::map<std::pair<std::string, std::size_t>, Eigen::Index> index;
    for (std::size_t i = 0; i < feats.ids.size(); ++i) {
      index[{feats.ids[i].clip_id, feats.ids[i].actor}] = static_cast<Eigen::Index>(i);
    }
    const std::vector<FeatureId> wanted = canonical_ids(target);
    std::vector<std::string> missing;
    FeatureMatrix kept;
    kept.values.resize(static_cast<Eigen::Index>(wanted.size()), feats.values.cols());
    for (std::size_t i = 0; i < wanted.size(); ++i) {
      const auto it = index.find({wanted[i].clip_id, wanted[i].actor});
      if (it == index.end()) {
        missing.push_back(wanted[i].clip_id + ":" + std::to_string(wanted[i].actor));
        continue;
      }
      kept.values.row(static_cast<Eigen::Index>(i)) = feats.values.row(it->second);
    }
    if (!missing.empty()) {
      std::string list;
      for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += " " + missing[i];
      if (missing.size() > 20) list += " ...";
      throw ConfigError("pseudolabel: features missing for " + std::to_string(missing.size()) + " actors:" + list);
    }
    kept.ids = wanted;
    feats = std::move(kept);
  }
  const PseudoResult r = run_pseudo_pipeline(feats, cfg.pseudo);
  for (const std::string& w : r.warnings) err << "warning: " << w << "\n";
  write_assignments(r.assignments, out_file);
  std::vector<std::size_t> sizes(cfg.pseudo.k, 0);
  for (int a : r.clustering.assignments) ++sizes[static_cast<std::size_t>(a)];
  out << "cluster sizes:";
  for (std::size_t s : sizes) out << " " << s;
  out << "\n";
  const auto nonempty = std::count_if(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; });
  out << "RESULT samples=" << feats.rows() << " k=" << cfg.pseudo.k << " nonempty=" << nonempty
      << " pca_dim=" << r.used_pca_dim << " inertia=" << fmt(r.clustering.inertia) << "\n";
  return kOk;
}

std::vector<std::uint64_t> seeds_from(const std::string& text, const RunConfig& cfg) {
  if (text.empty()) return cfg.experiment.seeds;
  std::vector<std::uint64_t> seeds;
  for (const std::string& s : skelgroup::split(text, ',')) {
    try {
      seeds.push_back(std::stoull(s));
    } catch (const std::exception&) {
      throw ConfigError("bad seed list '" + text + "'");
    }
  }
  return seeds;
}

// ----------------------------------------------------------------- sweep-k
int cmd_sweep(const Common& c, const std::string& data, const std::string& out_dir, const std::string& ks_text,
              const std::string& seeds_text, const std::string& features, std::ostream& out) {
  const RunConfig cfg = resolve(c);
  const Dataset ds = load_dataset(data);
  validate_dataset(ds);
  auto [train_ds, val_ds] = split(ds, cfg);
  std::vector<std::size_t> ks = cfg.experiment.ks;
  if (!ks_text.empty()) {
    ks.clear();
    for (const std::string& s : skelgroup::split(ks_text, ',')) {
      try {
        ks.push_back(std::stoul(s));
      } catch (const std::exception&) {
        throw ConfigError("bad k list '" + ks_text + "'");
      }
    }
  }
  if (ks.empty()) {
    const std::size_t a = ds.action_class_count();
    ks = {a, 2 * a, 4 * a};
  }
  std::optional<FeatureMatrix> feats;
  if (!features.empty()) feats = read_features(features, train_ds);
  const auto seeds = seeds_from(seeds_text, cfg);
  ensure_dir(out_dir);
  const auto points = sweep_k(train_ds, val_ds, ks, model_for(train_ds, cfg.model), cfg.train, cfg.pseudo, seeds, feats);
  write_text(fs::path(out_dir) / "sweep.csv", sweep_csv(points));
  write_text(fs::path(out_dir) / "sweep.svg", sweep_svg(points));
  std::size_t best_k = 0;
  double best = -1.0;
  for (const auto& [k, s] : summarize_sweep(points)) {
    out << "k=" << k << " mean=" << fmt(s.mean) << " std=" << fmt(s.std) << "\n";
    if (s.mean > best) {
      best = s.mean;
      best_k = k;
    }
  }
  out << "RESULT best_k=" << best_k << " best_acc=" << fmt(best) << " runs=" << points.size() << "\n";
  return kOk;
}

std::vector<AblationSpec> default_ablation() {
  return {{"supervised", {{"mode", "end_to_end"}, {"label_source", "ground_truth"}}, json::object()},
          {"pseudo", {{"mode", "end_to_end"}, {"label_source", "pseudo"}}, json::object()},
          {"group_only", {{"mode", "group_only"}, {"label_source", "none"}}, json::object()},
          {"no_gd", {{"mode", "end_to_end"}, {"use_gd", false}}, json::object()},
          {"two_stage", {{"mode", "two_stage"}}, json::object()}};
}

// ------------------------------------------------------------------ ablate
int cmd_ablate(const Common& c, const std::string& data, const std::string& out_dir, const std::string& seeds_text,
               std::ostream& out) {
  const RunConfig cfg = resolve(c);
  const Dataset ds = load_dataset(data);
  validate_dataset(ds);
  auto [train_ds, val_ds] = split(ds, cfg);
  std::vector<AblationRow> rows;
  for (const AblationSpec& spec : cfg.ablation.empty() ? default_ablation() : cfg.ablation) {
    AblationRow row;
    row.name = spec.name;
    row.train = apply_train_overrides(cfg.train, spec.train_overrides);
    row.train.threads = cfg.train.threads;
    row.pseudo = apply_pseudo_overrides(cfg.pseudo, spec.pseudo_overrides);
    rows.push_back(row);
  }
  ensure_dir(out_dir);
  const auto results = run_ablation_suite(train_ds, val_ds, model_for(train_ds, cfg.model), rows, seeds_from(seeds_text, cfg));
  const std::string table = ablation_table(results);
  write_text(fs::path(out_dir) / "ablation.csv", ablation_csv(results));
  write_text(fs::path(out_dir) / "ablation.txt", table);
  out << table;
  out << "RESULT rows=" << rows.size();
  for (const auto& [name, s] : summarize_ablation(results)) out << " " << name << "=" << fmt(s.mean);
  out << "\n";
  return kOk;
}

// --------------------------------------------------------------- gradcheck
int cmd_gradcheck(const std::string& fault, bool constant, double tolerance, std::uint64_t seed, std::ostream& out,
                  std::ostream& err) {
  GradCheckSuiteOptions opts;
  opts.fault_check = fault;
  opts.constant = constant;
  opts.tolerance = tolerance;
  opts.seed = seed;
  const auto lines = run_gradcheck_suite(opts);
  if (!fault.empty() && std::none_of(lines.begin(), lines.end(), [&](const auto& l) { return l.name == fault; })) {
    throw ConfigError("gradcheck: unknown check '" + fault + "'");
  }
  double worst = 0.0;
  std::vector<std::string> failed;
  for (const GradCheckLine& l : lines) {
    out << (l.passed ? "ok   " : "FAIL ") << l.name << " max_rel_error=" << fmt(l.max_relative_error)
        << " checked=" << l.checked << " skipped_kinks=" << l.skipped_kinks << "\n";
    worst = std::max(worst, l.max_relative_error);
    if (!l.passed) failed.push_back(l.name);
  }
  for (const std::string& f : failed) err << "gradcheck: " << f << " exceeds tolerance " << fmt(tolerance) << "\n";
  out << "RESULT checks=" << lines.size() << " failed=" << failed.size() << " max_rel_error=" << fmt(worst) << "\n";
  return failed.empty() ? kOk : kGradcheck;
}

// --------------------------------------------------------------- flip-dump
int cmd_flip_dump(const std::string& data, const std::string& clip_id, const std::string& out_file, bool flip,
                  bool no_gd, std::ostream& out) {
  const Dataset ds = load_dataset(data);
  const auto it = std::find_if(ds.clips.begin(), ds.clips.end(), [&](const ClipRecord& c) { return c.clip_id == clip_id; });
  if (it == ds.clips.end()) throw ConfigError("flip-dump: no clip '" + clip_id + "'");
  const ClipRecord clip = flip ? horizontal_flip(*it, ds.layout, ds.label_flip_map) : *it;
  const StreamTensors streams = assemble_streams(clip, ds.layout, {!no_gd});
  write_stream_dump(streams, out_file);
  out << "RESULT clip=" << clip_id << " flipped=" << (flip ? 1 : 0) << " group_label=" << clip.group_label
      << " pivot=" << streams.pivot_index << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Skeleton-based group activity recognition"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  Common common;
  std::string data, out_dir, in_path, assignments, model_dir, subset = "all", checkpoint, features, ks, seeds, clip,
                                                            fault;
  std::size_t actors = 0, frames = 0;
  bool stand_in = false, constant = false, flip = false, no_gd = false;
  double tolerance = 1e-4;
  std::uint64_t gc_seed = 7;
  const std::vector<std::string> subsets = {"all", "train", "val"};

  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  add_common(gen, common);
  gen->add_option("--out", out_dir, "Output directory")->required();

  auto* conv = app.add_subcommand("convert", "Re-pad, crop and validate a dataset into canonical form");
  conv->add_option("--in", in_path, "Manifest file or dataset directory")->required();
  conv->add_option("--out", out_dir, "Output directory")->required();
  conv->add_option("--actors", actors, "Pad every clip to this many actors");
  conv->add_option("--frames", frames, "Centre-crop every clip to this many frames");

  auto* tr = app.add_subcommand("train", "Train a model");
  add_common(tr, common);
  tr->add_option("--data", data, "Dataset directory")->required();
  tr->add_option("--out", out_dir, "Output directory")->required();
  tr->add_option("--assignments", assignments, "Cluster assignment file for label_source pseudo");
  tr->add_option("--mode", common.mode, "end_to_end, two_stage or group_only");
  tr->add_option("--seed", common.seed, "Training seed");

  auto* ev = app.add_subcommand("eval", "Evaluate a trained model");
  add_common(ev, common);
  ev->add_option("--data", data, "Dataset directory")->required();
  ev->add_option("--model", model_dir, "Directory written by train")->required();
  ev->add_option("--checkpoint", checkpoint, "Checkpoint file (default <model>/checkpoint.bin)");
  ev->add_option("--subset", subset, "all, train or val")->check(CLI::IsMember(subsets));
  ev->add_option("--out", out_dir, "Directory for confusion.csv and eval.json");

  auto* pl = app.add_subcommand("pseudolabel", "Cluster actor features into pseudo-labels");
  add_common(pl, common);
  pl->add_option("--data", data, "Dataset directory")->required();
  pl->add_option("--features", features, "Feature file (text, or .bin flat dump)");
  pl->add_flag("--stand-in", stand_in, "Use the built-in hand-made descriptor");
  pl->add_option("--subset", subset, "all, train or val")->check(CLI::IsMember(subsets));
  pl->add_option("--out", out_dir, "Assignment file to write")->required();

  auto* sw = app.add_subcommand("sweep-k", "Pseudo-label training over several cluster counts");
  add_common(sw, common);
  sw->add_option("--data", data, "Dataset directory")->required();
  sw->add_option("--out", out_dir, "Output directory")->required();
  sw->add_option("--ks", ks, "Comma-separated k values (default A,2A,4A)");
  sw->add_option("--seeds", seeds, "Comma-separated seeds");
  sw->add_option("--features", features, "Feature file for the training split");

  auto* ab = app.add_subcommand("ablate", "Train and evaluate every ablation row over several seeds");
  add_common(ab, common);
  ab->add_option("--data", data, "Dataset directory")->required();
  ab->add_option("--out", out_dir, "Output directory")->required();
  ab->add_option("--seeds", seeds, "Comma-separated seeds");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every layer and the tiny model");
  gc->add_option("--inject-fault", fault, "Negate the analytic gradient of one check");
  gc->add_flag("--constant", constant, "Check a constant (zero) loss");
  gc->add_option("--tolerance", tolerance, "Maximum relative error");
  gc->add_option("--seed", gc_seed, "Seed for inputs and parameters");

  auto* fd = app.add_subcommand("flip-dump", "Write the input streams of one clip");
  fd->add_option("--data", data, "Dataset directory")->required();
  fd->add_option("--clip", clip, "Clip id")->required();
  fd->add_option("--out", out_dir, "Dump file")->required();
  fd->add_flag("--flip", flip, "Mirror the clip first");
  fd->add_flag("--no-gd", no_gd, "Leave the GD stream zero");

  std::vector<std::string> argv_store = {"skelgroup"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  }

  try {
    if (*gen) return cmd_generate(common, out_dir, out);
    if (*conv) return cmd_convert(in_path, out_dir, actors, frames, out);
    if (*tr) return cmd_train(common, data, out_dir, assignments, out);
    if (*ev) return cmd_eval(common, data, model_dir, subset, checkpoint, out_dir, out);
    if (*pl) return cmd_pseudolabel(common, data, features, stand_in, subset, out_dir, out, err);
    if (*sw) return cmd_sweep(common, data, out_dir, ks, seeds, features, out);
    if (*ab) return cmd_ablate(common, data, out_dir, seeds, out);
    if (*gc) return cmd_gradcheck(fault, constant, tolerance, gc_seed, out, err);
    if (*fd) return cmd_flip_dump(data, clip, out_dir, flip, no_gd, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  }
  return kConfig;
}

}  // namespace skelgroup::cli
