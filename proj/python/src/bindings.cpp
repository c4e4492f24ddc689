#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <sstream>

#include "cli.hpp"
#include "skelgroup/dataset.hpp"
#include "skelgroup/error.hpp"
#include "skelgroup/eval.hpp"
#include "skelgroup/features.hpp"
#include "skelgroup/gradcheck_suite.hpp"
#include "skelgroup/model.hpp"
#include "skelgroup/params.hpp"
#include "skelgroup/pseudo_label.hpp"
#include "skelgroup/report.hpp"
#include "skelgroup/streams.hpp"
#include "skelgroup/synthetic.hpp"
#include "skelgroup/train.hpp"

namespace py = pybind11;
using namespace skelgroup;

namespace {

py::array_t<double> to_numpy(const Tensor& t) {
  py::array_t<double> out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Tensor from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  Tensor t(shape);
  std::copy(a.data(), a.data() + a.size(), t.data());
  return t;
}

const ClipRecord& clip_at(const Dataset& ds, py::ssize_t i) {
  const auto n = static_cast<py::ssize_t>(ds.clips.size());
  if (i < 0) i += n;
  if (i < 0 || i >= n) throw py::index_error("clip index out of range");
  return ds.clips[static_cast<std::size_t>(i)];
}

// [K, T, N, 3] raw joints (x, y, p); padding actors are zero.
py::array_t<double> clip_array(const Dataset& ds, py::ssize_t i) {
  const ClipRecord& clip = clip_at(ds, i);
  const std::size_t K = clip.actor_count();
  const std::size_t T = clip.frame_count();
  const std::size_t N = ds.joint_count();
  py::array_t<double> out({static_cast<py::ssize_t>(K), static_cast<py::ssize_t>(T), static_cast<py::ssize_t>(N),
                           py::ssize_t{3}});
  auto v = out.mutable_unchecked<4>();
  for (std::size_t k = 0; k < K; ++k) {
    const ActorSequence& actor = clip.actors[k];
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t j = 0; j < N; ++j) {
        const bool have = actor.valid && t < actor.frames.size() && j < actor.frames[t].size();
        const Joint joint = have ? actor.frames[t][j] : Joint{};
        v(k, t, j, 0) = joint.x;
        v(k, t, j, 1) = joint.y;
        v(k, t, j, 2) = joint.p;
      }
    }
  }
  return out;
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

py::dict epoch_dict(const EpochRecord& r) {
  py::dict d;
  d["epoch"] = r.epoch;
  d["lr"] = r.lr;
  d["group_loss"] = r.group_loss;
  d["individual_loss"] = r.individual_loss;
  d["train_group_accuracy"] = r.train_group_accuracy;
  d["train_individual_accuracy"] = r.train_individual_accuracy;
  d["val_group_accuracy"] = r.val_group_accuracy;
  return d;
}

FeatureMatrix features_from(const Eigen::MatrixXd& values, const std::vector<std::pair<std::string, std::size_t>>& ids) {
  FeatureMatrix f;
  f.values = values;
  for (const auto& [clip, actor] : ids) f.ids.push_back({clip, actor});
  if (f.ids.empty()) {
    for (Eigen::Index r = 0; r < values.rows(); ++r) f.ids.push_back({"row", static_cast<std::size_t>(r)});
  }
  f.validate();
  return f;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-stream skeleton group activity recognition";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  // Concrete errors also derive from the matching builtin so callers can
  // catch ValueError / OSError / ArithmeticError.
  py::register_exception<ConfigError>(m, "ConfigError", py::make_tuple(base, py::handle(PyExc_ValueError)));
  py::register_exception<IoError>(m, "IoError", py::make_tuple(base, py::handle(PyExc_OSError)));
  py::register_exception<NumericError>(m, "NumericError", py::make_tuple(base, py::handle(PyExc_ArithmeticError)));

  py::enum_<TrainingMode>(m, "TrainingMode")
      .value("end_to_end", TrainingMode::end_to_end)
      .value("two_stage", TrainingMode::two_stage)
      .value("group_only", TrainingMode::group_only);
  py::enum_<LabelSource>(m, "LabelSource")
      .value("ground_truth", LabelSource::ground_truth)
      .value("pseudo", LabelSource::pseudo)
      .value("none", LabelSource::none);

  py::class_<SyntheticConfig>(m, "SyntheticConfig")
      .def(py::init<>())
      .def_readwrite("n_clips", &SyntheticConfig::n_clips)
      .def_readwrite("actors", &SyntheticConfig::actors)
      .def_readwrite("frames", &SyntheticConfig::frames)
      .def_readwrite("joints", &SyntheticConfig::joints)
      .def_readwrite("group_classes", &SyntheticConfig::group_classes)
      .def_readwrite("action_classes", &SyntheticConfig::action_classes)
      .def_readwrite("noise_std", &SyntheticConfig::noise_std)
      .def_readwrite("seed", &SyntheticConfig::seed);

  py::class_<BranchSpec>(m, "BranchSpec")
      .def(py::init<>())
      .def_readwrite("point_channels", &BranchSpec::point_channels)
      .def_readwrite("temporal_channels", &BranchSpec::temporal_channels)
      .def_readwrite("temporal_kernel", &BranchSpec::temporal_kernel)
      .def_readwrite("spatial_channels", &BranchSpec::spatial_channels)
      .def_readwrite("deep_channels", &BranchSpec::deep_channels);
  py::class_<FusionSpec>(m, "FusionSpec")
      .def(py::init<>())
      .def_readwrite("hidden", &FusionSpec::hidden)
      .def_readwrite("features", &FusionSpec::features);
  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("actors", &ModelConfig::actors)
      .def_readwrite("frames", &ModelConfig::frames)
      .def_readwrite("joints", &ModelConfig::joints)
      .def_readwrite("branch", &ModelConfig::branch)
      .def_readwrite("fusion", &ModelConfig::fusion)
      .def_readwrite("action_classes", &ModelConfig::action_classes)
      .def_readwrite("group_classes", &ModelConfig::group_classes)
      .def_readwrite("lambda_", &ModelConfig::lambda)
      .def("validate", &ModelConfig::validate)
      .def("for_dataset", [](const ModelConfig& self, const Dataset& ds) { return model_for(ds, self); },
           "Copy with K, T, N, A and G taken from the dataset.");

  py::class_<AdamHyper>(m, "AdamHyper")
      .def(py::init<>())
      .def_readwrite("beta1", &AdamHyper::beta1)
      .def_readwrite("beta2", &AdamHyper::beta2)
      .def_readwrite("epsilon", &AdamHyper::epsilon)
      .def_readwrite("lr0", &AdamHyper::lr0);
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("hyper", &TrainConfig::hyper)
      .def_readwrite("lr_decay_every", &TrainConfig::lr_decay_every)
      .def_readwrite("lambda_", &TrainConfig::lambda)
      .def_readwrite("mode", &TrainConfig::mode)
      .def_readwrite("use_gd", &TrainConfig::use_gd)
      .def_readwrite("augment", &TrainConfig::augment)
      .def_readwrite("label_source", &TrainConfig::label_source)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("threads", &TrainConfig::threads)
      .def("validate", &TrainConfig::validate);
  py::class_<PseudoConfig>(m, "PseudoConfig")
      .def(py::init<>())
      .def_readwrite("pca_dim", &PseudoConfig::pca_dim)
      .def_readwrite("k", &PseudoConfig::k)
      .def_readwrite("max_iters", &PseudoConfig::max_iters)
      .def_readwrite("restarts", &PseudoConfig::restarts)
      .def_readwrite("seed", &PseudoConfig::seed)
      .def("validate", &PseudoConfig::validate);

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", [](const Dataset& ds) { return ds.clips.size(); })
      .def_readonly("group_classes", &Dataset::group_classes)
      .def_readonly("action_classes", &Dataset::action_classes)
      .def_readonly("actors_per_clip", &Dataset::actors_per_clip)
      .def_readonly("frames_per_clip", &Dataset::frames_per_clip)
      .def_readonly("pseudo_labeled", &Dataset::pseudo_labeled)
      .def_property_readonly("joints", &Dataset::joint_count)
      .def_property_readonly("clip_ids",
                             [](const Dataset& ds) {
                               std::vector<std::string> ids;
                               for (const ClipRecord& c : ds.clips) ids.push_back(c.clip_id);
                               return ids;
                             })
      .def_property_readonly("group_labels",
                             [](const Dataset& ds) {
                               std::vector<int> labels;
                               for (const ClipRecord& c : ds.clips) labels.push_back(c.group_label);
                               return py::array_t<int>(static_cast<py::ssize_t>(labels.size()), labels.data());
                             })
      .def("action_labels", [](const Dataset& ds, py::ssize_t i) { return clip_at(ds, i).action_labels; })
      .def("actor_mask", [](const Dataset& ds, py::ssize_t i) { return clip_at(ds, i).actor_mask(); })
      .def("clip_array", &clip_array, py::arg("index"), "Raw joints of one clip as [K, T, N, 3] (x, y, p).")
      .def(py::self == py::self);

  m.def("generate_synthetic", &generate_synthetic, py::arg("config") = SyntheticConfig{});
  m.def(
      "load_dataset", [](const std::filesystem::path& path) { return load_dataset(path); }, py::arg("path"));
  m.def("write_dataset", &write_dataset, py::arg("dataset"), py::arg("directory"));
  m.def("split_dataset", &split_dataset, py::arg("dataset"), py::arg("train_fraction"), py::arg("seed") = 0);
  m.def("subset", &subset, py::arg("dataset"), py::arg("indices"));

  m.def(
      "streams",
      [](const Dataset& ds, py::ssize_t i, bool use_gd) {
        const StreamTensors s = assemble_streams(clip_at(ds, i), ds.layout, {use_gd});
        py::dict d;
        d["gs"] = to_numpy(s.gs);
        d["gm"] = to_numpy(s.gm);
        d["gd"] = to_numpy(s.gd);
        d["pivot"] = s.pivot_index;
        return d;
      },
      py::arg("dataset"), py::arg("index"), py::arg("use_gd") = true,
      "The three [K, T, N, 3] input streams of one clip and the pivot actor index.");

  py::class_<ModelParams>(m, "ModelParams")
      .def_property_readonly("layer_names",
                             [](const ModelParams& p) {
                               std::vector<std::string> names;
                               for (const NamedLayer& l : p.layers) names.push_back(l.name);
                               return names;
                             })
      .def("parameter_count", &ModelParams::parameter_count)
      .def(
          "weight", [](const ModelParams& p, const std::string& name) { return to_numpy(p.at(name).weight); },
          py::arg("layer"))
      .def(
          "bias", [](const ModelParams& p, const std::string& name) { return to_numpy(p.at(name).bias); },
          py::arg("layer"))
      .def(
          "set_weight",
          [](ModelParams& p, const std::string& name, const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
            Tensor t = from_numpy(a);
            if (t.shape() != p.at(name).weight.shape()) throw ConfigError("set_weight: shape mismatch for " + name);
            p.at(name).weight = std::move(t);
          },
          py::arg("layer"), py::arg("values"))
      .def("flatten",
           [](const ModelParams& p) {
             const std::vector<double> v = p.flatten();
             return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
           })
      .def("save", [](const ModelParams& p, const std::filesystem::path& path) { write_checkpoint(p, path); })
      .def(py::self == py::self);
  m.def("load_checkpoint", &read_checkpoint, py::arg("path"));
  m.def(
      "init_params", [](const ModelConfig& cfg, std::uint64_t seed) { return GroupModel(cfg).init_params(seed); },
      py::arg("model_config"), py::arg("seed") = 0);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("params", &TrainResult::params)
      .def_readonly("best_params", &TrainResult::best_params)
      .def_readonly("best_epoch", &TrainResult::best_epoch)
      .def_property_readonly("history",
                             [](const TrainResult& r) {
                               py::list out;
                               for (const EpochRecord& e : r.history) out.append(epoch_dict(e));
                               return out;
                             })
      .def_property_readonly("history_csv", [](const TrainResult& r) { return history_csv(r.history); });

  m.def(
      "train",
      [](const Dataset& train_ds, const std::optional<Dataset>& val_ds, const ModelConfig& model_cfg,
         const TrainConfig& train_cfg) {
        py::gil_scoped_release release;
        return train(train_ds, val_ds ? *val_ds : Dataset{}, model_cfg, train_cfg);
      },
      py::arg("train_set"), py::arg("val_set") = py::none(), py::arg("model_config"), py::arg("train_config"));

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("group_accuracy", &EvalReport::group_accuracy)
      .def_readonly("individual_accuracy", &EvalReport::individual_accuracy)
      .def_readonly("per_class_recall", &EvalReport::per_class_recall)
      .def_readonly("class_names", &EvalReport::class_names)
      .def_readonly("clips", &EvalReport::clips)
      .def_property_readonly("confusion",
                             [](const EvalReport& r) {
                               const auto n = static_cast<py::ssize_t>(r.confusion.size());
                               py::array_t<std::int64_t> out({n, n});
                               auto v = out.mutable_unchecked<2>();
                               for (py::ssize_t i = 0; i < n; ++i) {
                                 for (py::ssize_t j = 0; j < n; ++j) {
                                   v(i, j) = static_cast<std::int64_t>(r.confusion[i][j]);
                                 }
                               }
                               return out;
                             })
      .def_property_readonly("confusion_csv", [](const EvalReport& r) { return confusion_csv(r); });

  m.def(
      "evaluate",
      [](const ModelParams& params, const Dataset& ds, const ModelConfig& cfg, bool use_gd, std::size_t threads) {
        py::gil_scoped_release release;
        return evaluate(params, ds, cfg, use_gd, threads);
      },
      py::arg("params"), py::arg("dataset"), py::arg("model_config"), py::arg("use_gd") = true,
      py::arg("threads") = 1);
  m.def(
      "predict_group_logits",
      [](const ModelParams& params, const Dataset& ds, const ModelConfig& cfg, bool use_gd) {
        Predictions p;
        {
          py::gil_scoped_release release;
          p = predict(ds, cfg, params, use_gd, 1);
        }
        const auto G = static_cast<py::ssize_t>(cfg.group_classes);
        const auto n = static_cast<py::ssize_t>(p.group_logits.size());
        py::array_t<double> out({n, G});
        auto v = out.mutable_unchecked<2>();
        for (py::ssize_t i = 0; i < n; ++i) {
          for (py::ssize_t g = 0; g < G; ++g) v(i, g) = p.group_logits[i][g];
        }
        return out;
      },
      py::arg("params"), py::arg("dataset"), py::arg("model_config"), py::arg("use_gd") = true);

  m.def(
      "stand_in_features",
      [](const Dataset& ds) {
        const FeatureMatrix f = stand_in_features(ds);
        std::vector<std::pair<std::string, std::size_t>> ids;
        for (const FeatureId& id : f.ids) ids.emplace_back(id.clip_id, id.actor);
        return py::make_tuple(f.values, ids);
      },
      py::arg("dataset"), "Per-actor descriptors as (matrix, [(clip_id, actor), ...]).");
  m.def(
      "pseudo_labels",
      [](const Eigen::MatrixXd& values, const PseudoConfig& cfg,
         const std::vector<std::pair<std::string, std::size_t>>& ids) {
        const FeatureMatrix f = features_from(values, ids);
        PseudoResult r;
        {
          py::gil_scoped_release release;
          r = run_pseudo_pipeline(f, cfg);
        }
        std::vector<int> clusters;
        for (const Assignment& a : r.assignments) clusters.push_back(a.cluster);
        py::dict d;
        d["clusters"] = py::array_t<int>(static_cast<py::ssize_t>(clusters.size()), clusters.data());
        d["used_pca_dim"] = r.used_pca_dim;
        d["inertia"] = r.clustering.inertia;
        d["warnings"] = r.warnings;
        return d;
      },
      py::arg("features"), py::arg("config"), py::arg("ids") = std::vector<std::pair<std::string, std::size_t>>{},
      "Whitening, L2 normalization and k-means over the feature rows.");
  m.def(
      "kmeans",
      [](const Eigen::MatrixXd& points, std::size_t k, std::size_t max_iters, std::size_t restarts,
         std::uint64_t seed) {
        const KMeansResult r = kmeans(points, k, max_iters, restarts, seed);
        py::dict d;
        d["assignments"] = r.assignments;
        d["centroids"] = r.centroids;
        d["inertia"] = r.inertia;
        d["traces"] = r.traces;
        return d;
      },
      py::arg("points"), py::arg("k"), py::arg("max_iters") = 100, py::arg("restarts") = 5, py::arg("seed") = 0);
  m.def("adjusted_rand_index", &adjusted_rand_index, py::arg("a"), py::arg("b"));

  m.def(
      "train_and_evaluate",
      [](const Dataset& train_ds, const Dataset& val_ds, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
         const PseudoConfig& pseudo_cfg) {
        RunOutcome r;
        {
          py::gil_scoped_release release;
          r = train_and_evaluate(train_ds, val_ds, model_cfg, train_cfg, pseudo_cfg);
        }
        py::dict d;
        d["val_accuracy"] = r.val_accuracy;
        d["report"] = r.report;
        d["training"] = r.training;
        d["cluster_ari"] = r.cluster_ari;
        return d;
      },
      py::arg("train_set"), py::arg("val_set"), py::arg("model_config"), py::arg("train_config"),
      py::arg("pseudo_config") = PseudoConfig{});

  m.def(
      "gradcheck",
      [](std::uint64_t seed, double step, double tolerance) {
        GradCheckSuiteOptions opt;
        opt.seed = seed;
        opt.step = step;
        opt.tolerance = tolerance;
        py::list out;
        for (const GradCheckLine& l : run_gradcheck_suite(opt)) {
          py::dict d;
          d["name"] = l.name;
          d["max_relative_error"] = l.max_relative_error;
          d["checked"] = l.checked;
          d["skipped_kinks"] = l.skipped_kinks;
          d["passed"] = l.passed;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 7, py::arg("step") = 1e-4, py::arg("tolerance") = 1e-4);

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out;
        std::ostringstream err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one command-line subcommand; returns (exit_code, stdout, stderr).");
}
