#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <random>

#include "skelgroup/error.hpp"
#include "skelgroup/eval.hpp"
#include "skelgroup/features.hpp"
#include "skelgroup/pseudo_label.hpp"
#include "skelgroup/report.hpp"
#include "skelgroup/synthetic.hpp"
#include "helpers.hpp"

using namespace skelgroup;

namespace {

FeatureMatrix matrix_with_ids(Eigen::MatrixXd values) {
  FeatureMatrix f;
  f.values = std::move(values);
  for (Eigen::Index i = 0; i < f.values.rows(); ++i) f.ids.push_back({"c" + std::to_string(i), 0});
  return f;
}

Eigen::MatrixXd gaussian_blobs(std::mt19937_64& rng, const std::vector<Eigen::VectorXd>& centres, std::size_t per,
                               double sd, std::vector<int>& truth) {
  std::normal_distribution<double> g(0.0, sd);
  const auto dim = centres.front().size();
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(centres.size() * per), dim);
  truth.clear();
  for (std::size_t c = 0; c < centres.size(); ++c)
    for (std::size_t i = 0; i < per; ++i) {
      const auto row = static_cast<Eigen::Index>(c * per + i);
      for (Eigen::Index d = 0; d < dim; ++d) pts(row, d) = centres[c](d) + g(rng);
      truth.push_back(static_cast<int>(c));
    }
  return pts;
}

long long choose2(long long n) { return n * (n - 1) / 2; }

// Pair-enumeration version: count agreeing pairs directly, derive the
// marginal pair counts the same way, then correct for chance.
double ari_by_pairs(const std::vector<int>& a, const std::vector<int>& b) {
  long long both = 0, in_a = 0, in_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      in_a += sa;
      in_b += sb;
    }
  const double total = static_cast<double>(choose2(static_cast<long long>(a.size())));
  const double expected = static_cast<double>(in_a) * static_cast<double>(in_b) / total;
  const double max_index = 0.5 * static_cast<double>(in_a + in_b);
  if (max_index == expected) return 1.0;
  return (static_cast<double>(both) - expected) / (max_index - expected);
}

}  // namespace

TEST_SUITE("pseudo") {

TEST_CASE("whitened training features have identity covariance") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    // Correlated data with very different scales per direction.
    Eigen::MatrixXd mix(12, 12);
    for (Eigen::Index i = 0; i < mix.size(); ++i) mix.data()[i] = g(rng);
    Eigen::MatrixXd raw(300, 12);
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = g(rng);
    raw = raw * mix;
    raw.col(3) *= 1e3;
    const Whitening w = pca_whiten(matrix_with_ids(raw), 6);
    const Eigen::MatrixXd& z = w.features.values;
    REQUIRE(z.cols() == 6);
    const Eigen::MatrixXd centred = z.rowwise() - z.colwise().mean();
    const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(z.rows() - 1);
    CHECK((cov - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(z.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
    for (std::size_t i = 1; i < w.variances.size(); ++i) CHECK(w.variances[i] <= w.variances[i - 1]);
    CHECK(w.features.ids.size() == 300);
  }
}

TEST_CASE("whitening preconditions and rank deficiency") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g;
  Eigen::MatrixXd raw(20, 5);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = g(rng);
  CHECK_THROWS_AS(pca_whiten(matrix_with_ids(raw), 6), ConfigError);
  CHECK_THROWS_AS(pca_whiten(matrix_with_ids(raw.topRows(4)), 4), ConfigError);
  raw.col(4) = raw.col(0) * 2.0;  // rank 4
  const Whitening w = pca_whiten(matrix_with_ids(raw), 5);
  CHECK(w.dropped == 1);
  CHECK(w.features.values.cols() == 4);
  CHECK_FALSE(w.warnings.empty());
  CHECK(w.features.values.allFinite());
}

TEST_CASE("l2 normalization gives unit rows and flags zero rows") {
  Eigen::MatrixXd v(3, 2);
  v << 3, 4, 0, 0, -1e-3, 0;
  const Normalized n = l2_normalize(matrix_with_ids(v));
  CHECK(n.features.values.row(0).norm() == doctest::Approx(1.0));
  CHECK(n.features.values(0, 0) == doctest::Approx(0.6));
  CHECK(n.features.values.row(1).norm() == 0.0);
  CHECK(n.features.values(2, 0) == doctest::Approx(-1.0));
  CHECK(n.zero_rows == std::vector<std::size_t>{1});
}

TEST_CASE("k-means inertia never increases and three Gaussians are recovered") {
  std::mt19937_64 rng(43);
  std::vector<int> truth;
  Eigen::VectorXd c0(2), c1(2), c2(2);
  c0 << 0, 0;
  c1 << 6, 0;
  c2 << 0, 6;
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd pts = gaussian_blobs(rng, {c0, c1, c2}, 100, 0.5, truth);
    const KMeansResult r = kmeans(pts, 3, 100, 5, static_cast<std::uint64_t>(trial));
    for (const auto& trace : r.traces)
      for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] * (1 + 1e-12));
    CHECK(adjusted_rand_index(r.assignments, truth) > 0.99);
    CHECK(r.traces.size() == 5);
    CHECK(r.inertia == doctest::Approx(*std::min_element(r.traces[r.best_restart].begin(), r.traces[r.best_restart].end())));
    for (const auto& t : r.traces) CHECK(r.inertia <= t.back() + 1e-9);
    // same seed, same answer
    CHECK(kmeans(pts, 3, 100, 5, static_cast<std::uint64_t>(trial)).assignments == r.assignments);
  }
}

TEST_CASE("k-means on random high-dimensional data keeps monotone traces") {
  std::mt19937_64 rng(44);
  std::normal_distribution<double> g;
  Eigen::MatrixXd pts(200, 10);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = g(rng);
  const KMeansResult r = kmeans(pts, 8, 100, 3, 1);
  for (const auto& trace : r.traces)
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] * (1 + 1e-12));
  std::vector<int> sizes(8, 0);
  for (int a : r.assignments) ++sizes[static_cast<std::size_t>(a)];
  for (int s : sizes) CHECK(s > 0);
}

TEST_CASE("k-means edge cases") {
  Eigen::MatrixXd pts(3, 2);
  pts << 0, 0, 1, 1, 2, 2;
  CHECK_THROWS_AS(kmeans(pts, 4, 10, 1, 0), ConfigError);
  const KMeansResult same = kmeans(pts, 3, 10, 1, 0);
  CHECK(same.inertia == doctest::Approx(0.0));
  Eigen::MatrixXd dup = Eigen::MatrixXd::Ones(5, 2);
  const KMeansResult d = kmeans(dup, 2, 10, 2, 0);
  CHECK(d.inertia == 0.0);
  pts(1, 1) = std::nan("");
  CHECK_THROWS_AS(kmeans(pts, 2, 10, 1, 0), NumericError);
}

TEST_CASE("adjusted Rand index") {
  CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 0, 1, 2}) == doctest::Approx(4.0 / 7.0));
  CHECK(adjusted_rand_index({0, 0, 1, 1, 2}, {5, 5, 3, 3, 9}) == 1.0);
  CHECK(adjusted_rand_index({0, 0, 0}, {1, 1, 1}) == 1.0);
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> a(30), b(30);
    for (std::size_t i = 0; i < 30; ++i) {
      a[i] = static_cast<int>(rng() % 4);
      b[i] = trial % 2 ? static_cast<int>(rng() % 5) : (a[i] + static_cast<int>(rng() % 2)) % 4;
    }
    CHECK(adjusted_rand_index(a, b) == doctest::Approx(ari_by_pairs(a, b)).epsilon(1e-12));
  }
  CHECK_THROWS(adjusted_rand_index({0, 1}, {0}));
}

TEST_CASE("pseudo pipeline on stand-in features follows the true actions") {
  SyntheticConfig cfg;
  cfg.n_clips = 120;
  cfg.actors = 4;
  const Dataset ds = generate_synthetic(cfg);
  const FeatureMatrix feats = stand_in_features(ds);
  CHECK(feats.dim() == 9 * ds.joint_count());
  CHECK(feats.rows() == 480);
  PseudoConfig pc;
  pc.pca_dim = 16;
  pc.k = 4;
  const PseudoResult r = run_pseudo_pipeline(feats, pc);
  CHECK(r.used_pca_dim == 16);
  const Dataset labeled = assign_pseudolabels(ds, r.assignments, 4);
  CHECK(labeled.pseudo_labeled);
  CHECK(labeled.action_classes == std::vector<std::string>{"cluster0", "cluster1", "cluster2", "cluster3"});
  std::vector<int> truth, clusters;
  for (const auto& c : labeled.clips) {
    truth.insert(truth.end(), c.reference_action_labels.begin(), c.reference_action_labels.end());
    clusters.insert(clusters.end(), c.action_labels.begin(), c.action_labels.end());
  }
  const double ari = adjusted_rand_index(clusters, truth);
  INFO("ARI " << ari);
  CHECK(ari > 0.5);

  PseudoConfig big = pc;
  big.pca_dim = 1000;
  const PseudoResult clamped = run_pseudo_pipeline(feats, big);
  // Clamped to the feature dimension, then constant columns drop out.
  CHECK(clamped.used_pca_dim <= feats.dim());
  CHECK_FALSE(clamped.warnings.empty());
}

TEST_CASE("assign_pseudolabels rejects gaps, duplicates and out-of-range clusters") {
  SyntheticConfig cfg;
  cfg.n_clips = 2;
  cfg.actors = 2;
  const Dataset ds = generate_synthetic(cfg);
  std::vector<Assignment> as;
  for (const FeatureId& id : canonical_ids(ds)) as.push_back({id.clip_id, id.actor, 1});
  as.push_back({"unknown", 0, 0});
  CHECK_NOTHROW(assign_pseudolabels(ds, as, 2));
  auto gap = as;
  gap.erase(gap.begin() + 1);
  try {
    assign_pseudolabels(ds, gap, 2);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(as[1].clip_id) != std::string::npos);
  }
  auto dup = as;
  dup.push_back(as[0]);
  CHECK_THROWS_AS(assign_pseudolabels(ds, dup, 2), ConfigError);
  auto range = as;
  range[0].cluster = 2;
  CHECK_THROWS_AS(assign_pseudolabels(ds, range, 2), ConfigError);
}

TEST_CASE("feature and assignment files round-trip") {
  SyntheticConfig cfg;
  cfg.n_clips = 3;
  cfg.actors = 2;
  cfg.joints = 9;
  const Dataset ds = generate_synthetic(cfg);
  const FeatureMatrix f = stand_in_features(ds);
  testutil::TempDir dir("feat");
  write_features_text(f, dir / "f.txt");
  const FeatureMatrix t = read_features(dir / "f.txt", ds);
  CHECK(t.values == f.values);
  CHECK(t.ids == f.ids);
  write_features_binary(f, dir / "f.bin");
  const FeatureMatrix b = read_features(dir / "f.bin", ds);
  CHECK(b.ids == f.ids);
  CHECK((b.values - f.values).cwiseAbs().maxCoeff() < 1e-5 * (1 + f.values.cwiseAbs().maxCoeff()));
  CHECK_THROWS_AS(read_features(dir / "nope.txt", ds), IoError);
  std::ofstream(dir / "bad.txt") << "2 3\nsyn000000 0 1 2\n";
  CHECK_THROWS_AS(read_features(dir / "bad.txt", ds), ConfigError);

  const std::vector<Assignment> as = {{"a", 0, 3}, {"b", 2, 0}};
  write_assignments(as, dir / "a.txt");
  CHECK(read_assignments(dir / "a.txt") == as);
  std::ofstream(dir / "bad_a.txt") << "a zero 1\n";
  CHECK_THROWS_AS(read_assignments(dir / "bad_a.txt"), ConfigError);

  FeatureMatrix dupe = f;
  dupe.ids[1] = dupe.ids[0];
  CHECK_THROWS_AS(dupe.validate(), ConfigError);
}

}  // TEST_SUITE

TEST_SUITE("eval") {

TEST_CASE("hand-built fixture: accuracy and confusion by tally") {
  Dataset ds;
  ds.group_classes = {"a", "b", "c"};
  ds.action_classes = {"x", "y"};
  for (int g : {0, 1, 2}) {
    ClipRecord c;
    c.clip_id = "c" + std::to_string(g);
    c.group_label = g;
    c.actors.resize(2);
    c.action_labels = {0, 1};
    ds.clips.push_back(c);
  }
  Predictions pred;
  pred.group_logits = {{2.0, 1.0, 0.0}, {0.0, 0.0, 5.0}, {0.3, 0.1, 0.3}};
  pred.individual_logits = {{1, 0, 0, 1}, {0, 1, 0, 1}, {1, 0, 1, 0}};
  const EvalReport r = report_from_predictions(ds, pred);
  // clip 0 -> a (right), clip 1 -> c (wrong), clip 2 -> tie between a and c, lowest wins -> a (wrong)
  CHECK(r.group_accuracy == doctest::Approx(1.0 / 3.0));
  CHECK(r.confusion == std::vector<std::vector<std::size_t>>{{1, 0, 0}, {0, 0, 1}, {1, 0, 0}});
  CHECK(r.per_class_recall == std::vector<double>{1.0, 0.0, 0.0});
  REQUIRE(r.individual_accuracy.has_value());
  CHECK(*r.individual_accuracy == doctest::Approx(4.0 / 6.0));
  CHECK(confusion_csv(r) == "true\\predicted,a,b,c\na,1,0,0\nb,0,0,1\nc,1,0,0\n");

  ds.pseudo_labeled = true;
  CHECK_FALSE(report_from_predictions(ds, pred).individual_accuracy.has_value());
}

TEST_CASE("constant predictor on a balanced set scores chance") {
  Dataset ds;
  ds.group_classes = {"a", "b", "c", "d"};
  Predictions pred;
  for (int i = 0; i < 40; ++i) {
    ClipRecord c;
    c.clip_id = std::to_string(i);
    c.group_label = i % 4;
    c.actors.resize(1);
    ds.clips.push_back(c);
    pred.group_logits.push_back({0.0, 1.0, 0.0, 0.0});
    pred.individual_logits.push_back({});
  }
  const EvalReport r = report_from_predictions(ds, pred);
  CHECK(r.group_accuracy == 0.25);
  std::size_t total = 0;
  for (const auto& row : r.confusion)
    for (std::size_t v : row) total += v;
  CHECK(total == 40);
  CHECK_FALSE(r.individual_accuracy.has_value());
}

TEST_CASE("evaluate rejects an empty dataset") {
  ModelConfig mc;
  CHECK_THROWS_AS(evaluate(ModelParams{}, Dataset{}, mc), ConfigError);
}

}  // TEST_SUITE

TEST_SUITE("report") {

TEST_CASE("summaries, CSV, table and plot") {
  const Summary s = summarize({0.5, 0.7, 0.9});
  CHECK(s.mean == doctest::Approx(0.7));
  CHECK(s.std == doctest::Approx(std::sqrt(0.08 / 3.0)));
  CHECK(s.count == 3);
  CHECK(summarize({}).count == 0);

  const std::vector<SweepPoint> pts = {{4, 0, 0.5}, {8, 0, 0.75}, {4, 1, 0.7}, {8, 1, 0.25}};
  const auto sw = summarize_sweep(pts);
  REQUIRE(sw.size() == 2);
  CHECK(sw[0].first == 4);
  CHECK(sw[0].second.mean == doctest::Approx(0.6));
  CHECK(sweep_csv(pts) == "k,seed,val_acc\n4,0,0.5\n8,0,0.75\n4,1,0.7\n8,1,0.25\n");
  const std::string svg = sweep_svg(pts);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);

  const std::vector<AblationResult> ab = {{"supervised", 0, 1.0}, {"group_only", 0, 0.5}, {"supervised", 1, 0.9}};
  CHECK(ablation_csv(ab) == "name,seed,val_acc\nsupervised,0,1\ngroup_only,0,0.5\nsupervised,1,0.9\n");
  const std::string table = ablation_table(ab);
  CHECK(table.find("Method") != std::string::npos);
  CHECK(table.find("95.00") != std::string::npos);
  CHECK(table.find("50.00") != std::string::npos);
  CHECK(table.find("supervised") < table.find("group_only"));
  CHECK(ablation_table({}).find("Method") != std::string::npos);
}

TEST_CASE("sweep and ablation contracts on a tiny dataset") {
  SyntheticConfig sc;
  sc.n_clips = 16;
  sc.actors = 3;
  sc.frames = 6;
  sc.joints = 9;
  const Dataset ds = generate_synthetic(sc);
  const auto [tr, va] = split_dataset(ds, 0.75, 0);
  ModelConfig mc;
  mc.actors = 3;
  mc.frames = 6;
  mc.joints = 9;
  mc.branch = {4, 4, 3, 4, 4};
  mc.fusion = {8, 8};
  mc.group_classes = 4;
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.augment = false;
  PseudoConfig pc;
  pc.pca_dim = 8;
  const auto pts = sweep_k(tr, va, {4, 8, 4}, mc, tc, pc, {0});
  REQUIRE(pts.size() == 3);
  for (const auto& p : pts) CHECK((p.val_accuracy >= 0.0 && p.val_accuracy <= 1.0));
  CHECK(pts[0].val_accuracy == pts[2].val_accuracy);
  CHECK_THROWS_AS(sweep_k(tr, va, {}, mc, tc, pc, {0}), ConfigError);
  CHECK_THROWS_AS(sweep_k(tr, va, {0}, mc, tc, pc, {0}), ConfigError);

  CHECK(run_ablation_suite(tr, va, mc, {}, {0, 1}).empty());
  TrainConfig go = tc;
  go.mode = TrainingMode::group_only;
  const auto res = run_ablation_suite(tr, va, mc, {{"sup", tc, pc}, {"go", go, pc}}, {0, 1});
  CHECK(res.size() == 4);
  CHECK(res == run_ablation_suite(tr, va, mc, {{"sup", tc, pc}, {"go", go, pc}}, {0, 1}));

  TrainConfig pseudo = tc;
  pseudo.label_source = LabelSource::pseudo;
  pc.k = 6;
  const RunOutcome out = train_and_evaluate(tr, va, mc, pseudo, pc);
  REQUIRE(out.cluster_ari.has_value());
  CHECK(out.training.params.at("individual_head").weight.dim(0) == 6);
}

}  // TEST_SUITE
