#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "skelgroup/error.hpp"
#include "skelgroup/model.hpp"
#include "skelgroup/optim.hpp"
#include "skelgroup/streams.hpp"
#include "skelgroup/synthetic.hpp"
#include "skelgroup/train.hpp"
#include "helpers.hpp"

using namespace skelgroup;

namespace {

ModelConfig small_model(std::size_t K, std::size_t T, std::size_t N, std::size_t A, std::size_t G) {
  ModelConfig c;
  c.actors = K;
  c.frames = T;
  c.joints = N;
  c.branch = {6, 6, 3, 8, 8};
  c.fusion = {16, 12};
  c.action_classes = A;
  c.group_classes = G;
  return c;
}

Dataset small_synthetic(std::size_t clips, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.n_clips = clips;
  cfg.actors = 3;
  cfg.frames = 6;
  cfg.joints = 9;
  cfg.seed = seed;
  return generate_synthetic(cfg);
}

ModelConfig model_for(const Dataset& ds) {
  return small_model(ds.actors_per_clip, ds.frames_per_clip, ds.joint_count(), ds.action_class_count(),
                     ds.group_class_count());
}

TrainConfig quick_train(std::size_t epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 8;
  t.augment = false;
  return t;
}

double max_logit_gap(const Tensor& a, const Tensor& b) { return max_abs_difference(a, b); }

}  // namespace

TEST_SUITE("model") {

TEST_CASE("group logits are invariant and individual logits equivariant under actor permutation") {
  std::mt19937_64 rng(31);
  const SkeletonLayout layout = SkeletonLayout::body25_prefix(9);
  const ModelConfig cfg = small_model(5, 4, 9, 3, 4);
  GroupModel model(cfg);
  for (int trial = 0; trial < 60; ++trial) {
    const ModelParams params = model.init_params(static_cast<std::uint64_t>(trial));
    const ClipRecord clip = testutil::random_clip(rng, 5, 4, 9, trial % 3);
    std::vector<std::size_t> perm(5);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    ClipRecord shuffled = clip;
    for (std::size_t k = 0; k < 5; ++k) shuffled.actors[k] = clip.actors[perm[k]];

    const auto mask_a = clip.actor_mask();
    const auto mask_b = shuffled.actor_mask();
    const ModelOutputs a = model.forward(assemble_streams(clip, layout), mask_a, params);
    const ModelOutputs b = model.forward(assemble_streams(shuffled, layout), mask_b, params);
    CHECK(max_logit_gap(a.group_logits, b.group_logits) < 1e-9);
    for (std::size_t k = 0; k < 5; ++k) {
      if (!mask_b[k]) continue;
      for (std::size_t c = 0; c < 3; ++c)
        CHECK(std::abs(b.individual_logits(0, k, c) - a.individual_logits(0, perm[k], c)) < 1e-9);
    }
  }
}

TEST_CASE("masked-out actors cannot influence the group logits") {
  std::mt19937_64 rng(32);
  const ModelConfig cfg = small_model(4, 4, 9, 2, 3);
  GroupModel model(cfg);
  const ModelParams params = model.init_params(3);
  StreamTensors st;
  for (Tensor* t : {&st.gs, &st.gm, &st.gd}) {
    *t = Tensor({4, 4, 9, 3});
    std::normal_distribution<double> g;
    for (double& v : t->values()) v = g(rng);
  }
  const std::vector<std::uint8_t> mask = {1, 1, 0, 1};
  const ModelOutputs a = model.forward(st, mask, params);
  for (Tensor* t : {&st.gs, &st.gm, &st.gd})
    for (std::size_t i = 0; i < 4 * 9 * 3; ++i) (*t)[2 * 4 * 9 * 3 + i] = 100.0;
  const ModelOutputs b = model.forward(st, mask, params);
  CHECK(a.group_logits == b.group_logits);
}

TEST_CASE("total loss decomposes as group term plus lambda times the individual term") {
  std::mt19937_64 rng(33);
  const ModelConfig cfg = small_model(4, 4, 9, 3, 4);
  GroupModel model(cfg);
  const ModelParams params = model.init_params(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<StreamTensors> clips(3);
    std::vector<std::vector<std::uint8_t>> masks(3, std::vector<std::uint8_t>(4, 1));
    masks[trial % 3][3] = 0;
    std::normal_distribution<double> g;
    for (auto& c : clips)
      for (Tensor* t : {&c.gs, &c.gm, &c.gd}) {
        *t = Tensor({4, 4, 9, 3});
        for (double& v : t->values()) v = g(rng);
      }
    std::vector<const StreamTensors*> ptrs = {&clips[0], &clips[1], &clips[2]};
    const ModelOutputs out = model.forward(make_input(ptrs, masks), params);
    std::vector<int> groups = {0, 3, 1};
    std::vector<int> actions(12);
    for (std::size_t i = 0; i < 12; ++i) actions[i] = masks[i / 4][i % 4] ? static_cast<int>(rng() % 3) : kNoLabel;
    const LossResult base = total_loss(out, groups, actions, 0.0);
    for (double lambda : {0.0, 0.35, 0.7}) {
      const LossResult r = total_loss(out, groups, actions, lambda);
      for (std::size_t b = 0; b < 3; ++b) {
        CHECK(std::abs((r.per_clip[b].total - base.per_clip[b].total) - lambda * r.per_clip[b].individual) < 1e-12);
        CHECK(r.per_clip[b].group == base.per_clip[b].group);
        CHECK(r.per_clip[b].labeled_actors == (b == static_cast<std::size_t>(trial % 3) ? 3u : 4u));
      }
    }
    const LossResult none = total_loss(out, groups, {}, 0.7);
    for (const auto& t : none.per_clip) CHECK(t.total == t.group);
  }
}

TEST_CASE("uniform logits give ln G") {
  ModelOutputs out;
  out.group_logits = Tensor({2, 5}, 0.25);
  out.individual_logits = Tensor({2, 1, 2});
  out.mask = {1, 1};
  const std::vector<int> groups = {1, 4};
  const LossResult r = total_loss(out, groups, {}, 0.7);
  for (const auto& t : r.per_clip) CHECK(t.group == doctest::Approx(std::log(5.0)).epsilon(1e-14));
}

TEST_CASE("init is seeded and layer names are stable") {
  const ModelConfig cfg = small_model(3, 4, 9, 2, 2);
  GroupModel model(cfg);
  CHECK(model.init_params(1) == model.init_params(1));
  CHECK_FALSE(model.init_params(1) == model.init_params(2));
  const ModelParams p = model.init_params(0);
  REQUIRE(p.layers.size() == 16);
  CHECK(p.layers[0].name == "gs.conv1");
  CHECK(p.layers[11].name == "gd.conv4");
  CHECK(p.layers[12].name == "fusion1");
  CHECK(p.layers[15].name == "group_head");
  CHECK(p.same_layout(model.zero_params()));

  ModelConfig bad = cfg;
  bad.branch.temporal_kernel = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

}  // TEST_SUITE

TEST_SUITE("optim") {

TEST_CASE("one Adam step on a scalar matches the closed form") {
  // After one step the bias-corrected moments are g and g^2, so the update
  // is lr * g / (|g| + eps).
  for (double g : {0.5, -3.0, 1e-3}) {
    ParamStore p;
    p.layers.push_back({"w", {Tensor({1}, 1.0), Tensor({1}, 0.0)}});
    ParamStore grad = p.zeros_like();
    grad.layers[0].params.weight[0] = g;
    AdamState state = AdamState::for_params(p);
    AdamHyper h;
    adam_step(p, grad, state, h, 0.01);
    const double expect = 1.0 - 0.01 * g / (std::abs(g) + 1e-8);
    CHECK(std::abs(p.layers[0].params.weight[0] - expect) < 1e-8);
    CHECK(p.layers[0].params.bias[0] == 0.0);
    CHECK(state.step == 1);
  }
}

TEST_CASE("two Adam steps follow the recurrence") {
  ParamStore p;
  p.layers.push_back({"w", {Tensor({1}, 2.0), Tensor({1}, 0.0)}});
  AdamState state = AdamState::for_params(p);
  AdamHyper h{0.9, 0.999, 1e-8, 0.1};
  double m = 0.0, v = 0.0, theta = 2.0;
  for (int t = 1; t <= 2; ++t) {
    const double g = 2.0 * theta;  // gradient of theta^2
    ParamStore grad = p.zeros_like();
    grad.layers[0].params.weight[0] = g;
    adam_step(p, grad, state, h, 0.1);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.999, t));
    theta -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(std::abs(p.layers[0].params.weight[0] - theta) < 1e-12);
  }
}

TEST_CASE("learning-rate schedule") {
  CHECK(lr_schedule(0, 0.001) == 0.001);
  CHECK(lr_schedule(29, 0.001) == 0.001);
  CHECK(lr_schedule(30, 0.001) == 0.0001);
  CHECK(lr_schedule(65, 0.001) == 1e-5);
  CHECK(lr_schedule(10, 0.5, 5) == 0.005);
}

TEST_CASE("frozen layers and bad gradients") {
  ParamStore p;
  p.layers.push_back({"a", {Tensor({2}, 1.0), Tensor({1}, 0.0)}});
  p.layers.push_back({"b", {Tensor({2}, 1.0), Tensor({1}, 0.0)}});
  ParamStore grad = p.zeros_like();
  for (auto& l : grad.layers) l.params.weight.fill(1.0);
  AdamState state = AdamState::for_params(p);
  const std::vector<std::uint8_t> only_b = {0, 1};
  adam_step(p, grad, state, {}, 0.01, only_b);
  CHECK(p.layers[0].params.weight == Tensor({2}, 1.0));
  CHECK(state.first_moment.layers[0].params.weight == Tensor({2}, 0.0));
  CHECK(p.layers[1].params.weight[0] < 1.0);

  const ParamStore before = p;
  const AdamState state_before = state;
  grad.layers[1].params.bias[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(p, grad, state, {}, 0.01);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("b.bias") != std::string::npos);
  }
  CHECK(p == before);
  CHECK(state.step == state_before.step);

  AdamHyper bad;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

}  // TEST_SUITE

TEST_SUITE("train") {

TEST_CASE("training is deterministic and independent of the thread count") {
  const Dataset ds = small_synthetic(24, 1);
  const auto [tr, va] = split_dataset(ds, 0.75, 0);
  TrainConfig cfg = quick_train(3);
  cfg.augment = true;
  const TrainResult a = train(tr, va, model_for(ds), cfg);
  const TrainResult b = train(tr, va, model_for(ds), cfg);
  cfg.threads = 3;
  const TrainResult c = train(tr, va, model_for(ds), cfg);
  CHECK(a.params == b.params);
  CHECK(a.params == c.params);
  CHECK(history_csv(a.history) == history_csv(c.history));
  REQUIRE(a.history.size() == 3);
  CHECK(a.history[0].val_group_accuracy.has_value());
  CHECK(a.best_epoch.has_value());

  cfg.seed = 9;
  CHECK_FALSE(train(tr, va, model_for(ds), cfg).params == a.params);
}

TEST_CASE("initial group loss is close to ln G") {
  // Averaged over the training set before any update.
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Dataset ds = small_synthetic(40, seed);
    const ModelConfig cfg = model_for(ds);
    const ModelParams params = GroupModel(cfg).init_params(seed);
    const Predictions pred = predict(ds, cfg, params, true);
    double loss = 0.0;
    for (std::size_t i = 0; i < ds.clips.size(); ++i) {
      loss += softmax_cross_entropy(pred.group_logits[i], static_cast<std::size_t>(ds.clips[i].group_label)).loss;
    }
    loss /= static_cast<double>(ds.clips.size());
    const double lnG = std::log(static_cast<double>(cfg.group_classes));
    INFO("seed " << seed << " initial loss " << loss);
    CHECK(loss >= 0.9 * lnG);
    CHECK(loss <= 1.1 * lnG);
  }
}

TEST_CASE("full-batch loss decreases over the first epochs") {
  // One batch per epoch, so each epoch's loss is measured at the parameters
  // the previous update produced.
  int monotone = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticConfig sc;
    sc.n_clips = 32;
    sc.actors = 3;
    sc.frames = 6;
    sc.joints = 9;
    sc.noise_std = 0.0;
    sc.seed = seed;
    const Dataset ds = generate_synthetic(sc);
    TrainConfig cfg = quick_train(10);
    cfg.batch_size = 32;
    cfg.seed = seed;
    const TrainResult r = train(ds, Dataset{}, model_for(ds), cfg);
    bool ok = true;
    for (std::size_t e = 1; e < r.history.size(); ++e) {
      const double prev = r.history[e - 1].group_loss + 0.7 * *r.history[e - 1].individual_loss;
      const double now = r.history[e].group_loss + 0.7 * *r.history[e].individual_loss;
      ok = ok && now < prev;
    }
    monotone += ok;
  }
  CHECK(monotone >= 4);
}

TEST_CASE("group_only drops the individual term") {
  const Dataset ds = small_synthetic(16, 2);
  TrainConfig cfg = quick_train(2);
  cfg.mode = TrainingMode::group_only;
  const TrainResult r = train(ds, Dataset{}, model_for(ds), cfg);
  for (const auto& e : r.history) {
    CHECK_FALSE(e.individual_loss.has_value());
    CHECK_FALSE(e.train_individual_accuracy.has_value());
    CHECK_FALSE(e.val_group_accuracy.has_value());
  }
  const std::string csv = history_csv(r.history);
  CHECK(csv.rfind("epoch,lr,L_G,train_acc_group,val_acc_group\n", 0) == 0);
  CHECK(r.best_params == r.params);
  // The individual head is never touched.
  const ModelParams init = GroupModel(model_for(ds)).init_params(cfg.seed);
  CHECK(r.params.at("individual_head") == init.at("individual_head"));
  CHECK_FALSE(r.params.at("group_head") == init.at("group_head"));
  Dataset unlabeled = ds;
  for (auto& c : unlabeled.clips) c.action_labels.clear();
  cfg.label_source = LabelSource::none;
  CHECK_NOTHROW(train(unlabeled, Dataset{}, model_for(ds), cfg));
}

TEST_CASE("two-stage training freezes the right layers in each stage") {
  const Dataset ds = small_synthetic(16, 3);
  TrainConfig cfg = quick_train(4);
  cfg.mode = TrainingMode::two_stage;
  const ModelConfig mc = model_for(ds);
  std::vector<ModelParams> snapshots;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord&, const ModelParams& p, bool) { snapshots.push_back(p); };
  const TrainResult r = train(ds, Dataset{}, mc, cfg, hooks);
  REQUIRE(snapshots.size() == 4);
  CHECK(r.history[0].lr == 0.001);

  const ModelParams init = GroupModel(mc).init_params(cfg.seed);
  const auto one = stage_one_trainable(init);
  const auto two = stage_two_trainable(init);
  for (std::size_t i = 0; i < init.layers.size(); ++i) {
    const std::string& name = init.layers[i].name;
    CHECK(one[i] == (name != "group_head"));
    CHECK(two[i] == (name == "fusion1" || name == "fusion2" || name == "group_head"));
    // stage one leaves the group head alone
    if (name == "group_head") CHECK(snapshots[1].layers[i] == init.layers[i]);
    // stage two moves only its layers, bitwise
    if (!two[i]) {
      CHECK(snapshots[3].layers[i] == snapshots[1].layers[i]);
      CHECK(r.params.layers[i] == snapshots[1].layers[i]);
    } else {
      CHECK_FALSE(snapshots[3].layers[i] == snapshots[1].layers[i]);
    }
  }
  CHECK(r.history[0].individual_loss.has_value());
}

TEST_CASE("configuration and label errors") {
  const Dataset ds = small_synthetic(8, 4);
  const ModelConfig mc = model_for(ds);
  TrainConfig cfg = quick_train(1);
  CHECK_THROWS_AS(train(Dataset{}, Dataset{}, mc, cfg), ConfigError);

  cfg.label_source = LabelSource::pseudo;
  CHECK_THROWS_AS(train(ds, Dataset{}, mc, cfg), ConfigError);
  cfg.label_source = LabelSource::none;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = quick_train(1);
  cfg.mode = TrainingMode::two_stage;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = quick_train(0);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = quick_train(1);
  cfg.lambda = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  ModelConfig wrong = mc;
  wrong.frames = 7;
  CHECK_THROWS_AS(train(ds, Dataset{}, wrong, quick_train(1)), ConfigError);

  Dataset unlabeled = ds;
  unlabeled.clips[2].action_labels.clear();
  CHECK_THROWS_AS(train(unlabeled, Dataset{}, mc, quick_train(1)), ConfigError);

  CHECK(parse_training_mode("two_stage") == TrainingMode::two_stage);
  CHECK_THROWS_AS(parse_training_mode("both"), ConfigError);
  CHECK(parse_label_source(to_string(LabelSource::pseudo)) == LabelSource::pseudo);
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  CHECK(argmax(std::vector<double>{1, 3, 3, 2}) == 1);
  CHECK(argmax(std::vector<double>{5}) == 0);
}

}  // TEST_SUITE
