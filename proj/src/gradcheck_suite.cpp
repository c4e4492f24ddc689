#include "skelgroup/gradcheck_suite.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "skelgroup/dataset.hpp"
#include "skelgroup/grad_check.hpp"

namespace skelgroup {

ModelConfig tiny_gradcheck_config() {
  ModelConfig c;
  c.actors = 3;
  c.frames = 4;
  c.joints = 5;
  c.branch = {4, 4, 3, 4, 5};
  c.fusion = {8, 6};
  c.action_classes = 3;
  c.group_classes = 3;
  c.lambda = 0.7;
  return c;
}

namespace {

void fill_normal(Tensor& t, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  for (double& v : t.values()) v = normal(rng);
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct Checker {
  const GradCheckSuiteOptions& options;
  std::vector<GradCheckLine> lines;

  // Checks `analytic` against `loss` over the values in `target`.
  void check(const std::string& name, Tensor& target, Tensor analytic, const std::function<double()>& loss) {
    const double factor = options.constant ? 0.0 : 1.0;
    if (name == options.fault_check) analytic *= -1.0;
    analytic *= factor;
    GradCheckOptions gc;
    gc.step = options.step;
    gc.seed = options.seed;
    auto scaled = [&]() { return factor * loss(); };
    const GradCheckResult r = grad_check(scaled, target.values(), analytic.values(), gc);
    // Merge into an existing line with the same name (weight, bias and input
    // checks of one layer report together).
    for (auto& line : lines) {
      if (line.name == name) {
        line.max_relative_error = std::max(line.max_relative_error, r.max_relative_error);
        line.checked += r.checked;
        line.skipped_kinks += r.skipped_kinks;
        line.passed = line.max_relative_error < options.tolerance;
        return;
      }
    }
    lines.push_back(
        {name, r.max_relative_error, r.checked, r.max_relative_error < options.tolerance, r.skipped_kinks});
  }
};

void check_conv(Checker& checker, const std::string& name, ConvGeometry geom, Shape input_shape,
                std::mt19937_64& rng) {
  Conv2d conv(geom);
  LayerParams params{Tensor(conv.weight_shape()), Tensor(conv.bias_shape())};
  fill_normal(params.weight, rng);
  fill_normal(params.bias, rng);
  Tensor input(input_shape);
  fill_normal(input, rng);
  Tensor probe(conv.forward(input, params).shape());
  fill_normal(probe, rng);
  auto loss = [&]() { return dot(probe, conv.forward(input, params)); };
  conv.forward(input, params);
  LayerParams grads = params.zeros_like();
  Tensor d_input = conv.backward(probe, params, grads);
  checker.check(name, params.weight, grads.weight, loss);
  checker.check(name, params.bias, grads.bias, loss);
  checker.check(name, input, d_input, loss);
}

void check_layers(Checker& checker, std::mt19937_64& rng) {
  check_conv(checker, "conv2d.valid", {2, 3, 3, 3, 1, Padding::valid}, {2, 2, 5, 4}, rng);
  check_conv(checker, "conv2d.same_stride2", {3, 2, 3, 3, 2, Padding::same}, {2, 3, 5, 6}, rng);
  check_conv(checker, "conv2d.temporal", {2, 3, 3, 1, 1, Padding::same}, {3, 2, 4, 3}, rng);

  {
    Linear linear(4, 3);
    LayerParams params{Tensor(linear.weight_shape()), Tensor(linear.bias_shape())};
    fill_normal(params.weight, rng);
    fill_normal(params.bias, rng);
    Tensor input({5, 4});
    fill_normal(input, rng);
    Tensor probe({5, 3});
    fill_normal(probe, rng);
    auto loss = [&]() { return dot(probe, linear.forward(input, params)); };
    linear.forward(input, params);
    LayerParams grads = params.zeros_like();
    Tensor d_input = linear.backward(probe, params, grads);
    checker.check("linear", params.weight, grads.weight, loss);
    checker.check("linear", params.bias, grads.bias, loss);
    checker.check("linear", input, d_input, loss);
  }
  {
    Relu relu;
    Tensor input({4, 6});
    fill_normal(input, rng);
    // Keep inputs away from the kink so central differences stay on one side.
    for (double& v : input.values()) v += v >= 0 ? 0.05 : -0.05;
    Tensor probe({4, 6});
    fill_normal(probe, rng);
    auto loss = [&]() { return dot(probe, relu.forward(input)); };
    relu.forward(input);
    Tensor d_input = relu.backward(probe);
    checker.check("relu", input, d_input, loss);
  }
  {
    ActorMaxPool pool;
    Tensor input({2, 4, 3});
    fill_normal(input, rng);
    const std::vector<std::uint8_t> mask = {1, 0, 1, 1, 1, 1, 0, 1};
    Tensor probe({2, 3});
    fill_normal(probe, rng);
    auto loss = [&]() { return dot(probe, pool.forward(input, mask)); };
    pool.forward(input, mask);
    Tensor d_input = pool.backward(probe);
    checker.check("actor_maxpool", input, d_input, loss);
  }
  {
    Tensor logits({5});
    fill_normal(logits, rng, 2.0);
    auto loss = [&]() { return softmax_cross_entropy(logits.values(), 2).loss; };
    const auto ce = softmax_cross_entropy(logits.values(), 2);
    checker.check("softmax_xent", logits, Tensor({5}, ce.grad), loss);
  }
}

void check_model(Checker& checker, std::mt19937_64& rng) {
  const ModelConfig& config = checker.options.model;
  GroupModel model(config);
  ModelParams params = model.init_params(checker.options.seed);
  // Non-zero biases so every bias path is exercised.
  for (auto& layer : params.layers) fill_normal(layer.params.bias, rng, 0.1);
  // The production heads start tiny, which would scale every upstream
  // gradient down toward rounding noise; check at ordinary fan-in scale.
  for (auto& layer : params.layers) {
    if (layer.name.ends_with("_head")) {
      fill_normal(layer.params.weight, rng, std::sqrt(1.0 / static_cast<double>(layer.params.weight.dim(1))));
    }
  }

  const std::size_t K = config.actors;
  const std::size_t B = 2;
  std::vector<StreamTensors> clips(B);
  std::vector<std::vector<std::uint8_t>> masks(B, std::vector<std::uint8_t>(K, 1));
  masks[1][K - 1] = 0;
  for (auto& clip : clips) {
    for (Tensor* t : {&clip.gs, &clip.gm, &clip.gd}) {
      *t = Tensor({K, config.frames, config.joints, 3});
      fill_normal(*t, rng);
    }
  }
  std::vector<const StreamTensors*> ptrs = {&clips[0], &clips[1]};
  const ModelInput input = make_input(ptrs, masks);
  std::vector<int> group_labels(B);
  std::vector<int> action_labels(B * K);
  std::uniform_int_distribution<int> gpick(0, static_cast<int>(config.group_classes) - 1);
  std::uniform_int_distribution<int> apick(0, static_cast<int>(config.action_classes) - 1);
  for (int& y : group_labels) y = gpick(rng);
  for (std::size_t i = 0; i < action_labels.size(); ++i) action_labels[i] = input.mask[i] ? apick(rng) : kNoLabel;

  auto loss = [&]() {
    const ModelOutputs out = model.forward(input, params);
    const LossResult r = total_loss(out, group_labels, action_labels, config.lambda);
    double sum = 0.0;
    for (const auto& t : r.per_clip) sum += t.total;
    return sum;
  };

  const ModelOutputs out = model.forward(input, params);
  const LossResult r = total_loss(out, group_labels, action_labels, config.lambda);
  Gradients grads = params.zeros_like();
  model.backward(r.grads, params, grads);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const std::string name = "model." + params.layers[i].name;
    checker.check(name, params.layers[i].params.weight, grads.layers[i].params.weight, loss);
    checker.check(name, params.layers[i].params.bias, grads.layers[i].params.bias, loss);
  }
}

}  // namespace

std::vector<GradCheckLine> run_gradcheck_suite(const GradCheckSuiteOptions& options) {
  Checker checker{options, {}};
  std::mt19937_64 rng(options.seed);
  check_layers(checker, rng);
  check_model(checker, rng);
  return checker.lines;
}

}  // namespace skelgroup
