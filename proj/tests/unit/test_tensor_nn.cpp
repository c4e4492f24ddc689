#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "skelgroup/error.hpp"
#include "skelgroup/grad_check.hpp"
#include "skelgroup/gradcheck_suite.hpp"
#include "skelgroup/layers.hpp"
#include "skelgroup/params.hpp"
#include "helpers.hpp"

using namespace skelgroup;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> g(0.0, scale);
  for (double& v : t.values()) v = g(rng);
  return t;
}

// Direct nested-loop cross-correlation; `pad_h`/`pad_w` zeros on the top/left, enough
// on the bottom/right to reach `out_h` x `out_w`.
Tensor naive_conv(const Tensor& x, const LayerParams& p, std::size_t stride, std::size_t pad_h, std::size_t pad_w,
                  std::size_t out_h, std::size_t out_w) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = p.weight.dim(0), kh = p.weight.dim(2), kw = p.weight.dim(3);
  Tensor y({B, O, out_h, out_w});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t r = 0; r < out_h; ++r)
        for (std::size_t s = 0; s < out_w; ++s) {
          double acc = p.bias[o];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long yy = static_cast<long>(r * stride + i) - static_cast<long>(pad_h);
                const long xx = static_cast<long>(s * stride + j) - static_cast<long>(pad_w);
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(H) || xx >= static_cast<long>(W)) continue;
                acc += p.weight(o, c, i, j) * x(b, c, yy, xx);
              }
          y(b, o, r, s) = acc;
        }
  return y;
}

}  // namespace

TEST_SUITE("tensor_nn") {

TEST_CASE("identity 1x1 kernel returns the input for any shape") {
  std::mt19937_64 rng(1);
  for (Shape shape : {Shape{1, 1, 1, 1}, Shape{2, 3, 5, 4}, Shape{3, 2, 1, 7}}) {
    const std::size_t C = shape[1];
    Conv2d conv({C, C, 1, 1, 1, Padding::valid});
    LayerParams p{Tensor(conv.weight_shape()), Tensor(conv.bias_shape())};
    for (std::size_t c = 0; c < C; ++c) p.weight(c, c, 0, 0) = 1.0;
    const Tensor x = random_tensor(shape, rng);
    CHECK(conv.forward(x, p) == x);
  }
}

TEST_CASE("3x3 window sums over 1..16") {
  Conv2d conv({1, 1, 3, 3, 1, Padding::valid});
  LayerParams p{Tensor(conv.weight_shape(), 1.0), Tensor(conv.bias_shape())};
  Tensor x({1, 4, 4});
  std::iota(x.values().begin(), x.values().end(), 1.0);
  const Tensor y = conv.forward(x, p);
  REQUIRE(y.shape() == Shape{1, 2, 2});
  // Window sums by hand: 1+2+3+5+6+7+9+10+11 and so on.
  CHECK(y[0] == 54.0);
  CHECK(y[1] == 63.0);
  CHECK(y[2] == 90.0);
  CHECK(y[3] == 99.0);

  Conv2d strided({1, 1, 3, 3, 2, Padding::valid});
  CHECK(strided.forward(x, p).shape() == Shape{1, 1, 1});
}

TEST_CASE("conv matches the nested-loop oracle") {
  std::mt19937_64 rng(2);
  struct Case {
    ConvGeometry g;
    std::size_t H, W;
  };
  const Case cases[] = {{{3, 4, 3, 3, 1, Padding::valid}, 6, 5},
                        {{2, 5, 3, 3, 2, Padding::same}, 7, 6},
                        {{4, 3, 3, 1, 1, Padding::same}, 5, 4},
                        {{1, 2, 1, 1, 1, Padding::valid}, 3, 3},
                        {{3, 2, 3, 3, 2, Padding::same}, 1, 2}};
  for (const Case& c : cases) {
    Conv2d conv(c.g);
    LayerParams p{random_tensor(conv.weight_shape(), rng), random_tensor(conv.bias_shape(), rng)};
    const Tensor x = random_tensor({2, c.g.in_channels, c.H, c.W}, rng);
    const bool same = c.g.padding == Padding::same;
    const std::size_t pad_h = same ? (c.g.kernel_h - 1) / 2 : 0;
    const std::size_t pad_w = same ? (c.g.kernel_w - 1) / 2 : 0;
    const std::size_t hp = c.g.padding == Padding::same ? c.H + c.g.kernel_h - 1 : c.H;
    const std::size_t wp = c.g.padding == Padding::same ? c.W + c.g.kernel_w - 1 : c.W;
    const std::size_t oh = (hp - c.g.kernel_h) / c.g.stride + 1;
    const std::size_t ow = (wp - c.g.kernel_w) / c.g.stride + 1;
    const Tensor expect = naive_conv(x, p, c.g.stride, pad_h, pad_w, oh, ow);
    const Tensor got = conv.forward(x, p);
    REQUIRE(got.shape() == expect.shape());
    CHECK(max_abs_difference(got, expect) < 1e-12);
  }
}

TEST_CASE("kernel larger than the input is rejected") {
  Conv2d conv({1, 1, 3, 3, 1, Padding::valid});
  LayerParams p{Tensor(conv.weight_shape()), Tensor(conv.bias_shape())};
  CHECK_THROWS_AS(conv.forward(Tensor({1, 1, 2, 5}), p), ConfigError);
  CHECK_THROWS_AS(conv.forward(Tensor({1, 2, 4, 4}), p), ConfigError);
}

TEST_CASE("backward before forward reports the missing cache") {
  Conv2d conv({1, 1, 1, 1, 1, Padding::valid});
  LayerParams p{Tensor(conv.weight_shape()), Tensor(conv.bias_shape())};
  LayerParams g = p.zeros_like();
  CHECK_THROWS(conv.backward(Tensor({1, 1, 1, 1}), p, g));
  Linear lin(2, 2);
  LayerParams lp{Tensor(lin.weight_shape()), Tensor(lin.bias_shape())};
  LayerParams lg = lp.zeros_like();
  CHECK_THROWS(lin.backward(Tensor({1, 2}), lp, lg));
  Relu relu;
  CHECK_THROWS(relu.backward(Tensor({2})));
}

TEST_CASE("zero upstream gradient gives zero gradients") {
  std::mt19937_64 rng(3);
  Conv2d conv({2, 3, 3, 3, 2, Padding::same});
  LayerParams p{random_tensor(conv.weight_shape(), rng), random_tensor(conv.bias_shape(), rng)};
  const Tensor x = random_tensor({2, 2, 5, 5}, rng);
  const Tensor y = conv.forward(x, p);
  LayerParams g = p.zeros_like();
  const Tensor gx = conv.backward(Tensor(y.shape()), p, g);
  CHECK(gx == Tensor(x.shape()));
  CHECK(g == p.zeros_like());
}

TEST_CASE("relu passes no gradient at negative or zero activations") {
  Relu relu;
  const Tensor y = relu.forward(Tensor({3}, std::vector<double>{-1.0, 0.0, 2.0}));
  CHECK(y == Tensor({3}, std::vector<double>{0.0, 0.0, 2.0}));
  const Tensor g = relu.backward(Tensor({3}, std::vector<double>{5.0, 5.0, 5.0}));
  CHECK(g == Tensor({3}, std::vector<double>{0.0, 0.0, 5.0}));
}

TEST_CASE("linear gradients match central differences to 1e-8") {
  std::mt19937_64 rng(4);
  Linear lin(4, 3);
  LayerParams p{random_tensor(lin.weight_shape(), rng, 0.5), random_tensor(lin.bias_shape(), rng, 0.5)};
  const Tensor x = random_tensor({2, 4}, rng);
  const Tensor up = random_tensor({2, 3}, rng);
  lin.forward(x, p);
  LayerParams g = p.zeros_like();
  const Tensor gx = lin.backward(up, p, g);

  auto objective = [&](const LayerParams& q, const Tensor& in) {
    Linear fresh(4, 3);
    const Tensor y = fresh.forward(in, q);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * up[i];
    return s;
  };
  LayerParams q = p;
  GradCheckOptions opt;
  opt.step = 1e-5;
  auto rw = grad_check([&] { return objective(q, x); }, q.weight.values(), g.weight.values(), opt);
  auto rb = grad_check([&] { return objective(q, x); }, q.bias.values(), g.bias.values(), opt);
  Tensor xin = x;
  auto rx = grad_check([&] { return objective(p, xin); }, xin.values(), gx.values(), opt);
  CHECK(rw.max_relative_error < 1e-8);
  CHECK(rb.max_relative_error < 1e-8);
  CHECK(rx.max_relative_error < 1e-8);
}

TEST_CASE("softmax cross-entropy values") {
  for (std::size_t G : {2, 4, 9}) {
    const std::vector<double> logits(G, 0.3);
    CHECK(softmax_cross_entropy(logits, 1).loss == doctest::Approx(std::log(static_cast<double>(G))).epsilon(1e-14));
  }
  const std::vector<double> sure = {10.0, -10.0};
  const auto ce = softmax_cross_entropy(sure, 0);
  CHECK(ce.loss < 1e-8);
  CHECK(ce.loss == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-12));
  CHECK(ce.grad[0] == doctest::Approx(-std::exp(-20.0) / (1 + std::exp(-20.0))).epsilon(1e-9));
  CHECK(ce.grad[1] == doctest::Approx(std::exp(-20.0) / (1 + std::exp(-20.0))).epsilon(1e-9));

  const std::vector<double> huge = {1000.0, 0.0};
  CHECK(std::isfinite(softmax_cross_entropy(huge, 1).loss));
  CHECK(softmax_cross_entropy(huge, 1).loss == doctest::Approx(1000.0));

  CHECK_THROWS_AS(softmax_cross_entropy(sure, 2), ConfigError);
  // A single class is certain: zero loss, zero gradient.
  const std::vector<double> single = {1.0};
  CHECK(softmax_cross_entropy(single, 0).loss == 0.0);
  CHECK(softmax_cross_entropy(single, 0).grad == std::vector<double>{0.0});
  CHECK_THROWS_AS(softmax_cross_entropy(std::vector<double>{}, 0), ConfigError);
}

TEST_CASE("softmax gradient sums to zero") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 30.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> logits(2 + trial % 7);
    for (double& v : logits) v = g(rng);
    const auto ce = softmax_cross_entropy(logits, static_cast<std::size_t>(trial) % logits.size());
    double s = 0.0;
    for (double v : ce.grad) s += v;
    CHECK(std::abs(s) < 1e-12);
  }
}

TEST_CASE("actor max-pool routes gradient to the argmax only") {
  std::mt19937_64 rng(6);
  ActorMaxPool pool;
  const Tensor x = random_tensor({2, 4, 5}, rng);
  const std::vector<std::uint8_t> mask = {1, 0, 1, 1, 0, 1, 0, 0};
  const Tensor y = pool.forward(x, mask);
  const Tensor up = random_tensor({2, 5}, rng);
  const Tensor gx = pool.backward(up);
  double routed = 0.0, upstream = 0.0;
  for (double v : gx.values()) routed += v;
  for (double v : up.values()) upstream += v;
  CHECK(routed == doctest::Approx(upstream).epsilon(1e-14));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t f = 0; f < 5; ++f) {
      std::size_t nonzero = 0;
      for (std::size_t k = 0; k < 4; ++k) {
        if (gx(b, k, f) == 0.0) continue;
        ++nonzero;
        CHECK(mask[b * 4 + k] == 1);
        CHECK(x(b, k, f) == y(b, f));
      }
      CHECK(nonzero <= 1);
    }

  // Ties go to the lowest index.
  ActorMaxPool tie;
  const Tensor same({1, 3, 1}, std::vector<double>{2.0, 2.0, 2.0});
  const std::vector<std::uint8_t> all = {1, 1, 1};
  tie.forward(same, all);
  const Tensor gt = tie.backward(Tensor({1, 1}, std::vector<double>{1.0}));
  CHECK(gt == Tensor({1, 3, 1}, std::vector<double>{1.0, 0.0, 0.0}));

  const std::vector<std::uint8_t> none = {0, 0, 0};
  CHECK_THROWS(tie.forward(same, none));
}

TEST_CASE("grad_check of a constant function reports zero error") {
  std::vector<double> params = {0.3, -1.2, 4.0};
  const std::vector<double> analytic(3, 0.0);
  const auto r = grad_check([] { return 2.5; }, params, analytic);
  CHECK(r.max_relative_error == 0.0);
  CHECK(r.checked == 3);
  CHECK(params == std::vector<double>{0.3, -1.2, 4.0});
}

TEST_CASE("grad_check flags non-finite values") {
  std::vector<double> params = {1.0};
  const std::vector<double> analytic = {0.0};
  CHECK_THROWS_AS(grad_check([] { return std::numeric_limits<double>::infinity(); }, params, analytic), NumericError);
}

TEST_CASE("grad_check subsamples large parameter sets") {
  std::vector<double> params(20000, 0.5);
  std::vector<double> analytic(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) analytic[i] = 2.0 * params[i];
  auto loss = [&] {
    double s = 0.0;
    for (double v : params) s += v * v;
    return s;
  };
  GradCheckOptions opt;
  opt.max_checked = 500;
  const auto r = grad_check(loss, params, analytic, opt);
  CHECK(r.checked == 500);
  CHECK(r.max_relative_error < 1e-6);
}

TEST_CASE("every layer passes the gradient check over 20 seeds") {
  // Entries whose step straddles a ReLU or max-pool switch are skipped by the
  // check; they must stay rare or the check would be vacuous.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GradCheckSuiteOptions opt;
    opt.seed = seed;
    for (const GradCheckLine& line : run_gradcheck_suite(opt)) {
      INFO("seed " << seed << " check " << line.name << " err " << line.max_relative_error << " skipped "
                   << line.skipped_kinks << " of " << line.checked + line.skipped_kinks);
      CHECK(line.passed);
      CHECK(line.checked > 0);
      CHECK(line.skipped_kinks * 10 <= line.checked + line.skipped_kinks);
    }
  }
}

TEST_CASE("grad_check works around a kink inside the step") {
  // |x| at x = 3e-5 with step 1e-4: the wide difference reads 0.3, the true slope is 1.
  std::vector<double> x = {3e-5, 1.0};
  auto loss = [&] { return std::abs(x[0]) + x[1] * x[1]; };
  const std::vector<double> analytic = {1.0, 2.0};
  const auto r = grad_check(loss, x, analytic);
  CHECK(r.skipped_kinks == 0);
  CHECK(r.checked == 2);
  CHECK(r.max_relative_error < 1e-6);
  GradCheckOptions plain;
  plain.kink_ratio = 0.0;
  CHECK(grad_check(loss, x, analytic, plain).max_relative_error == doctest::Approx(0.7).epsilon(1e-6));

  // Closer than the smallest step tried: no estimate is trustworthy.
  x[0] = 1e-9;
  const auto s = grad_check(loss, x, analytic);
  CHECK(s.skipped_kinks == 1);
  CHECK(s.checked == 1);
}

TEST_CASE("fault injection and the constant loss behave as controls") {
  GradCheckSuiteOptions opt;
  opt.fault_check = "model.gs.conv2";
  bool found = false;
  for (const GradCheckLine& line : run_gradcheck_suite(opt)) {
    if (line.name == opt.fault_check) {
      found = true;
      CHECK_FALSE(line.passed);
    } else {
      CHECK(line.passed);
    }
  }
  CHECK(found);

  GradCheckSuiteOptions constant;
  constant.constant = true;
  for (const GradCheckLine& line : run_gradcheck_suite(constant)) CHECK(line.max_relative_error == 0.0);
}

TEST_CASE("fan-in init: deterministic, zero bias, std near sqrt(2/fan_in)") {
  Conv2d conv({16, 32, 3, 3, 1, Padding::same});
  LayerParams a{Tensor(conv.weight_shape()), Tensor(conv.bias_shape(), 1.0)};
  LayerParams b = a;
  std::mt19937_64 r1(11), r2(11);
  init_fan_in_normal(a, conv.fan_in(), r1);
  init_fan_in_normal(b, conv.fan_in(), r2);
  CHECK(a == b);
  CHECK(a.bias == Tensor(conv.bias_shape()));
  REQUIRE(a.weight.size() == 4608);
  double mean = 0.0;
  for (double v : a.weight.values()) mean += v;
  mean /= 4608.0;
  double var = 0.0;
  for (double v : a.weight.values()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / 4607.0);
  const double target = std::sqrt(2.0 / 144.0);
  CHECK(std::abs(sd - target) < 0.1 * target);
}

TEST_CASE("permute_axes and its inverse") {
  std::mt19937_64 rng(8);
  const Tensor x = random_tensor({2, 3, 4, 5}, rng);
  const std::array<std::size_t, 4> perm = {0, 3, 2, 1};
  const Tensor y = permute_axes(x, perm);
  CHECK(y.shape() == Shape{2, 5, 4, 3});
  CHECK(y(1, 4, 2, 0) == x(1, 0, 2, 4));
  CHECK(permute_axes(y, inverse_permutation(perm)) == x);
}

TEST_CASE("checkpoint round trip and byte layout") {
  testutil::TempDir dir("ckpt");
  ParamStore store;
  store.layers.push_back({"a", {Tensor({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6.5}), Tensor({2}, std::vector<double>{-1, 0.25})}});
  store.layers.push_back({"b", {Tensor({1, 1, 1, 1}, std::vector<double>{7}), Tensor({1})}});
  write_checkpoint(store, dir / "c.bin");
  CHECK(read_checkpoint(dir / "c.bin") == store);

  const std::string bytes = testutil::read_file(dir / "c.bin");
  REQUIRE(bytes.size() > 12);
  CHECK(bytes.substr(0, 8) == "SKGCKPT1");
  auto u32 = [&](std::size_t at) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 3])) << 24;
  };
  CHECK(u32(8) == 4);                             // four tensors
  CHECK(u32(12) == 8);                            // "a.weight"
  CHECK(bytes.substr(16, 8) == "a.weight");
  CHECK(u32(24) == 2);                            // rank
  CHECK(u32(28) == 2);
  CHECK(u32(32) == 3);
  float first;
  std::memcpy(&first, bytes.data() + 36, 4);
  CHECK(first == 1.0f);
  // 8 magic + 4 count + per tensor (4 + name + 4 + 4*rank + 4*n)
  CHECK(bytes.size() == 12 + (4 + 8 + 4 + 8 + 24) + (4 + 6 + 4 + 4 + 8) + (4 + 8 + 4 + 16 + 4) + (4 + 6 + 4 + 4 + 4));

  std::ofstream(dir / "bad.bin") << "NOTACKPT";
  CHECK_THROWS_AS(read_checkpoint(dir / "bad.bin"), IoError);
  CHECK_THROWS_AS(read_checkpoint(dir / "missing.bin"), IoError);
}

}  // TEST_SUITE
