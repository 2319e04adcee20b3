#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gridrl/approx/checkpoint.hpp"
#include "gridrl/approx/gradcheck.hpp"
#include "gridrl/approx/network.hpp"
#include "gridrl/approx/optim.hpp"

using namespace gridrl;

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = uniform_real(rng, lo, hi);
  return t;
}

NetworkSpec single_head(Shape input, std::vector<LayerSpec> trunk, std::vector<LayerSpec> head = {}) {
  return {std::move(input), std::move(trunk), {{"out", std::move(head)}}};
}

// Biases are zero after init; randomize everything so each gradient entry is exercised.
ParameterSet<double> random_params(const Network<double>& net, Rng& rng) {
  auto p = net.init_parameters(rng);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (auto& v : p[i].values()) v = uniform_real(rng, -0.8, 0.8);
  return p;
}

GradCheckReport check_seed(const NetworkSpec& spec, std::uint64_t seed, std::size_t steps = 1) {
  Network<double> net(spec);
  Rng rng(seed);
  const auto params = random_params(net, rng);
  std::vector<Tensor<double>> inputs;
  for (std::size_t t = 0; t < steps; ++t) inputs.push_back(random_tensor(spec.input, rng));
  RecurrentState<double> init;
  if (net.recurrent()) {
    init = net.initial_state();
    for (auto& h : init.h)
      for (auto& v : h.values()) v = uniform_real(rng, -0.5, 0.5);
    for (auto& c : init.c)
      for (auto& v : c.values()) v = uniform_real(rng, -0.5, 0.5);
  }
  GradCheckOptions opt;
  opt.projection_seed = seed * 31 + 7;
  return finite_diff_check(net, params, inputs, init, opt);
}

}  // namespace

// ---------------------------------------------------------------- forward

TEST(Forward, IdentityFullyConnectedPassesInputThrough) {
  Network<double> net(single_head({4}, {LayerSpec::fully_connected(4)}));
  auto p = net.zero_gradients();
  for (std::size_t i = 0; i < 4; ++i) p["trunk.0.fully_connected.weight"][i * 4 + i] = 1.0;
  const Tensor<double> x({4}, std::vector<double>{0.5, -2.0, 3.25, 0.0});
  EXPECT_EQ(net.forward(p, x).outputs[0], x);
}

TEST(Forward, SoftmaxOfEqualLogitsIsUniform) {
  Network<double> net(single_head({7}, {LayerSpec::softmax()}));
  const auto out = net.forward(net.zero_gradients(), Tensor<double>({7}, 3.0)).outputs[0];
  for (double p : out.values()) EXPECT_NEAR(p, 1.0 / 7.0, 1e-15);
}

TEST(Forward, SoftmaxRowsAreDistributions) {
  Network<double> net(single_head({5}, {LayerSpec::softmax()}));
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    const auto out = net.forward(net.zero_gradients(), random_tensor({5}, rng, -30, 30)).outputs[0];
    double sum = 0.0;
    for (double p : out.values()) {
      EXPECT_GE(p, 0.0);
      sum += p;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Forward, OneHotConvFilterSelectsShiftedWindow) {
  Network<double> net(single_head({1, 5, 5}, {LayerSpec::conv2d(1, 3, 3, 1)}));
  auto p = net.zero_gradients();
  // Filter tap at (row 0, col 2): output(y, x) = image(y, x + 2).
  p["trunk.0.conv2d.weight"][0 * 3 + 2] = 1.0;
  Tensor<double> img({1, 5, 5});
  for (std::size_t i = 0; i < 25; ++i) img[i] = static_cast<double>(i * i % 17);
  const auto out = net.forward(p, img).outputs[0];
  ASSERT_EQ(out.shape(), (Shape{1, 3, 3}));
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 3; ++x) EXPECT_EQ(out[y * 3 + x], img[y * 5 + x + 2]);
}

TEST(Forward, ConvMatchesDirectSlidingWindow) {
  Rng rng(2);
  Network<double> net(single_head({2, 7, 6}, {LayerSpec::conv2d(3, 3, 2, 2)}));
  const auto p = random_params(net, rng);
  const auto img = random_tensor({2, 7, 6}, rng);
  const auto out = net.forward(p, img).outputs[0];
  const auto& w = p["trunk.0.conv2d.weight"];
  const auto& b = p["trunk.0.conv2d.bias"];
  ASSERT_EQ(out.shape(), (Shape{3, 3, 3}));
  for (std::size_t f = 0; f < 3; ++f)
    for (std::size_t oy = 0; oy < 3; ++oy)
      for (std::size_t ox = 0; ox < 3; ++ox) {
        double acc = b[f];
        for (std::size_t c = 0; c < 2; ++c)
          for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 2; ++kx)
              acc += w[((f * 2 + c) * 3 + ky) * 2 + kx] * img[(c * 7 + oy * 2 + ky) * 6 + ox * 2 + kx];
        EXPECT_NEAR(out[(f * 3 + oy) * 3 + ox], acc, 1e-14);
      }
}

TEST(Forward, UnitIdentityConvIsIdentityPerChannel) {
  Network<double> net(single_head({3, 4, 5}, {LayerSpec::conv2d(3, 1, 1)}));
  auto p = net.zero_gradients();
  for (std::size_t c = 0; c < 3; ++c) p["trunk.0.conv2d.weight"][c * 3 + c] = 1.0;
  Rng rng(3);
  const auto img = random_tensor({3, 4, 5}, rng);
  EXPECT_EQ(net.forward(p, img).outputs[0], img);
}

TEST(Forward, PoolingMaxAndMean) {
  Tensor<double> img({1, 2, 4}, std::vector<double>{1, 5, 2, 2, 3, 0, 2, 2});
  Network<double> mx(single_head({1, 2, 4}, {LayerSpec::max_pool(2)}));
  Network<double> mean(single_head({1, 2, 4}, {LayerSpec::mean_pool(2)}));
  EXPECT_EQ(mx.forward(mx.zero_gradients(), img).outputs[0].storage(), (std::vector<double>{5, 2}));
  EXPECT_EQ(mean.forward(mean.zero_gradients(), img).outputs[0].storage(), (std::vector<double>{2.25, 2}));
}

TEST(Forward, IsPure) {
  Rng rng(4);
  Network<double> net({{2, 6, 6},
                       {LayerSpec::conv2d(3, 3, 3), LayerSpec::relu(), LayerSpec::lstm(4)},
                       {{"value", {LayerSpec::fully_connected(1)}}, {"pi", {LayerSpec::fully_connected(3), LayerSpec::softmax()}}}});
  const auto p = random_params(net, rng);
  const auto x = random_tensor({2, 6, 6}, rng);
  auto s = net.initial_state();
  s.h[0][1] = 0.3;
  const auto a = net.forward(p, x, &s);
  const auto b = net.forward(p, x, &s);
  for (std::size_t h = 0; h < 2; ++h) EXPECT_TRUE(bit_equal(a.outputs[h], b.outputs[h]));
  EXPECT_TRUE(bit_equal(a.state.h[0], b.state.h[0]));
  EXPECT_TRUE(bit_equal(a.state.c[0], b.state.c[0]));
}

TEST(Forward, ShapeMismatchNamesLayer) {
  Network<double> net(single_head({4}, {LayerSpec::fully_connected(2)}));
  try {
    net.forward(net.zero_gradients(), Tensor<double>({5}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("trunk.0.fully_connected"), std::string::npos) << e.what();
  }
}

TEST(NetworkSpec, RejectsIncompatibleLayers) {
  EXPECT_THROW(Network<double>(single_head({3, 2, 2}, {LayerSpec::conv2d(1, 3, 3)})), ShapeError);
  EXPECT_THROW(Network<double>(single_head({8}, {LayerSpec::conv2d(1, 1, 1)})), ShapeError);
  EXPECT_THROW(Network<double>(single_head({4}, {LayerSpec::fully_connected(0)})), ShapeError);
  EXPECT_THROW(Network<double>({{4}, {}, {{"value", {LayerSpec::fully_connected(2)}}}}), ShapeError);
}

TEST(Init, GlorotBoundsAndForgetBias) {
  Network<double> net(single_head({10}, {LayerSpec::fully_connected(6), LayerSpec::lstm(3)}));
  Rng rng(5);
  const auto p = net.init_parameters(rng);
  const double limit = std::sqrt(6.0 / 16.0);
  for (double v : p["trunk.0.fully_connected.weight"].values()) EXPECT_LE(std::abs(v), limit);
  for (double v : p["trunk.0.fully_connected.bias"].values()) EXPECT_EQ(v, 0.0);
  const auto& b = p["trunk.1.lstm.bias"];
  for (std::size_t j = 0; j < 12; ++j) EXPECT_EQ(b[j], (j >= 3 && j < 6) ? 1.0 : 0.0);
}

// ---------------------------------------------------------------- backward

TEST(Backward, ZeroOutputGradientGivesZeroGradients) {
  Rng rng(6);
  Network<double> net(single_head({1, 5, 5}, {LayerSpec::conv2d(2, 2, 2), LayerSpec::relu(), LayerSpec::fully_connected(3)}));
  const auto p = random_params(net, rng);
  const auto r = net.forward(p, random_tensor({1, 5, 5}, rng));
  const std::vector<Tensor<double>> g{Tensor<double>({3})};
  const auto grads = net.backward(p, r.cache, g);
  for (std::size_t i = 0; i < grads.size(); ++i)
    for (double v : grads[i].values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, LinearLayerSquaredErrorIsOuterProduct) {
  Rng rng(7);
  Network<double> net(single_head({3}, {LayerSpec::fully_connected(2)}));
  const auto p = random_params(net, rng);
  const auto x = random_tensor({3}, rng);
  const Tensor<double> target({2}, std::vector<double>{0.5, -1.0});
  const auto r = net.forward(p, x);
  Tensor<double> err({2});
  for (std::size_t o = 0; o < 2; ++o) err[o] = r.outputs[0][o] - target[o];  // d/dy of 0.5*|y-t|^2
  const std::vector<Tensor<double>> g{err};
  const auto grads = net.backward(p, r.cache, g);
  for (std::size_t o = 0; o < 2; ++o) {
    EXPECT_DOUBLE_EQ(grads["trunk.0.fully_connected.bias"][o], err[o]);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(grads["trunk.0.fully_connected.weight"][o * 3 + i], err[o] * x[i]);
  }
}

TEST(Backward, StaleCacheIsRejected) {
  Rng rng(8);
  Network<double> net(single_head({3}, {LayerSpec::fully_connected(2)}));
  auto p = random_params(net, rng);
  const auto r = net.forward(p, random_tensor({3}, rng));
  p.bump_version();
  const std::vector<Tensor<double>> g{Tensor<double>({2}, 1.0)};
  EXPECT_THROW(net.backward(p, r.cache, g), UsageError);
  const auto copy = p;
  const auto r2 = net.forward(p, random_tensor({3}, rng));
  EXPECT_THROW(net.backward(copy, r2.cache, g), UsageError);
}

// Every layer kind, 20 seeds, double precision, central differences with step 1e-5.
class LayerGradient : public ::testing::TestWithParam<int> {};

TEST_P(LayerGradient, FullyConnected) {
  const auto r = check_seed(single_head({5}, {LayerSpec::fully_connected(4)}), GetParam());
  EXPECT_LE(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST_P(LayerGradient, Conv2d) {
  const auto r = check_seed(single_head({2, 6, 5}, {LayerSpec::conv2d(3, 3, 2, 2), LayerSpec::fully_connected(2)}), GetParam());
  EXPECT_LE(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST_P(LayerGradient, MaxPool) {
  const auto r = check_seed(single_head({2, 4, 6}, {LayerSpec::conv2d(2, 1, 1), LayerSpec::max_pool(2), LayerSpec::fully_connected(3)}),
                            GetParam());
  EXPECT_LE(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST_P(LayerGradient, MeanPool) {
  const auto r = check_seed(single_head({1, 4, 4}, {LayerSpec::conv2d(2, 2, 2), LayerSpec::mean_pool(3, 1), LayerSpec::fully_connected(2)}),
                            GetParam());
  EXPECT_LE(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST_P(LayerGradient, LstmSequence) {
  const auto r = check_seed(single_head({3}, {LayerSpec::lstm(4)}, {LayerSpec::fully_connected(2)}), GetParam(), 3);
  EXPECT_LE(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST_P(LayerGradient, Softmax) {
  const auto r = check_seed(single_head({4}, {LayerSpec::fully_connected(5)}, {LayerSpec::softmax()}), GetParam());
  EXPECT_LE(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST_P(LayerGradient, ReluStack) {
  const auto r = check_seed(single_head({6}, {LayerSpec::fully_connected(5), LayerSpec::relu(), LayerSpec::fully_connected(3)}), GetParam());
  EXPECT_LE(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST_P(LayerGradient, ActorCriticWithLstmTrunk) {
  NetworkSpec spec{{1, 5, 5},
                   {LayerSpec::conv2d(2, 3, 3), LayerSpec::relu(), LayerSpec::lstm(3)},
                   {{"policy_logits", {LayerSpec::fully_connected(3)}}, {"value", {LayerSpec::fully_connected(1)}}}};
  const auto r = check_seed(spec, GetParam(), 2);
  EXPECT_LE(r.max_relative_error, 1e-4) << r.worst_parameter;
}

INSTANTIATE_TEST_SUITE_P(Seeds, LayerGradient, ::testing::Range(1, 21));

TEST(FiniteDiff, LinearLayerIsNearlyExact) {
  Network<double> net(single_head({4}, {LayerSpec::fully_connected(3)}));
  Rng rng(9);
  const auto p = random_params(net, rng);
  const auto r = finite_diff_check(net, p, random_tensor({4}, rng), 1e-5, 1e-7);
  EXPECT_TRUE(r.passed);
  EXPECT_LE(r.max_relative_error, 1e-7);
}

TEST(FiniteDiff, CorruptedEntryIsReportedByName) {
  Network<double> net(single_head({4}, {LayerSpec::fully_connected(3), LayerSpec::relu(), LayerSpec::fully_connected(2)}));
  Rng rng(10);
  const auto p = random_params(net, rng);
  const Tensor<double> x = random_tensor({4}, rng);
  GradCheckOptions opt;
  // The output bias gradient equals the projection weight, so it is never zero.
  opt.corrupt = [](ParameterSet<double>& g) { g["trunk.2.fully_connected.bias"][1] *= 2.0; };
  const auto r = finite_diff_check(net, p, std::span<const Tensor<double>>(&x, 1), {}, opt);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.max_relative_error, opt.tolerance);
  EXPECT_EQ(r.worst_parameter, "trunk.2.fully_connected.bias");
  EXPECT_EQ(r.worst_index, 1u);
}

TEST(FiniteDiff, RejectsNonPositiveStep) {
  Network<double> net(single_head({2}, {LayerSpec::fully_connected(1)}));
  Rng rng(11);
  EXPECT_THROW(finite_diff_check(net, net.init_parameters(rng), Tensor<double>({2}), 0.0, 1e-4), ParameterError);
}

// ---------------------------------------------------------------- optimizer

TEST(Clip, ClampsToThreshold) {
  ParameterSet<double> g;
  g.add("g", Tensor<double>({3}, std::vector<double>{15, -12, 3}));
  const double frac = clip_gradients(g, 10.0);
  EXPECT_EQ(g["g"].storage(), (std::vector<double>{10, -10, 3}));
  EXPECT_NEAR(frac, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(clip_gradients(g, 10.0), 0.0);
}

TEST(Clip, IsIdempotent) {
  Rng rng(12);
  ParameterSet<double> g;
  g.add("a", random_tensor({50}, rng, -30, 30));
  g.add("b", random_tensor({4, 4}, rng, -30, 30));
  clip_gradients(g, 10.0);
  const auto once = g;
  clip_gradients(g, 10.0);
  EXPECT_TRUE(bit_equal(once, g));
  EXPECT_THROW(clip_gradients(g, 0.0), ParameterError);
}

TEST(RmsProp, ZeroGradientOnlyDecaysStats) {
  ParameterSet<double> p, g, m;
  p.add("w", Tensor<double>({2}, std::vector<double>{1.5, -2}));
  g.add("w", Tensor<double>({2}));
  m.add("w", Tensor<double>({2}, std::vector<double>{4, 8}));
  rmsprop_step(p, g, m, {0.1, 0.99, 1e-8});
  EXPECT_EQ(p["w"].storage(), (std::vector<double>{1.5, -2}));
  EXPECT_DOUBLE_EQ(m["w"][0], 0.99 * 4);
  EXPECT_DOUBLE_EQ(m["w"][1], 0.99 * 8);
  EXPECT_EQ(p.version(), 1u);
}

TEST(RmsProp, SingleScalarStep) {
  ParameterSet<double> p, g, m;
  p.add("w", Tensor<double>({1}, 2.0));
  g.add("w", Tensor<double>({1}, 0.5));
  m.add("w", Tensor<double>({1}));
  rmsprop_step(p, g, m, {0.01, 0.99, 1e-8});
  EXPECT_DOUBLE_EQ(p["w"][0], 2.0 - 0.01 * 0.5 / std::sqrt(0.01 * 0.25 + 1e-8));
}

TEST(RmsProp, QuadraticBowlDecreasesMonotonicallyAfterWarmup) {
  // f(x, y) = x^2 + 10 y^2; the same recurrence is replayed by hand in scalars.
  ParameterSet<double> p, g, m;
  p.add("xy", Tensor<double>({2}, std::vector<double>{3.0, -2.0}));
  g.add("xy", Tensor<double>({2}));
  m.add("xy", Tensor<double>({2}));
  double x = 3.0, y = -2.0, mx = 0.0, my = 0.0;
  const double lr = 0.01, rho = 0.99, eps = 1e-8;
  double prev = 0.0;
  for (int step = 0; step < 100; ++step) {
    g["xy"][0] = 2 * p["xy"][0];
    g["xy"][1] = 20 * p["xy"][1];
    rmsprop_step(p, g, m, {lr, rho, eps});
    const double gx = 2 * x, gy = 20 * y;
    mx = rho * mx + (1 - rho) * gx * gx;
    my = rho * my + (1 - rho) * gy * gy;
    x -= lr * gx / std::sqrt(mx + eps);
    y -= lr * gy / std::sqrt(my + eps);
    EXPECT_NEAR(p["xy"][0], x, 1e-12);
    EXPECT_NEAR(p["xy"][1], y, 1e-12);
    const double loss = x * x + 10 * y * y;
    if (step > 5) {
      EXPECT_LT(loss, prev) << "step " << step;
    }
    prev = loss;
  }
}

TEST(RmsProp, LayoutMismatchIsError) {
  ParameterSet<double> p, g, m;
  p.add("w", Tensor<double>({2}));
  g.add("w", Tensor<double>({3}));
  m.add("w", Tensor<double>({2}));
  EXPECT_THROW(rmsprop_step(p, g, m, {}), ShapeError);
}

TEST(LinearLr, Schedule) {
  const std::uint64_t T = 1000;
  EXPECT_EQ(linear_lr(2e-5, 0, T), 2e-5);
  EXPECT_DOUBLE_EQ(linear_lr(2e-5, T / 2, T), 1e-5);
  EXPECT_EQ(linear_lr(2e-5, T, T), 0.0);
  EXPECT_EQ(linear_lr(2e-5, T + 5, T), 0.0);
}

// ---------------------------------------------------------------- checkpoint

TEST(Checkpoint, RoundTripIsBitExact) {
  Network<float> net({{1, 6, 6},
                      {LayerSpec::conv2d(2, 3, 3), LayerSpec::relu(), LayerSpec::fully_connected(4)},
                      {{"q_values", {LayerSpec::fully_connected(3)}}}});
  Rng rng(13);
  auto p = net.init_parameters(rng);
  p.set_version(987654321012345ULL);
  auto stats = p.zeros_like();
  for (std::size_t i = 0; i < stats.size(); ++i)
    for (auto& v : stats[i].values()) v = static_cast<float>(uniform01(rng));
  const auto path = std::filesystem::temp_directory_path() / "gridrl_ckpt_roundtrip.bin";
  save_checkpoint(p, &stats, path);
  const auto back = load_checkpoint<float>(path);
  EXPECT_TRUE(bit_equal(back.params, p));
  EXPECT_TRUE(values_bit_equal(back.stats, stats));
  EXPECT_EQ(back.params.version(), 987654321012345ULL);
  std::filesystem::remove(path);
}

TEST(Checkpoint, WrongMagicIsRejected) {
  std::stringstream buf;
  ParameterSet<float> p;
  p.add("w", Tensor<float>({1}, 1.0f));
  write_checkpoint(buf, p);
  std::string bytes = buf.str();
  bytes[3] = 'X';
  std::istringstream in(bytes);
  EXPECT_THROW(read_checkpoint<float>(in), IoError);
}

TEST(Checkpoint, EveryTruncationIsRejected) {
  std::stringstream buf;
  ParameterSet<float> p;
  p.add("layer.weight", Tensor<float>({2, 2}, std::vector<float>{1, 2, 3, 4}));
  p.add("layer.bias", Tensor<float>({2}, 0.5f));
  write_checkpoint(buf, p);
  const std::string bytes = buf.str();
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    std::istringstream in(bytes.substr(0, n));
    EXPECT_THROW(read_checkpoint<float>(in), IoError) << "prefix " << n;
  }
  std::istringstream trailing(bytes + "x");
  EXPECT_THROW(read_checkpoint<float>(trailing), IoError);
}

TEST(Checkpoint, ReadsIndependentlyWrittenFixture) {
  // Fixture bytes come from tests/fixtures/gen/make_checkpoint.py.
  const auto ck = load_checkpoint<float>(std::string(GRIDRL_FIXTURES) + "/checkpoint_v1.bin");
  ASSERT_EQ(ck.params.size(), 2u);
  EXPECT_EQ(ck.params.version(), 42u);
  EXPECT_EQ(ck.params.name(0), "trunk.0.fully_connected.weight");
  EXPECT_EQ(ck.params[0].shape(), (Shape{2, 3}));
  EXPECT_EQ(ck.params[0].storage(), (std::vector<float>{0.5f, -1.25f, 3.0f, 0.0f, 1e-3f, -7.5f}));
  EXPECT_EQ(ck.params[1].storage(), (std::vector<float>{0.25f, -0.5f}));
  EXPECT_EQ(ck.stats["trunk.0.fully_connected.bias"].storage(), (std::vector<float>{0.125f, 0.0625f}));

  // Writing the same content reproduces the fixture byte for byte.
  std::ostringstream out;
  write_checkpoint(out, ck.params, &ck.stats);
  std::ifstream fixture(std::string(GRIDRL_FIXTURES) + "/checkpoint_v1.bin", std::ios::binary);
  const std::string expected((std::istreambuf_iterator<char>(fixture)), std::istreambuf_iterator<char>());
  EXPECT_EQ(out.str(), expected);
}
