#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "artmetric/nn/adam.hpp"
#include "artmetric/nn/layers.hpp"
#include "artmetric/nn/model.hpp"

using namespace artmetric;
using namespace artmetric::nn;

namespace {

Tensor random_tensor(std::vector<int> shape, uint64_t seed, double scale = 1.0) {
  Tensor t(std::move(shape));
  SeededRng rng(seed);
  for (auto& v : t.data) v = static_cast<float>(rng.normal() * scale);
  return t;
}

// Scalar probe loss L = sum_i w_i * y_i with fixed random w, so dL/dy = w.
struct Probe {
  Tensor w;
  explicit Probe(const Tensor& y, uint64_t seed) : w(y.shape) {
    SeededRng rng(seed);
    for (auto& v : w.data) v = static_cast<float>(rng.normal());
  }
  double loss(const Tensor& y) const {
    double s = 0;
    for (size_t i = 0; i < y.size(); ++i) s += static_cast<double>(w.data[i]) * y.data[i];
    return s;
  }
};

// Central-difference check of dL/dx against layer.backward. Returns the
// worst relative error over sampled coordinates.
double input_grad_error(Layer& layer, Tensor x, uint64_t probe_seed, float eps = 1e-2f,
                        size_t max_coords = 40) {
  Tensor y = layer.forward(x, true);
  Probe probe(y, probe_seed);
  Tensor dx = layer.backward(probe.w);
  REQUIRE(dx.shape == x.shape);

  double worst = 0;
  const size_t stride = std::max<size_t>(1, x.size() / max_coords);
  for (size_t i = 0; i < x.size(); i += stride) {
    Tensor xp = x, xm = x;
    xp.data[i] += eps;
    xm.data[i] -= eps;
    const double lp = probe.loss(layer.forward(xp, true));
    const double lm = probe.loss(layer.forward(xm, true));
    const double fd = (lp - lm) / (2.0 * eps);
    const double an = dx.data[i];
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
    worst = std::max(worst, std::abs(fd - an) / denom);
  }
  return worst;
}

// Same check for every trainable parameter of the layer.
double param_grad_error(Layer& layer, const Tensor& x, uint64_t probe_seed, float eps = 1e-2f,
                        size_t max_coords = 30) {
  Tensor y = layer.forward(x, true);
  Probe probe(y, probe_seed);
  std::vector<Param*> params;
  layer.collect_params(params);
  for (auto* p : params) p->grad.zero();
  layer.backward(probe.w);

  double worst = 0;
  for (auto* p : params) {
    const size_t stride = std::max<size_t>(1, p->value.size() / max_coords);
    for (size_t i = 0; i < p->value.size(); i += stride) {
      const float saved = p->value.data[i];
      p->value.data[i] = saved + eps;
      const double lp = probe.loss(layer.forward(x, true));
      p->value.data[i] = saved - eps;
      const double lm = probe.loss(layer.forward(x, true));
      p->value.data[i] = saved;
      const double fd = (lp - lm) / (2.0 * eps);
      const double an = p->grad.data[i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
      worst = std::max(worst, std::abs(fd - an) / denom);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("Conv2d gradients match central differences") {
  Conv2d conv(3, 4, 3, 1, 1, true);
  SeededRng rng(1);
  conv.init(rng);
  Tensor x = random_tensor({2, 3, 6, 6}, 2);
  CHECK(input_grad_error(conv, x, 100) < 2e-2);
  CHECK(param_grad_error(conv, x, 101) < 2e-2);
}

TEST_CASE("Conv2d strided output shape") {
  Conv2d conv(3, 8, 3, 2, 1, false);
  SeededRng rng(3);
  conv.init(rng);
  Tensor y = conv.forward(random_tensor({1, 3, 8, 8}, 4), false);
  CHECK(y.shape == std::vector<int>{1, 8, 4, 4});
}

TEST_CASE("BatchNorm2d gradients match central differences in train mode") {
  BatchNorm2d bn(3);
  SeededRng rng(5);
  bn.init(rng);
  Tensor x = random_tensor({4, 3, 5, 5}, 6);
  CHECK(input_grad_error(bn, x, 102, 1e-2f) < 2e-2);
  CHECK(param_grad_error(bn, x, 103, 1e-2f) < 2e-2);
}

TEST_CASE("BatchNorm2d train output is normalized; eval uses running stats") {
  BatchNorm2d bn(2);
  SeededRng rng(7);
  bn.init(rng);
  Tensor x = random_tensor({8, 2, 4, 4}, 8, 2.0);
  Tensor y = bn.forward(x, true);
  // with gamma=1, beta=0 each channel of y has ~zero mean, unit variance
  for (int c = 0; c < 2; ++c) {
    double sum = 0, sq = 0;
    long long n = 0;
    for (int b = 0; b < 8; ++b)
      for (int h = 0; h < 4; ++h)
        for (int w = 0; w < 4; ++w) {
          sum += y.at(b, c, h, w);
          sq += static_cast<double>(y.at(b, c, h, w)) * y.at(b, c, h, w);
          ++n;
        }
    CHECK(std::abs(sum / n) < 1e-4);
    CHECK(sq / n == doctest::Approx(1.0).epsilon(1e-2));
  }
  // eval mode must be a pure function of running stats: same input twice,
  // same output, and running stats must not change
  Tensor rm = bn.running_mean(), rv = bn.running_var();
  Tensor e1 = bn.forward(x, false);
  Tensor e2 = bn.forward(x, false);
  CHECK(e1.data == e2.data);
  CHECK(bn.running_mean().data == rm.data);
  CHECK(bn.running_var().data == rv.data);
}

TEST_CASE("ReLU masks negatives in forward and backward") {
  ReLU relu;
  Tensor x({1, 4});
  x.data = {-1.f, 2.f, 0.f, -3.f};
  Tensor y = relu.forward(x, true);
  CHECK(y.data == std::vector<float>{0.f, 2.f, 0.f, 0.f});
  Tensor dy({1, 4});
  dy.data = {5.f, 5.f, 5.f, 5.f};
  Tensor dx = relu.backward(dy);
  CHECK(dx.data[0] == 0.f);
  CHECK(dx.data[1] == 5.f);
  CHECK(dx.data[3] == 0.f);
}

TEST_CASE("MaxPool2d forward picks maxima and routes gradient to the argmax") {
  MaxPool2d pool(2, 2, 0);
  Tensor x({1, 1, 2, 2});
  x.data = {1.f, 4.f, 2.f, 3.f};
  Tensor y = pool.forward(x, true);
  REQUIRE(y.shape == std::vector<int>{1, 1, 1, 1});
  CHECK(y.data[0] == 4.f);
  Tensor dy({1, 1, 1, 1});
  dy.data = {7.f};
  Tensor dx = pool.backward(dy);
  CHECK(dx.data == std::vector<float>{0.f, 7.f, 0.f, 0.f});
}

TEST_CASE("MaxPool2d gradient matches central differences away from ties") {
  MaxPool2d pool(3, 2, 1);
  Tensor x = random_tensor({2, 2, 7, 7}, 9);
  CHECK(input_grad_error(pool, x, 104, 1e-3f) < 2e-2);
}

TEST_CASE("Linear gradients match central differences") {
  Linear lin(6, 4);
  SeededRng rng(10);
  lin.init(rng);
  Tensor x = random_tensor({3, 6}, 11);
  CHECK(input_grad_error(lin, x, 105) < 2e-2);
  CHECK(param_grad_error(lin, x, 106) < 2e-2);
}

TEST_CASE("GlobalAvgPool averages spatial positions and spreads gradient evenly") {
  GlobalAvgPool gap;
  Tensor x({1, 2, 2, 2});
  x.data = {1.f, 2.f, 3.f, 4.f, 10.f, 20.f, 30.f, 40.f};
  Tensor y = gap.forward(x, true);
  REQUIRE(y.shape == std::vector<int>{1, 2});
  CHECK(y.at(0, 0) == doctest::Approx(2.5));
  CHECK(y.at(0, 1) == doctest::Approx(25.0));
  Tensor dy({1, 2});
  dy.data = {4.f, 8.f};
  Tensor dx = gap.backward(dy);
  for (int i = 0; i < 4; ++i) {
    CHECK(dx.data[static_cast<size_t>(i)] == doctest::Approx(1.0f));
    CHECK(dx.data[static_cast<size_t>(4 + i)] == doctest::Approx(2.0f));
  }
}

TEST_CASE("ResidualBlock gradients match central differences") {
  // a smaller step keeps finite differencing away from ReLU kinks
  SUBCASE("identity shortcut") {
    ResidualBlock block(4, 4, 1);
    SeededRng rng(12);
    block.init(rng);
    Tensor x = random_tensor({2, 4, 5, 5}, 13);
    CHECK(input_grad_error(block, x, 107, 1e-3f) < 3e-2);
    CHECK(param_grad_error(block, x, 108, 1e-3f) < 3e-2);
  }
  SUBCASE("projection shortcut with stride") {
    ResidualBlock block(3, 6, 2);
    SeededRng rng(14);
    block.init(rng);
    Tensor x = random_tensor({2, 3, 6, 6}, 15);
    CHECK(input_grad_error(block, x, 109, 1e-3f) < 3e-2);
    CHECK(param_grad_error(block, x, 110, 1e-3f) < 3e-2);
  }
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
  std::vector<double> logits{1.0, 2.0, 3.0};
  auto p = softmax(logits);
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p[2] > p[1]);
  std::vector<double> shifted{1001.0, 1002.0, 1003.0};
  auto q = softmax(shifted);
  for (int i = 0; i < 3; ++i) CHECK(p[static_cast<size_t>(i)] == doctest::Approx(q[static_cast<size_t>(i)]).epsilon(1e-9));
}

TEST_CASE("softmax_cross_entropy value and gradient") {
  Tensor logits({2, 3});
  logits.data = {0.5f, -0.2f, 1.0f, 2.0f, 0.0f, -1.0f};
  std::vector<int> labels{2, 0};
  Tensor dlogits, probs;
  const double loss = softmax_cross_entropy(logits, labels, &dlogits, &probs);

  // hand-computed mean negative log-likelihood
  auto row = [&](int r) {
    std::vector<double> v(3);
    for (int c = 0; c < 3; ++c) v[static_cast<size_t>(c)] = logits.at(r, c);
    return softmax(v);
  };
  const double expect = -(std::log(row(0)[2]) + std::log(row(1)[0])) / 2.0;
  CHECK(loss == doctest::Approx(expect).epsilon(1e-6));

  // analytic gradient: (p - onehot) / N
  for (int r = 0; r < 2; ++r) {
    auto p = row(r);
    for (int c = 0; c < 3; ++c) {
      const double g = (p[static_cast<size_t>(c)] - (labels[static_cast<size_t>(r)] == c ? 1.0 : 0.0)) / 2.0;
      CHECK(dlogits.at(r, c) == doctest::Approx(g).epsilon(1e-5));
      CHECK(probs.at(r, c) == doctest::Approx(p[static_cast<size_t>(c)]).epsilon(1e-5));
    }
  }
}

TEST_CASE("Adam first step moves each weight by -lr against the gradient sign") {
  Param p;
  p.name = "w";
  p.value = Tensor({2});
  p.value.data = {1.0f, -2.0f};
  p.grad = Tensor({2});
  p.grad.data = {0.3f, -0.7f};
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  Adam opt({&p}, cfg);
  opt.step();
  // with bias correction the first step is exactly -lr * g/(|g| + ~eps)
  CHECK(p.value.data[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-3));
  CHECK(p.value.data[1] == doctest::Approx(-2.0 + 0.1).epsilon(1e-3));
}

TEST_CASE("Adam weight decay adds an L2 pull toward zero") {
  Param p;
  p.name = "w";
  p.value = Tensor({1});
  p.value.data = {5.0f};
  p.grad = Tensor({1});
  p.grad.data = {0.0f};
  AdamConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.1;
  Adam opt({&p}, cfg);
  opt.step();
  CHECK(p.value.data[0] < 5.0f);
}

TEST_CASE("ConvNet resnet_micro: shapes, determinism, and known embedding widths") {
  CHECK(ConvNet::embedding_dim_for("resnet18") == 512);
  CHECK(ConvNet::embedding_dim_for("resnet_micro") == 64);
  CHECK_THROWS(ConvNet::embedding_dim_for("vgg"));

  ConvNet net("resnet_micro", 5);
  SeededRng rng(42);
  net.init(rng);
  Tensor x = random_tensor({2, 3, 32, 32}, 77);
  Tensor feat = net.forward_features(x, false);
  REQUIRE(feat.shape == std::vector<int>{2, 64});
  Tensor logits = net.forward_head(feat, false);
  REQUIRE(logits.shape == std::vector<int>{2, 5});
  for (float v : logits.data) CHECK(std::isfinite(v));

  // same seed, same weights, same output
  ConvNet net2("resnet_micro", 5);
  SeededRng rng2(42);
  net2.init(rng2);
  Tensor feat2 = net2.forward_features(x, false);
  CHECK(feat.data == feat2.data);

  // different seed diverges
  ConvNet net3("resnet_micro", 5);
  SeededRng rng3(43);
  net3.init(rng3);
  Tensor feat3 = net3.forward_features(x, false);
  CHECK(feat.data != feat3.data);
}

TEST_CASE("ConvNet end-to-end training step reduces loss on a tiny batch") {
  ConvNet net("resnet_micro", 2);
  SeededRng rng(21);
  net.init(rng);
  Tensor x = random_tensor({4, 3, 32, 32}, 22, 0.5);
  std::vector<int> labels{0, 1, 0, 1};
  AdamConfig cfg;
  cfg.lr = 5e-3;
  cfg.weight_decay = 0.0;
  Adam opt(net.params(), cfg);

  auto run_loss = [&](bool train) {
    Tensor feat = net.forward_features(x, train);
    Tensor logits = net.forward_head(feat, train);
    Tensor dlogits;
    const double loss = softmax_cross_entropy(logits, labels, train ? &dlogits : nullptr, nullptr);
    if (train) {
      net.zero_grads();
      net.backward_head(dlogits);
      opt.step();
    }
    return loss;
  };

  const double first = run_loss(true);
  double last = first;
  for (int i = 0; i < 8; ++i) last = run_loss(true);
  CHECK(last < first);
}
