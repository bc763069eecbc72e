#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rpmlab/gradcheck.hpp"
#include "rpmlab/ops.hpp"
#include "rpmlab/rng.hpp"
#include "rpmlab/tensor.hpp"

using namespace rpmlab;

namespace {

Tensor<double> randn(Shape shape, Rng& rng, bool requires_grad = true) {
  std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
  for (auto& v : data) v = rng.normal();
  return Tensor<double>::from_data(std::move(shape), std::move(data), requires_grad);
}

}  // namespace

TEST_CASE("add/mul/matmul basics") {
  auto a = Tensor<double>::from_data({2}, {1, 2});
  auto b = Tensor<double>::from_data({2}, {3, 4});
  auto c = add(a, b);
  CHECK(c.value() == std::vector<double>{4, 6});

  auto eye = Tensor<double>::from_data({2, 2}, {1, 0, 0, 1});
  auto m = Tensor<double>::from_data({2, 2}, {5, 6, 7, 8});
  CHECK(matmul(eye, m).value() == m.value());

  auto x = Tensor<double>::from_data({1}, {3}, true);
  auto y = sum(mul(x, x));
  y.backward();
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("add broadcast bias and shape errors") {
  auto a = Tensor<double>::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  auto bias = Tensor<double>::from_data({3}, {10, 20, 30}, true);
  auto out = add(a, bias);
  CHECK(out.value() == std::vector<double>{11, 22, 33, 14, 25, 36});
  sum(out).backward();
  CHECK(bias.grad() == std::vector<double>{2, 2, 2});

  auto bad = Tensor<double>::from_data({4}, {1, 2, 3, 4});
  CHECK_THROWS_WITH_AS(add(a, bad), doctest::Contains("(2,3)"), std::invalid_argument);
  CHECK_THROWS_AS(mul(a, bad), std::invalid_argument);
  CHECK_THROWS_AS(matmul(a, a), std::invalid_argument);
}

TEST_CASE("conv2d forward examples") {
  auto input = Tensor<double>::filled({1, 1, 3, 3}, 1.0);
  auto kernel = Tensor<double>::filled({1, 1, 2, 2}, 1.0);
  auto bias = Tensor<double>::zeros({1});
  auto out = conv2d(input, kernel, bias, 1, 0);
  CHECK(out.shape() == Shape{1, 1, 2, 2});
  for (double v : out.value()) CHECK(v == doctest::Approx(4.0));

  auto zk = Tensor<double>::zeros({1, 1, 2, 2});
  auto b2 = Tensor<double>::from_data({1}, {0.5});
  auto out2 = conv2d(input, zk, b2, 1, 0);
  for (double v : out2.value()) CHECK(v == doctest::Approx(0.5));

  auto mismatched = Tensor<double>::filled({1, 2, 3, 3}, 1.0);
  CHECK_THROWS_AS(conv2d(mismatched, kernel, bias, 1, 0), std::invalid_argument);
  auto big_kernel = Tensor<double>::filled({1, 1, 5, 5}, 1.0);
  CHECK_THROWS_AS(conv2d(input, big_kernel, bias, 1, 0), std::invalid_argument);
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(71);
  auto input = randn({2, 3, 8, 8}, rng);
  auto kernel = randn({4, 3, 3, 3}, rng);
  auto bias = randn({4}, rng);
  // weight the output so the scalar loss exercises every output element
  auto weights = randn({2 * 4 * 8 * 8}, rng, false);
  auto f = [&] {
    auto out = conv2d(input, kernel, bias, 1, 1);
    return sum(mul(reshape(out, {2 * 4 * 8 * 8}), weights));
  };
  auto report = grad_check(f, {{"input", input}, {"kernel", kernel}, {"bias", bias}}, 1e-5);
  CHECK(report.max_rel_err() < 1e-4);
}

TEST_CASE("conv2d stride 2 gradcheck") {
  Rng rng(5);
  auto input = randn({1, 2, 7, 7}, rng);
  auto kernel = randn({3, 2, 3, 3}, rng);
  auto bias = randn({3}, rng);
  auto weights = randn({3 * 3 * 3}, rng, false);
  auto f = [&] {
    auto out = conv2d(input, kernel, bias, 2, 0);
    return sum(mul(reshape(out, {3 * 3 * 3}), weights));
  };
  auto report = grad_check(f, {{"input", input}, {"kernel", kernel}, {"bias", bias}});
  CHECK(report.max_rel_err() < 1e-4);
}

TEST_CASE("maxpool and global_avg_pool") {
  auto x = Tensor<double>::from_data({1, 1, 2, 2}, {1, 2, 3, 4}, true);
  auto pooled = maxpool2d(x, 2);
  CHECK(pooled.value() == std::vector<double>{4});
  sum(pooled).backward();
  CHECK(x.grad() == std::vector<double>{0, 0, 0, 1});

  auto c = Tensor<double>::filled({2, 3, 4, 4}, 2.5);
  auto g = global_avg_pool(c);
  CHECK(g.shape() == Shape{2, 3});
  for (double v : g.value()) CHECK(v == doctest::Approx(2.5));

  auto odd = Tensor<double>::filled({1, 1, 3, 3}, 1.0);
  CHECK_THROWS_AS(maxpool2d(odd, 2), std::invalid_argument);
}

TEST_CASE("maxpool tie breaks to first row-major index") {
  auto x = Tensor<double>::from_data({1, 1, 2, 2}, {7, 7, 7, 7}, true);
  auto pooled = maxpool2d(x, 2);
  sum(pooled).backward();
  CHECK(x.grad() == std::vector<double>{1, 0, 0, 0});
}

TEST_CASE("pool gradients match finite differences") {
  Rng rng(12);
  auto input = randn({2, 2, 4, 4}, rng);
  auto weights = randn({2 * 2 * 2 * 2}, rng, false);
  auto f1 = [&] {
    return sum(mul(reshape(maxpool2d(input, 2), {2 * 2 * 2 * 2}), weights));
  };
  CHECK(grad_check(f1, {{"input", input}}).max_rel_err() < 1e-4);
  auto w2 = randn({4}, rng, false);
  auto f2 = [&] { return sum(mul(reshape(global_avg_pool(input), {4}), w2)); };
  CHECK(grad_check(f2, {{"input", input}}).max_rel_err() < 1e-4);
}

TEST_CASE("relu and sigmoid") {
  auto x = Tensor<double>::from_data({3}, {-3, 0, 3});
  auto r = relu(x);
  CHECK(r.value() == std::vector<double>{0, 0, 3});

  auto s = sigmoid(Tensor<double>::from_data({1}, {0.0}));
  CHECK(s.value()[0] == doctest::Approx(0.5));

  auto big = sigmoid(Tensor<double>::from_data({2}, {800.0, -800.0}));
  CHECK(big.value()[0] == doctest::Approx(1.0));
  CHECK(big.value()[1] == doctest::Approx(0.0));
  CHECK(std::isfinite(big.value()[0]));
  CHECK(std::isfinite(big.value()[1]));

  Rng rng(3);
  auto input = randn({6}, rng);
  auto w = randn({6}, rng, false);
  auto f = [&] { return sum(mul(sigmoid(input), w)); };
  CHECK(grad_check(f, {{"input", input}}).max_rel_err() < 1e-4);
}

TEST_CASE("dropout modes") {
  Rng rng(9);
  auto x = Tensor<double>::from_data({4}, {1, 2, 3, 4});
  auto eval_out = dropout(x, 0.5, RunMode::Eval, &rng);
  CHECK(eval_out.value() == x.value());

  auto p0 = dropout(x, 0.0, RunMode::Train, &rng);
  CHECK(p0.value() == x.value());

  CHECK_THROWS_AS(dropout(x, 1.0, RunMode::Train, &rng), std::invalid_argument);
  CHECK_THROWS_AS(dropout(x, -0.1, RunMode::Train, &rng), std::invalid_argument);

  // Monte-Carlo expectation of inverted dropout on a constant-1 tensor
  const int trials = 10000;
  auto ones = Tensor<double>::filled({8}, 1.0);
  std::vector<double> mean(8, 0.0);
  for (int t = 0; t < trials; ++t) {
    auto out = dropout(ones, 0.5, RunMode::Train, &rng);
    for (int i = 0; i < 8; ++i) mean[i] += out.value()[i];
  }
  for (int i = 0; i < 8; ++i) {
    mean[i] /= trials;
    CHECK(mean[i] > 0.97);
    CHECK(mean[i] < 1.03);
  }
}

TEST_CASE("softmax cross entropy values and gradient") {
  auto uniform = Tensor<double>::zeros({8});
  auto loss = softmax_cross_entropy(uniform, 3);
  CHECK(loss.item() == doctest::Approx(std::log(8.0)).epsilon(1e-12));

  std::vector<double> dominant(8, 0.0);
  dominant[0] = 100.0;
  auto sure = softmax_cross_entropy(Tensor<double>::from_data({8}, dominant), 0);
  CHECK(sure.item() < 1e-9);

  CHECK_THROWS_AS(softmax_cross_entropy(uniform, 8), std::invalid_argument);
  CHECK_THROWS_AS(softmax_cross_entropy(uniform, -1), std::invalid_argument);

  // gradient equals softmax(logits) - onehot(target)
  Rng rng(4);
  auto logits = randn({8}, rng);
  auto loss2 = softmax_cross_entropy(logits, 2);
  loss2.backward();
  double m = *std::max_element(logits.value().begin(), logits.value().end());
  double denom = 0;
  for (double v : logits.value()) denom += std::exp(v - m);
  for (int i = 0; i < 8; ++i) {
    double p = std::exp(logits.value()[i] - m) / denom;
    double expect = p - (i == 2 ? 1.0 : 0.0);
    CHECK(logits.grad()[i] == doctest::Approx(expect).epsilon(1e-10));
  }
  auto f = [&] { return softmax_cross_entropy(logits, 2); };
  CHECK(grad_check(f, {{"logits", logits}}).max_rel_err() < 1e-4);
}

TEST_CASE("binary cross entropy values and gradient through sigmoid") {
  auto half = Tensor<double>::filled({10}, 0.5);
  std::vector<double> target{1, 1, 0, 0, 0, 0, 0, 0, 0, 0};
  auto loss = binary_cross_entropy(half, target);
  CHECK(loss.item() == doctest::Approx(10.0 * std::log(2.0)).epsilon(1e-12));

  std::vector<double> exact(10);
  for (int i = 0; i < 10; ++i) exact[i] = target[i];
  auto fit = binary_cross_entropy(Tensor<double>::from_data({10}, exact), target);
  CHECK(fit.item() < 1e-5);

  std::vector<double> short_target{1, 0};
  CHECK_THROWS_AS(binary_cross_entropy(half, short_target), std::invalid_argument);

  // d(bce(sigmoid(s)))/ds == sigmoid(s) - target
  Rng rng(17);
  auto scores = randn({10}, rng);
  auto probs = sigmoid(scores);
  auto loss2 = binary_cross_entropy(probs, target);
  loss2.backward();
  for (int i = 0; i < 10; ++i) {
    double p = stable_sigmoid(scores.value()[i]);
    CHECK(scores.grad()[i] == doctest::Approx(p - target[i]).epsilon(1e-8));
  }
  auto f = [&] { return binary_cross_entropy(sigmoid(scores), target); };
  CHECK(grad_check(f, {{"scores", scores}}).max_rel_err() < 1e-4);
}

TEST_CASE("backward basics") {
  auto x = Tensor<double>::from_data({3}, {1, 2, 3}, true);
  auto loss = sum(mul(x, x));
  loss.backward();
  CHECK(x.grad() == std::vector<double>{2, 4, 6});

  // constant function: zero gradient
  auto c = Tensor<double>::filled({3}, 5.0, false);
  auto y = add(x, c);
  auto loss2 = sum(mul(c, c));
  (void)y;
  loss2.backward();

  auto vec = Tensor<double>::from_data({2}, {1, 2}, true);
  CHECK_THROWS_AS(vec.backward(), std::invalid_argument);
}

TEST_CASE("backward zero-initializes accumulators each pass") {
  auto x = Tensor<double>::from_data({2}, {1, 2}, true);
  auto loss = sum(mul(x, x));
  loss.backward();
  loss.backward();
  CHECK(x.grad() == std::vector<double>{2, 4});
}

TEST_CASE("tape linearity: backward of a sum equals sum of backwards") {
  Rng rng(23);
  auto x = randn({5}, rng);
  auto w = randn({5}, rng, false);
  auto l1 = [&] { return sum(mul(x, x)); };
  auto l2 = [&] { return sum(mul(x, w)); };

  l1().backward();
  auto g1 = x.grad();
  l2().backward();
  auto g2 = x.grad();
  add(l1(), l2()).backward();
  auto gsum = x.grad();
  for (int i = 0; i < 5; ++i) CHECK(gsum[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-12));
}

TEST_CASE("losses are non-negative and softmax preserves argmax") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    auto logits = randn({8}, rng, false);
    int target = static_cast<int>(rng.below(8));
    CHECK(softmax_cross_entropy(logits, target).item() >= 0.0);

    // softmax monotonicity
    double m = *std::max_element(logits.value().begin(), logits.value().end());
    double denom = 0;
    for (double v : logits.value()) denom += std::exp(v - m);
    int argmax_logits = 0, argmax_probs = 0;
    double best_l = logits.value()[0], best_p = std::exp(logits.value()[0] - m) / denom;
    for (int i = 1; i < 8; ++i) {
      if (logits.value()[i] > best_l) {
        best_l = logits.value()[i];
        argmax_logits = i;
      }
      double p = std::exp(logits.value()[i] - m) / denom;
      if (p > best_p) {
        best_p = p;
        argmax_probs = i;
      }
    }
    CHECK(argmax_logits == argmax_probs);

    std::vector<double> t(10);
    for (auto& v : t) v = rng.below(2);
    std::vector<double> p(10);
    for (auto& v : p) v = rng.uniform();
    CHECK(binary_cross_entropy(Tensor<double>::from_data({10}, p), t).item() >= 0.0);
  }
}

TEST_CASE("forward is bit-identical across repeated calls") {
  Rng rng(47);
  auto input = randn({2, 3, 8, 8}, rng, false);
  auto kernel = randn({4, 3, 3, 3}, rng, false);
  auto bias = randn({4}, rng, false);
  auto a = conv2d(input, kernel, bias, 1, 1);
  auto b = conv2d(input, kernel, bias, 1, 1);
  CHECK(a.value() == b.value());
  auto sa = sigmoid(a);
  auto sb = sigmoid(b);
  CHECK(sa.value() == sb.value());
}

TEST_CASE("batch_norm2d gradcheck (trainable, batch stats)") {
  Rng rng(53);
  auto input = randn({3, 2, 4, 4}, rng);
  auto gamma = Tensor<double>::filled({2}, 1.0, true);
  auto beta = Tensor<double>::zeros({2}, true);
  std::vector<double> rmean(2, 0.0), rvar(2, 1.0);
  auto w = randn({3 * 2 * 4 * 4}, rng, false);
  auto f = [&] {
    auto out = batch_norm2d(input, gamma, beta, rmean, rvar, true, false);
    return sum(mul(reshape(out, {3 * 2 * 4 * 4}), w));
  };
  auto report = grad_check(f, {{"input", input}, {"gamma", gamma}, {"beta", beta}});
  CHECK(report.max_rel_err() < 1e-4);

  // frozen path: running stats as constants
  auto f2 = [&] {
    auto out = batch_norm2d(input, gamma, beta, rmean, rvar, false, false);
    return sum(mul(reshape(out, {3 * 2 * 4 * 4}), w));
  };
  CHECK(grad_check(f2, {{"input", input}, {"gamma", gamma}, {"beta", beta}}).max_rel_err() < 1e-4);
}

TEST_CASE("grad_check reports per-parameter errors and step") {
  auto x = Tensor<double>::from_data({2}, {1.0, -2.0}, true);
  auto f = [&] { return sum(mul(x, x)); };
  auto report = grad_check(f, {{"x", x}}, 1e-5);
  REQUIRE(report.per_param.size() == 1);
  CHECK(report.per_param[0].name == "x");
  CHECK(report.step_base == 1e-5);
  CHECK(report.max_rel_err() < 1e-8);
}
