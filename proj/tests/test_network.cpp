#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "rpmlab/adam.hpp"
#include "rpmlab/checkpoint.hpp"
#include "rpmlab/gradcheck.hpp"
#include "rpmlab/network.hpp"

using namespace rpmlab;

namespace {

Tensor<float> random_input(Shape shape, uint64_t seed) {
  Rng rng(seed);
  std::vector<float> data(static_cast<size_t>(shape_numel(shape)));
  for (auto& v : data) v = static_cast<float>(rng.uniform());
  return Tensor<float>::from_data(std::move(shape), std::move(data));
}

std::string temp_path(const char* name) {
  return std::string("/tmp/rpmlab_test_") + name;
}

}  // namespace

TEST_CASE("network forward shapes") {
  NetworkSpec classifier;  // defaults: 16 in, (16,32,64,64), out 8, 32x32
  Rng rng(1);
  Network<float> net(classifier, rng);
  auto out = net.forward(random_input({1, 16, 32, 32}, 2), RunMode::Eval);
  CHECK(out.shape() == Shape{1, 8});

  NetworkSpec scorer;
  scorer.input_channels = 3;
  scorer.out_dim = 1;
  Rng rng2(1);
  Network<float> row_net(scorer, rng2);
  auto score = row_net.forward(random_input({1, 3, 32, 32}, 3), RunMode::Eval);
  CHECK(score.shape() == Shape{1, 1});
}

TEST_CASE("network spec validation") {
  NetworkSpec bad;
  bad.input_channels = 7;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  NetworkSpec collapse;
  collapse.input_size = 8;
  collapse.conv_channels = {4, 4, 4, 4};  // 8 -> 4 -> 2 -> 1 -> pooling 1 fails
  CHECK_THROWS_WITH_AS(collapse.validate(), doctest::Contains("collapses"),
                       std::invalid_argument);

  NetworkSpec out_dim;
  out_dim.out_dim = 4;
  CHECK_THROWS_AS(out_dim.validate(), std::invalid_argument);
}

TEST_CASE("initialization is seed-deterministic") {
  NetworkSpec spec;
  spec.conv_channels = {4, 8};
  spec.input_size = 32;
  Rng a(99), b(99), c(100);
  Network<float> na(spec, a), nb(spec, b), nc(spec, c);
  auto sa = na.export_state(), sb = nb.export_state(), sc = nc.export_state();
  REQUIRE(sa.size() == sb.size());
  bool all_equal = true, differs_from_c = false;
  for (size_t i = 0; i < sa.size(); ++i) {
    all_equal = all_equal && sa[i].data == sb[i].data;
    differs_from_c = differs_from_c || sa[i].data != sc[i].data;
  }
  CHECK(all_equal);
  CHECK(differs_from_c);
}

TEST_CASE("adam zero gradient is a fixed point") {
  auto theta = Tensor<float>::from_data({3}, {1.0f, -2.0f, 0.5f}, true);
  sum(scale(theta, 0.0)).backward();  // zero grads
  std::vector<NamedParam<float>> params{{"theta", theta}};
  AdamState<float> state;
  state.init_like(params);
  for (int i = 0; i < 5; ++i) adam_step(params, state, 0.1);
  CHECK(theta.value() == std::vector<float>{1.0f, -2.0f, 0.5f});
  for (float v : state.m[0]) CHECK(v == 0.0f);
  for (float v : state.v[0]) CHECK(v == 0.0f);
}

TEST_CASE("adam single step matches hand evaluation") {
  // theta=0, g=1, lr=0.1, t=1: bias-corrected update is lr*g/(|g|+eps) ~ -0.1
  auto theta = Tensor<float>::zeros({1}, true);
  auto one = Tensor<float>::filled({1}, 1.0f);
  sum(mul(theta, one)).backward();  // d/dtheta = 1
  std::vector<NamedParam<float>> params{{"theta", theta}};
  AdamState<float> state;
  state.init_like(params);
  adam_step(params, state, 0.1);
  CHECK(theta.value()[0] == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam momentum is nonlinear in the step count") {
  // On a quadratic loss, two steps at lr land elsewhere than one step at 2*lr.
  auto run = [](int steps, double lr) {
    auto theta = Tensor<float>::filled({1}, 1.0f, true);
    std::vector<NamedParam<float>> params{{"theta", theta}};
    AdamState<float> state;
    state.init_like(params);
    for (int i = 0; i < steps; ++i) {
      sum(mul(theta, theta)).backward();
      adam_step(params, state, lr);
    }
    return theta.value()[0];
  };
  CHECK(run(2, 0.1) != run(1, 0.2));
}

TEST_CASE("adam rejects non-finite gradients with the parameter name") {
  auto theta = Tensor<float>::zeros({2}, true);
  sum(theta).backward();
  theta.node()->grad[1] = std::numeric_limits<float>::infinity();
  std::vector<NamedParam<float>> params{{"conv9.weight", theta}};
  AdamState<float> state;
  state.init_like(params);
  CHECK_THROWS_WITH_AS(adam_step(params, state, 0.1), doctest::Contains("conv9.weight"),
                       NumericError);
}

TEST_CASE("learning rate schedule") {
  LrSchedule sched;
  CHECK(sched.at(0) == 0.0002);
  CHECK(sched.at(10) == 0.0001);
  CHECK(sched.at(25) == 0.00005);
  double prev = sched.at(0);
  for (int e = 1; e <= 100; ++e) {
    double lr = sched.at(e);
    CHECK(lr > 0.0);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  NetworkSpec spec;
  spec.conv_channels = {4, 8};
  Rng rng(7);
  Network<float> net(spec, rng);
  auto params = net.parameters();
  AdamState<float> adam;
  adam.init_like(params);
  adam.t = 42;
  adam.m[0][0] = 0.25f;
  adam.v[0][0] = 0.125f;

  auto path = temp_path("ckpt.rpmc");
  save_checkpoint(path, net, &adam, 12345);

  auto loaded = load_checkpoint(path);
  CHECK(loaded.seed == 12345);
  REQUIRE(loaded.adam.has_value());
  CHECK(loaded.adam->t == 42);
  CHECK(loaded.adam->m[0][0] == 0.25f);

  auto input = random_input({2, 16, 32, 32}, 5);
  auto before = net.forward(input, RunMode::Eval).value();
  auto after = loaded.net.forward(input, RunMode::Eval).value();
  CHECK(before == after);

  // save -> load -> save produces byte-identical files
  auto path2 = temp_path("ckpt2.rpmc");
  save_checkpoint(path2, loaded.net, &*loaded.adam, loaded.seed);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("checkpoint rejects truncation, bad magic, and bad version") {
  NetworkSpec spec;
  spec.conv_channels = {4};
  Rng rng(7);
  Network<float> net(spec, rng);
  auto path = temp_path("ckpt3.rpmc");
  save_checkpoint(path, net, nullptr, 1);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  auto write_file = [&](const std::string& data, const char* name) {
    auto p = temp_path(name);
    std::ofstream out(p, std::ios::binary);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    return p;
  };

  auto truncated = write_file(bytes.substr(0, bytes.size() / 2), "trunc.rpmc");
  CHECK_THROWS_WITH_AS(load_checkpoint(truncated), doctest::Contains("truncated"),
                       CheckpointError);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  auto bm = write_file(bad_magic, "badmagic.rpmc");
  CHECK_THROWS_WITH_AS(load_checkpoint(bm), doctest::Contains("magic"), CheckpointError);

  std::string bad_version = bytes;
  bad_version[4] = 9;
  auto bv = write_file(bad_version, "badver.rpmc");
  CHECK_THROWS_WITH_AS(load_checkpoint(bv), doctest::Contains("version"), CheckpointError);

  std::remove(path.c_str());
  std::remove(truncated.c_str());
  std::remove(bm.c_str());
  std::remove(bv.c_str());
}

TEST_CASE("tiny classifier and row scorer pass gradcheck") {
  for (uint64_t seed : {1ull, 2ull}) {
    NetworkSpec spec;
    spec.input_channels = 16;
    spec.conv_channels = {2, 3};
    spec.out_dim = 8;
    spec.input_size = 8;
    Rng rng(seed);
    Network<double> net(spec, rng);
    Rng input_rng(seed + 100);
    std::vector<double> data(16 * 8 * 8);
    for (auto& v : data) v = input_rng.uniform();
    auto input = Tensor<double>::from_data({1, 16, 8, 8}, data);
    auto f = [&] { return softmax_cross_entropy(net.forward(input, RunMode::Eval), 3); };
    std::vector<std::pair<std::string, Tensor<double>>> params;
    for (auto& p : net.parameters()) params.emplace_back(p.name, p.tensor);
    CHECK(grad_check(f, params).max_rel_err() < 1e-4);
  }

  NetworkSpec scorer;
  scorer.input_channels = 3;
  scorer.conv_channels = {2, 2};
  scorer.out_dim = 1;
  scorer.input_size = 8;
  Rng rng(11);
  Network<double> net(scorer, rng);
  Rng input_rng(12);
  std::vector<double> data(10 * 3 * 8 * 8);
  for (auto& v : data) v = input_rng.uniform();
  auto rows = Tensor<double>::from_data({10, 3, 8, 8}, data);
  std::vector<double> target{1, 1, 0, 0, 0, 0, 0, 0, 0, 0};
  auto f = [&] {
    auto probs = sigmoid(reshape(net.forward(rows, RunMode::Eval), {10}));
    return binary_cross_entropy(probs, target);
  };
  std::vector<std::pair<std::string, Tensor<double>>> params;
  for (auto& p : net.parameters()) params.emplace_back(p.name, p.tensor);
  CHECK(grad_check(f, params).max_rel_err() < 1e-4);
}

TEST_CASE("frozen norm keeps affine parameters out of the optimizer") {
  NetworkSpec spec;
  spec.conv_channels = {4};
  spec.norm = NormMode::Frozen;
  Rng rng(3);
  Network<float> net(spec, rng);
  for (auto& p : net.parameters()) {
    CHECK(p.name.find("bn") == std::string::npos);
  }
  NetworkSpec trainable = spec;
  trainable.norm = NormMode::Trainable;
  Rng rng2(3);
  Network<float> net2(trainable, rng2);
  int bn_params = 0;
  for (auto& p : net2.parameters())
    if (p.name.find("bn") != std::string::npos) ++bn_params;
  CHECK(bn_params == 2);

  // forward works in both modes
  auto x = random_input({2, 16, 32, 32}, 9);
  CHECK(net.forward(x, RunMode::Eval).shape() == Shape{2, 8});
  Rng drop(1);
  CHECK(net2.forward(x, RunMode::Train, &drop).shape() == Shape{2, 8});
}
