#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "support/gradcheck.hpp"
#include "upstream/net.hpp"

using namespace upstream;
using namespace upstream::testing;

TEST_CASE("zero weights give an all-zero output") {
  RngStream init(1);
  QNetwork net({4, 8, 3}, init);
  std::fill(net.parameters().begin(), net.parameters().end(), 0.0);
  const auto q = net.forward({1.0, -2.0, 3.0, 0.5});
  REQUIRE(q.size() == 3);
  for (double v : q) CHECK(v == 0.0);
}

TEST_CASE("single affine layer matches hand arithmetic on a 2x2 case") {
  RngStream init(2);
  QNetwork net({2, 2}, init, 0.0);
  // W = [[1, 2], [3, -1]], b = [0.5, -0.5]
  auto& p = net.parameters();
  p[0] = 1.0; p[1] = 2.0; p[2] = 3.0; p[3] = -1.0;
  p[4] = 0.5; p[5] = -0.5;
  const auto q = net.forward({2.0, 1.0});
  CHECK(q[0] == doctest::Approx(1.0 * 2.0 + 2.0 * 1.0 + 0.5));   // 4.5
  CHECK(q[1] == doctest::Approx(3.0 * 2.0 - 1.0 * 1.0 - 0.5));   // 5.5
}

TEST_CASE("evaluation forward is deterministic") {
  RngStream init(3);
  QNetwork net({6, 16, 8, 4}, init, 0.2);
  const std::vector<double> obs{0.1, -0.2, 0.3, 1.0, -1.0, 0.5};
  CHECK(net.forward(obs) == net.forward(obs));
  // Training mode with the same rng state is also reproducible.
  RngStream ra(9), rb(9);
  CHECK(net.forward(obs, true, ra) == net.forward(obs, true, rb));
}

TEST_CASE("dimension mismatch is a shape error") {
  RngStream init(4);
  QNetwork net({5, 8, 2}, init);
  CHECK_THROWS_AS(net.forward({1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("analytic gradient matches central differences on a [3,4,2] net") {
  CHECK(run_gradcheck({3, 4, 2}, 4, 12345) < 1e-4);
}

TEST_CASE("gradient check passes across ten random small networks") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double err = run_gradcheck({5, 7, 6, 3}, 5, 100 + seed);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("gradient check holds with dropout active (fixed mask)") {
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    CHECK(run_gradcheck({4, 6, 5, 2}, 6, 300 + seed, 0.4) < 1e-4);
}

TEST_CASE("gradient check holds with batch normalization enabled") {
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    CHECK(run_gradcheck({4, 6, 5, 2}, 8, 400 + seed, 0.0, true) < 1e-4);
}

TEST_CASE("batch-norm eval path uses running statistics and stays deterministic") {
  RngStream init(5);
  QNetwork net({3, 8, 2}, init, 0.0, true);
  RngStream data(6);
  auto c = random_case({3, 8, 2}, 16, data);
  TrainBatch tb{&c.inputs, &c.actions, &c.targets};
  const auto mask = net.make_dropout_mask(16, data);
  std::vector<double> grad;
  net.train_loss_and_grad(tb, mask, grad);  // updates running stats
  const auto q1 = net.forward({0.5, -0.5, 1.0});
  const auto q2 = net.forward({0.5, -0.5, 1.0});
  CHECK(q1 == q2);
}

TEST_CASE("adam leaves parameters exactly unchanged on a zero gradient") {
  RngStream init(7);
  QNetwork net({3, 4, 2}, init);
  const auto before = net.parameters();
  AdamOptimizer adam(0.001);
  std::vector<double> zero(before.size(), 0.0);
  adam.step(net.parameters(), zero);
  CHECK(net.parameters() == before);
}

TEST_CASE("adam fits a single point quickly") {
  RngStream init(8);
  QNetwork net({2, 8, 2}, init, 0.0);
  Matrix x(1, 2);
  x(0, 0) = 0.3;
  x(0, 1) = -0.7;
  std::vector<int> actions{1};
  std::vector<double> targets{2.5};
  TrainBatch tb{&x, &actions, &targets};
  const std::vector<double> mask(8, 1.0);
  AdamOptimizer adam(0.01);
  double loss = 1e9;
  std::vector<double> grad;
  for (int i = 0; i < 2000 && loss > 1e-6; ++i) {
    loss = net.train_loss_and_grad(tb, mask, grad);
    adam.step(net.parameters(), grad);
  }
  CHECK(loss < 1e-6);
}

TEST_CASE("serialization round-trips parameters and shapes") {
  RngStream init(9);
  QNetwork net({4, 6, 3}, init, 0.2, true);
  const std::string text = net.to_json_string();
  const QNetwork loaded = QNetwork::from_json_string(text);
  CHECK(loaded.layer_sizes() == net.layer_sizes());
  CHECK(loaded.parameters() == net.parameters());
  const std::vector<double> obs{0.1, 0.2, 0.3, 0.4};
  CHECK(loaded.forward(obs) == net.forward(obs));
}

TEST_CASE("copy_from rejects mismatched shapes") {
  RngStream init(10);
  QNetwork a({3, 4, 2}, init);
  QNetwork b({3, 5, 2}, init);
  CHECK_THROWS_AS(b.copy_from(a), std::invalid_argument);
}
