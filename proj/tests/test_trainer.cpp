#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "support/chain_mdp.hpp"
#include "support/test_helpers.hpp"
#include "upstream/errors.hpp"
#include "upstream/policy.hpp"
#include "upstream/trainer.hpp"

using namespace upstream;
using namespace upstream::testing;

TEST_CASE("epsilon schedule endpoints are exact") {
  TrainerConfig cfg;
  cfg.episodes = 10000;
  CHECK(std::abs(epsilon_at(0, cfg) - 1.0) < 1e-12);
  CHECK(std::abs(epsilon_at(5000, cfg) - 0.1) < 1e-12);
  CHECK(std::abs(epsilon_at(10000, cfg) - 0.1) < 1e-12);
  // Linear in between.
  CHECK(std::abs(epsilon_at(2500, cfg) - 0.55) < 1e-12);
  CHECK(std::abs(epsilon_at(1000, cfg) - (1.0 - 0.9 * 0.2)) < 1e-12);
  // Flat after the decay window.
  CHECK(epsilon_at(7500, cfg) == 0.1);
}

TEST_CASE("td_target handles terminal, discounted and myopic cases") {
  RngStream init(1);
  QNetwork target({3, 4, 2}, init, 0.0);
  const Observation s_next{0.1, 0.2, 0.3};
  CHECK(td_target(-6.0, s_next, true, target, 0.95) == -6.0);

  std::fill(target.parameters().begin(), target.parameters().end(), 0.0);
  // Output biases: after layer0 (4*3+4=16) and layer1 weights (2*4=8).
  target.parameters()[16 + 8 + 0] = 2.0;
  target.parameters()[16 + 8 + 1] = 1.0;
  CHECK(td_target(1.0, s_next, false, target, 0.95) ==
        doctest::Approx(2.9).epsilon(1e-12));
  CHECK(td_target(1.0, s_next, false, target, 0.0) == 1.0);
}

TEST_CASE("train_step is a no-op while the buffer is underfull") {
  TrainerConfig cfg = chain_trainer_config(10);
  DqnTrainer trainer(cfg, 3, 2, 7);
  CHECK_FALSE(trainer.train_step().has_value());
  for (int i = 0; i < cfg.batch_size - 1; ++i)
    trainer.observe({{1, 0, 0}, 0, 0.0, {0, 1, 0}, false});
  CHECK_FALSE(trainer.train_step().has_value());
  trainer.observe({{1, 0, 0}, 0, 0.0, {0, 1, 0}, false});
  CHECK(trainer.train_step().has_value());
}

TEST_CASE("overfits a single repeated transition") {
  TrainerConfig cfg = chain_trainer_config(10);
  cfg.alpha = 0.005;
  DqnTrainer trainer(cfg, 3, 2, 11);
  for (int i = 0; i < 64; ++i)
    trainer.observe({{1.0, 0.0, 0.5}, 1, 3.0, {0.0, 1.0, 0.5}, true});
  double loss = 1e9;
  for (int i = 0; i < 3000 && loss > 1e-3; ++i) loss = *trainer.train_step();
  CHECK(loss < 1e-3);
}

TEST_CASE("terminal zero-reward batch on a zero network changes nothing") {
  TrainerConfig cfg = chain_trainer_config(10);
  DqnTrainer trainer(cfg, 3, 2, 13);
  std::fill(trainer.net().parameters().begin(), trainer.net().parameters().end(), 0.0);
  trainer.target().copy_from(trainer.net());
  for (int i = 0; i < 64; ++i)
    trainer.observe({{1, 0, 0}, 0, 0.0, {0, 1, 0}, true});
  const auto before = trainer.net().parameters();
  const double loss = *trainer.train_step();
  CHECK(loss == 0.0);
  CHECK(trainer.net().parameters() == before);
}

TEST_CASE("target sync fires exactly every C updates") {
  TrainerConfig cfg = chain_trainer_config(10);
  cfg.target_sync_steps = 1000;
  DqnTrainer trainer(cfg, 3, 2, 17);
  RngStream data(3);
  for (int i = 0; i < 200; ++i)
    trainer.observe({{data.uniform(), data.uniform(), data.uniform()},
                     static_cast<int>(data.uniform_int(2)), data.normal(),
                     {data.uniform(), data.uniform(), data.uniform()}, false});
  std::vector<long> fired;
  for (long step = 1; step <= 3500; ++step) {
    trainer.train_step();
    if (trainer.target().parameters() == trainer.net().parameters())
      fired.push_back(step);
  }
  CHECK(fired == std::vector<long>{1000, 2000, 3000});
}

TEST_CASE("sync_target copies exactly and stays stale between syncs") {
  RngStream init(19);
  QNetwork net({4, 8, 3}, init, 0.0);
  QNetwork target({4, 8, 3}, init, 0.0);
  CHECK(net.parameters() != target.parameters());
  sync_target(net, target);
  const Observation obs{0.4, -0.2, 0.8, 0.0};
  CHECK(net.forward(obs) == target.forward(obs));
  // Learner moves on; the target's outputs stay constant.
  const auto before = target.forward(obs);
  net.parameters()[0] += 1.0;
  CHECK(target.forward(obs) == before);
  CHECK(net.forward(obs) != before);
}

TEST_CASE("dqn matches value iteration on the deterministic chain") {
  ChainMdp env;
  TrainerConfig cfg = chain_trainer_config(2000);
  DqnTrainer trainer(cfg, env.obs_dim(), env.action_count(), 23);
  const auto log = train_single_agent(env, trainer, 23, 20);
  CHECK(log.size() == 2000);

  const ChainQTable oracle = chain_value_iteration(cfg.gamma);
  for (int s = 0; s < 4; ++s) {
    const auto q = trainer.net().forward(ChainMdp::encode(s));
    const int greedy = q[1] > q[0] ? 1 : 0;
    const int optimal =
        oracle.q[static_cast<std::size_t>(s)][1] > oracle.q[static_cast<std::size_t>(s)][0]
            ? 1 : 0;
    CHECK(greedy == optimal);
  }
  CHECK(chain_bellman_residual(trainer.net(), cfg.gamma) < 1e-2);
}

TEST_CASE("non-finite loss aborts training with a divergence error") {
  ChainMdp env;
  TrainerConfig cfg = chain_trainer_config(50);
  cfg.alpha = 1e200;  // one update overflows the next forward pass
  DqnTrainer trainer(cfg, env.obs_dim(), env.action_count(), 61);
  CHECK_THROWS_AS(train_single_agent(env, trainer, 61, 20), DivergenceError);
}

TEST_CASE("training log rows carry the schedule and are written/read back") {
  ChainMdp env;
  TrainerConfig cfg = chain_trainer_config(50);
  DqnTrainer trainer(cfg, env.obs_dim(), env.action_count(), 29);
  const auto log = train_single_agent(env, trainer, 29, 20);
  REQUIRE(log.size() == 50);
  CHECK(log.front().epsilon == 1.0);
  CHECK(log.back().epsilon == 0.1);

  const std::string path = "/tmp/upstream_test_log.csv";
  write_training_log_csv(log, path);
  const auto replayed = read_training_log_csv(path);
  REQUIRE(replayed.size() == log.size());
  CHECK(replayed[10].episode == log[10].episode);
  CHECK(replayed[10].mean_loss == log[10].mean_loss);
  std::filesystem::remove(path);
}

TEST_CASE("curriculum produces one log row per episode on the game") {
  GameConfig game = small_game(3);
  game.scenario.horizon_years = 12;
  GameEnv env(game, default_profiles(), default_catalog());
  TrainerConfig cfg;
  cfg.episodes = 6;
  cfg.batch_size = 16;
  cfg.buffer_capacity = 4096;
  cfg.hidden_layers = {16, 16};
  cfg.checkpoint_every = 100;
  DqnTrainer trainer(cfg, env.obs_dim(), kActionCount, 31);
  const auto log = train_curriculum(env, trainer, 31);
  CHECK(log.size() == 6);
  for (std::size_t i = 0; i < log.size(); ++i)
    CHECK(log[i].episode == static_cast<long>(i));
}

TEST_CASE("checkpoint round-trips the full trainer state") {
  ChainMdp env;
  TrainerConfig cfg = chain_trainer_config(20);
  DqnTrainer a(cfg, env.obs_dim(), env.action_count(), 37);
  train_single_agent(env, a, 37, 20);

  const std::string path = "/tmp/upstream_test_ckpt.json";
  save_trainer_checkpoint(path, a, 20, "hash123");

  DqnTrainer b(cfg, env.obs_dim(), env.action_count(), 999);
  const auto info = load_trainer_checkpoint(path, b);
  CHECK(info.next_episode == 20);
  CHECK(info.config_hash == "hash123");
  CHECK(b.net().parameters() == a.net().parameters());
  CHECK(b.target().parameters() == a.target().parameters());
  CHECK(b.optimizer().steps_taken() == a.optimizer().steps_taken());
  CHECK(b.optimizer().first_moment() == a.optimizer().first_moment());
  CHECK(b.buffer().size() == a.buffer().size());
  CHECK(b.sync_counter().count() == a.sync_counter().count());
  for (std::size_t k = 0; k < b.buffer().size(); ++k) {
    CHECK(b.buffer().oldest(k).reward == a.buffer().oldest(k).reward);
    CHECK(b.buffer().oldest(k).state == a.buffer().oldest(k).state);
  }
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".buffer");
}

TEST_CASE("qgrid export is 100x100 and equals pointwise forward calls") {
  RngStream init(41);
  QNetwork net({kObsDim, 16, kActionCount}, init, 0.0);
  QGridSpec spec;
  const Matrix grid = export_qgrid(net, spec);
  REQUIRE(grid.rows == 100);
  REQUIRE(grid.cols == 100);
  RngStream pick(43);
  for (int probe = 0; probe < 50; ++probe) {
    const int i = static_cast<int>(pick.uniform_int(100));
    const int j = static_cast<int>(pick.uniform_int(100));
    const auto [phase, action] = spec.column_combo(j);
    const auto q = net.forward(spec.observation_at((i + 0.5) / 100.0, phase));
    CHECK(grid(i, j) == q[static_cast<std::size_t>(action)]);
  }
}

TEST_CASE("constant network gives a constant qgrid") {
  RngStream init(47);
  QNetwork net({kObsDim, 8, kActionCount}, init, 0.0);
  std::fill(net.parameters().begin(), net.parameters().end(), 0.0);
  const Matrix grid = export_qgrid(net, QGridSpec{});
  for (double v : grid.data) CHECK(v == 0.0);
}

TEST_CASE("qgrid csv has 100 rows of 100 columns") {
  RngStream init(53);
  QNetwork net({kObsDim, 8, kActionCount}, init, 0.0);
  const std::string path = "/tmp/upstream_test_qgrid.csv";
  write_qgrid_csv(export_qgrid(net, QGridSpec{}), path);
  std::ifstream in(path);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 99);
  }
  CHECK(rows == 100);
  std::filesystem::remove(path);
}
