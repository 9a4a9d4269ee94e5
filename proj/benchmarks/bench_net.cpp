#include <benchmark/benchmark.h>

#include "upstream/net.hpp"
#include "upstream/replay.hpp"
#include "upstream/trainer.hpp"

using namespace upstream;

namespace {

QNetwork make_game_net() {
  RngStream init(1);
  return QNetwork({22, 256, 128, 8}, init, 0.2);
}

void BM_forward_single(benchmark::State& state) {
  const QNetwork net = make_game_net();
  const std::vector<double> obs(22, 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward(obs));
  }
}
BENCHMARK(BM_forward_single);

void BM_forward_batch64(benchmark::State& state) {
  const QNetwork net = make_game_net();
  Matrix batch(64, 22);
  RngStream rng(2);
  for (double& v : batch.data) v = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward_batch(batch));
  }
}
BENCHMARK(BM_forward_batch64);

void BM_train_step(benchmark::State& state) {
  TrainerConfig cfg;
  cfg.buffer_capacity = 4096;
  DqnTrainer trainer(cfg, 22, 8, 3);
  RngStream rng(4);
  for (int i = 0; i < 256; ++i) {
    Transition t;
    t.state.resize(22);
    t.next_state.resize(22);
    for (double& v : t.state) v = rng.normal();
    for (double& v : t.next_state) v = rng.normal();
    t.action = static_cast<int>(rng.uniform_int(8));
    t.reward = rng.normal(0.0, 50.0);
    trainer.observe(std::move(t));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(trainer.train_step());
  }
}
BENCHMARK(BM_train_step);

}  // namespace

BENCHMARK_MAIN();
