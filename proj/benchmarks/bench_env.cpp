#include <benchmark/benchmark.h>

#include "upstream/env.hpp"
#include "upstream/firms.hpp"
#include "upstream/policy.hpp"

using namespace upstream;

namespace {

const std::vector<FirmProfile>& profiles() {
  static const auto p = load_profiles(UPSTREAM_DATA_DIR "/firm_profiles.csv");
  return p;
}

std::vector<LeadSpec> catalog() {
  auto rng = RngStream::derive(7, stream_tag::kCatalog);
  return sample_lead_catalog(20, rng);
}

void BM_env_reset(benchmark::State& state) {
  GameConfig cfg;
  cfg.n_agents = 6;
  GameEnv env(cfg, profiles(), catalog());
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(env.reset(seed++));
  }
}
BENCHMARK(BM_env_reset);

void BM_full_episode_sls(benchmark::State& state) {
  GameConfig cfg;
  cfg.n_agents = static_cast<int>(state.range(0));
  GameEnv env(cfg, profiles(), catalog());
  SlsPolicy sls;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto obs = env.reset(seed++);
    while (!env.done()) {
      std::vector<Action> actions(static_cast<std::size_t>(cfg.n_agents));
      for (int i = 0; i < cfg.n_agents; ++i) {
        const auto belief = env.decision_belief(i);
        PolicyContext ctx{obs[static_cast<std::size_t>(i)],
                          env.agents()[static_cast<std::size_t>(i)], env.market(),
                          belief, env.config()};
        actions[static_cast<std::size_t>(i)] = sls.act(ctx);
      }
      const auto outcome = env.step(actions);
      for (int i = 0; i < cfg.n_agents; ++i)
        obs[static_cast<std::size_t>(i)] =
            outcome.agents[static_cast<std::size_t>(i)].observation;
    }
  }
}
BENCHMARK(BM_full_episode_sls)->Arg(2)->Arg(6)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
