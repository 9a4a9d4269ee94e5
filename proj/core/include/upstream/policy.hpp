#pragma once

#include <array>
#include <map>
#include <optional>

#include "upstream/env.hpp"
#include "upstream/net.hpp"

namespace upstream {

enum class PolicyKind { StandardLadder, RlOptimized, Random, Scripted };

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::StandardLadder: return "StandardLadder";
    case PolicyKind::RlOptimized: return "RlOptimized";
    case PolicyKind::Random: return "Random";
    case PolicyKind::Scripted: return "Scripted";
  }
  return "?";
}

PolicyKind policy_kind_from_string(const std::string& name);

// Everything a policy may condition on at one decision point.
struct PolicyContext {
  const Observation& obs;
  const AgentState& agent;
  const MarketState& market;
  const std::optional<Belief>& decision_belief;
  const GameConfig& config;
};

// Ladder-step parameters: information quality per phase, non-decreasing over
// the pre-production phases, plus the risk-averse proceed margin.
struct LadderParams {
  std::array<InfoLevel, 4> eta_by_phase = {InfoLevel::Low, InfoLevel::Med,
                                           InfoLevel::High, InfoLevel::None};
  double proceed_margin = 1.2;   // required value-to-cost cover
  bool repeat_purchases = false; // re-buy the phase quality every committed year

  void validate() const;
};

// Standard Ladder Strategy action: quality from the phase mapping (skipping
// re-purchases once that rung is held), proceed when the certainty-equivalent
// project value covers the remaining lifecycle cost with the margin.
Action ladder_action(const PolicyContext& ctx, const LadderParams& params);

// Greedy argmax over the enumerated action set; deterministic given weights
// and observation, ties resolve to the lowest canonical index. Faults with
// diagnostics when the network emits a non-finite value.
Action greedy_action(const Observation& obs, const QNetwork& qnet);

// Random action with probability epsilon, otherwise greedy.
Action epsilon_greedy(const Observation& obs, const QNetwork& qnet,
                      double epsilon, RngStream& rng);

class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action act(const PolicyContext& ctx) = 0;
  virtual PolicyKind kind() const = 0;
};

class SlsPolicy final : public Policy {
 public:
  explicit SlsPolicy(LadderParams params = {}) : params_(params) {
    params_.validate();
  }
  Action act(const PolicyContext& ctx) override { return ladder_action(ctx, params_); }
  PolicyKind kind() const override { return PolicyKind::StandardLadder; }

 private:
  LadderParams params_;
};

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(RngStream rng) : rng_(rng) {}
  Action act(const PolicyContext&) override {
    return action_from_index(static_cast<int>(rng_.uniform_int(kActionCount)));
  }
  PolicyKind kind() const override { return PolicyKind::Random; }

 private:
  RngStream rng_;
};

// Fixed per-phase action table; phases missing from the table defer.
class ScriptedPolicy final : public Policy {
 public:
  explicit ScriptedPolicy(std::map<Phase, Action> table) : table_(std::move(table)) {}
  Action act(const PolicyContext& ctx) override {
    const auto it = table_.find(ctx.agent.phase);
    return it == table_.end() ? Action{} : it->second;
  }
  PolicyKind kind() const override { return PolicyKind::Scripted; }

 private:
  std::map<Phase, Action> table_;
};

// Frozen-network greedy policy; the network may be shared read-only across
// parallel evaluation workers.
class GreedyPolicy final : public Policy {
 public:
  explicit GreedyPolicy(const QNetwork* net) : net_(net) {}
  Action act(const PolicyContext& ctx) override { return greedy_action(ctx.obs, *net_); }
  PolicyKind kind() const override { return PolicyKind::RlOptimized; }

 private:
  const QNetwork* net_;
};

class EpsilonGreedyPolicy final : public Policy {
 public:
  EpsilonGreedyPolicy(const QNetwork* net, double epsilon, RngStream rng)
      : net_(net), epsilon_(epsilon), rng_(rng) {}
  Action act(const PolicyContext& ctx) override {
    return epsilon_greedy(ctx.obs, *net_, epsilon_, rng_);
  }
  PolicyKind kind() const override { return PolicyKind::RlOptimized; }
  void set_epsilon(double epsilon) { epsilon_ = epsilon; }

 private:
  const QNetwork* net_;
  double epsilon_;
  RngStream rng_;
};

}  // namespace upstream
