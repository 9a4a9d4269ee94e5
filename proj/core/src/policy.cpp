#include "upstream/policy.hpp"

#include <cmath>
#include <string>

#include "upstream/errors.hpp"

namespace upstream {

PolicyKind policy_kind_from_string(const std::string& name) {
  if (name == "StandardLadder") return PolicyKind::StandardLadder;
  if (name == "RlOptimized") return PolicyKind::RlOptimized;
  if (name == "Random") return PolicyKind::Random;
  if (name == "Scripted") return PolicyKind::Scripted;
  throw ConfigError("unknown policy kind '" + name + "'");
}

void LadderParams::validate() const {
  // Monotone ladder over the information-acquiring phases.
  if (static_cast<int>(eta_by_phase[1]) < static_cast<int>(eta_by_phase[0]) ||
      static_cast<int>(eta_by_phase[2]) < static_cast<int>(eta_by_phase[1]))
    throw ConfigError("LadderParams: eta must be non-decreasing over "
                      "Bidding, Exploration, Development");
  if (!(proceed_margin > 0.0))
    throw ConfigError("LadderParams: proceed_margin must be > 0");
}

Action ladder_action(const PolicyContext& ctx, const LadderParams& params) {
  const AgentState& agent = ctx.agent;
  const GameConfig& cfg = ctx.config;

  if (agent.phase == Phase::Exited) return {};
  if (agent.phase == Phase::Production) return {true, InfoLevel::None};

  InfoLevel eta = params.eta_by_phase[static_cast<std::size_t>(agent.phase)];
  // One purchase per rung unless re-purchasing is requested. The held level
  // resets with each new lead, so every bid year buys afresh.
  if (!params.repeat_purchases && agent.phase != Phase::Bidding &&
      agent.info_quality_held >= eta)
    eta = InfoLevel::None;

  if (!ctx.decision_belief) return {};
  const Belief& belief = *ctx.decision_belief;
  const double ce = certainty_equivalent(belief, agent.risk_premium, cfg.bid);
  const double rate = cfg.base_discount_rate + agent.risk_premium;

  const double gross_pv =
      production_pv(ce, ctx.market.price, rate, cfg) *
      std::pow(1.0 + rate, -years_to_production(agent.phase, agent.phase_age, cfg));
  double remaining = remaining_cost_pv(agent.phase, agent.phase_age,
                                       agent.paid_exploration_well, rate, cfg);
  if (agent.phase == Phase::Bidding) remaining += cfg.bid.beta * ce;

  const bool proceed = gross_pv >= params.proceed_margin * remaining;
  if (!proceed) return {};
  return {true, eta};
}

Action greedy_action(const Observation& obs, const QNetwork& qnet) {
  const auto q = qnet.forward(obs);
  int best = 0;
  for (int a = 0; a < static_cast<int>(q.size()); ++a) {
    if (!std::isfinite(q[static_cast<std::size_t>(a)]))
      throw DivergenceError("greedy_action: non-finite Q value " +
                            std::to_string(q[static_cast<std::size_t>(a)]) +
                            " at action index " + std::to_string(a));
    if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
  }
  return action_from_index(best);
}

Action epsilon_greedy(const Observation& obs, const QNetwork& qnet,
                      double epsilon, RngStream& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("epsilon_greedy: epsilon must be in [0, 1]");
  if (rng.uniform() < epsilon)
    return action_from_index(static_cast<int>(rng.uniform_int(kActionCount)));
  return greedy_action(obs, qnet);
}

}  // namespace upstream
