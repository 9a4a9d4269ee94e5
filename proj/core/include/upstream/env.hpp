#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "upstream/firms.hpp"
#include "upstream/leads.hpp"
#include "upstream/market.hpp"
#include "upstream/rng.hpp"

namespace upstream {

// Composite action tuple: a binary proceed/defer decision plus the quality
// of information to acquire this year. The eight combinations enumerate in
// canonical order (u=0,None), (u=0,Low), ... (u=1,High); greedy tie-breaks
// resolve to the lowest index.
struct Action {
  bool proceed = false;
  InfoLevel eta = InfoLevel::None;
};

inline constexpr int kActionCount = 8;

inline int action_index(const Action& a) {
  return (a.proceed ? 4 : 0) + static_cast<int>(a.eta);
}

inline Action action_from_index(int index) {
  if (index < 0 || index >= kActionCount)
    throw std::out_of_range("action index out of range");
  return {index >= 4, static_cast<InfoLevel>(index % 4)};
}

struct PhaseDurations {
  int bidding = 1;
  int exploration = 5;
  int development = 7;
  int production = 25;
};

struct CostSchedule {
  InfoSchedule info;
  double exploration_well = 40.0;   // USD MM, once per lead
  double development_total = 400.0; // USD MM, spread evenly over T_dev
  double operating_per_year = 25.0; // USD MM/yr during production
};

struct BidRule {
  double beta = 0.35;          // bid fraction of certainty-equivalent value
  double lambda_scale = 1.0;   // risk shading per 10% of risk premium
};

struct ProductionProfile {
  int plateau_years = 5;
  double decline_rate = 0.08;  // per year after the plateau
};

struct GameConfig {
  int n_agents = 10;
  PhaseDurations durations;
  CostSchedule costs;
  double gamma = 0.95;               // per-step discount in the return ledger
  OuParams price;
  double price_floor = 1.0;
  ScenarioSpec scenario;
  BidRule bid;
  double variance_gate = 0.09;       // max belief var_log to leave Exploration
  double value_per_bbl = 5.0;        // USD MM of lead value per MMbbl reserves
  ProductionProfile production;
  double base_discount_rate = 0.0;   // added to risk premium for firm NPV
  RiskPremiumCoeffs risk_premium;
  CatalogGrid catalog_grid;
  std::uint64_t seed = 0;

  void validate() const;
  int horizon() const { return scenario.horizon_years; }
};

// ---------------------------------------------------------------------------
// Observation layout (all features finite; normalizers in parentheses):
//   market block, 9 features:
//     0 price (/pbar)          1 volatility (raw)        2 demand (raw index)
//     3 tot_inv (/anchor)      4 tot_inv_up (/anchor)    5 tot_inv_exp (/anchor)
//     6 tot_prod (/anchor)     7 tot_res (/anchor)       8 tot_inc_res (/anchor)
//   firm block, 11 features:
//     9-13 phase one-hot [Bidding, Exploration, Development, Production, Exited]
//     14 phase_age (/T_prod)   15 reserves (/25 BBOE)    16 info level (/3)
//     17 belief median value (/catalog value_hi); offered-lead prior in Bidding
//     18 belief var_log (raw)  19 capital_spent (/1000)
//   competitor block, 2 features:
//     20 total competitor capital spent (/1000)
//     21 total competitor production (/20 MMbbl/yr)
// ---------------------------------------------------------------------------
using Observation = std::vector<double>;

inline constexpr int kObsDim = 22;

// Decomposed net cash flow: total() = production_term - c_inv - c_info.
// When proceed = 0 both cost terms are zero (avoidable-cost rule).
struct RewardComponents {
  double production_term = 0.0;
  double c_inv = 0.0;
  double c_info = 0.0;
  double total() const { return production_term - c_inv - c_info; }
};

struct AgentStepRecord {
  int agent_id = 0;
  Phase phase = Phase::Bidding;      // phase at decision time
  int phase_age = 0;
  Action action;
  RewardComponents components;
  double reward = 0.0;
  double belief_var = -1.0;          // post-update; -1 when no belief
  double bid_amount = 0.0;           // submitted bid, 0 when none
  bool bid_submitted = false;
  bool won_auction = false;
  double won_lead_value = 0.0;       // realized value of the lead just won
  double risk_premium = 0.0;
};

struct StepRecord {
  int t = 0;
  MarketState market;                // market when decisions were taken
  std::vector<AgentStepRecord> agents;
};

struct AgentStepOutcome {
  Observation observation;
  double reward = 0.0;
  bool done = false;
};

struct StepOutcome {
  std::vector<AgentStepOutcome> agents;
  MarketState market;  // snapshot after the step
  bool episode_done = false;
};

// First-price sealed-bid auction: the highest bid wins and pays its own bid.
// Ties break uniformly at random from the seeded stream; negative bids are
// invalid actions and are dropped (treated as defer).
struct AuctionResult {
  std::optional<int> winner;
  double price_paid = 0.0;
};
AuctionResult run_auction(const std::vector<std::pair<int, double>>& bids,
                          RngStream& rng);

// Production plateau-then-decline profile, MMbbl/yr. Zero outside Production
// and beyond the production duration.
double production_volume(const AgentState& agent, int t_in_prod,
                         const GameConfig& config);

// Reward components per the net-cash-flow rule: the production indicator
// gates (price*q - C_opr); C_inv depends on phase (auction price while
// bidding, well cost once in exploration, even development tranches); info
// cost follows the quality level. Defer (u=0) nullifies both cost terms.
RewardComponents compute_reward_components(const AgentState& agent,
                                           const Action& action,
                                           const MarketState& market,
                                           const GameConfig& config,
                                           double bid_paid = 0.0);

inline double compute_reward(const AgentState& agent, const Action& action,
                             const MarketState& market, const GameConfig& config,
                             double bid_paid = 0.0) {
  return compute_reward_components(agent, action, market, config, bid_paid).total();
}

// Decision-support valuations shared by the bid participation rule and the
// ladder policy. Flat-price approximations discounted at the firm rate.
//
// Discounted net production cash at production start (year 0 undiscounted).
double production_pv(double lead_value, double price, double rate,
                     const GameConfig& config);
// Years until first production cash for an agent committing every year.
int years_to_production(Phase phase, int phase_age, const GameConfig& config);
// Present value of the remaining committed capital (well + development
// tranches), excluding information purchases and any bid.
double remaining_cost_pv(Phase phase, int phase_age, bool paid_well,
                         double rate, const GameConfig& config);
// production_pv discounted to now minus remaining committed capital.
double project_gross_value(double est_value, double price, double rate,
                           Phase phase, int phase_age, bool paid_well,
                           const GameConfig& config);

// Risk-shaded certainty-equivalent lead value exp(mean - lambda*var), with
// lambda scaled from the firm's risk premium.
double certainty_equivalent(const Belief& belief, double risk_premium,
                            const BidRule& rule);

// The multi-agent POMDP. One instance runs one episode at a time; reset with
// an episode seed replays bit-identically. All randomness flows from streams
// derived from that seed, so instances are safe to run in parallel workers.
class GameEnv {
 public:
  GameEnv(GameConfig config, std::vector<FirmProfile> profiles,
          std::vector<LeadSpec> catalog);

  std::vector<Observation> reset(std::uint64_t episode_seed);
  StepOutcome step(const std::vector<Action>& joint_actions);

  int n_agents() const { return config_.n_agents; }
  int obs_dim() const { return kObsDim; }
  bool done() const { return done_; }
  int t() const { return t_; }
  const GameConfig& config() const { return config_; }
  const std::vector<AgentState>& agents() const { return agents_; }
  const MarketState& market() const { return traj_[static_cast<std::size_t>(current_market_index())]; }
  const Lead& offered_lead() const { return offered_; }
  const std::vector<StepRecord>& trace() const { return trace_; }
  int exited_action_warnings() const { return exited_action_warnings_; }

  // Belief driving the current decision: the offered lead's common prior
  // while bidding, the agent's posterior otherwise (absent when exited
  // without a lead).
  std::optional<Belief> decision_belief(int agent_id) const;

  Observation observe(int agent_id) const;

 private:
  int current_market_index() const;
  void realize_offered_lead();
  void apply_transitions(const std::vector<Action>& actions,
                         const std::optional<int>& winner,
                         const std::vector<Belief>& bid_posteriors,
                         const std::vector<InfoLevel>& bid_quality);

  GameConfig config_;
  std::vector<FirmProfile> profiles_;
  std::vector<LeadSpec> catalog_;
  IndustryAnchors anchors_;

  std::vector<AgentState> agents_;
  std::vector<MarketState> traj_;
  Lead offered_;
  int t_ = 0;
  bool done_ = false;
  int exited_action_warnings_ = 0;
  std::vector<StepRecord> trace_;

  RngStream lead_rng_{0};
  RngStream signal_rng_{0};
  RngStream auction_rng_{0};
  RngStream init_rng_{0};
};

// JSON-lines trace export/import: one line per step record.
void write_trace_jsonl(const std::vector<StepRecord>& trace, std::ostream& out);
std::vector<StepRecord> read_trace_jsonl(std::istream& in);

}  // namespace upstream
