#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "upstream/env.hpp"
#include "upstream/policy.hpp"

namespace upstream {

struct BootstrapSpec {
  long n_resamples = 1000;
  double ci_level = 0.95;

  void validate() const;
};

// Percentile interval for the mean of `values` from n_resamples resampled
// means. Throws std::invalid_argument with fewer than 2 values.
std::pair<double, double> bootstrap_ci(const std::vector<double>& values,
                                       const BootstrapSpec& spec, RngStream& rng);

// Policy assignment for an evaluation run: agent 0 plays the focal strategy,
// everyone else the opponent strategy.
struct EvalSetup {
  PolicyKind focal = PolicyKind::RlOptimized;
  PolicyKind others = PolicyKind::StandardLadder;
  const QNetwork* net = nullptr;  // required for RlOptimized roles
  LadderParams ladder;
  std::map<Phase, Action> scripted_table;
  int workers = 1;
};

struct EpisodeResult {
  std::uint64_t seed = 0;
  long episode_index = 0;
  int n_agents = 0;
  Regime regime = Regime::Neutral;
  std::vector<PolicyKind> policy_kind;        // per agent
  std::optional<int> winner;                  // first lease winner of the episode
  std::vector<double> npv;                    // per agent, firm-rate discounted
  std::vector<std::optional<bool>> es_flag;   // defined only for agents that bid
  std::vector<double> capital_at_risk;        // per agent, undiscounted
  std::vector<double> cum_discounted_cash;    // per agent, gamma ledger
  double first_won_lead_value = 0.0;          // 0 when no lease was won
  std::string trace_path;                     // empty unless traces were written
};

struct MonteCarloRun {
  std::vector<EpisodeResult> results;
  long faults = 0;
};

// n_episodes independent episodes with per-episode derived seeds (global
// episode index first_episode + k). Results are ordered by episode index and
// independent of worker scheduling; faulted episodes are excluded and
// counted. When trace_dir is non-empty each episode's JSONL trace is written
// there as ep_<index>.jsonl.
MonteCarloRun run_monte_carlo(const GameConfig& config,
                              const std::vector<FirmProfile>& profiles,
                              const std::vector<LeadSpec>& catalog,
                              const EvalSetup& setup, long n_episodes,
                              std::uint64_t master_seed, long first_episode = 0,
                              const std::string& trace_dir = "");

// Firm-rate NPV of one agent's reward stream in a trace:
// sum_t reward_t / (1 + base_rate + risk_premium)^t.
double npv_from_trace(const std::vector<StepRecord>& trace, int agent_id,
                      double base_rate);

enum class SliceKey { NFirms, Scenario, LeadSize };

struct MetricsRow {
  std::string slice;
  double es_alt = 0.0, es_std = 0.0;        // percent; NaN when undefined
  double npv_alt = 0.0, npv_std = 0.0;      // mean NPV, USD MM
  double raroc_alt = 0.0, raroc_std = 0.0;
  double ci_alt_low = 0.0, ci_alt_high = 0.0;
  double ci_std_low = 0.0, ci_std_high = 0.0;
  long n_episodes = 0;
};

struct MetricsTable {
  SliceKey key = SliceKey::NFirms;
  std::vector<MetricsRow> rows;
  long warnings = 0;  // omitted empty slices
};

// Slice metrics per strategy: ES rate over agent-episodes that entered a
// bid, mean NPV over all agent-episodes, RAROC = mean NPV / mean capital's
// at risk, and bootstrap CI bounds on the NPV means. Scenario slices map
// {Resilient, Neutral, Heat} onto the reported {Low, Medium, High} buckets;
// lead-size slices are terciles of the realized first-won lead value.
MetricsTable compute_metrics(const std::vector<EpisodeResult>& results,
                             SliceKey key, const BootstrapSpec& bootstrap,
                             std::uint64_t seed,
                             PolicyKind alt_kind = PolicyKind::RlOptimized,
                             PolicyKind std_kind = PolicyKind::StandardLadder);

// One CSV per table (schema in the README) plus the long-format per-episode
// distribution export.
void emit_table_csv(const MetricsTable& table, const std::string& path);
MetricsTable read_table_csv(const std::string& path, SliceKey key);
void emit_distributions_csv(const std::vector<EpisodeResult>& results,
                            const std::string& path,
                            PolicyKind alt_kind = PolicyKind::RlOptimized,
                            PolicyKind std_kind = PolicyKind::StandardLadder);

std::string scenario_bucket_label(Regime regime);

}  // namespace upstream
