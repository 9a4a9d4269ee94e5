#include "upstream/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <thread>

#include "upstream/csv.hpp"
#include "upstream/errors.hpp"

namespace upstream {

void BootstrapSpec::validate() const {
  if (n_resamples < 100)
    throw ConfigError("BootstrapSpec: n_resamples must be >= 100");
  if (!(ci_level > 0.0 && ci_level < 1.0))
    throw ConfigError("BootstrapSpec: ci_level must be in (0, 1)");
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

std::pair<double, double> bootstrap_ci(const std::vector<double>& values,
                                       const BootstrapSpec& spec, RngStream& rng) {
  spec.validate();
  if (values.size() < 2)
    throw std::invalid_argument("bootstrap_ci: need at least 2 values");

  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(spec.n_resamples));
  for (long b = 0; b < spec.n_resamples; ++b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
      sum += values[static_cast<std::size_t>(rng.uniform_int(values.size()))];
    means.push_back(sum / static_cast<double>(values.size()));
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - spec.ci_level) / 2.0;
  return {quantile_sorted(means, tail), quantile_sorted(means, 1.0 - tail)};
}

double npv_from_trace(const std::vector<StepRecord>& trace, int agent_id,
                      double base_rate) {
  double npv = 0.0;
  for (const auto& step : trace) {
    const auto& rec = step.agents.at(static_cast<std::size_t>(agent_id));
    const double rate = base_rate + rec.risk_premium;
    npv += rec.reward / std::pow(1.0 + rate, step.t);
  }
  return npv;
}

namespace {

std::unique_ptr<Policy> make_policy(PolicyKind kind, const EvalSetup& setup,
                                    std::uint64_t master_seed, long episode,
                                    int agent_id) {
  switch (kind) {
    case PolicyKind::RlOptimized:
      if (!setup.net)
        throw ConfigError("evaluation: RlOptimized role requires a network");
      return std::make_unique<GreedyPolicy>(setup.net);
    case PolicyKind::StandardLadder:
      return std::make_unique<SlsPolicy>(setup.ladder);
    case PolicyKind::Random:
      return std::make_unique<RandomPolicy>(
          RngStream::derive(master_seed, stream_tag::kPolicy,
                            static_cast<std::uint64_t>(episode),
                            static_cast<std::uint64_t>(agent_id)));
    case PolicyKind::Scripted:
      return std::make_unique<ScriptedPolicy>(setup.scripted_table);
  }
  throw ConfigError("evaluation: unknown policy kind");
}

EpisodeResult run_one_episode(GameEnv& env, const EvalSetup& setup,
                              std::uint64_t master_seed, long episode_index,
                              const std::string& trace_dir) {
  const std::uint64_t seed = RngStream::derive_seed(
      master_seed, stream_tag::kEval, static_cast<std::uint64_t>(episode_index));
  auto obs = env.reset(seed);
  const int n = env.n_agents();

  std::vector<std::unique_ptr<Policy>> policies;
  std::vector<PolicyKind> kinds;
  for (int i = 0; i < n; ++i) {
    const PolicyKind kind = i == 0 ? setup.focal : setup.others;
    kinds.push_back(kind);
    policies.push_back(make_policy(kind, setup, master_seed, episode_index, i));
  }

  while (!env.done()) {
    std::vector<Action> actions(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto belief = env.decision_belief(i);
      PolicyContext ctx{obs[static_cast<std::size_t>(i)],
                        env.agents()[static_cast<std::size_t>(i)], env.market(),
                        belief, env.config()};
      actions[static_cast<std::size_t>(i)] = policies[static_cast<std::size_t>(i)]->act(ctx);
    }
    const StepOutcome outcome = env.step(actions);
    for (int i = 0; i < n; ++i)
      obs[static_cast<std::size_t>(i)] =
          outcome.agents[static_cast<std::size_t>(i)].observation;
  }

  const auto& trace = env.trace();
  EpisodeResult result;
  result.seed = seed;
  result.episode_index = episode_index;
  result.n_agents = n;
  result.regime = env.config().scenario.regime;
  result.policy_kind = std::move(kinds);
  result.npv.resize(static_cast<std::size_t>(n), 0.0);
  result.es_flag.resize(static_cast<std::size_t>(n));
  result.capital_at_risk.resize(static_cast<std::size_t>(n), 0.0);
  result.cum_discounted_cash.resize(static_cast<std::size_t>(n), 0.0);

  std::vector<bool> ever_bid(static_cast<std::size_t>(n), false);
  for (const auto& step : trace) {
    for (const auto& rec : step.agents) {
      if (rec.bid_submitted) ever_bid[static_cast<std::size_t>(rec.agent_id)] = true;
      if (rec.won_auction) {
        if (!result.winner) {
          result.winner = rec.agent_id;
          result.first_won_lead_value = rec.won_lead_value;
        }
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    result.npv[static_cast<std::size_t>(i)] =
        npv_from_trace(trace, i, env.config().base_discount_rate);
    const auto& agent = env.agents()[static_cast<std::size_t>(i)];
    result.capital_at_risk[static_cast<std::size_t>(i)] = agent.capital_spent;
    result.cum_discounted_cash[static_cast<std::size_t>(i)] = agent.cum_discounted_cash;
    if (ever_bid[static_cast<std::size_t>(i)])
      result.es_flag[static_cast<std::size_t>(i)] =
          result.npv[static_cast<std::size_t>(i)] > 0.0;
  }

  if (!trace_dir.empty()) {
    const std::string path =
        trace_dir + "/ep_" + std::to_string(episode_index) + ".jsonl";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write trace: " + path);
    write_trace_jsonl(trace, out);
    result.trace_path = path;
  }
  return result;
}

}  // namespace

MonteCarloRun run_monte_carlo(const GameConfig& config,
                              const std::vector<FirmProfile>& profiles,
                              const std::vector<LeadSpec>& catalog,
                              const EvalSetup& setup, long n_episodes,
                              std::uint64_t master_seed, long first_episode,
                              const std::string& trace_dir) {
  if (n_episodes < 1) throw ConfigError("run_monte_carlo: n_episodes must be >= 1");
  if (!trace_dir.empty()) std::filesystem::create_directories(trace_dir);

  const int workers = std::max(1, setup.workers);
  std::vector<std::optional<EpisodeResult>> slots(static_cast<std::size_t>(n_episodes));
  std::atomic<long> next{0};
  std::atomic<long> faults{0};

  const auto worker = [&]() {
    GameEnv env(config, profiles, catalog);
    for (;;) {
      const long k = next.fetch_add(1);
      if (k >= n_episodes) return;
      const long index = first_episode + k;
      try {
        slots[static_cast<std::size_t>(k)] =
            run_one_episode(env, setup, master_seed, index, trace_dir);
      } catch (const std::exception& e) {
        ++faults;
        std::cerr << "episode " << index << " failed: " << e.what() << "\n";
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  MonteCarloRun run;
  run.faults = faults.load();
  run.results.reserve(static_cast<std::size_t>(n_episodes));
  for (auto& slot : slots)
    if (slot) run.results.push_back(std::move(*slot));
  return run;
}

std::string scenario_bucket_label(Regime regime) {
  switch (regime) {
    case Regime::Resilient: return "Low";
    case Regime::Neutral: return "Medium";
    case Regime::Heat: return "High";
  }
  return "?";
}

namespace {

struct GroupStats {
  std::vector<double> npvs;
  std::vector<double> capitals;
  long bids = 0;
  long profitable_bids = 0;

  void add(const EpisodeResult& r, int agent) {
    npvs.push_back(r.npv[static_cast<std::size_t>(agent)]);
    capitals.push_back(r.capital_at_risk[static_cast<std::size_t>(agent)]);
    const auto& es = r.es_flag[static_cast<std::size_t>(agent)];
    if (es.has_value()) {
      ++bids;
      if (*es) ++profitable_bids;
    }
  }

  double es_rate() const {
    if (bids == 0) return std::numeric_limits<double>::quiet_NaN();
    return 100.0 * static_cast<double>(profitable_bids) / static_cast<double>(bids);
  }
  double mean_npv() const {
    if (npvs.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double v : npvs) s += v;
    return s / static_cast<double>(npvs.size());
  }
  double raroc() const {
    if (capitals.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double v : capitals) s += v;
    const double mean_capital = s / static_cast<double>(capitals.size());
    if (mean_capital <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return mean_npv() / mean_capital;
  }
};

}  // namespace

MetricsTable compute_metrics(const std::vector<EpisodeResult>& results,
                             SliceKey key, const BootstrapSpec& bootstrap,
                             std::uint64_t seed, PolicyKind alt_kind,
                             PolicyKind std_kind) {
  if (results.empty()) throw ConfigError("compute_metrics: no results");

  // Lead-size tercile cut points over episodes that allocated a lease.
  double t1 = 0.0, t2 = 0.0;
  if (key == SliceKey::LeadSize) {
    std::vector<double> values;
    for (const auto& r : results)
      if (r.winner) values.push_back(r.first_won_lead_value);
    if (!values.empty()) {
      std::sort(values.begin(), values.end());
      t1 = quantile_sorted(values, 1.0 / 3.0);
      t2 = quantile_sorted(values, 2.0 / 3.0);
    }
  }

  const auto slice_of = [&](const EpisodeResult& r) -> std::optional<std::string> {
    switch (key) {
      case SliceKey::NFirms:
        return std::to_string(r.n_agents);
      case SliceKey::Scenario:
        return scenario_bucket_label(r.regime);
      case SliceKey::LeadSize:
        if (!r.winner) return std::nullopt;
        if (r.first_won_lead_value <= t1) return "Low";
        if (r.first_won_lead_value <= t2) return "Medium";
        return "High";
    }
    return std::nullopt;
  };

  std::map<std::string, std::pair<GroupStats, GroupStats>> slices;  // alt, std
  std::map<std::string, long> episode_counts;
  for (const auto& r : results) {
    const auto slice = slice_of(r);
    if (!slice) continue;
    auto& [alt, std_group] = slices[*slice];
    ++episode_counts[*slice];
    for (int i = 0; i < r.n_agents; ++i) {
      const PolicyKind kind = r.policy_kind[static_cast<std::size_t>(i)];
      if (kind == alt_kind) alt.add(r, i);
      else if (kind == std_kind) std_group.add(r, i);
    }
  }

  MetricsTable table;
  table.key = key;
  auto rng = RngStream::derive(seed, stream_tag::kBootstrap);
  for (auto& [label, groups] : slices) {
    auto& [alt, std_group] = groups;
    if (alt.npvs.empty() && std_group.npvs.empty()) {
      ++table.warnings;
      std::cerr << "compute_metrics: slice '" << label << "' is empty, omitted\n";
      continue;
    }
    MetricsRow row;
    row.slice = label;
    row.n_episodes = episode_counts[label];
    row.es_alt = alt.es_rate();
    row.es_std = std_group.es_rate();
    row.npv_alt = alt.mean_npv();
    row.npv_std = std_group.mean_npv();
    row.raroc_alt = alt.raroc();
    row.raroc_std = std_group.raroc();
    if (alt.npvs.size() >= 2)
      std::tie(row.ci_alt_low, row.ci_alt_high) = bootstrap_ci(alt.npvs, bootstrap, rng);
    if (std_group.npvs.size() >= 2)
      std::tie(row.ci_std_low, row.ci_std_high) =
          bootstrap_ci(std_group.npvs, bootstrap, rng);
    table.rows.push_back(std::move(row));
  }

  // Competition slices read naturally in increasing firm count.
  if (key == SliceKey::NFirms) {
    std::sort(table.rows.begin(), table.rows.end(),
              [](const MetricsRow& a, const MetricsRow& b) {
                return std::stol(a.slice) < std::stol(b.slice);
              });
  } else {
    const auto rank = [](const std::string& s) {
      if (s == "Low") return 0;
      if (s == "Medium") return 1;
      return 2;
    };
    std::sort(table.rows.begin(), table.rows.end(),
              [&](const MetricsRow& a, const MetricsRow& b) {
                return rank(a.slice) < rank(b.slice);
              });
  }
  return table;
}

namespace {
constexpr const char* kTableHeader[] = {
    "slice",     "es_alt",     "es_std",      "npv_alt",     "npv_std",
    "raroc_alt", "raroc_std",  "ci_alt_low",  "ci_alt_high", "ci_std_low",
    "ci_std_high", "n_episodes"};
}

void emit_table_csv(const MetricsTable& table, const std::string& path) {
  csv::Writer w(path);
  w.row(std::vector<std::string>(std::begin(kTableHeader), std::end(kTableHeader)));
  for (const auto& r : table.rows)
    w.row({r.slice, csv::format_double(r.es_alt), csv::format_double(r.es_std),
           csv::format_double(r.npv_alt), csv::format_double(r.npv_std),
           csv::format_double(r.raroc_alt), csv::format_double(r.raroc_std),
           csv::format_double(r.ci_alt_low), csv::format_double(r.ci_alt_high),
           csv::format_double(r.ci_std_low), csv::format_double(r.ci_std_high),
           std::to_string(r.n_episodes)});
}

MetricsTable read_table_csv(const std::string& path, SliceKey key) {
  const auto t = csv::read_file(path);
  if (t.header != std::vector<std::string>(std::begin(kTableHeader),
                                           std::end(kTableHeader)))
    throw IoError("metrics table " + path + ": unexpected header");
  MetricsTable table;
  table.key = key;
  for (const auto& row : t.rows) {
    MetricsRow r;
    r.slice = row[0];
    r.es_alt = csv::to_double(row[1], path);
    r.es_std = csv::to_double(row[2], path);
    r.npv_alt = csv::to_double(row[3], path);
    r.npv_std = csv::to_double(row[4], path);
    r.raroc_alt = csv::to_double(row[5], path);
    r.raroc_std = csv::to_double(row[6], path);
    r.ci_alt_low = csv::to_double(row[7], path);
    r.ci_alt_high = csv::to_double(row[8], path);
    r.ci_std_low = csv::to_double(row[9], path);
    r.ci_std_high = csv::to_double(row[10], path);
    r.n_episodes = static_cast<long>(csv::to_double(row[11], path));
    table.rows.push_back(std::move(r));
  }
  return table;
}

void emit_distributions_csv(const std::vector<EpisodeResult>& results,
                            const std::string& path, PolicyKind alt_kind,
                            PolicyKind std_kind) {
  csv::Writer w(path);
  w.row({"episode", "seed", "n_firms", "scenario", "lead_value", "npv_alt",
         "npv_std", "winner"});
  for (const auto& r : results) {
    double alt_sum = 0.0, std_sum = 0.0;
    long alt_n = 0, std_n = 0;
    for (int i = 0; i < r.n_agents; ++i) {
      const PolicyKind kind = r.policy_kind[static_cast<std::size_t>(i)];
      if (kind == alt_kind) {
        alt_sum += r.npv[static_cast<std::size_t>(i)];
        ++alt_n;
      } else if (kind == std_kind) {
        std_sum += r.npv[static_cast<std::size_t>(i)];
        ++std_n;
      }
    }
    w.row({std::to_string(r.episode_index), std::to_string(r.seed),
           std::to_string(r.n_agents), scenario_bucket_label(r.regime),
           csv::format_double(r.winner ? r.first_won_lead_value : 0.0),
           csv::format_double(alt_n ? alt_sum / alt_n : 0.0),
           csv::format_double(std_n ? std_sum / std_n : 0.0),
           r.winner ? std::to_string(*r.winner) : std::string("none")});
  }
}

}  // namespace upstream
