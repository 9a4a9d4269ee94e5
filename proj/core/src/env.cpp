#include "upstream/env.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "upstream/errors.hpp"

namespace upstream {

void GameConfig::validate() const {
  if (n_agents < 2) throw ConfigError("GameConfig: n_agents must be >= 2");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw ConfigError("GameConfig: gamma must be in (0, 1]");
  if (durations.bidding < 1 || durations.exploration < 1 ||
      durations.development < 1 || durations.production < 1)
    throw ConfigError("GameConfig: phase durations must be >= 1");
  price.validate();
  scenario.validate();
  costs.info.validate();
  if (!(variance_gate > 0.0)) throw ConfigError("GameConfig: variance_gate must be > 0");
  if (!(value_per_bbl > 0.0)) throw ConfigError("GameConfig: value_per_bbl must be > 0");
  if (production.plateau_years < 1 || production.plateau_years > durations.production)
    throw ConfigError("GameConfig: plateau_years must be in [1, T_prod]");
  if (!(production.decline_rate >= 0.0 && production.decline_rate < 1.0))
    throw ConfigError("GameConfig: decline_rate must be in [0, 1)");
  if (!(bid.beta > 0.0)) throw ConfigError("GameConfig: bid beta must be > 0");
  if (costs.exploration_well < 0 || costs.development_total < 0 ||
      costs.operating_per_year < 0)
    throw ConfigError("GameConfig: costs must be >= 0");
  if (base_discount_rate < 0.0)
    throw ConfigError("GameConfig: base_discount_rate must be >= 0");
}

AuctionResult run_auction(const std::vector<std::pair<int, double>>& bids,
                          RngStream& rng) {
  std::vector<std::pair<int, double>> valid;
  valid.reserve(bids.size());
  for (const auto& b : bids)
    if (b.second >= 0.0) valid.push_back(b);  // negative bid == invalid == defer
  if (valid.empty()) return {};

  double best = valid.front().second;
  for (const auto& b : valid) best = std::max(best, b.second);

  std::vector<int> tied;
  for (const auto& b : valid)
    if (b.second == best) tied.push_back(b.first);

  const int pick = tied.size() == 1
                       ? tied.front()
                       : tied[static_cast<std::size_t>(rng.uniform_int(tied.size()))];
  return {pick, best};
}

namespace {

// Lifetime volume divided by q0: plateau years plus the geometric decline tail.
double profile_volume_factor(const GameConfig& cfg) {
  const int plateau = cfg.production.plateau_years;
  const int total = cfg.durations.production;
  const double keep = 1.0 - cfg.production.decline_rate;
  double factor = static_cast<double>(plateau);
  double level = 1.0;
  for (int t = plateau; t < total; ++t) {
    level *= keep;
    factor += level;
  }
  return factor;
}

double volume_at(double q0, int t_in_prod, const GameConfig& cfg) {
  if (t_in_prod < 0 || t_in_prod >= cfg.durations.production) return 0.0;
  const int plateau = cfg.production.plateau_years;
  if (t_in_prod < plateau) return q0;
  return q0 * std::pow(1.0 - cfg.production.decline_rate,
                       t_in_prod - plateau + 1);
}

}  // namespace

double production_volume(const AgentState& agent, int t_in_prod,
                         const GameConfig& config) {
  if (agent.phase != Phase::Production) return 0.0;
  return volume_at(agent.prod_q0, t_in_prod, config);
}

RewardComponents compute_reward_components(const AgentState& agent,
                                           const Action& action,
                                           const MarketState& market,
                                           const GameConfig& config,
                                           double bid_paid) {
  RewardComponents comps;
  if (agent.phase == Phase::Production) {
    const double q = production_volume(agent, agent.phase_age, config);
    comps.production_term = market.price * q - config.costs.operating_per_year;
  }
  if (action.proceed) {
    comps.c_info = config.costs.info.cost[static_cast<std::size_t>(action.eta)];
    switch (agent.phase) {
      case Phase::Bidding:
        comps.c_inv = bid_paid;
        break;
      case Phase::Exploration:
        comps.c_inv = agent.paid_exploration_well ? 0.0 : config.costs.exploration_well;
        break;
      case Phase::Development:
        comps.c_inv = config.costs.development_total / config.durations.development;
        break;
      default:
        break;
    }
  }
  return comps;
}

double production_pv(double lead_value, double price, double rate,
                     const GameConfig& config) {
  const double volume = lead_value / config.value_per_bbl;
  const double q0 = volume / profile_volume_factor(config);
  double pv = 0.0;
  double df = 1.0;
  const double step = 1.0 / (1.0 + rate);
  for (int t = 0; t < config.durations.production; ++t) {
    pv += (price * volume_at(q0, t, config) - config.costs.operating_per_year) * df;
    df *= step;
  }
  return pv;
}

int years_to_production(Phase phase, int phase_age, const GameConfig& config) {
  const auto& d = config.durations;
  switch (phase) {
    case Phase::Bidding: return d.bidding + d.exploration + d.development;
    case Phase::Exploration: return d.exploration - phase_age + d.development;
    case Phase::Development: return d.development - phase_age;
    case Phase::Production: return 0;
    case Phase::Exited: return d.bidding + d.exploration + d.development;
  }
  return 0;
}

double remaining_cost_pv(Phase phase, int phase_age, bool paid_well,
                         double rate, const GameConfig& config) {
  const auto& d = config.durations;
  const double tranche = config.costs.development_total / d.development;
  const auto df = [&](int years) { return std::pow(1.0 + rate, -years); };

  double pv = 0.0;
  switch (phase) {
    case Phase::Bidding:
      pv += config.costs.exploration_well * df(d.bidding);
      for (int j = d.bidding + d.exploration;
           j < d.bidding + d.exploration + d.development; ++j)
        pv += tranche * df(j);
      break;
    case Phase::Exploration: {
      if (!paid_well) pv += config.costs.exploration_well;
      const int first = d.exploration - phase_age;
      for (int j = first; j < first + d.development; ++j) pv += tranche * df(j);
      break;
    }
    case Phase::Development:
      for (int j = 0; j < d.development - phase_age; ++j) pv += tranche * df(j);
      break;
    default:
      break;
  }
  return pv;
}

double project_gross_value(double est_value, double price, double rate,
                           Phase phase, int phase_age, bool paid_well,
                           const GameConfig& config) {
  const int offset = years_to_production(phase, phase_age, config);
  const double pv = production_pv(est_value, price, rate, config) *
                    std::pow(1.0 + rate, -offset);
  return pv - remaining_cost_pv(phase, phase_age, paid_well, rate, config);
}

double certainty_equivalent(const Belief& belief, double risk_premium,
                            const BidRule& rule) {
  const double lambda = rule.lambda_scale * (risk_premium / 0.10);
  return std::exp(belief.mean_log - lambda * belief.var_log);
}

GameEnv::GameEnv(GameConfig config, std::vector<FirmProfile> profiles,
                 std::vector<LeadSpec> catalog)
    : config_(std::move(config)),
      profiles_(std::move(profiles)),
      catalog_(std::move(catalog)) {
  config_.validate();
  if (catalog_.empty()) throw ConfigError("GameEnv: lead catalog is empty");
  if (profiles_.empty()) throw ConfigError("GameEnv: no firm profiles");
  anchors_ = anchors_from_profiles(profiles_);
}

int GameEnv::current_market_index() const {
  return std::min(t_, config_.horizon() - 1);
}

void GameEnv::realize_offered_lead() {
  const auto idx = lead_rng_.uniform_int(catalog_.size());
  offered_ = realize_true_value(catalog_[idx], lead_rng_);
}

std::vector<Observation> GameEnv::reset(std::uint64_t episode_seed) {
  auto scenario_rng = RngStream::derive(episode_seed, stream_tag::kScenario);
  lead_rng_ = RngStream::derive(episode_seed, stream_tag::kCatalog);
  signal_rng_ = RngStream::derive(episode_seed, stream_tag::kEnv, 1);
  auction_rng_ = RngStream::derive(episode_seed, stream_tag::kEnv, 2);
  init_rng_ = RngStream::derive(episode_seed, stream_tag::kAgentInit);

  traj_ = generate_scenario(config_.scenario, config_.price, anchors_,
                            scenario_rng, config_.price_floor);

  // Rotate profile assignment per episode so no strategy is tied to one firm.
  std::vector<std::size_t> perm(profiles_.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[init_rng_.uniform_int(i)]);

  agents_.clear();
  agents_.reserve(static_cast<std::size_t>(config_.n_agents));
  for (int i = 0; i < config_.n_agents; ++i) {
    const auto& profile = profiles_[perm[static_cast<std::size_t>(i) % perm.size()]];
    AgentState agent = sample_agent_init(profile, init_rng_);
    agent.agent_id = i;
    agents_.push_back(std::move(agent));
  }

  t_ = 0;
  done_ = false;
  exited_action_warnings_ = 0;
  trace_.clear();
  realize_offered_lead();

  std::vector<Observation> obs;
  obs.reserve(agents_.size());
  for (int i = 0; i < config_.n_agents; ++i) obs.push_back(observe(i));
  return obs;
}

std::optional<Belief> GameEnv::decision_belief(int agent_id) const {
  const auto& agent = agents_.at(static_cast<std::size_t>(agent_id));
  if (agent.phase == Phase::Bidding) return prior_belief(offered_.spec);
  return agent.belief;
}

Observation GameEnv::observe(int agent_id) const {
  const auto& agent = agents_.at(static_cast<std::size_t>(agent_id));
  const MarketState& m = traj_[static_cast<std::size_t>(current_market_index())];
  const auto safe = [](double anchor) { return anchor > 1e-9 ? anchor : 1.0; };

  Observation obs(kObsDim, 0.0);
  obs[0] = m.price / config_.price.pbar;
  obs[1] = m.volatility;
  obs[2] = m.demand;
  obs[3] = m.tot_inv / safe(anchors_.tot_inv);
  obs[4] = m.tot_inv_up / safe(anchors_.tot_inv_up);
  obs[5] = m.tot_inv_exp / safe(anchors_.tot_inv_exp);
  obs[6] = m.tot_prod / safe(anchors_.tot_prod);
  obs[7] = m.tot_res / safe(anchors_.tot_res);
  obs[8] = m.tot_inc_res / safe(anchors_.tot_inc_res);

  obs[9 + static_cast<int>(agent.phase)] = 1.0;
  obs[14] = static_cast<double>(agent.phase_age) / config_.durations.production;
  obs[15] = agent.reserves / 25.0;
  obs[16] = static_cast<double>(agent.info_quality_held) / 3.0;
  if (const auto belief = decision_belief(agent_id)) {
    obs[17] = belief->median_value() / config_.catalog_grid.value_hi;
    obs[18] = belief->var_log;
  }
  obs[19] = agent.capital_spent / 1000.0;

  double comp_capital = 0.0, comp_prod = 0.0;
  for (const auto& other : agents_) {
    if (other.agent_id == agent_id) continue;
    comp_capital += other.capital_spent;
    comp_prod += production_volume(other, other.phase_age, config_);
  }
  obs[20] = comp_capital / 1000.0;
  obs[21] = comp_prod / 20.0;
  return obs;
}

StepOutcome GameEnv::step(const std::vector<Action>& joint_actions) {
  if (done_) throw std::logic_error("GameEnv::step called on a finished episode");
  if (joint_actions.size() != static_cast<std::size_t>(config_.n_agents))
    throw std::invalid_argument("GameEnv::step: one action per agent required");

  const MarketState market = traj_[static_cast<std::size_t>(t_)];
  const int n = config_.n_agents;

  // Sanitize: actions for exited agents are ignored (counted), everything
  // else passes through.
  std::vector<Action> acts = joint_actions;
  for (int i = 0; i < n; ++i) {
    if (agents_[static_cast<std::size_t>(i)].phase == Phase::Exited &&
        (acts[static_cast<std::size_t>(i)].proceed ||
         acts[static_cast<std::size_t>(i)].eta != InfoLevel::None)) {
      ++exited_action_warnings_;
      acts[static_cast<std::size_t>(i)] = {};
    }
  }

  // Information purchases. Bidding agents form a transient posterior on the
  // offered lead; holders of an active lead refine their own belief.
  std::vector<Belief> bid_posteriors(static_cast<std::size_t>(n));
  std::vector<InfoLevel> bid_quality(static_cast<std::size_t>(n), InfoLevel::None);
  for (int i = 0; i < n; ++i) {
    auto& agent = agents_[static_cast<std::size_t>(i)];
    const Action& a = acts[static_cast<std::size_t>(i)];
    if (agent.phase == Phase::Bidding) {
      Belief post = prior_belief(offered_.spec);
      if (a.proceed && a.eta != InfoLevel::None) {
        const auto q = config_.costs.info.at(a.eta);
        post = update_belief(post, acquire_signal(offered_, q, signal_rng_), q);
        bid_quality[static_cast<std::size_t>(i)] = a.eta;
      }
      bid_posteriors[static_cast<std::size_t>(i)] = post;
    } else if (agent.belief && a.proceed && a.eta != InfoLevel::None &&
               agent.phase != Phase::Exited) {
      const auto q = config_.costs.info.at(a.eta);
      Lead lead;
      lead.spec = catalog_[0];  // spec irrelevant to the signal draw
      lead.true_value = agent.lead_true_value;
      agent.belief = update_belief(*agent.belief,
                                   acquire_signal(lead, q, signal_rng_), q);
      agent.info_quality_held = std::max(agent.info_quality_held, a.eta);
    }
  }

  // Auction among committed bidders that pass the participation check:
  // bidding is rational only when the posterior project value covers the bid.
  std::vector<std::pair<int, double>> bids;
  std::vector<double> bid_amount(static_cast<std::size_t>(n), 0.0);
  std::vector<bool> submitted(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    const auto& agent = agents_[static_cast<std::size_t>(i)];
    const Action& a = acts[static_cast<std::size_t>(i)];
    if (agent.phase != Phase::Bidding || !a.proceed) continue;
    const Belief& post = bid_posteriors[static_cast<std::size_t>(i)];
    const double ce = certainty_equivalent(post, agent.risk_premium, config_.bid);
    const double bid = config_.bid.beta * ce;
    const double rate = config_.base_discount_rate + agent.risk_premium;
    const double gross = project_gross_value(ce, market.price, rate,
                                             Phase::Bidding, 0, false, config_);
    if (gross >= bid) {
      bids.emplace_back(i, bid);
      bid_amount[static_cast<std::size_t>(i)] = bid;
      submitted[static_cast<std::size_t>(i)] = true;
    }
  }
  const AuctionResult auction = run_auction(bids, auction_rng_);

  // Rewards against the pre-transition state.
  StepRecord record;
  record.t = t_;
  record.market = market;
  record.agents.resize(static_cast<std::size_t>(n));
  StepOutcome outcome;
  outcome.agents.resize(static_cast<std::size_t>(n));
  const double discount = std::pow(config_.gamma, t_);
  for (int i = 0; i < n; ++i) {
    auto& agent = agents_[static_cast<std::size_t>(i)];
    const Action& a = acts[static_cast<std::size_t>(i)];
    const double bid_paid =
        (auction.winner && *auction.winner == i) ? auction.price_paid : 0.0;
    const RewardComponents comps =
        compute_reward_components(agent, a, market, config_, bid_paid);
    const double reward = comps.total();
    agent.cum_discounted_cash += discount * reward;
    agent.capital_spent += comps.c_inv + comps.c_info;

    auto& rec = record.agents[static_cast<std::size_t>(i)];
    rec.agent_id = i;
    rec.phase = agent.phase;
    rec.phase_age = agent.phase_age;
    rec.action = a;
    rec.components = comps;
    rec.reward = reward;
    rec.bid_amount = bid_amount[static_cast<std::size_t>(i)];
    rec.bid_submitted = submitted[static_cast<std::size_t>(i)];
    rec.won_auction = auction.winner && *auction.winner == i;
    if (rec.won_auction) rec.won_lead_value = offered_.true_value;
    rec.risk_premium = agent.risk_premium;
    if (agent.phase == Phase::Bidding)
      rec.belief_var = bid_posteriors[static_cast<std::size_t>(i)].var_log;
    else if (agent.belief)
      rec.belief_var = agent.belief->var_log;

    outcome.agents[static_cast<std::size_t>(i)].reward = reward;
  }

  apply_transitions(acts, auction.winner, bid_posteriors, bid_quality);

  ++t_;
  bool all_exited = true;
  for (const auto& agent : agents_)
    if (agent.phase != Phase::Exited) all_exited = false;
  done_ = all_exited || t_ >= config_.horizon();

  realize_offered_lead();  // fresh prospect for the next bidding round

  for (int i = 0; i < n; ++i) {
    auto& out = outcome.agents[static_cast<std::size_t>(i)];
    out.observation = observe(i);
    out.done = done_ || agents_[static_cast<std::size_t>(i)].phase == Phase::Exited;
  }
  outcome.market = traj_[static_cast<std::size_t>(current_market_index())];
  outcome.episode_done = done_;
  trace_.push_back(std::move(record));
  return outcome;
}

void GameEnv::apply_transitions(const std::vector<Action>& actions,
                                const std::optional<int>& winner,
                                const std::vector<Belief>& bid_posteriors,
                                const std::vector<InfoLevel>& bid_quality) {
  for (int i = 0; i < config_.n_agents; ++i) {
    auto& agent = agents_[static_cast<std::size_t>(i)];
    const Action& a = actions[static_cast<std::size_t>(i)];
    switch (agent.phase) {
      case Phase::Bidding:
        if (winner && *winner == i) {
          agent.phase = Phase::Exploration;
          agent.phase_age = 0;
          agent.active_lead = offered_.spec.lead_id;
          agent.belief = bid_posteriors[static_cast<std::size_t>(i)];
          agent.lead_true_value = offered_.true_value;
          agent.info_quality_held = bid_quality[static_cast<std::size_t>(i)];
          agent.paid_exploration_well = false;
        }
        break;
      case Phase::Exploration:
        if (a.proceed) {
          agent.paid_exploration_well = true;
          ++agent.phase_age;
          if (agent.phase_age >= config_.durations.exploration && agent.belief &&
              agent.belief->var_log <= config_.variance_gate) {
            agent.phase = Phase::Development;
            agent.phase_age = 0;
          } else {
            // Gate failures wait at the duration cap until the belief sharpens.
            agent.phase_age = std::min(agent.phase_age, config_.durations.exploration);
          }
        }
        break;
      case Phase::Development:
        if (a.proceed) {
          ++agent.phase_age;
          if (agent.phase_age >= config_.durations.development) {
            agent.phase = Phase::Production;
            agent.phase_age = 0;
            agent.prod_q0 = (agent.lead_true_value / config_.value_per_bbl) /
                            profile_volume_factor(config_);
          }
        }
        break;
      case Phase::Production:
        ++agent.phase_age;  // production runs regardless of the action
        if (agent.phase_age >= config_.durations.production) {
          agent.phase = Phase::Exited;
          agent.phase_age = 0;
        }
        break;
      case Phase::Exited:
        break;
    }
  }
}

// --------------------------- trace serialization ---------------------------

namespace {

using nlohmann::json;

json market_to_json(const MarketState& m) {
  return json{{"price", m.price},       {"volatility", m.volatility},
              {"demand", m.demand},     {"tot_inv", m.tot_inv},
              {"tot_inv_up", m.tot_inv_up}, {"tot_inv_exp", m.tot_inv_exp},
              {"tot_prod", m.tot_prod}, {"tot_res", m.tot_res},
              {"tot_inc_res", m.tot_inc_res}};
}

MarketState market_from_json(const json& j) {
  MarketState m;
  m.price = j.at("price");
  m.volatility = j.at("volatility");
  m.demand = j.at("demand");
  m.tot_inv = j.at("tot_inv");
  m.tot_inv_up = j.at("tot_inv_up");
  m.tot_inv_exp = j.at("tot_inv_exp");
  m.tot_prod = j.at("tot_prod");
  m.tot_res = j.at("tot_res");
  m.tot_inc_res = j.at("tot_inc_res");
  return m;
}

}  // namespace

void write_trace_jsonl(const std::vector<StepRecord>& trace, std::ostream& out) {
  for (const auto& step : trace) {
    json j;
    j["t"] = step.t;
    j["market"] = market_to_json(step.market);
    json agents = json::array();
    for (const auto& a : step.agents) {
      agents.push_back(json{{"id", a.agent_id},
                            {"phase", to_string(a.phase)},
                            {"phase_age", a.phase_age},
                            {"u", a.action.proceed ? 1 : 0},
                            {"eta", to_string(a.action.eta)},
                            {"prod_term", a.components.production_term},
                            {"c_inv", a.components.c_inv},
                            {"c_info", a.components.c_info},
                            {"reward", a.reward},
                            {"belief_var", a.belief_var},
                            {"bid", a.bid_amount},
                            {"bid_submitted", a.bid_submitted},
                            {"won", a.won_auction},
                            {"won_lead_value", a.won_lead_value},
                            {"risk_premium", a.risk_premium}});
    }
    j["agents"] = std::move(agents);
    out << j.dump() << '\n';
  }
}

std::vector<StepRecord> read_trace_jsonl(std::istream& in) {
  std::vector<StepRecord> trace;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    StepRecord step;
    step.t = j.at("t");
    step.market = market_from_json(j.at("market"));
    for (const auto& a : j.at("agents")) {
      AgentStepRecord rec;
      rec.agent_id = a.at("id");
      rec.phase = phase_from_string(a.at("phase"));
      rec.phase_age = a.at("phase_age");
      rec.action.proceed = static_cast<int>(a.at("u")) != 0;
      rec.action.eta = info_level_from_string(a.at("eta"));
      rec.components.production_term = a.at("prod_term");
      rec.components.c_inv = a.at("c_inv");
      rec.components.c_info = a.at("c_info");
      rec.reward = a.at("reward");
      rec.belief_var = a.at("belief_var");
      rec.bid_amount = a.at("bid");
      rec.bid_submitted = a.at("bid_submitted");
      rec.won_auction = a.at("won");
      rec.won_lead_value = a.at("won_lead_value");
      rec.risk_premium = a.at("risk_premium");
      step.agents.push_back(std::move(rec));
    }
    trace.push_back(std::move(step));
  }
  return trace;
}

}  // namespace upstream
