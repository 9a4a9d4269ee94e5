#pragma once

#include <optional>
#include <string>
#include <vector>

#include "upstream/leads.hpp"
#include "upstream/market.hpp"
#include "upstream/rng.hpp"

namespace upstream {

enum class FirmClass { IOC, NOC };

FirmClass firm_class_from_string(const std::string& name);
inline const char* to_string(FirmClass c) {
  return c == FirmClass::IOC ? "IOC" : "NOC";
}

struct GaussianStat {
  double mean = 0.0;
  double std = 0.0;
};

// Historical per-firm statistics driving agent initialization. Loaded from
// the profile CSV; std is derived from (min, mean, max) as (max - min)/4
// when the source table reports only the range.
struct FirmProfile {
  std::string name;
  FirmClass firm_class = FirmClass::IOC;
  GaussianStat inv;              // total investment, USD B/yr
  GaussianStat up_inv_perc;      // upstream share, fraction
  GaussianStat exp_inv_perc;     // exploration share, fraction
  GaussianStat firm_volatility;  // fraction
  GaussianStat firm_return;      // fraction
  GaussianStat daily_prod;       // MBOE/day
  GaussianStat year_res;         // BBOE
  GaussianStat var_res;          // fraction
  GaussianStat inc_res;          // BBOE/yr
  double risk_premium = 0.0;     // fraction/yr, filled at load time
};

struct RiskPremiumCoeffs {
  double base = 0.08;
  double ioc_adjustment = 0.02;
  double volatility_loading = 0.5;
};

enum class Phase { Bidding = 0, Exploration = 1, Development = 2, Production = 3, Exited = 4 };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Bidding: return "Bidding";
    case Phase::Exploration: return "Exploration";
    case Phase::Development: return "Development";
    case Phase::Production: return "Production";
    case Phase::Exited: return "Exited";
  }
  return "?";
}

Phase phase_from_string(const std::string& name);

// Sampled realization of a firm's operating footprint for one episode.
// Feeds the observation's firm and competitor blocks.
struct FirmDraw {
  double inv = 0.0;
  double up_inv_perc = 0.0;
  double exp_inv_perc = 0.0;
  double firm_volatility = 0.0;
  double firm_return = 0.0;
  double daily_prod = 0.0;
  double year_res = 0.0;
  double var_res = 0.0;
  double inc_res = 0.0;
};

// Live lifecycle status of one agent within an episode.
struct AgentState {
  int agent_id = 0;
  Phase phase = Phase::Bidding;
  int phase_age = 0;                              // years in current phase
  double reserves = 0.0;                          // BBOE
  InfoLevel info_quality_held = InfoLevel::None;  // best quality bought so far
  std::optional<Belief> belief;                   // present iff active_lead
  std::optional<int> active_lead;
  double capital_spent = 0.0;                     // USD MM, undiscounted
  double cum_discounted_cash = 0.0;               // USD MM, gamma-discounted
  FirmDraw draw;
  double risk_premium = 0.0;                      // copied from profile
  bool paid_exploration_well = false;
  double lead_true_value = 0.0;  // hidden realized value of the active lead
  double prod_q0 = 0.0;          // plateau rate, MMbbl/yr, set at Production entry
};

// Loads the profile CSV (schema documented in the README): a header row,
// then one row per firm with name, class and (min, mean, max) triplets for
// each variable. Throws IoError on missing columns naming the column, and
// ConfigError on non-positive mean investment.
std::vector<FirmProfile> load_profiles(const std::string& path,
                                       const RiskPremiumCoeffs& coeffs = {});

// Draws an initial agent from truncated Gaussians: fractions are clamped to
// [0,1] by rejection, levels to >= 0. Identical seeds give identical agents.
AgentState sample_agent_init(const FirmProfile& profile, RngStream& rng);

// Mean reserves-to-production ratio in years over firms of one class:
// year_res [BBOE] / (daily_prod [MBOE/d] * 365/1000 [BBOE/yr per MBOE/d]).
// Zero-production firms are excluded; their count is reported via
// n_excluded when non-null.
double rp_ratio(const std::vector<FirmProfile>& profiles, FirmClass produced_class,
                int* n_excluded = nullptr);

// base + IOC adjustment + volatility loading * mean firm volatility.
double risk_premium_from_profile(const FirmProfile& profile,
                                 const RiskPremiumCoeffs& coeffs = {});

// Industry aggregate anchors as sums of the loaded profile means.
IndustryAnchors anchors_from_profiles(const std::vector<FirmProfile>& profiles);

}  // namespace upstream
