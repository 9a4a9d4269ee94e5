#include "upstream/firms.hpp"

#include <cmath>

#include "upstream/csv.hpp"
#include "upstream/errors.hpp"

namespace upstream {

FirmClass firm_class_from_string(const std::string& name) {
  if (name == "IOC") return FirmClass::IOC;
  if (name == "NOC") return FirmClass::NOC;
  throw IoError("unknown firm class '" + name + "' (expected IOC or NOC)");
}

Phase phase_from_string(const std::string& name) {
  if (name == "Bidding") return Phase::Bidding;
  if (name == "Exploration") return Phase::Exploration;
  if (name == "Development") return Phase::Development;
  if (name == "Production") return Phase::Production;
  if (name == "Exited") return Phase::Exited;
  throw IoError("unknown phase '" + name + "'");
}

namespace {

constexpr const char* kVariables[] = {
    "inv",         "up_inv_perc", "exp_inv_perc", "firm_volatility",
    "firm_return", "daily_prod",  "year_res",     "var_res",
    "inc_res"};

GaussianStat stat_from_range(double lo, double mean, double hi) {
  // Range heuristic: std ~ (max - min)/4 when the source gives no std.
  return {mean, (hi - lo) / 4.0};
}

double truncated_normal(GaussianStat s, double lo, double hi, RngStream& rng) {
  if (s.std == 0.0) return std::min(std::max(s.mean, lo), hi);
  for (int attempt = 0; attempt < 256; ++attempt) {
    const double x = rng.normal(s.mean, s.std);
    if (x >= lo && x <= hi) return x;
  }
  return std::min(std::max(s.mean, lo), hi);
}

}  // namespace

std::vector<FirmProfile> load_profiles(const std::string& path,
                                       const RiskPremiumCoeffs& coeffs) {
  const auto t = csv::read_file(path);

  std::vector<std::string> expected = {"name", "class"};
  for (const char* var : kVariables)
    for (const char* suffix : {"_min", "_mean", "_max"})
      expected.push_back(std::string(var) + suffix);

  for (const auto& col : expected)
    if (t.column(col) < 0)
      throw IoError("profile CSV " + path + ": missing column '" + col + "'");
  if (t.header.size() != expected.size() || t.header != expected)
    throw IoError("profile CSV " + path + ": header must be exactly: name,class,"
                  "then <var>_min,<var>_mean,<var>_max per variable");
  if (t.rows.size() < 2)
    throw IoError("profile CSV " + path + ": need at least 2 firms");

  std::vector<FirmProfile> profiles;
  profiles.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    FirmProfile p;
    p.name = row[0];
    p.firm_class = firm_class_from_string(row[1]);
    GaussianStat* stats[] = {&p.inv,         &p.up_inv_perc, &p.exp_inv_perc,
                             &p.firm_volatility, &p.firm_return, &p.daily_prod,
                             &p.year_res,    &p.var_res,     &p.inc_res};
    for (int v = 0; v < 9; ++v) {
      const double lo = csv::to_double(row[2 + 3 * v + 0], path);
      const double mean = csv::to_double(row[2 + 3 * v + 1], path);
      const double hi = csv::to_double(row[2 + 3 * v + 2], path);
      if (!(lo <= mean && mean <= hi))
        throw ConfigError("profile CSV " + path + ", firm " + p.name +
                          ": min <= mean <= max violated for " + kVariables[v]);
      *stats[v] = stat_from_range(lo, mean, hi);
    }
    if (!(p.inv.mean > 0.0))
      throw ConfigError("profile CSV " + path + ", firm " + p.name +
                        ": mean investment must be positive");
    p.risk_premium = risk_premium_from_profile(p, coeffs);
    profiles.push_back(std::move(p));
  }
  return profiles;
}

AgentState sample_agent_init(const FirmProfile& profile, RngStream& rng) {
  constexpr double kInf = 1e30;
  AgentState agent;
  agent.phase = Phase::Bidding;
  agent.phase_age = 0;
  agent.risk_premium = profile.risk_premium;

  FirmDraw& d = agent.draw;
  d.inv = truncated_normal(profile.inv, 0.0, kInf, rng);
  d.up_inv_perc = truncated_normal(profile.up_inv_perc, 0.0, 1.0, rng);
  d.exp_inv_perc = truncated_normal(profile.exp_inv_perc, 0.0, 1.0, rng);
  d.firm_volatility = truncated_normal(profile.firm_volatility, 0.0, 1.0, rng);
  d.firm_return = truncated_normal(profile.firm_return, 0.0, 1.0, rng);
  d.daily_prod = truncated_normal(profile.daily_prod, 0.0, kInf, rng);
  d.year_res = truncated_normal(profile.year_res, 0.0, kInf, rng);
  d.var_res = truncated_normal(profile.var_res, 0.0, 1.0, rng);
  d.inc_res = truncated_normal(profile.inc_res, 0.0, kInf, rng);
  agent.reserves = d.year_res;
  return agent;
}

double rp_ratio(const std::vector<FirmProfile>& profiles, FirmClass produced_class,
                int* n_excluded) {
  double sum = 0.0;
  int n = 0, excluded = 0;
  for (const auto& p : profiles) {
    if (p.firm_class != produced_class) continue;
    const double annual_bboe = p.daily_prod.mean * 365.0 / 1000.0;
    if (annual_bboe <= 0.0) {
      ++excluded;
      continue;
    }
    sum += p.year_res.mean / annual_bboe;
    ++n;
  }
  if (n_excluded) *n_excluded = excluded;
  if (n == 0)
    throw ConfigError("rp_ratio: no producing firm of the requested class");
  return sum / n;
}

double risk_premium_from_profile(const FirmProfile& profile,
                                 const RiskPremiumCoeffs& coeffs) {
  double premium = coeffs.base;
  if (profile.firm_class == FirmClass::IOC) premium += coeffs.ioc_adjustment;
  premium += coeffs.volatility_loading * profile.firm_volatility.mean;
  return premium;
}

IndustryAnchors anchors_from_profiles(const std::vector<FirmProfile>& profiles) {
  IndustryAnchors a;
  a.tot_inv = a.tot_inv_up = a.tot_inv_exp = 0.0;
  a.tot_prod = a.tot_res = a.tot_inc_res = 0.0;
  for (const auto& p : profiles) {
    a.tot_inv += p.inv.mean;
    a.tot_inv_up += p.inv.mean * p.up_inv_perc.mean;
    a.tot_inv_exp += p.inv.mean * p.exp_inv_perc.mean;
    a.tot_prod += p.daily_prod.mean;
    a.tot_res += p.year_res.mean;
    a.tot_inc_res += p.inc_res.mean;
  }
  return a;
}

}  // namespace upstream
