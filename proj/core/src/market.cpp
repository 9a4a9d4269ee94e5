#include "upstream/market.hpp"

#include <algorithm>
#include <cmath>

#include "upstream/errors.hpp"

namespace upstream {

void OuParams::validate() const {
  if (!(kappa >= 0.0)) throw ConfigError("OuParams: kappa must be >= 0");
  if (!(pbar > 0.0)) throw ConfigError("OuParams: pbar must be > 0");
  if (!(sigma >= 0.0)) throw ConfigError("OuParams: sigma must be >= 0");
  if (!(dt > 0.0)) throw ConfigError("OuParams: dt must be > 0");
  if (!(kappa * dt < 1.0))
    throw ConfigError("OuParams: kappa*dt must be < 1 for a stable Euler step");
}

Regime regime_from_string(const std::string& name) {
  if (name == "Resilient") return Regime::Resilient;
  if (name == "Neutral") return Regime::Neutral;
  if (name == "Heat") return Regime::Heat;
  throw ConfigError("unknown scenario regime '" + name +
                    "' (expected Resilient, Neutral or Heat)");
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::Resilient: return "Resilient";
    case Regime::Neutral: return "Neutral";
    case Regime::Heat: return "Heat";
  }
  return "?";
}

void ScenarioSpec::validate() const {
  if (!(vol_scale > 0.0)) throw ConfigError("ScenarioSpec: vol_scale must be > 0");
  if (horizon_years < 1) throw ConfigError("ScenarioSpec: horizon_years must be >= 1");
}

double ou_step(double price, const OuParams& params, double z, double price_floor) {
  if (!std::isfinite(price) || !std::isfinite(z))
    throw std::domain_error("ou_step: non-finite input");
  if (!(price > 0.0)) throw std::domain_error("ou_step: price must be > 0");
  params.validate();
  const double drift = params.kappa * (params.pbar - price) * params.dt;
  const double shock = params.sigma * price * std::sqrt(params.dt) * z;
  return std::max(price + drift + shock, price_floor);
}

std::vector<double> simulate_price_path(double p0, const OuParams& params,
                                        int n_steps, RngStream& rng,
                                        double price_floor) {
  if (n_steps < 1) throw ConfigError("simulate_price_path: n_steps must be >= 1");
  std::vector<double> path;
  path.reserve(static_cast<std::size_t>(n_steps) + 1);
  path.push_back(p0);
  double p = p0;
  for (int i = 0; i < n_steps; ++i) {
    p = ou_step(p, params, rng.normal(), price_floor);
    path.push_back(p);
  }
  return path;
}

namespace {

double ar1_step(double x, double anchor, const IndustryAnchors& a, double z) {
  const double next = anchor + a.ar_rho * (x - anchor) + a.ar_noise * anchor * z;
  return std::max(next, 0.0);
}

}  // namespace

std::vector<MarketState> generate_scenario(const ScenarioSpec& spec,
                                           const OuParams& base,
                                           const IndustryAnchors& anchors,
                                           RngStream& rng,
                                           double price_floor) {
  spec.validate();
  OuParams params = base;
  params.sigma *= spec.vol_scale;
  params.validate();

  std::vector<MarketState> traj;
  traj.reserve(static_cast<std::size_t>(spec.horizon_years));

  MarketState m;
  m.price = params.pbar;
  m.volatility = params.sigma;
  m.demand = 1.0;
  m.tot_inv = anchors.tot_inv;
  m.tot_inv_up = anchors.tot_inv_up;
  m.tot_inv_exp = anchors.tot_inv_exp;
  m.tot_prod = anchors.tot_prod;
  m.tot_res = anchors.tot_res;
  m.tot_inc_res = anchors.tot_inc_res;
  traj.push_back(m);

  for (int year = 1; year < spec.horizon_years; ++year) {
    m.price = ou_step(m.price, params, rng.normal(), price_floor);
    m.demand *= 1.0 + spec.demand_growth;
    m.tot_inv = ar1_step(m.tot_inv, anchors.tot_inv, anchors, rng.normal());
    m.tot_inv_up = ar1_step(m.tot_inv_up, anchors.tot_inv_up, anchors, rng.normal());
    m.tot_inv_exp = ar1_step(m.tot_inv_exp, anchors.tot_inv_exp, anchors, rng.normal());
    m.tot_prod = ar1_step(m.tot_prod, anchors.tot_prod, anchors, rng.normal());
    m.tot_res = ar1_step(m.tot_res, anchors.tot_res, anchors, rng.normal());
    m.tot_inc_res = ar1_step(m.tot_inc_res, anchors.tot_inc_res, anchors, rng.normal());
    traj.push_back(m);
  }
  return traj;
}

OuParams calibrate_ou(const std::vector<double>& prices, double dt) {
  if (!(dt > 0.0)) throw ConfigError("calibrate_ou: dt must be > 0");
  if (prices.size() < 30)
    throw ConfigError("calibrate_ou: need at least 30 observations, got " +
                      std::to_string(prices.size()));
  for (double p : prices)
    if (!(p > 0.0) || !std::isfinite(p))
      throw ConfigError("calibrate_ou: prices must be positive and finite");

  const std::size_t n = prices.size() - 1;  // regression pairs
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += prices[i];
    sy += prices[i + 1];
  }
  const double mx = sx / static_cast<double>(n);
  const double my = sy / static_cast<double>(n);

  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = prices[i] - mx;
    sxx += dx * dx;
    sxy += dx * (prices[i + 1] - my);
  }
  if (sxx < 1e-12 * mx * mx)
    throw DivergenceError("calibrate_ou: degenerate fit (series has no variation)");

  const double b = sxy / sxx;
  const double a = my - b * mx;
  if (std::abs(1.0 - b) < 1e-8)
    throw DivergenceError("calibrate_ou: degenerate fit (no mean reversion, b ~ 1)");

  double rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = prices[i + 1] - (a + b * prices[i]);
    rss += r * r;
  }
  const double resid_sd = std::sqrt(rss / static_cast<double>(n));
  const double mean_p = (sx + prices.back()) / static_cast<double>(prices.size());

  OuParams out;
  out.dt = dt;
  out.kappa = std::max((1.0 - b) / dt, 0.0);
  out.pbar = a / (1.0 - b);
  out.sigma = resid_sd / (mean_p * std::sqrt(dt));
  if (!(out.pbar > 0.0))
    throw DivergenceError("calibrate_ou: fitted equilibrium price is not positive");
  return out;
}

}  // namespace upstream
