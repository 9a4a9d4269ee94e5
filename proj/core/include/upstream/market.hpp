#pragma once

#include <string>
#include <vector>

#include "upstream/rng.hpp"

namespace upstream {

// Mean-reverting price process parameters, annualized.
struct OuParams {
  double kappa = 0.38;   // mean-reversion speed per year
  double pbar = 65.40;   // long-run equilibrium price, USD/bbl
  double sigma = 0.28;   // proportional volatility per sqrt(year)
  double dt = 1.0;       // step size in years

  void validate() const;
};

// Snapshot of the exogenous macro environment for one simulated year.
struct MarketState {
  double price = 65.40;       // USD/bbl
  double volatility = 0.28;   // annualized, dimensionless
  double demand = 1.0;        // index, base year = 1.0
  double tot_inv = 0.0;       // industry investment, USD B/yr
  double tot_inv_up = 0.0;    // upstream share of tot_inv, USD B/yr
  double tot_inv_exp = 0.0;   // exploration share of tot_inv, USD B/yr
  double tot_prod = 0.0;      // industry production, MBOE/day
  double tot_res = 0.0;       // industry proven reserves, BBOE
  double tot_inc_res = 0.0;   // reserve additions, BBOE/yr
};

enum class Regime { Resilient, Neutral, Heat };

Regime regime_from_string(const std::string& name);
std::string to_string(Regime r);

struct ScenarioSpec {
  Regime regime = Regime::Neutral;
  double demand_growth = 0.015;  // fraction per year
  double vol_scale = 1.0;        // multiplier on OuParams::sigma
  int horizon_years = 38;

  void validate() const;
};

// Long-run anchors for the industry aggregates, normally computed as sums of
// the loaded firm-profile means. The aggregates evolve as AR(1) drifts around
// these anchors; they matter to agents only through observation features.
struct IndustryAnchors {
  double tot_inv = 175.5;    // USD B/yr
  double tot_inv_up = 140.0;
  double tot_inv_exp = 23.0;
  double tot_prod = 25.5;    // MBOE/day
  double tot_res = 125.3;    // BBOE
  double tot_inc_res = 7.0;  // BBOE/yr
  double ar_rho = 0.8;       // AR(1) persistence
  double ar_noise = 0.05;    // relative innovation scale
};

// One Euler-Maruyama step of dP = kappa*(pbar - P)dt + sigma*P*sqrt(dt)*z,
// clamped below at price_floor.
double ou_step(double price, const OuParams& params, double z,
               double price_floor = 1.0);

// Path of length n_steps+1 starting at p0. Equal seeds give bit-equal paths.
std::vector<double> simulate_price_path(double p0, const OuParams& params,
                                        int n_steps, RngStream& rng,
                                        double price_floor = 1.0);

// Year-by-year macro trajectory for one scenario: price via the OU process
// with sigma scaled by vol_scale, demand compounding at demand_growth, and
// aggregates drifting AR(1)-style around the anchors.
std::vector<MarketState> generate_scenario(const ScenarioSpec& spec,
                                           const OuParams& base,
                                           const IndustryAnchors& anchors,
                                           RngStream& rng,
                                           double price_floor = 1.0);

// Ordinary least squares on p_{t+1} = a + b*p_t:
//   kappa = (1 - b)/dt (clamped at 0), pbar = a/(1 - b),
//   sigma = sd(residuals) / (mean(p) * sqrt(dt)).
// Throws DivergenceError for a degenerate fit (constant series or b ~ 1),
// ConfigError when the series is shorter than 30 points or not positive.
OuParams calibrate_ou(const std::vector<double>& prices, double dt);

}  // namespace upstream
