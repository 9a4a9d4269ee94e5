#pragma once

#include <array>
#include <string>
#include <vector>

#include "upstream/rng.hpp"

namespace upstream {

// Log-normal value distribution of one geological prospect (USD MM).
struct LeadSpec {
  int lead_id = 0;
  double mu_log = 0.0;     // mean of log-value
  double sigma_log = 0.5;  // std of log-value, > 0
};

// A prospect with its realized (hidden) value.
struct Lead {
  LeadSpec spec;
  double true_value = 0.0;  // USD MM, never shown to agents
};

enum class InfoLevel { None = 0, Low = 1, Med = 2, High = 3 };

inline const char* to_string(InfoLevel l) {
  switch (l) {
    case InfoLevel::None: return "None";
    case InfoLevel::Low: return "Low";
    case InfoLevel::Med: return "Med";
    case InfoLevel::High: return "High";
  }
  return "?";
}

InfoLevel info_level_from_string(const std::string& name);

// Per-level signal noise (log-value units) and acquisition cost (USD MM).
// noise_std must be strictly decreasing and cost strictly increasing in level.
struct InfoQuality {
  InfoLevel level = InfoLevel::None;
  double noise_std = 0.0;
  double cost = 0.0;
};

// Quality schedule indexed by InfoLevel; None carries no signal and no cost.
struct InfoSchedule {
  std::array<double, 4> noise_std = {0.0, 0.6, 0.3, 0.1};
  std::array<double, 4> cost = {0.0, 2.0, 6.0, 18.0};

  InfoQuality at(InfoLevel level) const {
    const auto i = static_cast<std::size_t>(level);
    return {level, noise_std[i], cost[i]};
  }
  void validate() const;
};

// Gaussian posterior over log-value.
struct Belief {
  double mean_log = 0.0;
  double var_log = 0.0;  // >= 0; never increases under a signal update

  double median_value() const;  // exp(mean_log)
};

// Catalog parameter grid: mu_log uniform over [ln(lo), ln(hi)] USD MM and
// sigma_log uniform over [sigma_lo, sigma_hi], spanning marginal prospects
// through giant fields.
struct CatalogGrid {
  double value_lo = 50.0;
  double value_hi = 800.0;
  double sigma_lo = 0.3;
  double sigma_hi = 1.0;
};

std::vector<LeadSpec> sample_lead_catalog(int n_leads, RngStream& rng,
                                          const CatalogGrid& grid = {});

Lead realize_true_value(const LeadSpec& spec, RngStream& rng);

// Noisy log-value observation: ln(true_value) + noise_std * z.
// Rejects quality level None.
double acquire_signal(const Lead& lead, const InfoQuality& q, RngStream& rng);

// Conjugate normal update in log space. Posterior precision adds the signal
// precision; a zero-noise signal collapses the posterior onto the signal.
Belief update_belief(const Belief& prior, double signal, const InfoQuality& q);

// Common prior for a lead: the generating distribution itself.
Belief prior_belief(const LeadSpec& spec);

// CSV import/export (columns: lead_id, mu_log, sigma_log) so evaluation runs
// can pin a fixed catalog.
void save_catalog_csv(const std::vector<LeadSpec>& catalog, const std::string& path);
std::vector<LeadSpec> load_catalog_csv(const std::string& path);

}  // namespace upstream
