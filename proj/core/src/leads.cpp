#include "upstream/leads.hpp"

#include <cmath>

#include "upstream/csv.hpp"
#include "upstream/errors.hpp"

namespace upstream {

void InfoSchedule::validate() const {
  for (int i = 2; i < 4; ++i) {
    if (!(noise_std[i] < noise_std[i - 1]))
      throw ConfigError("InfoSchedule: noise_std must strictly decrease with level");
    if (!(cost[i] > cost[i - 1]))
      throw ConfigError("InfoSchedule: cost must strictly increase with level");
  }
  if (!(noise_std[1] > 0.0)) throw ConfigError("InfoSchedule: Low noise_std must be > 0");
  if (!(cost[1] > 0.0)) throw ConfigError("InfoSchedule: Low cost must be > 0");
}

double Belief::median_value() const { return std::exp(mean_log); }

InfoLevel info_level_from_string(const std::string& name) {
  if (name == "None") return InfoLevel::None;
  if (name == "Low") return InfoLevel::Low;
  if (name == "Med") return InfoLevel::Med;
  if (name == "High") return InfoLevel::High;
  throw IoError("unknown info level '" + name + "'");
}

std::vector<LeadSpec> sample_lead_catalog(int n_leads, RngStream& rng,
                                          const CatalogGrid& grid) {
  if (n_leads < 1) throw ConfigError("sample_lead_catalog: n_leads must be >= 1");
  std::vector<LeadSpec> catalog;
  catalog.reserve(static_cast<std::size_t>(n_leads));
  const double lo = std::log(grid.value_lo);
  const double hi = std::log(grid.value_hi);
  for (int i = 0; i < n_leads; ++i) {
    LeadSpec spec;
    spec.lead_id = i;
    spec.mu_log = rng.uniform(lo, hi);
    spec.sigma_log = rng.uniform(grid.sigma_lo, grid.sigma_hi);
    catalog.push_back(spec);
  }
  return catalog;
}

Lead realize_true_value(const LeadSpec& spec, RngStream& rng) {
  if (!(spec.sigma_log > 0.0))
    throw ConfigError("LeadSpec: sigma_log must be > 0");
  Lead lead;
  lead.spec = spec;
  lead.true_value = std::exp(spec.mu_log + spec.sigma_log * rng.normal());
  return lead;
}

double acquire_signal(const Lead& lead, const InfoQuality& q, RngStream& rng) {
  if (q.level == InfoLevel::None)
    throw std::invalid_argument("acquire_signal: quality level None carries no signal");
  return std::log(lead.true_value) + q.noise_std * rng.normal();
}

Belief update_belief(const Belief& prior, double signal, const InfoQuality& q) {
  if (q.level == InfoLevel::None)
    throw std::invalid_argument("update_belief: quality level None carries no signal");
  if (prior.var_log < 0.0)
    throw std::domain_error("update_belief: prior variance must be >= 0");

  const double noise_var = q.noise_std * q.noise_std;
  if (noise_var == 0.0) return {signal, 0.0};  // infinite-precision limit
  if (prior.var_log == 0.0) return prior;      // already certain

  const double prior_prec = 1.0 / prior.var_log;
  const double signal_prec = 1.0 / noise_var;
  const double post_prec = prior_prec + signal_prec;
  Belief post;
  post.var_log = 1.0 / post_prec;
  post.mean_log = (prior.mean_log * prior_prec + signal * signal_prec) / post_prec;
  return post;
}

Belief prior_belief(const LeadSpec& spec) {
  return {spec.mu_log, spec.sigma_log * spec.sigma_log};
}

void save_catalog_csv(const std::vector<LeadSpec>& catalog, const std::string& path) {
  csv::Writer w(path);
  w.row({"lead_id", "mu_log", "sigma_log"});
  for (const auto& spec : catalog)
    w.row({std::to_string(spec.lead_id), csv::format_double(spec.mu_log),
           csv::format_double(spec.sigma_log)});
}

std::vector<LeadSpec> load_catalog_csv(const std::string& path) {
  const auto t = csv::read_file(path);
  if (t.header != std::vector<std::string>{"lead_id", "mu_log", "sigma_log"})
    throw IoError("lead catalog " + path +
                  ": expected header lead_id,mu_log,sigma_log");
  std::vector<LeadSpec> catalog;
  catalog.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    LeadSpec spec;
    spec.lead_id = static_cast<int>(csv::to_double(row[0], path));
    spec.mu_log = csv::to_double(row[1], path);
    spec.sigma_log = csv::to_double(row[2], path);
    if (!(spec.sigma_log > 0.0))
      throw IoError("lead catalog " + path + ": sigma_log must be > 0");
    catalog.push_back(spec);
  }
  return catalog;
}

}  // namespace upstream
