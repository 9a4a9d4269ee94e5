#include "upstream/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"
#include "upstream/errors.hpp"

namespace upstream {

namespace {

using nlohmann::json;

// Strict object reader: every key must be consumed exactly once.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError("config: '" + path_ + "' must be an object");
  }

  ~ObjectReader() = default;

  const json* get(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (const json* v = get(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception&) {
        throw ConfigError("config: bad value type for '" + path_ + key + "'");
      }
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      if (!seen_.count(key))
        throw ConfigError("config: unknown key '" + path_ + key + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void parse_ou(const json& j, const std::string& path, OuParams& out) {
  ObjectReader r(j, path);
  r.read("kappa", out.kappa);
  r.read("pbar", out.pbar);
  r.read("sigma", out.sigma);
  r.read("dt", out.dt);
  r.finish();
}

void parse_scenario(const json& j, const std::string& path, ScenarioSpec& out) {
  ObjectReader r(j, path);
  if (const json* v = r.get("regime")) out.regime = regime_from_string(*v);
  r.read("demand_growth", out.demand_growth);
  r.read("vol_scale", out.vol_scale);
  r.read("horizon_years", out.horizon_years);
  r.finish();
}

void parse_game(const json& j, GameConfig& g) {
  ObjectReader r(j, "game.");
  r.read("n_agents", g.n_agents);
  if (const json* v = r.get("durations")) {
    ObjectReader d(*v, "game.durations.");
    d.read("bidding", g.durations.bidding);
    d.read("exploration", g.durations.exploration);
    d.read("development", g.durations.development);
    d.read("production", g.durations.production);
    d.finish();
  }
  if (const json* v = r.get("costs")) {
    ObjectReader c(*v, "game.costs.");
    if (const json* info = c.get("info")) {
      ObjectReader ic(*info, "game.costs.info.");
      ic.read("low", g.costs.info.cost[1]);
      ic.read("med", g.costs.info.cost[2]);
      ic.read("high", g.costs.info.cost[3]);
      ic.finish();
    }
    c.read("exploration_well", g.costs.exploration_well);
    c.read("development_total", g.costs.development_total);
    c.read("operating_per_year", g.costs.operating_per_year);
    c.finish();
  }
  if (const json* v = r.get("info_noise")) {
    ObjectReader nc(*v, "game.info_noise.");
    nc.read("low", g.costs.info.noise_std[1]);
    nc.read("med", g.costs.info.noise_std[2]);
    nc.read("high", g.costs.info.noise_std[3]);
    nc.finish();
  }
  r.read("gamma", g.gamma);
  if (const json* v = r.get("price")) parse_ou(*v, "game.price.", g.price);
  r.read("price_floor", g.price_floor);
  if (const json* v = r.get("scenario"))
    parse_scenario(*v, "game.scenario.", g.scenario);
  if (const json* v = r.get("bid")) {
    ObjectReader b(*v, "game.bid.");
    b.read("beta", g.bid.beta);
    b.read("lambda_scale", g.bid.lambda_scale);
    b.finish();
  }
  r.read("variance_gate", g.variance_gate);
  r.read("value_per_bbl", g.value_per_bbl);
  if (const json* v = r.get("production")) {
    ObjectReader p(*v, "game.production.");
    p.read("plateau_years", g.production.plateau_years);
    p.read("decline_rate", g.production.decline_rate);
    p.finish();
  }
  r.read("base_discount_rate", g.base_discount_rate);
  if (const json* v = r.get("risk_premium")) {
    ObjectReader p(*v, "game.risk_premium.");
    p.read("base", g.risk_premium.base);
    p.read("ioc_adjustment", g.risk_premium.ioc_adjustment);
    p.read("volatility_loading", g.risk_premium.volatility_loading);
    p.finish();
  }
  if (const json* v = r.get("catalog_grid")) {
    ObjectReader c(*v, "game.catalog_grid.");
    c.read("value_lo", g.catalog_grid.value_lo);
    c.read("value_hi", g.catalog_grid.value_hi);
    c.read("sigma_lo", g.catalog_grid.sigma_lo);
    c.read("sigma_hi", g.catalog_grid.sigma_hi);
    c.finish();
  }
  r.finish();
}

void parse_trainer(const json& j, TrainerConfig& t) {
  ObjectReader r(j, "trainer.");
  r.read("alpha", t.alpha);
  r.read("gamma", t.gamma);
  r.read("batch_size", t.batch_size);
  r.read("buffer_capacity", t.buffer_capacity);
  r.read("target_sync_steps", t.target_sync_steps);
  r.read("episodes", t.episodes);
  if (const json* v = r.get("epsilon")) {
    ObjectReader e(*v, "trainer.epsilon.");
    e.read("start", t.epsilon.start);
    e.read("end", t.epsilon.end);
    e.read("decay_fraction", t.epsilon.decay_fraction);
    e.finish();
  }
  r.read("hidden_layers", t.hidden_layers);
  r.read("dropout", t.dropout);
  r.read("batch_norm", t.batch_norm);
  r.read("self_play_fraction", t.self_play_fraction);
  r.read("checkpoint_every", t.checkpoint_every);
  r.finish();
}

json ou_to_json(const OuParams& p) {
  return json{{"kappa", p.kappa}, {"pbar", p.pbar}, {"sigma", p.sigma}, {"dt", p.dt}};
}

json scenario_to_json(const ScenarioSpec& s) {
  return json{{"regime", to_string(s.regime)},
              {"demand_growth", s.demand_growth},
              {"vol_scale", s.vol_scale},
              {"horizon_years", s.horizon_years}};
}

json game_to_json(const GameConfig& g) {
  return json{
      {"n_agents", g.n_agents},
      {"durations",
       {{"bidding", g.durations.bidding},
        {"exploration", g.durations.exploration},
        {"development", g.durations.development},
        {"production", g.durations.production}}},
      {"costs",
       {{"info",
         {{"low", g.costs.info.cost[1]},
          {"med", g.costs.info.cost[2]},
          {"high", g.costs.info.cost[3]}}},
        {"exploration_well", g.costs.exploration_well},
        {"development_total", g.costs.development_total},
        {"operating_per_year", g.costs.operating_per_year}}},
      {"info_noise",
       {{"low", g.costs.info.noise_std[1]},
        {"med", g.costs.info.noise_std[2]},
        {"high", g.costs.info.noise_std[3]}}},
      {"gamma", g.gamma},
      {"price", ou_to_json(g.price)},
      {"price_floor", g.price_floor},
      {"scenario", scenario_to_json(g.scenario)},
      {"bid", {{"beta", g.bid.beta}, {"lambda_scale", g.bid.lambda_scale}}},
      {"variance_gate", g.variance_gate},
      {"value_per_bbl", g.value_per_bbl},
      {"production",
       {{"plateau_years", g.production.plateau_years},
        {"decline_rate", g.production.decline_rate}}},
      {"base_discount_rate", g.base_discount_rate},
      {"risk_premium",
       {{"base", g.risk_premium.base},
        {"ioc_adjustment", g.risk_premium.ioc_adjustment},
        {"volatility_loading", g.risk_premium.volatility_loading}}},
      {"catalog_grid",
       {{"value_lo", g.catalog_grid.value_lo},
        {"value_hi", g.catalog_grid.value_hi},
        {"sigma_lo", g.catalog_grid.sigma_lo},
        {"sigma_hi", g.catalog_grid.sigma_hi}}}};
}

json trainer_to_json(const TrainerConfig& t) {
  return json{{"alpha", t.alpha},
              {"gamma", t.gamma},
              {"batch_size", t.batch_size},
              {"buffer_capacity", t.buffer_capacity},
              {"target_sync_steps", t.target_sync_steps},
              {"episodes", t.episodes},
              {"epsilon",
               {{"start", t.epsilon.start},
                {"end", t.epsilon.end},
                {"decay_fraction", t.epsilon.decay_fraction}}},
              {"hidden_layers", t.hidden_layers},
              {"dropout", t.dropout},
              {"batch_norm", t.batch_norm},
              {"self_play_fraction", t.self_play_fraction},
              {"checkpoint_every", t.checkpoint_every}};
}

}  // namespace

void RunConfig::validate() const {
  game.validate();
  trainer.validate();
  bootstrap.validate();
  if (output_dir.empty()) throw ConfigError("config: output_dir must not be empty");
  if (profile_csv.empty()) throw ConfigError("config: profile_csv must not be empty");
  if (catalog.path.empty() && catalog.n_leads < 1)
    throw ConfigError("config: catalog.n_leads must be >= 1");
  if (evaluation.episodes < 1)
    throw ConfigError("config: evaluation.episodes must be >= 1");
  if (evaluation.workers < 1)
    throw ConfigError("config: evaluation.workers must be >= 1");
  policy_kind_from_string(evaluation.focal_policy);
  policy_kind_from_string(evaluation.opponent_policy);
  evaluation.ladder.validate();
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }

  RunConfig cfg;
  ObjectReader r(j, "");
  r.read("master_seed", cfg.master_seed);
  r.read("output_dir", cfg.output_dir);
  r.read("profile_csv", cfg.profile_csv);
  if (const json* v = r.get("catalog")) {
    ObjectReader c(*v, "catalog.");
    c.read("path", cfg.catalog.path);
    c.read("n_leads", cfg.catalog.n_leads);
    c.finish();
  }
  if (const json* v = r.get("game")) parse_game(*v, cfg.game);
  if (const json* v = r.get("trainer")) parse_trainer(*v, cfg.trainer);
  if (const json* v = r.get("bootstrap")) {
    ObjectReader b(*v, "bootstrap.");
    b.read("n_resamples", cfg.bootstrap.n_resamples);
    b.read("ci_level", cfg.bootstrap.ci_level);
    b.finish();
  }
  if (const json* v = r.get("evaluation")) {
    ObjectReader e(*v, "evaluation.");
    e.read("episodes", cfg.evaluation.episodes);
    e.read("workers", cfg.evaluation.workers);
    e.read("n_firms_sweep", cfg.evaluation.n_firms_sweep);
    e.read("focal_policy", cfg.evaluation.focal_policy);
    e.read("opponent_policy", cfg.evaluation.opponent_policy);
    if (const json* l = e.get("ladder")) {
      ObjectReader lr(*l, "evaluation.ladder.");
      if (const json* eta = lr.get("eta_by_phase")) {
        const auto names = eta->get<std::vector<std::string>>();
        if (names.size() != 4)
          throw ConfigError("config: evaluation.ladder.eta_by_phase needs 4 levels");
        for (std::size_t i = 0; i < 4; ++i)
          cfg.evaluation.ladder.eta_by_phase[i] = info_level_from_string(names[i]);
      }
      lr.read("proceed_margin", cfg.evaluation.ladder.proceed_margin);
      lr.read("repeat_purchases", cfg.evaluation.ladder.repeat_purchases);
      lr.finish();
    }
    e.finish();
  }
  r.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

std::string serialize_run_config(const RunConfig& cfg) {
  json j{{"master_seed", cfg.master_seed},
         {"output_dir", cfg.output_dir},
         {"profile_csv", cfg.profile_csv},
         {"catalog", {{"path", cfg.catalog.path}, {"n_leads", cfg.catalog.n_leads}}},
         {"game", game_to_json(cfg.game)},
         {"trainer", trainer_to_json(cfg.trainer)},
         {"bootstrap",
          {{"n_resamples", cfg.bootstrap.n_resamples},
           {"ci_level", cfg.bootstrap.ci_level}}},
         {"evaluation",
          {{"episodes", cfg.evaluation.episodes},
           {"workers", cfg.evaluation.workers},
           {"n_firms_sweep", cfg.evaluation.n_firms_sweep},
           {"focal_policy", cfg.evaluation.focal_policy},
           {"opponent_policy", cfg.evaluation.opponent_policy},
           {"ladder",
            {{"eta_by_phase",
              {to_string(cfg.evaluation.ladder.eta_by_phase[0]),
               to_string(cfg.evaluation.ladder.eta_by_phase[1]),
               to_string(cfg.evaluation.ladder.eta_by_phase[2]),
               to_string(cfg.evaluation.ladder.eta_by_phase[3])}},
             {"proceed_margin", cfg.evaluation.ladder.proceed_margin},
             {"repeat_purchases", cfg.evaluation.ladder.repeat_purchases}}}}}};
  return j.dump(2);
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config: " + path);
  out << serialize_run_config(cfg) << '\n';
}

void apply_preset(RunConfig& cfg, const std::string& preset) {
  if (preset == "appendix-defaults") {
    cfg.trainer.alpha = 0.001;
    cfg.trainer.gamma = 0.95;
    cfg.trainer.epsilon.start = 1.0;
  } else if (preset == "grid-search-2021") {
    cfg.trainer.alpha = 0.01;
    cfg.trainer.gamma = 0.50;
    cfg.trainer.epsilon.start = 0.9;
  } else {
    throw ConfigError("unknown preset '" + preset +
                      "' (expected appendix-defaults or grid-search-2021)");
  }
}

std::string config_hash(const RunConfig& cfg) {
  // The output directory does not affect results; identical runs into
  // different directories must hash (and checkpoint) identically.
  RunConfig canonical = cfg;
  canonical.output_dir.clear();
  const std::string text = serialize_run_config(canonical);
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_manifest(const RunConfig& cfg, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  json j{{"config_hash", config_hash(cfg)},
         {"master_seed", cfg.master_seed},
         {"config", json::parse(serialize_run_config(cfg))}};
  std::ofstream out(out_dir + "/manifest.json");
  if (!out) throw IoError("cannot write manifest in " + out_dir);
  out << j.dump(2) << '\n';
}

}  // namespace upstream
