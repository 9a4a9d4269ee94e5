// Command-line entry points: calibrate, train, evaluate.
//
// Exit codes: 0 success, 2 configuration error, 3 I/O error,
// 4 numerical divergence.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "upstream/config.hpp"
#include "upstream/csv.hpp"
#include "upstream/env.hpp"
#include "upstream/errors.hpp"
#include "upstream/evaluate.hpp"
#include "upstream/market.hpp"
#include "upstream/trainer.hpp"

namespace fs = std::filesystem;
using namespace upstream;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDivergence = 4;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<long> episodes;
  std::optional<int> agents;
  std::optional<std::string> scenario;
  std::optional<std::string> preset;
  std::optional<int> workers;
  std::string out;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "run configuration JSON file");
  cmd->add_option("--seed", flags.seed, "master seed (overrides file)");
  cmd->add_option("--episodes", flags.episodes, "episode count (overrides file)");
  cmd->add_option("--agents", flags.agents, "number of agents (overrides file)");
  cmd->add_option("--scenario", flags.scenario,
                  "scenario regime: Resilient, Neutral or Heat");
  cmd->add_option("--preset", flags.preset,
                  "hyperparameter preset: appendix-defaults or grid-search-2021");
  cmd->add_option("--workers", flags.workers, "evaluation worker threads");
  cmd->add_option("--out", flags.out, "output directory (overrides file)");
}

// Precedence: flag > file > default.
RunConfig resolve_config(const CommonFlags& flags, bool for_training) {
  RunConfig cfg;
  if (!flags.config_path.empty()) cfg = load_run_config(flags.config_path);
  if (flags.preset) apply_preset(cfg, *flags.preset);
  if (flags.seed) cfg.master_seed = *flags.seed;
  if (flags.episodes) {
    if (for_training) cfg.trainer.episodes = *flags.episodes;
    else cfg.evaluation.episodes = *flags.episodes;
  }
  if (flags.agents) cfg.game.n_agents = *flags.agents;
  if (flags.scenario) cfg.game.scenario.regime = regime_from_string(*flags.scenario);
  if (flags.workers) cfg.evaluation.workers = *flags.workers;
  if (!flags.out.empty()) cfg.output_dir = flags.out;
  cfg.validate();
  return cfg;
}

std::vector<LeadSpec> resolve_catalog(const RunConfig& cfg) {
  if (!cfg.catalog.path.empty()) return load_catalog_csv(cfg.catalog.path);
  auto rng = RngStream::derive(cfg.master_seed, stream_tag::kCatalog);
  return sample_lead_catalog(cfg.catalog.n_leads, rng, cfg.game.catalog_grid);
}

int cmd_calibrate(const std::string& prices_csv, double dt,
                  const std::string& out_path) {
  const auto table = csv::read_file(prices_csv);
  if (table.header.size() < 2)
    throw IoError("price CSV " + prices_csv + ": expected columns date,price");
  std::vector<double> prices;
  prices.reserve(table.rows.size());
  std::size_t line = 1;
  for (const auto& row : table.rows) {
    ++line;
    prices.push_back(csv::to_double(
        row[1], prices_csv + " line " + std::to_string(line)));
  }

  const OuParams params = calibrate_ou(prices, dt);
  std::cout << "kappa = " << params.kappa << " per year\n"
            << "pbar  = " << params.pbar << " USD/bbl\n"
            << "sigma = " << params.sigma << " per sqrt(year)\n";

  if (!out_path.empty()) {
    nlohmann::json j{{"kappa", params.kappa},
                     {"pbar", params.pbar},
                     {"sigma", params.sigma},
                     {"dt", params.dt}};
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write " + out_path);
    out << j.dump(2) << '\n';
    std::cout << "wrote " << out_path << "\n";
  }
  return kExitOk;
}

// Training log kept consistent with the checkpoint on resume: rows beyond the
// checkpoint episode are dropped before appending continues.
class TrainingLogFile {
 public:
  TrainingLogFile(const std::string& path, long resume_episode) : path_(path) {
    std::vector<TrainingLogRow> keep;
    if (resume_episode > 0 && fs::exists(path_)) {
      for (const auto& row : read_training_log_csv(path_))
        if (row.episode < resume_episode) keep.push_back(row);
    }
    write_training_log_csv(keep, path_);
    out_.open(path_, std::ios::app);
    if (!out_) throw IoError("cannot open training log " + path_);
  }

  void append(const TrainingLogRow& row) {
    out_ << row.episode << ',' << csv::format_double(row.epsilon) << ','
         << csv::format_double(row.mean_loss) << ','
         << csv::format_double(row.episode_reward) << '\n';
    out_.flush();
  }

 private:
  std::string path_;
  std::ofstream out_;
};

int cmd_train(const RunConfig& cfg, long halt_after) {
  fs::create_directories(cfg.output_dir);
  const std::string checkpoint_path = cfg.output_dir + "/checkpoint.json";
  const std::string log_path = cfg.output_dir + "/training_log.csv";
  const std::string hash = config_hash(cfg);

  const auto profiles = load_profiles(cfg.profile_csv, cfg.game.risk_premium);
  const auto catalog = resolve_catalog(cfg);
  save_catalog_csv(catalog, cfg.output_dir + "/catalog.csv");

  GameEnv env(cfg.game, profiles, catalog);
  DqnTrainer trainer(cfg.trainer, env.obs_dim(), kActionCount, cfg.master_seed);

  long start_episode = 0;
  if (fs::exists(checkpoint_path)) {
    const auto info = load_trainer_checkpoint(checkpoint_path, trainer);
    if (info.config_hash != hash)
      throw ConfigError("checkpoint in " + cfg.output_dir +
                        " was produced by a different configuration");
    start_episode = info.next_episode;
    std::cout << "resuming from episode " << start_episode << "\n";
  }
  if (start_episode >= cfg.trainer.episodes) {
    std::cout << "training already complete (" << cfg.trainer.episodes
              << " episodes)\n";
    return kExitOk;
  }

  TrainingLogFile log(log_path, start_episode);
  write_manifest(cfg, cfg.output_dir);

  CurriculumOptions opts;
  opts.start_episode = start_episode;
  opts.halt_after_episode = halt_after;
  opts.on_episode_end = [&](long episode, const TrainingLogRow& row) {
    log.append(row);
    const bool last = episode + 1 >= cfg.trainer.episodes;
    const bool halting = halt_after >= 0 && episode >= halt_after;
    if ((episode + 1) % cfg.trainer.checkpoint_every == 0 || last || halting)
      save_trainer_checkpoint(checkpoint_path, trainer, episode + 1, hash);
  };

  train_curriculum(env, trainer, cfg.master_seed, opts);

  if (halt_after >= 0 && halt_after + 1 < cfg.trainer.episodes) {
    std::cout << "halted after episode " << halt_after << "; rerun to resume\n";
  } else {
    std::cout << "training complete: " << cfg.trainer.episodes << " episodes\n";
  }
  std::cout << "checkpoint: " << checkpoint_path << "\n"
            << "log:        " << log_path << "\n";
  return kExitOk;
}

QNetwork load_net_from_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint " + path + ": " + e.what());
  }
  return QNetwork::from_json_string(j.at("net"));
}

int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint_path) {
  fs::create_directories(cfg.output_dir);
  const auto profiles = load_profiles(cfg.profile_csv, cfg.game.risk_premium);
  const auto catalog = resolve_catalog(cfg);

  const QNetwork net = load_net_from_checkpoint(checkpoint_path);
  if (net.input_dim() != kObsDim || net.output_dim() != kActionCount)
    throw ConfigError("checkpoint network shape does not match the game");

  EvalSetup setup;
  setup.focal = policy_kind_from_string(cfg.evaluation.focal_policy);
  setup.others = policy_kind_from_string(cfg.evaluation.opponent_policy);
  setup.net = &net;
  setup.workers = cfg.evaluation.workers;
  setup.ladder = cfg.evaluation.ladder;

  const long episodes = cfg.evaluation.episodes;

  // Main run: the configured game, with traces and the distribution export.
  std::cout << "evaluating " << episodes << " episodes ("
            << to_string(cfg.game.scenario.regime) << ", n_agents="
            << cfg.game.n_agents << ")\n";
  const auto main_run =
      run_monte_carlo(cfg.game, profiles, catalog, setup, episodes,
                      cfg.master_seed, 0, cfg.output_dir + "/traces");
  if (main_run.faults)
    std::cerr << main_run.faults << " episode(s) faulted and were excluded\n";
  emit_distributions_csv(main_run.results, cfg.output_dir + "/distributions.csv");

  // Competition sweep (one table row per firm count).
  std::vector<EpisodeResult> sweep_results;
  for (int n : cfg.evaluation.n_firms_sweep) {
    GameConfig game = cfg.game;
    game.n_agents = n;
    std::cout << "competition sweep: n_agents=" << n << "\n";
    auto run = run_monte_carlo(game, profiles, catalog, setup, episodes,
                               cfg.master_seed);
    for (auto& r : run.results) sweep_results.push_back(std::move(r));
  }

  // Scenario sweep over the three regimes.
  std::vector<EpisodeResult> scenario_results;
  for (Regime regime : {Regime::Resilient, Regime::Neutral, Regime::Heat}) {
    GameConfig game = cfg.game;
    game.scenario.regime = regime;
    std::cout << "scenario sweep: " << to_string(regime) << "\n";
    auto run = run_monte_carlo(game, profiles, catalog, setup, episodes,
                               cfg.master_seed);
    for (auto& r : run.results) scenario_results.push_back(std::move(r));
  }

  const auto by_competition = compute_metrics(sweep_results, SliceKey::NFirms,
                                              cfg.bootstrap, cfg.master_seed,
                                              setup.focal, setup.others);
  const auto by_scenario = compute_metrics(scenario_results, SliceKey::Scenario,
                                           cfg.bootstrap, cfg.master_seed,
                                           setup.focal, setup.others);
  const auto by_lead = compute_metrics(main_run.results, SliceKey::LeadSize,
                                       cfg.bootstrap, cfg.master_seed,
                                       setup.focal, setup.others);
  emit_table_csv(by_competition, cfg.output_dir + "/by_competition.csv");
  emit_table_csv(by_scenario, cfg.output_dir + "/by_scenario.csv");
  emit_table_csv(by_lead, cfg.output_dir + "/by_lead_size.csv");

  const Matrix grid = export_qgrid(net, QGridSpec{});
  write_qgrid_csv(grid, cfg.output_dir + "/qgrid.csv");

  write_manifest(cfg, cfg.output_dir);
  std::cout << "wrote tables, distributions, traces and qgrid to "
            << cfg.output_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Upstream oil & gas investment game: simulator, DQN trainer "
               "and Monte Carlo evaluation harness"};
  app.require_subcommand(1);

  // calibrate
  auto* calibrate = app.add_subcommand(
      "calibrate", "fit mean-reverting price parameters from a price CSV");
  std::string prices_csv, calibrate_out;
  double dt = 1.0 / 252.0;
  calibrate->add_option("--prices", prices_csv, "CSV with header, columns date,price")
      ->required();
  calibrate->add_option("--dt", dt, "observation spacing in years (default daily)");
  calibrate->add_option("--out", calibrate_out, "write fitted parameters as JSON");

  // train
  auto* train = app.add_subcommand("train", "train the DQN with the curriculum");
  CommonFlags train_flags;
  add_common_flags(train, train_flags);
  long halt_after = -1;
  train->add_option("--halt-after", halt_after,
                    "stop after this episode index (resume by rerunning)");

  // evaluate
  auto* evaluate = app.add_subcommand(
      "evaluate", "Monte Carlo evaluation: metric tables, traces, Q-grid");
  CommonFlags eval_flags;
  add_common_flags(evaluate, eval_flags);
  std::string checkpoint_path;
  evaluate->add_option("--checkpoint", checkpoint_path, "trained checkpoint JSON")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (calibrate->parsed()) return cmd_calibrate(prices_csv, dt, calibrate_out);
    if (train->parsed()) return cmd_train(resolve_config(train_flags, true), halt_after);
    if (evaluate->parsed())
      return cmd_evaluate(resolve_config(eval_flags, false), checkpoint_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const DivergenceError& e) {
    std::cerr << "numerical divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
