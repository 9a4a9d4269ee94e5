#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "support/test_helpers.hpp"
#include "upstream/config.hpp"
#include "upstream/csv.hpp"
#include "upstream/market.hpp"
#include "upstream/trainer.hpp"

namespace fs = std::filesystem;
using namespace upstream;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(UPSTREAM_CLI_PATH) + " " + args +
                          " > /dev/null 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string write_small_config(const std::string& dir) {
  RunConfig cfg;
  cfg.master_seed = 4242;
  cfg.output_dir = dir + "/out";
  cfg.profile_csv = upstream::testing::data_dir() + "/firm_profiles.csv";
  cfg.game.n_agents = 3;
  cfg.game.scenario.horizon_years = 12;
  cfg.trainer.episodes = 10;
  cfg.trainer.batch_size = 16;
  cfg.trainer.buffer_capacity = 4096;
  cfg.trainer.hidden_layers = {16, 16};
  cfg.trainer.checkpoint_every = 4;
  cfg.bootstrap.n_resamples = 200;
  cfg.evaluation.episodes = 4;
  cfg.evaluation.n_firms_sweep = {2, 3};
  const std::string path = dir + "/config.json";
  save_run_config(cfg, path);
  return path;
}

long count_lines(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  long n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

struct TempDir {
  std::string path;
  explicit TempDir(const std::string& p) : path(p) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("calibrate recovers parameters from a synthetic series") {
  TempDir dir("/tmp/upstream_cli_calibrate");
  const std::string prices_path = dir.path + "/prices.csv";
  {
    RngStream rng(7);
    OuParams truth{0.38, 65.40, 0.28, 1.0};
    const auto path = simulate_price_path(65.40, truth, 5000, rng);
    csv::Writer w(prices_path);
    w.row({"date", "price"});
    for (std::size_t i = 0; i < path.size(); ++i)
      w.row({std::to_string(i), csv::format_double(path[i])});
  }
  const std::string out = dir.path + "/ou.json";
  CHECK(run_cli("calibrate --prices " + prices_path + " --dt 1.0 --out " + out) == 0);

  std::ifstream in(out);
  REQUIRE(in.good());
  nlohmann::json j;
  in >> j;
  CHECK(std::abs(j.at("kappa").get<double>() - 0.38) <= 0.08);
  CHECK(std::abs(j.at("pbar").get<double>() - 65.40) <= 3.0);
}

TEST_CASE("calibrate exits nonzero on a degenerate constant series") {
  TempDir dir("/tmp/upstream_cli_degenerate");
  const std::string prices_path = dir.path + "/prices.csv";
  {
    csv::Writer w(prices_path);
    w.row({"date", "price"});
    for (int i = 0; i < 100; ++i) w.row({std::to_string(i), "65.4"});
  }
  CHECK(run_cli("calibrate --prices " + prices_path + " --dt 1.0") == 4);
}

TEST_CASE("calibrate exits with the I/O code on a missing file") {
  CHECK(run_cli("calibrate --prices /tmp/no_such_prices_file.csv") == 3);
}

TEST_CASE("train smoke run writes a checkpoint and a complete log") {
  TempDir dir("/tmp/upstream_cli_train");
  const std::string config = write_small_config(dir.path);
  CHECK(run_cli("train --config " + config) == 0);
  CHECK(fs::exists(dir.path + "/out/checkpoint.json"));
  CHECK(fs::exists(dir.path + "/out/manifest.json"));
  CHECK(fs::exists(dir.path + "/out/catalog.csv"));
  // Header plus one row per episode.
  CHECK(count_lines(dir.path + "/out/training_log.csv") == 11);
}

TEST_CASE("interrupted training resumes to exactly the configured episodes") {
  TempDir dir("/tmp/upstream_cli_resume");
  const std::string config = write_small_config(dir.path);
  CHECK(run_cli("train --config " + config + " --halt-after 4") == 0);
  const long partial = count_lines(dir.path + "/out/training_log.csv");
  CHECK(partial == 6);  // header + episodes 0..4
  CHECK(run_cli("train --config " + config) == 0);
  CHECK(count_lines(dir.path + "/out/training_log.csv") == 11);
  const auto log = read_training_log_csv(dir.path + "/out/training_log.csv");
  for (std::size_t i = 0; i < log.size(); ++i)
    CHECK(log[i].episode == static_cast<long>(i));
}

TEST_CASE("identical config and seed give identical checkpoint bytes") {
  TempDir dir("/tmp/upstream_cli_determinism");
  const std::string config = write_small_config(dir.path);
  CHECK(run_cli("train --config " + config + " --out " + dir.path + "/a") == 0);
  CHECK(run_cli("train --config " + config + " --out " + dir.path + "/b") == 0);
  std::ifstream fa(dir.path + "/a/checkpoint.json"), fb(dir.path + "/b/checkpoint.json");
  const std::string a((std::istreambuf_iterator<char>(fa)),
                      std::istreambuf_iterator<char>());
  const std::string b((std::istreambuf_iterator<char>(fb)),
                      std::istreambuf_iterator<char>());
  CHECK(a == b);
  CHECK_FALSE(a.empty());
}

TEST_CASE("training resume refuses a different configuration") {
  TempDir dir("/tmp/upstream_cli_hash_guard");
  const std::string config = write_small_config(dir.path);
  CHECK(run_cli("train --config " + config + " --halt-after 2") == 0);
  // Same output dir, different seed: the checkpoint hash must not match.
  CHECK(run_cli("train --config " + config + " --seed 9999") == 2);
}

TEST_CASE("evaluate emits tables, distributions, traces and the q-grid") {
  TempDir dir("/tmp/upstream_cli_evaluate");
  const std::string config = write_small_config(dir.path);
  REQUIRE(run_cli("train --config " + config) == 0);
  const std::string eval_out = dir.path + "/eval";
  CHECK(run_cli("evaluate --config " + config + " --checkpoint " + dir.path +
                "/out/checkpoint.json --out " + eval_out) == 0);

  CHECK(fs::exists(eval_out + "/by_competition.csv"));
  CHECK(fs::exists(eval_out + "/by_scenario.csv"));
  CHECK(fs::exists(eval_out + "/by_lead_size.csv"));
  CHECK(fs::exists(eval_out + "/manifest.json"));
  // Sweep covers {2, 3} firm counts -> header + 2 rows.
  CHECK(count_lines(eval_out + "/by_competition.csv") == 3);
  // One distribution row per episode.
  CHECK(count_lines(eval_out + "/distributions.csv") == 5);
  // One trace per episode.
  long traces = 0;
  for ([[maybe_unused]] const auto& entry :
       fs::directory_iterator(eval_out + "/traces"))
    ++traces;
  CHECK(traces == 4);
  // 100x100 grid.
  CHECK(count_lines(eval_out + "/qgrid.csv") == 100);
}

TEST_CASE("evaluate exits with the I/O code when the checkpoint is missing") {
  TempDir dir("/tmp/upstream_cli_nockpt");
  const std::string config = write_small_config(dir.path);
  CHECK(run_cli("evaluate --config " + config +
                " --checkpoint /tmp/no_such_checkpoint.json") == 3);
}

TEST_CASE("unknown config keys exit with the config code") {
  TempDir dir("/tmp/upstream_cli_badconfig");
  const std::string path = dir.path + "/bad.json";
  std::ofstream(path) << R"({"game": {"rig_count": 5}})";
  CHECK(run_cli("train --config " + path) == 2);
}
