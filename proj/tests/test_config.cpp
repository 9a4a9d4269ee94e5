#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "upstream/config.hpp"
#include "upstream/errors.hpp"

using namespace upstream;

TEST_CASE("parse -> serialize -> parse is the identity") {
  RunConfig cfg;
  cfg.master_seed = 123;
  cfg.game.n_agents = 6;
  cfg.game.scenario.regime = Regime::Heat;
  cfg.trainer.episodes = 2000;
  cfg.trainer.hidden_layers = {64, 32};
  cfg.evaluation.n_firms_sweep = {2, 6};

  const std::string text = serialize_run_config(cfg);
  const RunConfig parsed = parse_run_config(text);
  CHECK(serialize_run_config(parsed) == text);
  CHECK(parsed.master_seed == 123);
  CHECK(parsed.game.n_agents == 6);
  CHECK(parsed.game.scenario.regime == Regime::Heat);
  CHECK(parsed.trainer.hidden_layers == std::vector<int>{64, 32});
}

TEST_CASE("unknown keys are rejected with their path") {
  try {
    parse_run_config(R"({"game": {"n_agents": 4, "oil_rig_count": 3}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("oil_rig_count") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_run_config(R"({"definitely_not_a_key": 1})"), ConfigError);
}

TEST_CASE("malformed JSON and bad values are config errors") {
  CHECK_THROWS_AS(parse_run_config("{ not json"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"game": {"n_agents": "ten"}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"game": {"n_agents": 1}})"), ConfigError);
  CHECK_THROWS_AS(
      parse_run_config(R"({"game": {"scenario": {"regime": "Boom"}}})"),
      ConfigError);
}

TEST_CASE("defaults match the reference hyperparameters") {
  const RunConfig cfg = parse_run_config("{}");
  CHECK(cfg.trainer.alpha == 0.001);
  CHECK(cfg.trainer.gamma == 0.95);
  CHECK(cfg.trainer.batch_size == 64);
  CHECK(cfg.trainer.buffer_capacity == 100000);
  CHECK(cfg.trainer.target_sync_steps == 1000);
  CHECK(cfg.trainer.episodes == 10000);
  CHECK(cfg.trainer.epsilon.start == 1.0);
  CHECK(cfg.trainer.epsilon.end == 0.1);
  CHECK(cfg.trainer.hidden_layers == std::vector<int>{256, 128});
  CHECK(cfg.trainer.dropout == 0.2);
  CHECK_FALSE(cfg.trainer.batch_norm);
  CHECK(cfg.game.n_agents == 10);
  CHECK(cfg.game.price.kappa == 0.38);
  CHECK(cfg.game.price.pbar == 65.40);
  CHECK(cfg.game.price.sigma == 0.28);
  CHECK(cfg.game.durations.bidding == 1);
  CHECK(cfg.game.durations.exploration == 5);
  CHECK(cfg.game.durations.development == 7);
  CHECK(cfg.game.durations.production == 25);
  CHECK(cfg.game.gamma == 0.95);
  CHECK(cfg.bootstrap.n_resamples == 1000);
  CHECK(cfg.bootstrap.ci_level == 0.95);
}

TEST_CASE("ladder policy parameters travel through the config") {
  const RunConfig cfg = parse_run_config(
      R"({"evaluation": {"ladder": {"proceed_margin": 1.5,
           "eta_by_phase": ["Low", "Low", "Med", "None"],
           "repeat_purchases": true}}})");
  CHECK(cfg.evaluation.ladder.proceed_margin == 1.5);
  CHECK(cfg.evaluation.ladder.eta_by_phase[2] == InfoLevel::Med);
  CHECK(cfg.evaluation.ladder.repeat_purchases);
  // Non-monotone mapping fails validation.
  CHECK_THROWS_AS(parse_run_config(R"({"evaluation": {"ladder":
      {"eta_by_phase": ["High", "Low", "Med", "None"]}}})"),
                  ConfigError);
}

TEST_CASE("presets switch the published hyperparameter sets") {
  RunConfig cfg;
  apply_preset(cfg, "grid-search-2021");
  CHECK(cfg.trainer.alpha == 0.01);
  CHECK(cfg.trainer.gamma == 0.50);
  CHECK(cfg.trainer.epsilon.start == 0.9);
  apply_preset(cfg, "appendix-defaults");
  CHECK(cfg.trainer.alpha == 0.001);
  CHECK(cfg.trainer.gamma == 0.95);
  CHECK(cfg.trainer.epsilon.start == 1.0);
  CHECK_THROWS_AS(apply_preset(cfg, "fast-mode"), ConfigError);
}

TEST_CASE("config hash ignores the output directory but not the content") {
  RunConfig a;
  RunConfig b;
  b.output_dir = "somewhere/else";
  CHECK(config_hash(a) == config_hash(b));
  b.master_seed = 43;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("manifest lands in the output directory with the hash") {
  RunConfig cfg;
  cfg.output_dir = "/tmp/upstream_test_manifest";
  std::filesystem::remove_all(cfg.output_dir);
  write_manifest(cfg, cfg.output_dir);
  std::ifstream in(cfg.output_dir + "/manifest.json");
  REQUIRE(in.good());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find(config_hash(cfg)) != std::string::npos);
  std::filesystem::remove_all(cfg.output_dir);
}

TEST_CASE("file round trip") {
  RunConfig cfg;
  cfg.master_seed = 777;
  const std::string path = "/tmp/upstream_test_config.json";
  save_run_config(cfg, path);
  const RunConfig loaded = load_run_config(path);
  CHECK(loaded.master_seed == 777);
  CHECK(serialize_run_config(loaded) == serialize_run_config(cfg));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_run_config("/tmp/definitely_missing_config.json"), IoError);
}
