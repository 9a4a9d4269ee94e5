#include "upstream/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "json.hpp"
#include "upstream/csv.hpp"
#include "upstream/errors.hpp"

namespace upstream {

void TrainerConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("TrainerConfig: alpha must be > 0");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw ConfigError("TrainerConfig: gamma must be in (0, 1]");
  if (batch_size < 1) throw ConfigError("TrainerConfig: batch_size must be >= 1");
  if (static_cast<std::size_t>(batch_size) > buffer_capacity)
    throw ConfigError("TrainerConfig: batch_size exceeds buffer capacity");
  if (target_sync_steps < 1)
    throw ConfigError("TrainerConfig: target_sync_steps must be >= 1");
  if (episodes < 1) throw ConfigError("TrainerConfig: episodes must be >= 1");
  if (!(epsilon.start >= 0.0 && epsilon.start <= 1.0) ||
      !(epsilon.end >= 0.0 && epsilon.end <= 1.0))
    throw ConfigError("TrainerConfig: epsilon endpoints must be in [0, 1]");
  if (!(epsilon.decay_fraction > 0.0 && epsilon.decay_fraction <= 1.0))
    throw ConfigError("TrainerConfig: epsilon decay_fraction must be in (0, 1]");
  if (hidden_layers.empty())
    throw ConfigError("TrainerConfig: need at least one hidden layer");
  if (!(self_play_fraction >= 0.0 && self_play_fraction <= 1.0))
    throw ConfigError("TrainerConfig: self_play_fraction must be in [0, 1]");
}

double epsilon_at(long episode, const TrainerConfig& cfg) {
  const double cutoff = cfg.epsilon.decay_fraction * static_cast<double>(cfg.episodes);
  if (static_cast<double>(episode) >= cutoff) return cfg.epsilon.end;
  const double frac = static_cast<double>(episode) / cutoff;
  return cfg.epsilon.start + (cfg.epsilon.end - cfg.epsilon.start) * frac;
}

double td_target(double reward, const Observation& s_next, bool terminal,
                 const QNetwork& target_net, double gamma) {
  if (terminal) return reward;
  const auto q = target_net.forward(s_next);
  double best = q.front();
  for (double v : q) best = std::max(best, v);
  return reward + gamma * best;
}

DqnTrainer::DqnTrainer(TrainerConfig cfg, int obs_dim, int action_count,
                       std::uint64_t master_seed)
    : cfg_(std::move(cfg)),
      adam_(cfg_.alpha),
      buffer_(cfg_.buffer_capacity),
      sync_(cfg_.target_sync_steps),
      rng_(RngStream::derive(master_seed, stream_tag::kTrainer)) {
  cfg_.validate();
  std::vector<int> sizes;
  sizes.push_back(obs_dim);
  for (int h : cfg_.hidden_layers) sizes.push_back(h);
  sizes.push_back(action_count);
  auto init_rng = RngStream::derive(master_seed, stream_tag::kNetInit);
  net_ = QNetwork(sizes, init_rng, cfg_.dropout, cfg_.batch_norm);
  target_ = net_;
}

std::optional<double> DqnTrainer::train_step() {
  const int B = cfg_.batch_size;
  if (buffer_.size() < static_cast<std::size_t>(B)) return std::nullopt;

  const auto batch = buffer_.sample(static_cast<std::size_t>(B), rng_);
  const int obs_dim = net_.input_dim();

  Matrix states(B, obs_dim);
  Matrix next_states(B, obs_dim);
  std::vector<int> actions(static_cast<std::size_t>(B));
  std::vector<double> targets(static_cast<std::size_t>(B));
  for (int r = 0; r < B; ++r) {
    const Transition& t = *batch[static_cast<std::size_t>(r)];
    std::copy(t.state.begin(), t.state.end(), states.row(r));
    std::copy(t.next_state.begin(), t.next_state.end(), next_states.row(r));
    actions[static_cast<std::size_t>(r)] = t.action;
  }

  const Matrix next_q = target_.forward_batch(next_states);
  for (int r = 0; r < B; ++r) {
    const Transition& t = *batch[static_cast<std::size_t>(r)];
    if (t.terminal) {
      targets[static_cast<std::size_t>(r)] = t.reward;
    } else {
      double best = next_q(r, 0);
      for (int a = 1; a < next_q.cols; ++a) best = std::max(best, next_q(r, a));
      targets[static_cast<std::size_t>(r)] = t.reward + cfg_.gamma * best;
    }
  }

  TrainBatch tb;
  tb.inputs = &states;
  tb.actions = &actions;
  tb.targets = &targets;
  const auto mask = net_.make_dropout_mask(B, rng_);
  std::vector<double> grad;
  const double loss = net_.train_loss_and_grad(tb, mask, grad);
  adam_.step(net_.parameters(), grad);

  if (sync_.tick()) target_.copy_from(net_);
  return loss;
}

void write_training_log_csv(const std::vector<TrainingLogRow>& log,
                            const std::string& path) {
  csv::Writer w(path);
  w.row({"episode", "epsilon", "mean_loss", "episode_reward"});
  for (const auto& row : log)
    w.row({std::to_string(row.episode), csv::format_double(row.epsilon),
           csv::format_double(row.mean_loss), csv::format_double(row.episode_reward)});
}

std::vector<TrainingLogRow> read_training_log_csv(const std::string& path) {
  const auto t = csv::read_file(path);
  std::vector<TrainingLogRow> log;
  log.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    TrainingLogRow r;
    r.episode = static_cast<long>(csv::to_double(row[0], path));
    r.epsilon = csv::to_double(row[1], path);
    r.mean_loss = csv::to_double(row[2], path);
    r.episode_reward = csv::to_double(row[3], path);
    log.push_back(r);
  }
  return log;
}

namespace {

void check_finite_loss(double loss, long episode, long step) {
  if (!std::isfinite(loss))
    throw DivergenceError("training loss diverged (episode " +
                          std::to_string(episode) + ", step " +
                          std::to_string(step) + ")");
}

}  // namespace

std::vector<TrainingLogRow> train_single_agent(LearnerEnv& env, DqnTrainer& trainer,
                                               std::uint64_t master_seed,
                                               long max_steps_per_episode) {
  const TrainerConfig& cfg = trainer.config();
  std::vector<TrainingLogRow> log;
  log.reserve(static_cast<std::size_t>(cfg.episodes));

  for (long episode = 0; episode < cfg.episodes; ++episode) {
    const double eps = epsilon_at(episode, cfg);
    auto policy_rng = RngStream::derive(master_seed, stream_tag::kPolicy,
                                        static_cast<std::uint64_t>(episode));
    Observation obs = env.reset(RngStream::derive_seed(
        master_seed, stream_tag::kEnv, static_cast<std::uint64_t>(episode)));

    double total_reward = 0.0;
    double loss_sum = 0.0;
    long loss_count = 0;
    for (long step = 0; step < max_steps_per_episode; ++step) {
      const Action act = epsilon_greedy(obs, trainer.net(), eps, policy_rng);
      int a = action_index(act);
      if (a >= env.action_count()) a %= env.action_count();
      auto [next_obs, reward, done] = env.step(a);
      trainer.observe({obs, a, reward, next_obs, done});
      total_reward += reward;
      if (const auto loss = trainer.train_step()) {
        check_finite_loss(*loss, episode, step);
        loss_sum += *loss;
        ++loss_count;
      }
      obs = std::move(next_obs);
      if (done) break;
    }
    log.push_back({episode, eps, loss_count ? loss_sum / loss_count : 0.0,
                   total_reward});
  }
  return log;
}

std::vector<TrainingLogRow> train_curriculum(GameEnv& env, DqnTrainer& trainer,
                                             std::uint64_t master_seed,
                                             const CurriculumOptions& opts) {
  const TrainerConfig& cfg = trainer.config();
  const int n = env.n_agents();
  const long sp_end =
      static_cast<long>(std::llround(cfg.self_play_fraction * cfg.episodes));

  std::vector<TrainingLogRow> log;
  for (long episode = opts.start_episode; episode < cfg.episodes; ++episode) {
    const double eps = epsilon_at(episode, cfg);
    const bool self_play = episode < sp_end;

    auto obs = env.reset(RngStream::derive_seed(
        master_seed, stream_tag::kEnv, static_cast<std::uint64_t>(episode)));

    // Per-agent exploration streams; SLS opponents are deterministic.
    std::vector<RngStream> agent_rng;
    agent_rng.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      agent_rng.push_back(RngStream::derive(master_seed, stream_tag::kPolicy,
                                            static_cast<std::uint64_t>(episode),
                                            static_cast<std::uint64_t>(i)));
    SlsPolicy sls;

    std::vector<bool> done_latch(static_cast<std::size_t>(n), false);
    double learner_reward = 0.0;
    double loss_sum = 0.0;
    long loss_count = 0;
    long step = 0;

    while (!env.done()) {
      std::vector<Action> actions(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const auto belief = env.decision_belief(i);
        PolicyContext ctx{obs[static_cast<std::size_t>(i)],
                          env.agents()[static_cast<std::size_t>(i)], env.market(),
                          belief, env.config()};
        if (i == 0 || self_play) {
          actions[static_cast<std::size_t>(i)] = epsilon_greedy(
              ctx.obs, trainer.net(), eps, agent_rng[static_cast<std::size_t>(i)]);
        } else {
          actions[static_cast<std::size_t>(i)] = sls.act(ctx);
        }
      }

      const StepOutcome outcome = env.step(actions);
      learner_reward += outcome.agents[0].reward;

      const int harvest = self_play ? n : 1;
      for (int i = 0; i < harvest; ++i) {
        if (done_latch[static_cast<std::size_t>(i)]) continue;
        const auto& out = outcome.agents[static_cast<std::size_t>(i)];
        trainer.observe({obs[static_cast<std::size_t>(i)],
                         action_index(actions[static_cast<std::size_t>(i)]),
                         out.reward, out.observation, out.done});
        if (out.done) done_latch[static_cast<std::size_t>(i)] = true;
      }

      if (const auto loss = trainer.train_step()) {
        check_finite_loss(*loss, episode, step);
        loss_sum += *loss;
        ++loss_count;
      }

      for (int i = 0; i < n; ++i)
        obs[static_cast<std::size_t>(i)] =
            outcome.agents[static_cast<std::size_t>(i)].observation;
      ++step;
    }

    TrainingLogRow row{episode, eps, loss_count ? loss_sum / loss_count : 0.0,
                       learner_reward};
    log.push_back(row);
    if (opts.on_episode_end) opts.on_episode_end(episode, row);
    if (opts.halt_after_episode >= 0 && episode >= opts.halt_after_episode) break;
  }
  return log;
}

// --------------------------- Q-grid export ---------------------------------

Observation QGridSpec::observation_at(double quantile, Phase phase) const {
  Observation obs(kObsDim, 0.0);
  obs[0] = 1.0;  // price at the long-run equilibrium
  obs[1] = volatility;
  obs[2] = 1.0;  // demand at the base index
  for (int k = 3; k <= 8; ++k) obs[static_cast<std::size_t>(k)] = 1.0;  // anchors
  obs[9 + static_cast<int>(phase)] = 1.0;
  obs[17] = quantile;  // certainty-equivalent value quantile
  obs[18] = belief_var;
  return obs;
}

std::pair<Phase, int> QGridSpec::column_combo(int column) const {
  const int combos = 4 * kActionCount;
  const int c = column * combos / action_bins;
  return {static_cast<Phase>(c / kActionCount), c % kActionCount};
}

Matrix export_qgrid(const QNetwork& net, const QGridSpec& spec) {
  Matrix grid(spec.state_bins, spec.action_bins);
  for (int i = 0; i < spec.state_bins; ++i) {
    const double quantile = (i + 0.5) / spec.state_bins;
    for (int j = 0; j < spec.action_bins; ++j) {
      const auto [phase, action] = spec.column_combo(j);
      const auto q = net.forward(spec.observation_at(quantile, phase));
      grid(i, j) = q[static_cast<std::size_t>(action)];
    }
  }
  return grid;
}

void write_qgrid_csv(const Matrix& grid, const std::string& path) {
  csv::Writer w(path);
  std::vector<std::string> cells(static_cast<std::size_t>(grid.cols));
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c)
      cells[static_cast<std::size_t>(c)] = csv::format_double(grid(r, c));
    w.row(cells);
  }
}

// --------------------------- checkpoints ------------------------------------

namespace {

constexpr char kBufferMagic[8] = {'U', 'P', 'B', 'U', 'F', '0', '0', '1'};

void save_buffer(const ReplayBuffer& buffer, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write replay buffer: " + path);
  out.write(kBufferMagic, sizeof kBufferMagic);
  const std::uint64_t n = buffer.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (std::uint64_t k = 0; k < n; ++k) {
    const Transition& t = buffer.oldest(static_cast<std::size_t>(k));
    const std::uint32_t dim = static_cast<std::uint32_t>(t.state.size());
    out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    out.write(reinterpret_cast<const char*>(t.state.data()),
              static_cast<std::streamsize>(dim * sizeof(double)));
    out.write(reinterpret_cast<const char*>(t.next_state.data()),
              static_cast<std::streamsize>(dim * sizeof(double)));
    const std::int32_t action = t.action;
    out.write(reinterpret_cast<const char*>(&action), sizeof action);
    out.write(reinterpret_cast<const char*>(&t.reward), sizeof t.reward);
    const std::uint8_t terminal = t.terminal ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&terminal), sizeof terminal);
  }
}

void load_buffer(ReplayBuffer& buffer, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read replay buffer: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kBufferMagic, sizeof magic) != 0)
    throw IoError("replay buffer " + path + ": bad header");
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  buffer.clear();
  for (std::uint64_t k = 0; k < n; ++k) {
    std::uint32_t dim = 0;
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    Transition t;
    t.state.resize(dim);
    t.next_state.resize(dim);
    in.read(reinterpret_cast<char*>(t.state.data()),
            static_cast<std::streamsize>(dim * sizeof(double)));
    in.read(reinterpret_cast<char*>(t.next_state.data()),
            static_cast<std::streamsize>(dim * sizeof(double)));
    std::int32_t action = 0;
    in.read(reinterpret_cast<char*>(&action), sizeof action);
    t.action = action;
    in.read(reinterpret_cast<char*>(&t.reward), sizeof t.reward);
    std::uint8_t terminal = 0;
    in.read(reinterpret_cast<char*>(&terminal), sizeof terminal);
    t.terminal = terminal != 0;
    if (!in) throw IoError("replay buffer " + path + ": truncated");
    buffer.push(std::move(t));
  }
}

}  // namespace

void save_trainer_checkpoint(const std::string& path, const DqnTrainer& trainer,
                             long next_episode, const std::string& config_hash) {
  nlohmann::json j;
  j["version"] = 1;
  j["next_episode"] = next_episode;
  j["config_hash"] = config_hash;
  j["net"] = trainer.net().to_json_string();
  j["target"] = trainer.target().to_json_string();
  j["adam_m"] = trainer.optimizer().first_moment();
  j["adam_v"] = trainer.optimizer().second_moment();
  j["adam_t"] = trainer.optimizer().steps_taken();
  j["sync_count"] = trainer.sync_counter().count();

  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << j.dump(2) << '\n';
  save_buffer(trainer.buffer(), path + ".buffer");
}

CheckpointInfo load_trainer_checkpoint(const std::string& path, DqnTrainer& trainer) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint " + path + ": " + e.what());
  }
  if (j.value("version", 0) != 1)
    throw ConfigError("checkpoint " + path + ": unsupported version");

  QNetwork net = QNetwork::from_json_string(j.at("net"));
  QNetwork target = QNetwork::from_json_string(j.at("target"));
  trainer.net().copy_from(net);
  trainer.target().copy_from(target);
  trainer.optimizer().restore(j.at("adam_m").get<std::vector<double>>(),
                              j.at("adam_v").get<std::vector<double>>(),
                              j.at("adam_t").get<long>());
  trainer.sync_counter().restore(j.at("sync_count").get<long>());
  load_buffer(trainer.buffer(), path + ".buffer");

  CheckpointInfo info;
  info.next_episode = j.at("next_episode");
  info.config_hash = j.at("config_hash");
  return info;
}

}  // namespace upstream
