#pragma once

#include <functional>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "upstream/env.hpp"
#include "upstream/net.hpp"
#include "upstream/policy.hpp"
#include "upstream/replay.hpp"

namespace upstream {

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.1;
  double decay_fraction = 0.5;  // fraction of episodes spent decaying
};

struct TrainerConfig {
  double alpha = 0.001;
  double gamma = 0.95;
  int batch_size = 64;
  std::size_t buffer_capacity = 100000;
  long target_sync_steps = 1000;
  long episodes = 10000;
  EpsilonSchedule epsilon;
  std::vector<int> hidden_layers = {256, 128};
  double dropout = 0.2;
  bool batch_norm = false;
  double self_play_fraction = 0.5;  // curriculum: self-play, then league
  long checkpoint_every = 500;

  void validate() const;
};

// Linear decay from start to end over the first decay_fraction of episodes,
// flat afterwards. Exact at the endpoints.
double epsilon_at(long episode, const TrainerConfig& cfg);

// Bellman backup target: r for terminal transitions, otherwise
// r + gamma * max_a' Q_target(s_next, a').
double td_target(double reward, const Observation& s_next, bool terminal,
                 const QNetwork& target_net, double gamma);

inline void sync_target(const QNetwork& net, QNetwork& target_net) {
  target_net.copy_from(net);
}

// Owns the learner state: online network, lagged target copy, replay buffer,
// Adam moments and the target-sync counter. Single-threaded by contract; one
// writer to the parameters and the buffer.
class DqnTrainer {
 public:
  DqnTrainer(TrainerConfig cfg, int obs_dim, int action_count,
             std::uint64_t master_seed);

  void observe(Transition t) { buffer_.push(std::move(t)); }

  // One Adam update on the mean squared TD error over a uniform minibatch.
  // Returns the pre-update loss, or nullopt (no-op) while the buffer holds
  // fewer than batch_size transitions. Ticks the sync counter per update and
  // refreshes the target exactly every target_sync_steps updates.
  std::optional<double> train_step();

  QNetwork& net() { return net_; }
  const QNetwork& net() const { return net_; }
  QNetwork& target() { return target_; }
  const QNetwork& target() const { return target_; }
  ReplayBuffer& buffer() { return buffer_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  AdamOptimizer& optimizer() { return adam_; }
  const AdamOptimizer& optimizer() const { return adam_; }
  TargetSyncCounter& sync_counter() { return sync_; }
  const TargetSyncCounter& sync_counter() const { return sync_; }
  long updates_done() const { return sync_.count(); }
  const TrainerConfig& config() const { return cfg_; }

 private:
  TrainerConfig cfg_;
  QNetwork net_;
  QNetwork target_;
  AdamOptimizer adam_;
  ReplayBuffer buffer_;
  TargetSyncCounter sync_;
  RngStream rng_;
};

struct TrainingLogRow {
  long episode = 0;
  double epsilon = 0.0;
  double mean_loss = 0.0;
  double episode_reward = 0.0;
};

void write_training_log_csv(const std::vector<TrainingLogRow>& log,
                            const std::string& path);
std::vector<TrainingLogRow> read_training_log_csv(const std::string& path);

// Minimal single-agent environment interface for trainer oracles.
class LearnerEnv {
 public:
  virtual ~LearnerEnv() = default;
  virtual int obs_dim() const = 0;
  virtual int action_count() const = 0;
  virtual Observation reset(std::uint64_t episode_seed) = 0;
  // Returns (next observation, reward, done).
  virtual std::tuple<Observation, double, bool> step(int action) = 0;
};

// Plain DQN loop over a single-agent environment (Self-Play stage semantics
// with one agent). Appends one log row per episode.
std::vector<TrainingLogRow> train_single_agent(LearnerEnv& env, DqnTrainer& trainer,
                                               std::uint64_t master_seed,
                                               long max_steps_per_episode = 1000);

struct CurriculumOptions {
  long start_episode = 0;        // resume point
  long halt_after_episode = -1;  // finish this episode then stop (harness hook)
  std::function<void(long episode, const TrainingLogRow& row)> on_episode_end;
};

// Three-stage curriculum on the investment game: Self-Play (every agent acts
// with the learner's epsilon-greedy policy and feeds the shared buffer),
// then League Training (the learner competes against a frozen pool of
// ladder-strategy opponents). Evaluation happens downstream on the trained
// network. Throws DivergenceError when the loss turns non-finite.
std::vector<TrainingLogRow> train_curriculum(GameEnv& env, DqnTrainer& trainer,
                                             std::uint64_t master_seed,
                                             const CurriculumOptions& opts = {});

// --------------------------- Q-grid export ---------------------------------
// 100x100 discretization of the learned value surface. Rows scan the state
// axis: the certainty-equivalent project value quantile, injected as the
// belief-median observation feature with the market pinned at its long-run
// anchors. Columns scan (phase x action) pairs unrolled in canonical order
// and tiled across the axis.
struct QGridSpec {
  int state_bins = 100;
  int action_bins = 100;
  double belief_var = 0.42;  // mid-grid prior variance
  double volatility = 0.28;
  Observation observation_at(double quantile, Phase phase) const;
  std::pair<Phase, int> column_combo(int column) const;
};

Matrix export_qgrid(const QNetwork& net, const QGridSpec& spec);
void write_qgrid_csv(const Matrix& grid, const std::string& path);

// --------------------------- checkpoints ------------------------------------
// Versioned JSON checkpoint (networks, Adam moments, counters) plus a binary
// replay-buffer sidecar at <path>.buffer, so interrupted runs resume exactly.
void save_trainer_checkpoint(const std::string& path, const DqnTrainer& trainer,
                             long next_episode, const std::string& config_hash);

struct CheckpointInfo {
  long next_episode = 0;
  std::string config_hash;
};
CheckpointInfo load_trainer_checkpoint(const std::string& path, DqnTrainer& trainer);

}  // namespace upstream
