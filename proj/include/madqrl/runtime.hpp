#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "madqrl/marl.hpp"
#include "madqrl/pong_env.hpp"
#include "madqrl/ppo.hpp"

namespace madqrl::runtime {

struct RunConfig {
  int n_workers = 1;                    // logical rollout workers, each with its own seed
  int threads = 0;                      // execution threads; 0 means one per worker
  std::optional<int> steps_per_worker;  // joint steps per worker per iteration
  std::uint64_t seed = 0;
  marl::StrategySpec strategy;
  policy::ModelSpec model;  // template; observation size and head are filled per strategy
  ppo::PPOConfig ppo;
  pong::EnvConfig env;
  int eval_every = 0;  // 0 disables periodic evaluation
  int eval_episodes = 100;
  int checkpoint_every = 0;  // 0 checkpoints only at the end of train()
  std::filesystem::path output_dir;  // empty keeps everything in memory
  bool deterministic = true;

  // steps_per_worker, or ceil(batch_size / n_workers) when unset.
  int effective_steps_per_worker() const;
  int effective_threads() const;
  void validate() const;
};

using EnvFactory = std::function<std::unique_ptr<MultiAgentEnv>(int worker)>;

EnvFactory pong_factory(const pong::EnvConfig& config);

struct EpisodeStat {
  double ret = 0.0;  // undiscounted return, averaged over agents
  int length = 0;
};

struct WorkerResult {
  marl::Segment segment;
  std::vector<EpisodeStat> episodes;  // completed inside this segment
  EpisodeStat partial;                // the unfinished tail, length 0 if none
};

// FNV-1a over every parameter byte of every set.
std::uint64_t checksum(const marl::PolicySet& policies);

// One worker's rollout for `iteration`. Depends only on (config.seed,
// worker, iteration, snapshot); `entropy` is mixed into every seed and is
// zero in deterministic mode.
WorkerResult collect_worker_segment(const RunConfig& config, const marl::PolicySet& snapshot,
                                    const EnvFactory& factory, int worker, int iteration,
                                    std::uint64_t entropy = 0);

// All workers, merged in worker-index order. Any worker failure rethrows
// after the remaining threads have joined. Throws StateError if the
// snapshot changes while workers read it.
std::vector<WorkerResult> run_rollouts(const RunConfig& config,
                                       const std::shared_ptr<const marl::PolicySet>& snapshot,
                                       const EnvFactory& factory, int iteration,
                                       std::uint64_t entropy = 0);

struct IterationMetrics {
  int iteration = 0;
  double mean_reward = 0.0;
  double std_reward = 0.0;
  double mean_episode_len = 0.0;
  int episodes = 0;  // completed episodes behind the statistics
  ppo::LossComponents loss;
  double wall_time_s = 0.0;
};

// Statistics over completed episodes, or over the unfinished segment tails
// when no episode completed.
void summarize_episodes(const std::vector<WorkerResult>& results, IterationMetrics& metrics);

enum class EvalMode { Greedy, Sample, Uniform };
const char* to_string(EvalMode mode);

struct EvalResult {
  int episodes = 0;
  double mean_episode_len = 0.0;
  double mean_return = 0.0;
  std::vector<EpisodeStat> per_episode;
};

// Seeded evaluation episodes on the Eval seed stream; identical inputs give
// identical results. Uniform ignores the policy and moves at random.
EvalResult evaluate(const RunConfig& config, const marl::PolicySet& policies, int n_episodes,
                    EvalMode mode = EvalMode::Greedy, const EnvFactory& factory = {});

struct EvalRecord {
  int iteration = 0;
  EvalMode mode = EvalMode::Greedy;
  EvalResult result;
};

inline constexpr int kCheckpointFormat = 1;

struct Checkpoint {
  int iteration = 0;
  marl::PolicySet policies;
  std::vector<ppo::AdamState> optimizers;  // one per parameter set
};

// Writes <dir>/state.json and one <set>.json per parameter set; every file
// is written to a temporary name and renamed into place.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);

// Throws IoError naming the missing or unreadable file.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

inline constexpr const char* kMetricsHeader =
    "iteration,mean_reward,std_reward,mean_episode_len,policy_loss,value_loss,entropy,kl,wall_time_s";

std::string format_metrics_row(const IterationMetrics& m);

// Shortest text that parses back to the same double.
std::string format_double(double v);

class Trainer {
 public:
  // Fresh run: initialises policies from config.seed.
  explicit Trainer(RunConfig config, EnvFactory factory = {});

  // Continues from <output_dir>/checkpoint, truncating the metrics and
  // evaluation files to the checkpoint's iteration.
  static Trainer resume(RunConfig config, EnvFactory factory = {});

  IterationMetrics train_iteration();

  // Runs until `total_iterations` iterations are complete, with periodic
  // evaluation and checkpoints and a final checkpoint.
  std::vector<IterationMetrics> train(int total_iterations,
                                      const std::function<void(const IterationMetrics&)>& on_iteration = {});

  void save() const;

  int iteration() const { return iteration_; }
  const RunConfig& config() const { return config_; }
  std::shared_ptr<const marl::PolicySet> snapshot() const { return snapshot_; }
  const std::vector<ppo::AdamState>& optimizers() const { return optimizers_; }
  const std::vector<std::uint64_t>& snapshot_checksums() const { return checksums_; }
  const std::vector<EvalRecord>& evaluations() const { return evals_; }
  int rollout_retries() const { return retries_; }
  const EnvFactory& factory() const { return factory_; }

 private:
  struct Resume {};
  Trainer(RunConfig config, EnvFactory factory, Resume);

  std::vector<WorkerResult> rollouts_with_retry();
  void open_outputs(bool truncate_to_iteration);
  void append_metrics(const IterationMetrics& m);
  void record_eval(EvalMode mode);

  RunConfig config_;
  EnvFactory factory_;
  std::shared_ptr<const marl::PolicySet> snapshot_;
  std::vector<ppo::AdamState> optimizers_;
  std::vector<std::uint64_t> checksums_;
  std::vector<EvalRecord> evals_;
  int iteration_ = 0;
  int retries_ = 0;
  std::uint64_t entropy_ = 0;
};

}  // namespace madqrl::runtime
