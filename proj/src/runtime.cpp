#include "madqrl/runtime.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "madqrl/errors.hpp"
#include "madqrl/seeding.hpp"

namespace madqrl::runtime {

namespace fs = std::filesystem;

namespace {

constexpr const char* kTimingsHeader = "iteration,wall_time_s";
constexpr const char* kEvalHeader = "iteration,mode,episodes,mean_episode_len,mean_return";

std::uint64_t tag(SeedStream s) { return static_cast<std::uint64_t>(s); }

double mean_reward(const std::array<double, kNumAgents>& r) {
  double s = 0.0;
  for (double v : r) s += v;
  return s / kNumAgents;
}

// Keeps the header and every row whose leading iteration is <= last.
void truncate_csv(const fs::path& path, const char* header, int last) {
  std::vector<std::string> keep{header};
  if (std::ifstream in(path); in) {
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      int it = 0;
      const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), it);
      if (ec == std::errc() && it <= last) keep.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& l : keep) out << l << '\n';
}

void append_line(const fs::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  out << line << '\n';
}

}  // namespace

int RunConfig::effective_steps_per_worker() const {
  if (steps_per_worker) return *steps_per_worker;
  return (ppo.batch_size + n_workers - 1) / n_workers;
}

int RunConfig::effective_threads() const {
  const int t = threads > 0 ? threads : n_workers;
  return std::min(t, n_workers);
}

void RunConfig::validate() const {
  if (n_workers < 1) throw ValidationError("n_workers must be >= 1");
  if (threads < 0) throw ValidationError("threads must be >= 0");
  if (steps_per_worker && *steps_per_worker <= 0) {
    throw ValidationError("steps_per_worker must be positive");
  }
  ppo.validate();
  env.validate();
  if (static_cast<long long>(n_workers) * effective_steps_per_worker() < ppo.batch_size) {
    throw ValidationError("n_workers x steps_per_worker must cover the batch size");
  }
  if (eval_every < 0 || checkpoint_every < 0) {
    throw ValidationError("eval_every and checkpoint_every must be >= 0");
  }
  if (eval_episodes < 1) throw ValidationError("eval_episodes must be >= 1");
}

EnvFactory pong_factory(const pong::EnvConfig& config) {
  return [config](int) { return std::make_unique<pong::PongEnv>(config); };
}

std::uint64_t checksum(const marl::PolicySet& policies) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& set : policies.sets) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(set.params.data());
    const std::size_t n = set.params.size() * sizeof(double);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

WorkerResult collect_worker_segment(const RunConfig& config, const marl::PolicySet& snapshot,
                                    const EnvFactory& factory, int worker, int iteration,
                                    std::uint64_t entropy) {
  auto env = factory ? factory(worker) : pong_factory(config.env)(worker);
  const std::uint64_t worker_seed = config.seed ^ static_cast<std::uint64_t>(worker);
  const auto iter = static_cast<std::uint64_t>(iteration);
  std::mt19937_64 rng(derive_seed({tag(SeedStream::RolloutActions), worker_seed, iter, entropy}));
  std::uint64_t episode = 0;
  auto reset = [&] {
    env->reset(derive_seed({tag(SeedStream::RolloutEnv), worker_seed, iter, episode, entropy}));
  };
  reset();

  WorkerResult result;
  const int steps = config.effective_steps_per_worker();
  result.segment.steps.reserve(static_cast<std::size_t>(steps));
  EpisodeStat current;
  for (int t = 0; t < steps; ++t) {
    marl::JointStepRecord rec;
    rec.obs = marl::observe(*env, snapshot.strategy);
    rec.act = marl::act(snapshot, rec.obs, rng);
    const auto st = env->step(rec.act.joint_action);
    rec.rewards = st.rewards;
    rec.done = st.done;
    current.ret += mean_reward(st.rewards);
    current.length += 1;
    result.segment.steps.push_back(std::move(rec));
    if (st.done) {
      result.episodes.push_back(current);
      current = {};
      ++episode;
      reset();
    }
  }
  result.partial = current;
  if (current.length > 0) {
    result.segment.bootstrap = marl::values(snapshot, marl::observe(*env, snapshot.strategy));
  }
  return result;
}

std::vector<WorkerResult> run_rollouts(const RunConfig& config,
                                       const std::shared_ptr<const marl::PolicySet>& snapshot,
                                       const EnvFactory& factory, int iteration,
                                       std::uint64_t entropy) {
  if (!snapshot) throw StateError("run_rollouts needs a policy snapshot");
  const int n = config.n_workers;
  const int threads = config.effective_threads();
  const std::uint64_t before = checksum(*snapshot);

  std::vector<WorkerResult> results(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  auto run_share = [&](int first) {
    for (int k = first; k < n; k += threads) {
      try {
        results[static_cast<std::size_t>(k)] =
            collect_worker_segment(config, *snapshot, factory, k, iteration, entropy);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    run_share(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(run_share, t);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  if (checksum(*snapshot) != before) {
    throw StateError("policy snapshot changed while rollout workers were reading it");
  }
  return results;
}

void summarize_episodes(const std::vector<WorkerResult>& results, IterationMetrics& metrics) {
  std::vector<EpisodeStat> eps;
  for (const auto& r : results) eps.insert(eps.end(), r.episodes.begin(), r.episodes.end());
  metrics.episodes = static_cast<int>(eps.size());
  if (eps.empty()) {
    for (const auto& r : results) {
      if (r.partial.length > 0) eps.push_back(r.partial);
    }
  }
  if (eps.empty()) return;
  const double n = static_cast<double>(eps.size());
  double sum = 0.0;
  double len = 0.0;
  for (const auto& e : eps) {
    sum += e.ret;
    len += e.length;
  }
  const double mean = sum / n;
  double var = 0.0;
  for (const auto& e : eps) var += (e.ret - mean) * (e.ret - mean);
  metrics.mean_reward = mean;
  metrics.std_reward = std::sqrt(var / n);
  metrics.mean_episode_len = len / n;
}

const char* to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::Greedy:
      return "greedy";
    case EvalMode::Sample:
      return "sample";
    case EvalMode::Uniform:
      return "uniform";
  }
  return "?";
}

EvalResult evaluate(const RunConfig& config, const marl::PolicySet& policies, int n_episodes,
                    EvalMode mode, const EnvFactory& factory) {
  if (n_episodes < 1) throw ValidationError("evaluation needs at least one episode");
  auto env = factory ? factory(0) : pong_factory(config.env)(0);
  EvalResult result;
  for (int e = 0; e < n_episodes; ++e) {
    const auto ep = static_cast<std::uint64_t>(e);
    env->reset(derive_seed({tag(SeedStream::Eval), config.seed, ep}));
    std::mt19937_64 rng(derive_seed({tag(SeedStream::Eval), config.seed, ep, 1}));
    EpisodeStat stat;
    bool done = false;
    while (!done) {
      JointAction a{};
      if (mode == EvalMode::Uniform) {
        for (auto& m : a) m = static_cast<int>(rng() % 3) - 1;
      } else {
        a = marl::act(policies, marl::observe(*env, policies.strategy), rng, mode == EvalMode::Greedy)
                .joint_action;
      }
      const auto st = env->step(a);
      stat.ret += mean_reward(st.rewards);
      stat.length += 1;
      done = st.done;
    }
    result.per_episode.push_back(stat);
    result.mean_episode_len += stat.length;
    result.mean_return += stat.ret;
  }
  result.episodes = n_episodes;
  result.mean_episode_len /= n_episodes;
  result.mean_return /= n_episodes;
  return result;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_metrics_row(const IterationMetrics& m) {
  std::string row = std::to_string(m.iteration);
  for (double v : {m.mean_reward, m.std_reward, m.mean_episode_len, -m.loss.policy, m.loss.value,
                   m.loss.entropy, m.loss.kl, m.wall_time_s}) {
    row += ',';
    row += format_double(v);
  }
  return row;
}

Trainer::Trainer(RunConfig config, EnvFactory factory, Resume)
    : config_(std::move(config)), factory_(std::move(factory)) {
  config_.validate();
  if (!factory_) factory_ = pong_factory(config_.env);
  if (!config_.deterministic) entropy_ = (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();
}

Trainer::Trainer(RunConfig config, EnvFactory factory) : Trainer(std::move(config), std::move(factory), Resume{}) {
  const auto probe = factory_(0);
  const auto spec = marl::model_for(config_.strategy, config_.model, probe->obs_h(), probe->obs_w());
  snapshot_ = std::make_shared<const marl::PolicySet>(
      marl::make_policies(config_.strategy, spec, config_.seed));
  optimizers_.resize(snapshot_->sets.size());
  checksums_.push_back(checksum(*snapshot_));
  open_outputs(false);
}

Trainer Trainer::resume(RunConfig config, EnvFactory factory) {
  if (config.output_dir.empty()) throw ValidationError("resume needs an output directory");
  Trainer t(std::move(config), std::move(factory), Resume{});
  auto dir = t.config_.output_dir / "checkpoint";
  // A save interrupted between its two renames leaves only the previous copy.
  if (!fs::exists(dir) && fs::exists(t.config_.output_dir / "checkpoint.old")) {
    dir = t.config_.output_dir / "checkpoint.old";
  }
  auto cp = load_checkpoint(dir);
  const auto probe = t.factory_(0);
  const auto spec = marl::model_for(t.config_.strategy, t.config_.model, probe->obs_h(), probe->obs_w());
  const auto& actor_spec =
      cp.policies.sets[static_cast<std::size_t>(cp.policies.learners[0].actor_set)].model->spec();
  if (cp.policies.strategy.kind != t.config_.strategy.kind || actor_spec != spec) {
    throw ValidationError("checkpoint does not match the run configuration");
  }
  t.iteration_ = cp.iteration;
  t.optimizers_ = std::move(cp.optimizers);
  t.snapshot_ = std::make_shared<const marl::PolicySet>(std::move(cp.policies));
  t.checksums_.push_back(checksum(*t.snapshot_));
  t.open_outputs(true);
  return t;
}

void Trainer::open_outputs(bool truncate_to_iteration) {
  if (config_.output_dir.empty()) return;
  fs::create_directories(config_.output_dir);
  const auto& dir = config_.output_dir;
  if (truncate_to_iteration) {
    truncate_csv(dir / "metrics.csv", kMetricsHeader, iteration_);
    truncate_csv(dir / "timings.csv", kTimingsHeader, iteration_);
    truncate_csv(dir / "eval.csv", kEvalHeader, iteration_);
    return;
  }
  truncate_csv(dir / "metrics.csv", kMetricsHeader, -1);
  truncate_csv(dir / "timings.csv", kTimingsHeader, -1);
  truncate_csv(dir / "eval.csv", kEvalHeader, -1);
}

std::vector<WorkerResult> Trainer::rollouts_with_retry() {
  try {
    return run_rollouts(config_, snapshot_, factory_, iteration_, entropy_);
  } catch (const std::exception& first) {
    ++retries_;
    try {
      return run_rollouts(config_, snapshot_, factory_, iteration_, entropy_);
    } catch (const std::exception& second) {
      throw RunError("rollout failed twice at iteration " + std::to_string(iteration_ + 1) + ": " +
                     second.what());
    }
  }
}

IterationMetrics Trainer::train_iteration() {
  const auto start = std::chrono::steady_clock::now();
  const auto results = rollouts_with_retry();
  const marl::PolicySet& ps = *snapshot_;

  IterationMetrics metrics;
  metrics.iteration = iteration_ + 1;
  summarize_episodes(results, metrics);

  std::vector<std::vector<ppo::Trajectory>> per_learner(ps.learners.size());
  for (const auto& r : results) {
    auto batches = marl::route_experience(ps, r.segment);
    for (std::size_t l = 0; l < batches.size(); ++l) {
      for (auto& t : batches[l].trajectories) per_learner[l].push_back(std::move(t));
    }
  }

  auto next = std::make_shared<marl::PolicySet>(ps);
  auto next_opt = optimizers_;
  for (std::size_t l = 0; l < ps.learners.size(); ++l) {
    const auto& plan = ps.learners[l];
    std::vector<double> adv;
    std::vector<double> ret;
    for (const auto& t : per_learner[l]) {
      auto b = ppo::compute_gae(t, config_.ppo);
      adv.insert(adv.end(), b.advantages.begin(), b.advantages.end());
      ret.insert(ret.end(), b.returns.begin(), b.returns.end());
    }
    if (config_.ppo.normalize_advantages) ppo::normalize_advantages(adv);

    std::vector<ppo::Sample> samples;
    samples.reserve(adv.size());
    std::size_t i = 0;
    for (const auto& t : per_learner[l]) {
      for (const auto& st : t.steps) {
        ppo::Sample s;
        s.obs = st.obs;
        s.critic_obs = st.critic_obs;
        s.action = st.action;
        s.log_prob_old = st.log_prob_old;
        s.logits_old = st.logits_old;
        s.advantage = adv[i];
        s.ret = ret[i];
        samples.push_back(s);
        ++i;
      }
    }

    const auto actor = static_cast<std::size_t>(plan.actor_set);
    ppo::LearnerState state;
    state.actor_params = ps.sets[actor].params;
    state.actor_opt = optimizers_[actor];
    const policy::Model* critic_model = nullptr;
    if (plan.critic_set) {
      const auto c = static_cast<std::size_t>(*plan.critic_set);
      state.critic_params = ps.sets[c].params;
      state.critic_opt = optimizers_[c];
      critic_model = ps.sets[c].model.get();
    }
    std::mt19937_64 rng(derive_seed({tag(SeedStream::Shuffle), config_.seed,
                                     static_cast<std::uint64_t>(iteration_), l, entropy_}));
    const auto stats = ppo::learn(state, *ps.sets[actor].model, critic_model, samples, config_.ppo, rng);

    next->sets[actor].params = std::move(state.actor_params);
    next_opt[actor] = std::move(state.actor_opt);
    if (plan.critic_set) {
      const auto c = static_cast<std::size_t>(*plan.critic_set);
      next->sets[c].params = std::move(state.critic_params);
      next_opt[c] = std::move(state.critic_opt);
    }
    const double w = 1.0 / static_cast<double>(ps.learners.size());
    metrics.loss.total += w * stats.mean.total;
    metrics.loss.policy += w * stats.mean.policy;
    metrics.loss.value += w * stats.mean.value;
    metrics.loss.entropy += w * stats.mean.entropy;
    metrics.loss.kl += w * stats.mean.kl;
  }

  // Barrier: workers only ever see whole snapshots.
  snapshot_ = std::move(next);
  optimizers_ = std::move(next_opt);
  iteration_ += 1;
  checksums_.push_back(checksum(*snapshot_));
  metrics.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return metrics;
}

void Trainer::record_eval(EvalMode mode) {
  auto r = evaluate(config_, *snapshot_, config_.eval_episodes, mode, factory_);
  if (!config_.output_dir.empty()) {
    append_line(config_.output_dir / "eval.csv",
                std::to_string(iteration_) + ',' + to_string(mode) + ',' + std::to_string(r.episodes) +
                    ',' + format_double(r.mean_episode_len) + ',' + format_double(r.mean_return));
  }
  evals_.push_back({iteration_, mode, std::move(r)});
}

void Trainer::append_metrics(const IterationMetrics& m) {
  if (config_.output_dir.empty()) return;
  IterationMetrics row = m;
  if (config_.deterministic) row.wall_time_s = 0.0;
  append_line(config_.output_dir / "metrics.csv", format_metrics_row(row));
  append_line(config_.output_dir / "timings.csv",
              std::to_string(m.iteration) + ',' + format_double(m.wall_time_s));
}

std::vector<IterationMetrics> Trainer::train(
    int total_iterations, const std::function<void(const IterationMetrics&)>& on_iteration) {
  std::vector<IterationMetrics> out;
  if (iteration_ == 0 && config_.eval_every > 0) record_eval(EvalMode::Sample);
  while (iteration_ < total_iterations) {
    auto m = train_iteration();
    append_metrics(m);
    if (on_iteration) on_iteration(m);
    out.push_back(m);
    if (config_.eval_every > 0 && iteration_ % config_.eval_every == 0) record_eval(EvalMode::Greedy);
    if (config_.checkpoint_every > 0 && iteration_ % config_.checkpoint_every == 0 &&
        !config_.output_dir.empty()) {
      save();
    }
  }
  if (!config_.output_dir.empty()) save();
  return out;
}

void Trainer::save() const {
  if (config_.output_dir.empty()) throw StateError("no output directory to checkpoint into");
  const auto final_dir = config_.output_dir / "checkpoint";
  const auto tmp = config_.output_dir / "checkpoint.tmp";
  const auto old = config_.output_dir / "checkpoint.old";
  fs::remove_all(tmp);
  save_checkpoint(tmp, {iteration_, *snapshot_, optimizers_});
  fs::remove_all(old);
  if (fs::exists(final_dir)) fs::rename(final_dir, old);
  fs::rename(tmp, final_dir);
  fs::remove_all(old);
}

}  // namespace madqrl::runtime
