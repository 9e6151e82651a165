#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "madqrl/errors.hpp"
#include "madqrl/runtime.hpp"
#include "madqrl/stub_env.hpp"

using namespace madqrl;
using namespace madqrl::runtime;
namespace fs = std::filesystem;

namespace {

RunConfig small_config(marl::Strategy kind = marl::Strategy::Independent) {
  RunConfig c;
  c.seed = 7;
  c.strategy.kind = kind;
  c.model.kind = policy::ModelKind::HybridQNN;
  c.model.n_hybrid_layers = 1;
  c.model.ansatz = {2, 1, qsim::Entanglement::Strong};
  c.model.hidden_dims = {4};
  c.ppo.batch_size = 32;
  c.ppo.minibatch_size = 16;
  c.ppo.epochs_per_iter = 2;
  c.env = pong::desk_config();
  c.env.obs_h = 4;
  c.env.obs_w = 4;
  return c;
}

EnvFactory stub(double reward, int length) {
  return [=](int) { return std::make_unique<ConstantRewardEnv>(reward, length, 4, 4); };
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("madqrl_rt_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<ppo::Trajectory>> flatten(const marl::PolicySet& ps,
                                                  const std::vector<WorkerResult>& results) {
  std::vector<std::vector<ppo::Trajectory>> out;
  for (const auto& r : results) {
    for (auto& b : marl::route_experience(ps, r.segment)) out.push_back(b.trajectories);
  }
  return out;
}

}  // namespace

TEST(RunConfig, Validation) {
  auto c = small_config();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.effective_steps_per_worker(), 32);
  c.steps_per_worker = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c.steps_per_worker = 10;
  c.n_workers = 3;
  EXPECT_THROW(c.validate(), ValidationError);
  c.n_workers = 4;
  EXPECT_NO_THROW(c.validate());
  c.n_workers = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Trainer, ConstantRewardGivesThatMeanReward) {
  Trainer single(small_config(), stub(0.25, 1));
  const auto m = single.train_iteration();
  EXPECT_EQ(m.mean_reward, 0.25);
  EXPECT_EQ(m.std_reward, 0.0);
  EXPECT_EQ(m.mean_episode_len, 1.0);
  EXPECT_EQ(m.episodes, 32);

  Trainer longer(small_config(), stub(0.5, 4));
  const auto m2 = longer.train_iteration();
  EXPECT_EQ(m2.mean_reward, 2.0);
  EXPECT_EQ(m2.mean_episode_len, 4.0);
}

TEST(Trainer, PartialEpisodesUsedWhenNoneComplete) {
  Trainer t(small_config(), stub(0.5, 1000));
  const auto m = t.train_iteration();
  EXPECT_EQ(m.episodes, 0);
  EXPECT_EQ(m.mean_episode_len, 32.0);
  EXPECT_EQ(m.mean_reward, 16.0);
}

TEST(Trainer, MetricsRowsMatchIterations) {
  auto c = small_config();
  c.output_dir = fresh_dir("rows");
  Trainer t(c);
  t.train(3);
  std::ifstream in(c.output_dir / "metrics.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kMetricsHeader);
  int rows = 0;
  int expected = 1;
  while (std::getline(in, line)) {
    EXPECT_EQ(line.substr(0, line.find(',')), std::to_string(expected++));
    ++rows;
  }
  EXPECT_EQ(rows, 3);
  EXPECT_TRUE(fs::exists(c.output_dir / "checkpoint" / "state.json"));
}

TEST(Trainer, DeterministicMetricsFiles) {
  for (int workers : {1, 3}) {
    auto c = small_config();
    c.n_workers = workers;
    c.output_dir = fresh_dir("det_a");
    Trainer(c).train(2);
    const auto a = slurp(c.output_dir / "metrics.csv");
    c.output_dir = fresh_dir("det_b");
    Trainer(c).train(2);
    EXPECT_EQ(a, slurp(c.output_dir / "metrics.csv")) << workers << " workers";
  }
}

TEST(RunRollouts, SerialAndParallelMergeIdentically) {
  auto c = small_config(marl::Strategy::Shared);
  c.n_workers = 4;
  c.steps_per_worker = 20;
  const Trainer t(c);
  const auto snap = t.snapshot();

  c.threads = 1;
  const auto serial = run_rollouts(c, snap, t.factory(), 0);
  c.threads = 4;
  const auto parallel = run_rollouts(c, snap, t.factory(), 0);
  EXPECT_EQ(flatten(*snap, serial), flatten(*snap, parallel));

  std::vector<WorkerResult> manual;
  for (int k = 0; k < 4; ++k) manual.push_back(collect_worker_segment(c, *snap, t.factory(), k, 0));
  EXPECT_EQ(flatten(*snap, manual), flatten(*snap, serial));

  // Different workers see different seeds.
  EXPECT_NE(flatten(*snap, {serial[0]}), flatten(*snap, {serial[1]}));
}

TEST(Trainer, SnapshotsAreSwappedOnlyAtTheBarrier) {
  Trainer t(small_config());
  const auto before = t.snapshot();
  const auto sum_before = checksum(*before);
  t.train_iteration();
  EXPECT_EQ(checksum(*before), sum_before);
  EXPECT_NE(t.snapshot().get(), before.get());
  ASSERT_EQ(t.snapshot_checksums().size(), 2u);
  EXPECT_EQ(t.snapshot_checksums()[0], sum_before);
  EXPECT_EQ(t.snapshot_checksums()[1], checksum(*t.snapshot()));
  EXPECT_NE(t.snapshot_checksums()[0], t.snapshot_checksums()[1]);
}

TEST(Trainer, WorkerFailureIsRetriedOnce) {
  auto calls = std::make_shared<std::atomic<int>>(0);
  auto flaky = [calls](int) -> std::unique_ptr<MultiAgentEnv> {
    // First call is the shape probe, second the first rollout attempt.
    if (calls->fetch_add(1) == 1) throw std::runtime_error("worker crashed");
    return std::make_unique<ConstantRewardEnv>(0.1, 3, 4, 4);
  };
  Trainer t(small_config(), flaky);
  EXPECT_NO_THROW(t.train_iteration());
  EXPECT_EQ(t.rollout_retries(), 1);
  EXPECT_EQ(t.iteration(), 1);

  auto broken_calls = std::make_shared<std::atomic<int>>(0);
  auto broken = [broken_calls](int) -> std::unique_ptr<MultiAgentEnv> {
    if (broken_calls->fetch_add(1) >= 1) throw std::runtime_error("worker crashed");
    return std::make_unique<ConstantRewardEnv>(0.1, 3, 4, 4);
  };
  Trainer b(small_config(), broken);
  EXPECT_THROW(b.train_iteration(), RunError);
  EXPECT_EQ(b.iteration(), 0);
}

TEST(Trainer, NonFiniteLossAbortsAndKeepsCheckpoint) {
  auto c = small_config();
  c.output_dir = fresh_dir("nan");
  auto calls = std::make_shared<std::atomic<int>>(0);
  auto poisoned = [calls](int) -> std::unique_ptr<MultiAgentEnv> {
    const double r = calls->fetch_add(1) >= 2 ? std::numeric_limits<double>::quiet_NaN() : 0.1;
    return std::make_unique<ConstantRewardEnv>(r, 3, 4, 4);
  };
  Trainer t(c, poisoned);
  t.train_iteration();
  t.save();
  const auto saved = slurp(c.output_dir / "checkpoint" / "state.json");
  EXPECT_THROW(t.train_iteration(), NumericError);
  EXPECT_EQ(t.iteration(), 1);
  EXPECT_EQ(slurp(c.output_dir / "checkpoint" / "state.json"), saved);
}

TEST(Checkpoint, ResumeReproducesNextIterationsExactly) {
  for (auto kind : {marl::Strategy::Independent, marl::Strategy::Shared, marl::Strategy::Joint}) {
    auto c = small_config(kind);
    c.output_dir = fresh_dir("resume_full");
    Trainer(c).train(3);
    const auto full = slurp(c.output_dir / "metrics.csv");

    c.output_dir = fresh_dir("resume_split");
    Trainer(c).train(2);
    auto resumed = Trainer::resume(c);
    EXPECT_EQ(resumed.iteration(), 2);
    resumed.train(3);
    EXPECT_EQ(slurp(c.output_dir / "metrics.csv"), full) << marl::to_string(kind);
  }
}

TEST(Checkpoint, RoundTripIsExact) {
  auto c = small_config(marl::Strategy::Shared);
  Trainer t(c);
  t.train_iteration();
  const auto dir = fresh_dir("roundtrip");
  save_checkpoint(dir, {t.iteration(), *t.snapshot(), t.optimizers()});
  const auto cp = load_checkpoint(dir);
  EXPECT_EQ(cp.iteration, 1);
  ASSERT_EQ(cp.policies.sets.size(), t.snapshot()->sets.size());
  for (std::size_t i = 0; i < cp.policies.sets.size(); ++i) {
    EXPECT_EQ(cp.policies.sets[i].name, t.snapshot()->sets[i].name);
    EXPECT_EQ(cp.policies.sets[i].params, t.snapshot()->sets[i].params);
    EXPECT_EQ(cp.optimizers[i], t.optimizers()[i]);
  }
  EXPECT_EQ(checksum(cp.policies), checksum(*t.snapshot()));
}

TEST(Checkpoint, ErrorsNameTheFile) {
  const auto dir = fresh_dir("missing");
  try {
    load_checkpoint(dir);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("state.json"), std::string::npos);
  }

  Trainer t(small_config());
  save_checkpoint(dir, {0, *t.snapshot(), t.optimizers()});
  std::ofstream(dir / "agent1.json") << "{ not json";
  try {
    load_checkpoint(dir);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("agent1.json"), std::string::npos);
  }
  fs::remove(dir / "agent0.json");
  try {
    load_checkpoint(dir);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("agent0.json"), std::string::npos);
  }
}

TEST(Evaluate, SeededAndRepeatable) {
  auto c = small_config();
  const Trainer t(c);
  for (auto mode : {EvalMode::Greedy, EvalMode::Sample, EvalMode::Uniform}) {
    const auto a = evaluate(c, *t.snapshot(), 5, mode);
    const auto b = evaluate(c, *t.snapshot(), 5, mode);
    EXPECT_EQ(a.mean_episode_len, b.mean_episode_len);
    EXPECT_EQ(a.mean_return, b.mean_return);
    EXPECT_EQ(a.episodes, 5);
    double len = 0.0;
    for (const auto& e : a.per_episode) {
      EXPECT_LE(e.length, c.env.max_cycles);
      EXPECT_NEAR(e.ret, (e.length - 1) / static_cast<double>(c.env.max_cycles), 1e-12);
      len += e.length;
    }
    EXPECT_EQ(a.mean_episode_len, len / 5);
  }
  EXPECT_THROW(evaluate(c, *t.snapshot(), 0), ValidationError);
}

TEST(Trainer, PeriodicEvaluationRecordsBaseline) {
  auto c = small_config();
  c.eval_every = 2;
  c.eval_episodes = 3;
  c.output_dir = fresh_dir("eval");
  Trainer t(c, stub(0.1, 5));
  t.train(4);
  ASSERT_EQ(t.evaluations().size(), 3u);
  EXPECT_EQ(t.evaluations()[0].iteration, 0);
  EXPECT_EQ(t.evaluations()[0].mode, EvalMode::Sample);
  EXPECT_EQ(t.evaluations()[2].iteration, 4);
  EXPECT_EQ(t.evaluations()[2].result.mean_episode_len, 5.0);
}

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, 0.0}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.0), "0");
}
