#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "dense_oracle.hpp"
#include "madqrl/cli.hpp"
#include "madqrl/ppo.hpp"
#include "madqrl/qsim.hpp"
#include "madqrl/runtime.hpp"

using namespace madqrl;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> uniform_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

double z_dot(const std::vector<double>& upstream, const std::vector<double>& z) {
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += upstream[i] * z[i];
  return s;
}

Outcome kernel_matches_dense_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int c = 0; c < 200; ++c) {
    const int n = 2 + c % 3;
    const int layers = 1 + (c / 3) % 4;
    const bool strong = c % 2 == 0;
    const qsim::AnsatzConfig cfg{n, layers, strong ? qsim::Entanglement::Strong : qsim::Entanglement::Basic};
    const auto f = uniform_vector(rng, static_cast<std::size_t>(n), -kPi, kPi);
    const auto p = uniform_vector(rng, cfg.parameter_count(), -2 * kPi, 2 * kPi);
    const auto got = qsim::run_vqc(f, p, cfg);
    const auto want = oracle::vqc(f, p, n, layers, strong);
    for (int q = 0; q < n; ++q) worst = std::max(worst, std::abs(got[q] - want[q]));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && secs < 10.0,
          "200 circuits, max |diff| " + num(worst) + " (tol 1e-10), " + num(secs) + " s (limit 10 s)"};
}

policy::ModelSpec two_qubit_spec(int obs_w) {
  policy::ModelSpec s;
  s.kind = policy::ModelKind::HybridQNN;
  s.n_hybrid_layers = 1;
  s.ansatz = {2, 2, qsim::Entanglement::Strong};
  s.obs_h = 2;
  s.obs_w = obs_w;
  s.n_actions = 3;
  s.hidden_dims = {4};
  return s;
}

Outcome gradients_match_finite_differences() {
  std::mt19937_64 rng(202);
  const double h = 1e-4;
  double worst_circuit = 0.0;
  for (int c = 0; c < 50; ++c) {
    const int n = 1 + static_cast<int>(rng() % 6);
    const int layers = 1 + static_cast<int>(rng() % 4);
    const qsim::AnsatzConfig cfg{std::max(n, 2), layers,
                                 c % 2 ? qsim::Entanglement::Strong : qsim::Entanglement::Basic};
    const auto nq = static_cast<std::size_t>(cfg.n_qubits);
    const auto f = uniform_vector(rng, nq, -kPi, kPi);
    const auto p = uniform_vector(rng, cfg.parameter_count(), 0, 2 * kPi);
    const auto up = uniform_vector(rng, nq, -1, 1);
    const auto g = qsim::vqc_gradient(f, p, cfg, up);
    for (std::size_t k = 0; k < p.size(); ++k) {
      auto pp = p, pm = p;
      pp[k] += h;
      pm[k] -= h;
      const double fd = (z_dot(up, qsim::run_vqc(f, pp, cfg)) - z_dot(up, qsim::run_vqc(f, pm, cfg))) / (2 * h);
      worst_circuit = std::max(worst_circuit, std::abs(g.params[k] - fd));
    }
  }

  const policy::Model actor(two_qubit_spec(3));
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<double> params(actor.parameter_count());
  for (auto& v : params) v = u(rng);
  std::vector<ppo::Sample> batch(8);
  std::vector<std::vector<double>> obs(8), logits(8);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    obs[i].resize(actor.obs_size());
    for (auto& v : obs[i]) v = unit(rng);
    logits[i] = actor.forward(params, obs[i]).logits;
    for (auto& v : logits[i]) v += noise(rng);
    auto& s = batch[i];
    s.obs = obs[i];
    s.action = static_cast<int>(i % 3);
    s.logits_old = logits[i];
    s.log_prob_old = policy::log_softmax(logits[i])[static_cast<std::size_t>(s.action)];
    s.advantage = 2 * unit(rng) - 1;
    s.ret = unit(rng);
  }
  const ppo::PPOConfig cfg;
  ppo::Gradients grads;
  ppo::ppo_loss(batch, {&actor, params, nullptr, {}}, cfg, &grads);
  double diff_sq = 0.0;
  double ref_sq = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto pp = params, pm = params;
    pp[k] += h;
    pm[k] -= h;
    const double fd = (ppo::ppo_loss(batch, {&actor, pp, nullptr, {}}, cfg).total -
                       ppo::ppo_loss(batch, {&actor, pm, nullptr, {}}, cfg).total) /
                      (2 * h);
    diff_sq += (grads.actor[k] - fd) * (grads.actor[k] - fd);
    ref_sq += fd * fd;
  }
  const double rel = std::sqrt(diff_sq / ref_sq);
  return {worst_circuit <= 1e-5 && rel <= 1e-4,
          "50 circuits max |shift - fd| " + num(worst_circuit) + " (tol 1e-5); hybrid loss relative error " +
              num(rel) + " (tol 1e-4)"};
}

Outcome norm_is_conserved() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_real_distribution<double> angle(-4 * kPi, 4 * kPi);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 7;
    std::uniform_int_distribution<int> wire(0, n - 1);
    auto s = qsim::new_state(n);
    for (int g = 0; g < 1000; ++g) {
      const int k = kind(rng);
      const int t = wire(rng);
      if (k == 0) {
        qsim::apply_gate(s, qsim::GateOp::rx(t, angle(rng)));
      } else if (k == 1) {
        qsim::apply_gate(s, qsim::GateOp::rz(t, angle(rng)));
      } else {
        int c = wire(rng);
        if (c == t) c = (t + 1) % n;
        qsim::apply_gate(s, qsim::GateOp::cnot(c, t));
      }
    }
    worst = std::max(worst, std::abs(std::sqrt(s.norm_squared()) - 1.0));
  }
  return {worst <= 1e-12, "100 trials of 1000 gates, max |norm - 1| " + num(worst) + " (tol 1e-12)"};
}

ppo::Trajectory make_traj(const std::vector<double>& rewards, const std::vector<double>& values, bool terminal,
                          double bootstrap) {
  ppo::Trajectory t;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    ppo::TrajectoryStep s;
    s.reward = rewards[i];
    s.value_pred = values[i];
    s.done = terminal && i + 1 == rewards.size();
    t.steps.push_back(s);
  }
  t.bootstrap_value = bootstrap;
  return t;
}

Outcome gae_matches_recursion() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  ppo::PPOConfig cfg;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 32;
    std::vector<double> r(n), v(n);
    for (auto& x : r) x = u(rng);
    for (auto& x : v) x = u(rng);
    const auto t = make_traj(r, v, rng() % 2 == 0, u(rng));
    const auto adv = ppo::compute_gae(t, cfg).advantages;
    double next = 0.0;
    for (std::size_t k = n; k-- > 0;) {
      const double next_v = k + 1 < n ? v[k + 1] : t.bootstrap_value;
      const double live = t.steps[k].done ? 0.0 : 1.0;
      next = r[k] + cfg.gamma * next_v * live - v[k] + cfg.gamma * cfg.gae_lambda * live * next;
      worst = std::max(worst, std::abs(adv[k] - next));
    }
  }
  cfg.gae_lambda = 1.0;
  bool exact = true;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 32;
    std::vector<double> r(n);
    for (auto& x : r) x = u(rng);
    const auto adv = ppo::compute_gae(make_traj(r, std::vector<double>(n, 0.0), true, 0.0), cfg).advantages;
    double g = 0.0;
    for (std::size_t k = n; k-- > 0;) {
      g = r[k] + cfg.gamma * g;
      exact = exact && adv[k] == g;
    }
  }
  return {worst <= 1e-12 && exact, "100 trajectories max |diff| " + num(worst) +
                                       " (tol 1e-12); lambda 1 with zero values equals discounted return: " +
                                       (exact ? "exact" : "mismatch")};
}

Outcome bandit_reaches_arm_zero() {
  const auto t0 = std::chrono::steady_clock::now();
  policy::ModelSpec spec;
  spec.kind = policy::ModelKind::ClassicalCNN;
  spec.obs_h = 1;
  spec.obs_w = 4;
  spec.n_actions = 2;
  spec.hidden_dims = {16};
  const policy::Model model(spec);
  ppo::PPOConfig cfg;
  cfg.lr = 1e-3;
  cfg.entropy_coef = 0.01;
  cfg.batch_size = 64;
  cfg.minibatch_size = 64;
  const std::vector<double> obs(4, 0.5);
  int solved = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    ppo::LearnerState st;
    st.actor_params = model.init_params(seed);
    std::mt19937_64 rng(seed);
    int reached = -1;
    for (int it = 1; it <= 200 && reached < 0; ++it) {
      const auto out = model.forward(st.actor_params, obs);
      std::vector<ppo::Sample> batch;
      std::vector<double> adv;
      std::vector<double> ret;
      for (int i = 0; i < cfg.batch_size; ++i) {
        const auto a = policy::sample_action(out, rng);
        ppo::TrajectoryStep step;
        step.reward = a.action == 0 ? 1.0 : 0.0;
        step.value_pred = out.value;
        step.done = true;
        ppo::Trajectory tr;
        tr.steps = {step};
        const auto b = ppo::compute_gae(tr, cfg);
        adv.push_back(b.advantages[0]);
        ret.push_back(b.returns[0]);
        ppo::Sample s;
        s.obs = obs;
        s.action = a.action;
        s.log_prob_old = a.log_prob;
        s.logits_old = out.logits;
        batch.push_back(s);
      }
      ppo::normalize_advantages(adv);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        batch[i].advantage = adv[i];
        batch[i].ret = ret[i];
      }
      ppo::learn(st, model, nullptr, batch, cfg, rng);
      if (policy::softmax(model.forward(st.actor_params, obs).logits)[0] >= 0.95) reached = it;
    }
    if (reached > 0) ++solved;
    per_seed += " seed " + std::to_string(seed) + ": " + (reached > 0 ? "iteration " + std::to_string(reached) : "not reached") + ";";
  }
  const double secs = seconds_since(t0);
  return {solved == 3 && secs < 60.0,
          "Pr(arm 0) >= 0.95 within 200 iterations in " + std::to_string(solved) + "/3 seeds;" + per_seed + " " +
              num(secs) + " s (limit 60 s)"};
}

Outcome independent_log_probs_factorize() {
  const auto env_cfg = pong::desk_config();
  marl::StrategySpec strategy{marl::Strategy::Independent};
  policy::ModelSpec base;
  base.ansatz = {4, 2, qsim::Entanglement::Strong};
  base.n_hybrid_layers = 1;
  base.hidden_dims = {16};
  const auto ps =
      marl::make_policies(strategy, marl::model_for(strategy, base, env_cfg.obs_h, env_cfg.obs_w), 606);
  pong::PongEnv env(env_cfg);
  env.reset(606);
  std::mt19937_64 rng(606);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto obs = marl::observe(env, strategy);
    const auto r = marl::act(ps, obs, rng);
    double sum = 0.0;
    for (std::size_t a = 0; a < r.decisions.size(); ++a) {
      const auto& d = r.decisions[a];
      const auto& set = ps.actor_of_agent(static_cast<int>(a));
      const auto own = set.model->forward(set.params, obs.agents[a].data).logits;
      const double lp = policy::log_softmax(own)[static_cast<std::size_t>(d.action)];
      if (lp != d.log_prob) ++mismatches;
      sum += lp;
    }
    if (r.decisions.size() != 2 || r.joint_log_prob != sum) ++mismatches;
    if (env.step(r.joint_action).done) env.reset(1000 + static_cast<std::uint64_t>(t));
  }
  return {mismatches == 0, "1000 steps, " + std::to_string(mismatches) + " steps where the joint log-prob differs "
                                                                         "from the per-agent sum"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome runs_are_deterministic() {
  runtime::RunConfig c;
  c.seed = 707;
  c.model.n_hybrid_layers = 1;
  c.model.ansatz = {2, 1, qsim::Entanglement::Strong};
  c.model.hidden_dims = {4};
  c.ppo.batch_size = 64;
  c.ppo.minibatch_size = 32;
  c.ppo.epochs_per_iter = 2;
  c.env = pong::desk_config();
  bool identical = true;
  for (int workers : {1, 4}) {
    std::string first;
    for (int rep = 0; rep < 2; ++rep) {
      c.n_workers = workers;
      c.output_dir = fs::temp_directory_path() / ("madqrl_accept_det_" + std::to_string(rep));
      fs::remove_all(c.output_dir);
      runtime::Trainer(c).train(3);
      const auto csv = slurp(c.output_dir / "metrics.csv");
      if (rep == 0) first = csv;
      identical = identical && !csv.empty() && csv == first;
    }
  }

  c.output_dir.clear();
  c.n_workers = 4;
  c.steps_per_worker = 32;
  const runtime::Trainer t(c);
  const auto snap = t.snapshot();
  auto flatten = [&](const std::vector<runtime::WorkerResult>& results) {
    std::vector<std::vector<ppo::Trajectory>> out;
    for (const auto& r : results) {
      for (auto& b : marl::route_experience(*snap, r.segment)) out.push_back(b.trajectories);
    }
    return out;
  };
  std::vector<runtime::WorkerResult> serial;
  for (int k = 0; k < 4; ++k) {
    auto one = c;
    one.threads = 1;
    serial.push_back(runtime::collect_worker_segment(one, *snap, t.factory(), k, 0));
  }
  c.threads = 4;
  const bool merged = flatten(serial) == flatten(runtime::run_rollouts(c, snap, t.factory(), 0));
  return {identical && merged, std::string("metrics CSVs for 1 and 4 workers ") +
                                   (identical ? "bit-identical" : "differ") +
                                   "; serial per-worker vs 4-thread merged batches " +
                                   (merged ? "identical" : "differ")};
}

Outcome learning_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  auto app = cli::default_config(true);
  app.run.strategy.kind = marl::Strategy::Independent;
  app.run.model.kind = policy::ModelKind::HybridQNN;
  app.run.output_dir.clear();
  app.run.eval_every = 0;
  int passing = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto cfg = app.run;
    cfg.seed = seed;
    runtime::Trainer trainer(cfg);
    const auto baseline = runtime::evaluate(cfg, *trainer.snapshot(), cfg.eval_episodes, runtime::EvalMode::Sample);
    trainer.train(app.iterations);
    const auto final_eval =
        runtime::evaluate(cfg, *trainer.snapshot(), cfg.eval_episodes, runtime::EvalMode::Greedy);
    const double ratio = final_eval.mean_episode_len / baseline.mean_episode_len;
    if (ratio >= 2.0) ++passing;
    per_seed += " seed " + std::to_string(seed) + ": " + num(baseline.mean_episode_len) + " -> " +
                num(final_eval.mean_episode_len) + " (" + num(ratio) + "x);";
    std::fprintf(stderr, "learning trend seed %llu: baseline %.2f final %.2f ratio %.3f after %.0f s\n",
                 static_cast<unsigned long long>(seed), baseline.mean_episode_len, final_eval.mean_episode_len,
                 ratio, seconds_since(t0));
  }
  return {passing >= 2, "mean episode length after " + std::to_string(app.iterations) +
                            " iterations vs iteration-0 baseline, >= 2x in " + std::to_string(passing) +
                            "/3 seeds (need 2);" + per_seed + " " + num(seconds_since(t0)) + " s"};
}

Outcome parameter_accounting() {
  struct Case {
    int qubits, layers, hybrid;
    qsim::Entanglement ent;
  };
  bool ok = true;
  std::string detail;
  for (const auto& k : {Case{4, 2, 3, qsim::Entanglement::Strong}, Case{4, 3, 3, qsim::Entanglement::Basic},
                        Case{13, 9, 3, qsim::Entanglement::Strong}, Case{3, 2, 2, qsim::Entanglement::Strong}}) {
    for (auto strategy : {marl::Strategy::Independent, marl::Strategy::Joint, marl::Strategy::Shared}) {
      auto app = cli::default_config(true);
      app.run.strategy.kind = strategy;
      app.run.model.ansatz = {k.qubits, k.layers, k.ent};
      app.run.model.n_hybrid_layers = k.hybrid;
      app.run.model.hidden_dims.assign(static_cast<std::size_t>(k.hybrid), 16);
      const auto s = cli::inspect(app);
      const std::size_t rot = k.ent == qsim::Entanglement::Strong ? 2 : 1;
      const std::size_t expected = static_cast<std::size_t>(k.hybrid * k.qubits * k.layers) * rot;
      ok = ok && s.quantum_closed_form == expected;
      for (const auto& set : s.sets) ok = ok && set.quantum == expected;
      ok = ok && !s.notes.empty() && s.notes[0].find("1170") != std::string::npos;
    }
  }
  auto classical = cli::default_config(true);
  classical.run.model.kind = policy::ModelKind::ClassicalCNN;
  for (const auto& set : cli::inspect(classical).sets) ok = ok && set.quantum == 0;
  const auto desk = cli::inspect(cli::default_config(true));
  const std::string report = cli::format_inspect(desk);
  ok = ok && report.find("1170") != std::string::npos;
  detail = "quantum counts equal hybrid_layers x qubits x layers x rotations for 12 configurations; desk preset " +
           std::to_string(desk.quantum_closed_form) + " per actor; 1170 discrepancy flagged: " +
           (report.find("1170") != std::string::npos ? "yes" : "no");
  return {ok, detail};
}

Outcome environment_physics() {
  const auto c = pong::desk_config();
  std::mt19937_64 rng(1010);
  std::uniform_int_distribution<int> act(-1, 1);
  int reflections = 0;
  double worst_speed = 0.0;
  int bad_terminations = 0;
  std::uint64_t seed = 0;
  while (reflections < 10000) {
    auto s = pong::reset(c, seed++).first;
    while (!s.done) {
      const auto before = s.ball_vel;
      JointAction a{};
      for (int k = 0; k < 2; ++k) {
        const double diff = s.ball_pos.y - s.paddle_pos[static_cast<std::size_t>(k)];
        a[static_cast<std::size_t>(k)] = rng() % 4 == 0 ? act(rng) : (diff > 2 ? 1 : (diff < -2 ? -1 : 0));
      }
      pong::step(c, s, a);
      const bool exited = s.ball_pos.x < 0.0 || s.ball_pos.x > c.arena_w;
      if (s.done != (exited || s.t == c.max_cycles)) ++bad_terminations;
      if (!s.done && (std::signbit(before.x) != std::signbit(s.ball_vel.x) ||
                      std::signbit(before.y) != std::signbit(s.ball_vel.y))) {
        ++reflections;
        worst_speed = std::max(worst_speed, std::abs(std::hypot(s.ball_vel.x, s.ball_vel.y) - c.ball_speed));
      }
    }
  }

  int overlaps = 0;
  const int mid = c.arena_w / 2;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double half = c.paddle_length / 2.0;
  for (int i = 0; i < 1000; ++i) {
    pong::EnvState s;
    s.ball_pos = {c.ball_radius + u(rng) * (c.arena_w - 2 * c.ball_radius),
                  c.ball_radius + u(rng) * (c.arena_h - 2 * c.ball_radius)};
    s.ball_vel = {c.ball_speed, 0.0};
    s.paddle_pos = {half + u(rng) * (c.arena_h - 2 * half), half + u(rng) * (c.arena_h - 2 * half)};
    const auto left = pong::rasterize(c, s, 0, mid);
    const auto right = pong::rasterize(c, s, mid, c.arena_w);
    const auto full = pong::rasterize(c, s, 0, c.arena_w);
    if (left.w + right.w != full.w || concat_views(left, right) != full) ++overlaps;
  }
  return {worst_speed <= 1e-9 && overlaps == 0 && bad_terminations == 0,
          std::to_string(reflections) + " reflections, max |speed - " + num(c.ball_speed) + "| " + num(worst_speed) +
              " (tol 1e-9); " + std::to_string(overlaps) + "/1000 states where the halves overlap or leave gaps; " +
              std::to_string(bad_terminations) + " steps with a termination other than exit or max_cycles"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"quantum kernel matches dense oracle", kernel_matches_dense_oracle},
      {"gradient fidelity", gradients_match_finite_differences},
      {"norm conservation", norm_is_conserved},
      {"GAE oracle", gae_matches_recursion},
      {"PPO bandit sanity", bandit_reaches_arm_zero},
      {"independent factorization", independent_log_probs_factorize},
      {"determinism", runs_are_deterministic},
      {"desk learning trend", learning_trend},
      {"parameter accounting", parameter_accounting},
      {"environment physics", environment_physics},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
