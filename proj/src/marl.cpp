#include "madqrl/marl.hpp"

#include <algorithm>

#include "madqrl/errors.hpp"
#include "madqrl/seeding.hpp"

namespace madqrl::marl {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::Joint:
      return "joint";
    case Strategy::Shared:
      return "shared";
    case Strategy::Independent:
      return "independent";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "joint") return Strategy::Joint;
  if (name == "shared") return Strategy::Shared;
  if (name == "independent") return Strategy::Independent;
  throw ValidationError("unknown strategy '" + name + "' (expected joint|shared|independent)");
}

std::vector<std::pair<int, int>> StrategySpec::action_set(int agent) const {
  std::vector<std::pair<int, int>> set;
  for (int m = -1; m <= 1; ++m) set.emplace_back(agent, m);
  return set;
}

int StrategySpec::joint_action_count() const {
  int n = 1;
  for (int i = 0; i < n_agents; ++i) n *= static_cast<int>(action_set(i).size());
  return n;
}

JointAction decode_joint(int index) {
  if (index < 0 || index >= kActionsPerAgent * kActionsPerAgent) {
    throw IndexError("joint action index " + std::to_string(index) + " out of range");
  }
  return {movement_of(index / kActionsPerAgent), movement_of(index % kActionsPerAgent)};
}

int encode_joint(const JointAction& a) {
  for (int m : a) {
    if (m < -1 || m > 1) throw ValidationError("movement must be -1, 0 or 1");
  }
  return index_of(a[0]) * kActionsPerAgent + index_of(a[1]);
}

int PolicySet::entry_of_agent(int agent) const {
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const auto& agents = entries[e].agents;
    if (std::find(agents.begin(), agents.end(), agent) != agents.end()) return static_cast<int>(e);
  }
  throw IndexError("agent " + std::to_string(agent) + " is not owned by any policy");
}

const ParameterSet& PolicySet::actor_of_agent(int agent) const {
  return sets[static_cast<std::size_t>(entries[entry_of_agent(agent)].set)];
}

void PolicySet::check_ownership() const {
  std::vector<int> owners(static_cast<std::size_t>(strategy.n_agents), 0);
  for (const auto& e : entries) {
    for (int a : e.agents) {
      if (a < 0 || a >= strategy.n_agents) throw ValidationError("policy entry names unknown agent");
      owners[static_cast<std::size_t>(a)] += 1;
    }
  }
  for (int n : owners) {
    if (n != 1) throw ValidationError("every agent must be owned by exactly one policy entry");
  }
}

policy::ModelSpec model_for(const StrategySpec& strategy, policy::ModelSpec base, int obs_h,
                            int obs_w) {
  base.obs_h = obs_h;
  base.obs_w = obs_w;
  base.n_actions = strategy.policy_actions();
  base.critic_only = false;
  return base;
}

PolicySet make_policies(const StrategySpec& strategy, const policy::ModelSpec& model,
                        std::uint64_t seed) {
  if (strategy.n_agents != kNumAgents) throw ValidationError("only two-agent settings are supported");
  if (model.n_actions != strategy.policy_actions() || model.critic_only) {
    throw ValidationError(std::string(to_string(strategy.kind)) + " strategy needs a policy head of " +
                          std::to_string(strategy.policy_actions()) + " actions, model has " +
                          std::to_string(model.n_actions));
  }
  PolicySet ps;
  ps.strategy = strategy;
  auto add_set = [&](std::string name, const policy::ModelSpec& spec) {
    auto m = std::make_shared<const policy::Model>(spec);
    const auto index = ps.sets.size();
    auto params = m->init_params(
        derive_seed({static_cast<std::uint64_t>(SeedStream::Init), seed, index}));
    ps.sets.push_back({std::move(name), std::move(m), std::move(params)});
    return static_cast<int>(index);
  };

  switch (strategy.kind) {
    case Strategy::Joint: {
      const int s = add_set("joint", model);
      ps.entries.push_back({s, {0, 1}});
      ps.learners.push_back({s, std::nullopt, {0}});
      break;
    }
    case Strategy::Independent: {
      for (int a = 0; a < kNumAgents; ++a) {
        const int s = add_set("agent" + std::to_string(a), model);
        ps.entries.push_back({s, {a}});
        ps.learners.push_back({s, std::nullopt, {a}});
      }
      break;
    }
    case Strategy::Shared: {
      const int actor = add_set("shared_actor", model);
      auto critic_spec = model;
      critic_spec.obs_w = model.obs_w * kNumAgents;
      critic_spec.critic_only = true;
      const int critic = add_set("central_critic", critic_spec);
      ps.entries.push_back({actor, {0}});
      ps.entries.push_back({actor, {1}});
      ps.critic_set = critic;
      ps.learners.push_back({actor, critic, {0, 1}});
      break;
    }
  }
  ps.check_ownership();
  return ps;
}

ObservationSet observe(const MultiAgentEnv& env, const StrategySpec& strategy) {
  ObservationSet obs;
  if (strategy.full_frame()) {
    obs.full = env.observe_full();
  } else {
    for (int a = 0; a < kNumAgents; ++a) obs.agents[static_cast<std::size_t>(a)] = env.observe(a);
  }
  return obs;
}

namespace {

const Grid& entry_obs(const PolicySet& ps, const PolicyEntry& entry, const ObservationSet& obs) {
  const Grid& g = ps.strategy.full_frame() ? obs.full
                                           : obs.agents[static_cast<std::size_t>(entry.agents[0])];
  const auto& spec = ps.sets[static_cast<std::size_t>(entry.set)].model->spec();
  if (g.h != spec.obs_h || g.w != spec.obs_w) {
    throw ShapeError(std::string("observation scope mismatch for the ") +
                     to_string(ps.strategy.kind) + " strategy: got " + std::to_string(g.h) + "x" +
                     std::to_string(g.w) + ", policy expects " + std::to_string(spec.obs_h) + "x" +
                     std::to_string(spec.obs_w));
  }
  return g;
}

double critic_value(const PolicySet& ps, const ObservationSet& obs) {
  const auto& critic = ps.sets[static_cast<std::size_t>(*ps.critic_set)];
  const Grid joint = concat_views(obs.agents[0], obs.agents[1]);
  return critic.model->forward(critic.params, joint.data).value;
}

}  // namespace

ActResult act(const PolicySet& ps, const ObservationSet& obs, std::mt19937_64& rng, bool greedy) {
  ActResult result;
  std::optional<double> shared_value;
  if (ps.critic_set) shared_value = critic_value(ps, obs);

  for (std::size_t e = 0; e < ps.entries.size(); ++e) {
    const auto& entry = ps.entries[e];
    const auto& set = ps.sets[static_cast<std::size_t>(entry.set)];
    const Grid& g = entry_obs(ps, entry, obs);
    auto out = set.model->forward(set.params, g.data);
    const auto sampled = policy::sample_action(out, rng, greedy);

    Decision d;
    d.entry = static_cast<int>(e);
    d.action = sampled.action;
    d.log_prob = sampled.log_prob;
    d.value = shared_value.value_or(out.value);
    d.logits = std::move(out.logits);
    if (ps.strategy.kind == Strategy::Joint) {
      result.joint_action = decode_joint(d.action);
    } else {
      result.joint_action[static_cast<std::size_t>(entry.agents[0])] = movement_of(d.action);
    }
    result.joint_log_prob += d.log_prob;
    result.decisions.push_back(std::move(d));
  }
  return result;
}

std::vector<double> values(const PolicySet& ps, const ObservationSet& obs) {
  std::vector<double> out;
  std::optional<double> shared_value;
  if (ps.critic_set) shared_value = critic_value(ps, obs);
  for (const auto& entry : ps.entries) {
    if (shared_value) {
      out.push_back(*shared_value);
      continue;
    }
    const auto& set = ps.sets[static_cast<std::size_t>(entry.set)];
    out.push_back(set.model->forward(set.params, entry_obs(ps, entry, obs).data).value);
  }
  return out;
}

std::size_t LearnerBatch::size() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.steps.size();
  return n;
}

std::vector<LearnerBatch> route_experience(const PolicySet& ps, const Segment& segment) {
  std::vector<LearnerBatch> batches(ps.learners.size());
  for (std::size_t l = 0; l < ps.learners.size(); ++l) {
    const auto& plan = ps.learners[l];
    for (int e : plan.entries) {
      const auto& entry = ps.entries[static_cast<std::size_t>(e)];
      const int agent = entry.agents.size() == 1 ? entry.agents[0] : 0;
      ppo::Trajectory current;
      for (const auto& rec : segment.steps) {
        const auto& d = rec.act.decisions[static_cast<std::size_t>(e)];
        ppo::TrajectoryStep st;
        st.obs = entry_obs(ps, entry, rec.obs).data;
        if (plan.critic_set) st.critic_obs = concat_views(rec.obs.agents[0], rec.obs.agents[1]).data;
        st.action = d.action;
        if (entry.agents.size() == 1) {
          st.reward = rec.rewards[static_cast<std::size_t>(agent)];
        } else {
          double sum = 0.0;
          for (int a : entry.agents) sum += rec.rewards[static_cast<std::size_t>(a)];
          st.reward = sum / static_cast<double>(entry.agents.size());
        }
        st.log_prob_old = d.log_prob;
        st.logits_old = d.logits;
        st.value_pred = d.value;
        st.done = rec.done;
        st.agent_id = agent;
        current.steps.push_back(std::move(st));
        if (rec.done) {
          batches[l].trajectories.push_back(std::move(current));
          current = {};
        }
      }
      if (!current.steps.empty()) {
        current.bootstrap_value =
            segment.bootstrap.empty() ? 0.0 : segment.bootstrap[static_cast<std::size_t>(e)];
        batches[l].trajectories.push_back(std::move(current));
      }
    }
  }
  return batches;
}

}  // namespace madqrl::marl
