#pragma once

#include <array>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "madqrl/env.hpp"
#include "madqrl/policy.hpp"
#include "madqrl/ppo.hpp"

namespace madqrl::marl {

// joint = centralized training and execution, shared = centralized training
// with decentralized execution, independent = fully decentralized.
enum class Strategy { Joint, Shared, Independent };

const char* to_string(Strategy s);
Strategy parse_strategy(const std::string& name);  // throws ValidationError

inline constexpr int kActionsPerAgent = 3;  // {-1, 0, +1}

struct StrategySpec {
  Strategy kind = Strategy::Independent;
  int n_agents = kNumAgents;

  // Agent i's action set, tagged by agent index so sets never intersect.
  std::vector<std::pair<int, int>> action_set(int agent) const;
  int joint_action_count() const;  // product of per-agent set sizes
  int policy_actions() const { return kind == Strategy::Joint ? joint_action_count() : kActionsPerAgent; }
  bool full_frame() const { return kind == Strategy::Joint; }
};

// Mixed-radix joint action index, agent 0 most significant.
JointAction decode_joint(int index);
int encode_joint(const JointAction& actions);

// Per-agent action index in [0, 3) <-> movement in {-1, 0, +1}.
inline int movement_of(int action_index) { return action_index - 1; }
inline int index_of(int movement) { return movement + 1; }

struct ParameterSet {
  std::string name;
  std::shared_ptr<const policy::Model> model;
  std::vector<double> params;
};

// One acting policy instance and the agents it decides for.
struct PolicyEntry {
  int set = 0;
  std::vector<int> agents;
};

// What a single PPO learner optimises: the actor set, an optional
// centralized critic set, and the entries whose experience it consumes.
struct LearnerPlan {
  int actor_set = 0;
  std::optional<int> critic_set;
  std::vector<int> entries;
};

struct PolicySet {
  StrategySpec strategy;
  std::vector<ParameterSet> sets;
  std::vector<PolicyEntry> entries;
  std::optional<int> critic_set;
  std::vector<LearnerPlan> learners;

  int entry_of_agent(int agent) const;
  const ParameterSet& actor_of_agent(int agent) const;
  // Throws ValidationError unless every agent belongs to exactly one entry.
  void check_ownership() const;
};

// Fills obs shape and action count for the strategy. agent_obs is the
// per-agent view; joint policies use a full frame of the same size.
policy::ModelSpec model_for(const StrategySpec& strategy, policy::ModelSpec base, int obs_h,
                            int obs_w);

// Throws ValidationError when model.n_actions does not fit the strategy.
PolicySet make_policies(const StrategySpec& strategy, const policy::ModelSpec& model,
                        std::uint64_t seed);

struct ObservationSet {
  std::array<Grid, kNumAgents> agents;  // empty for the joint strategy
  Grid full;                            // joint strategy only
};

ObservationSet observe(const MultiAgentEnv& env, const StrategySpec& strategy);

struct Decision {
  int entry = 0;
  int action = 0;  // index into the entry's policy head
  double log_prob = 0.0;
  std::vector<double> logits;
  double value = 0.0;
};

struct ActResult {
  JointAction joint_action{};
  std::vector<Decision> decisions;  // entry order
  double joint_log_prob = 0.0;      // sum of decision log-probs
};

// Throws ShapeError when observations do not match the strategy's scopes.
ActResult act(const PolicySet& policies, const ObservationSet& obs, std::mt19937_64& rng,
              bool greedy = false);

// Value estimate per entry for bootstrapping a truncated segment.
std::vector<double> values(const PolicySet& policies, const ObservationSet& obs);

struct JointStepRecord {
  ObservationSet obs;  // observed before acting
  ActResult act;
  std::array<double, kNumAgents> rewards{};
  bool done = false;
};

struct Segment {
  std::vector<JointStepRecord> steps;
  std::vector<double> bootstrap;  // per entry; used when the last step is not done
};

struct LearnerBatch {
  std::vector<ppo::Trajectory> trajectories;
  std::size_t size() const;
};

// Splits a rollout segment into per-learner episode fragments.
std::vector<LearnerBatch> route_experience(const PolicySet& policies, const Segment& segment);

}  // namespace madqrl::marl
