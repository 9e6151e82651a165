#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "madqrl/policy.hpp"

namespace madqrl::ppo {

struct PPOConfig {
  double gamma = 0.95;
  double clip_eps = 0.3;
  double lr = 1e-4;
  double gae_lambda = 0.95;
  double vf_coef = 1.0;
  double entropy_coef = 0.5;
  double kl_coef = 0.2;
  int batch_size = 512;      // samples collected per learner per iteration
  int minibatch_size = 128;
  int epochs_per_iter = 4;
  int total_iterations = 15000;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
  bool normalize_advantages = true;

  void validate() const;
  bool operator==(const PPOConfig&) const = default;
};

struct TrajectoryStep {
  std::vector<double> obs;         // actor input
  std::vector<double> critic_obs;  // centralized-critic input; empty otherwise
  int action = 0;
  double reward = 0.0;
  double log_prob_old = 0.0;
  std::vector<double> logits_old;  // behaviour policy, for the KL penalty
  double value_pred = 0.0;
  bool done = false;
  int agent_id = 0;

  bool operator==(const TrajectoryStep&) const = default;
};

// Contiguous steps of one episode fragment. Only the last step may be done;
// otherwise bootstrap_value estimates the value after the last step.
struct Trajectory {
  std::vector<TrajectoryStep> steps;
  double bootstrap_value = 0.0;

  void validate() const;
  bool operator==(const Trajectory&) const = default;
};

struct AdvantageBatch {
  std::vector<double> advantages;
  std::vector<double> returns;
  bool normalized = false;
};

// GAE(lambda): delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t,
// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}, returns = A + V.
// Throws ValidationError on an empty trajectory.
AdvantageBatch compute_gae(const Trajectory& traj, const PPOConfig& cfg);

// Shifts to zero mean and unit (population) standard deviation. Batches
// with fewer than two entries or zero spread are only centred.
void normalize_advantages(std::span<double> advantages);

// min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)
double clipped_surrogate(double ratio, double advantage, double eps);

// KL(p_old || p_new) between the softmax distributions of two logit vectors.
double kl_divergence(std::span<const double> logits_old, std::span<const double> logits_new);

struct Sample {
  std::span<const double> obs;
  std::span<const double> critic_obs;
  int action = 0;
  double log_prob_old = 0.0;
  std::span<const double> logits_old;
  double advantage = 0.0;
  double ret = 0.0;
};

struct LossComponents {
  double total = 0.0;
  double policy = 0.0;   // mean clipped surrogate (the maximised objective)
  double value = 0.0;    // mean squared value error
  double entropy = 0.0;  // mean policy entropy
  double kl = 0.0;       // mean KL(pi_old || pi_new)
};

// The networks one learner optimises. A centralized critic, when present,
// supplies the value estimate in place of the actor's value head.
struct Networks {
  const policy::Model* actor = nullptr;
  std::span<const double> actor_params;
  const policy::Model* critic = nullptr;
  std::span<const double> critic_params;
};

struct Gradients {
  std::vector<double> actor;
  std::vector<double> critic;
};

// total = -mean(surrogate) + vf_coef mean((V - R)^2) - entropy_coef mean(H)
//         + kl_coef mean(KL).
// When `grads` is non-null it receives d total / d params. Throws
// NumericError when the loss is not finite.
LossComponents ppo_loss(std::span<const Sample> batch, const Networks& nets, const PPOConfig& cfg,
                        Gradients* grads = nullptr);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  bool operator==(const AdamState&) const = default;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// One bias-corrected Adam descent step on `params`. Throws NumericError on
// a non-finite gradient.
void adam_update(std::span<double> params, std::span<const double> grad, AdamState& state,
                 double lr);

// Rescales `grad` in place so its L2 norm is at most max_norm; returns the
// norm before clipping.
double clip_grad_norm(std::span<double> grad, double max_norm);

struct LearnerState {
  std::vector<double> actor_params;
  AdamState actor_opt;
  std::vector<double> critic_params;  // empty without a centralized critic
  AdamState critic_opt;
};

struct LearnStats {
  LossComponents mean;  // averaged over every minibatch
  int updates = 0;
};

// epochs_per_iter passes of shuffled minibatch updates over `samples`.
LearnStats learn(LearnerState& state, const policy::Model& actor, const policy::Model* critic,
                 std::span<const Sample> samples, const PPOConfig& cfg, std::mt19937_64& rng);

}  // namespace madqrl::ppo
