#include "madqrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "madqrl/errors.hpp"

namespace madqrl::ppo {

void PPOConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("gamma must be in (0, 1)");
  if (!(clip_eps > 0.0)) throw ValidationError("clip_eps must be positive");
  if (!(lr > 0.0)) throw ValidationError("lr must be positive");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
    throw ValidationError("gae_lambda must be in [0, 1]");
  }
  if (!(vf_coef >= 0.0) || !(entropy_coef >= 0.0) || !(kl_coef >= 0.0)) {
    throw ValidationError("loss coefficients must be non-negative");
  }
  if (batch_size < 1 || minibatch_size < 1 || epochs_per_iter < 1 || total_iterations < 0) {
    throw ValidationError("batch, minibatch and epoch counts must be positive");
  }
  if (std::isnan(max_grad_norm)) throw ValidationError("max_grad_norm must be a number");
}

void Trajectory::validate() const {
  if (steps.empty()) throw ValidationError("trajectory is empty");
  for (std::size_t t = 0; t < steps.size(); ++t) {
    if (steps[t].done && t + 1 != steps.size()) {
      throw ValidationError("trajectory has a terminal step before its end");
    }
    if (steps[t].log_prob_old > 0.0) throw ValidationError("log_prob_old must be <= 0");
  }
}

AdvantageBatch compute_gae(const Trajectory& traj, const PPOConfig& cfg) {
  if (traj.steps.empty()) throw ValidationError("cannot compute advantages of an empty trajectory");
  const std::size_t n = traj.steps.size();
  AdvantageBatch out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_value = traj.bootstrap_value;
  double next_adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const auto& s = traj.steps[t];
    const double live = s.done ? 0.0 : 1.0;
    const double delta = s.reward + cfg.gamma * next_value * live - s.value_pred;
    const double adv = delta + cfg.gamma * cfg.gae_lambda * live * next_adv;
    out.advantages[t] = adv;
    out.returns[t] = adv + s.value_pred;
    next_value = s.value_pred;
    next_adv = adv;
  }
  return out;
}

void normalize_advantages(std::span<double> adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : adv) a -= mean;
  if (adv.size() < 2 || sd < 1e-12) return;
  for (double& a : adv) a /= sd;
}

double clipped_surrogate(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

double kl_divergence(std::span<const double> logits_old, std::span<const double> logits_new) {
  const auto lp_old = policy::log_softmax(logits_old);
  const auto lp_new = policy::log_softmax(logits_new);
  double kl = 0.0;
  for (std::size_t j = 0; j < lp_old.size(); ++j) kl += std::exp(lp_old[j]) * (lp_old[j] - lp_new[j]);
  return kl;
}

LossComponents ppo_loss(std::span<const Sample> batch, const Networks& nets, const PPOConfig& cfg,
                        Gradients* grads) {
  if (batch.empty()) throw ValidationError("ppo_loss needs a non-empty batch");
  if (nets.actor == nullptr) throw StateError("ppo_loss needs an actor network");
  const policy::Model& actor = *nets.actor;
  const policy::Model* critic = nets.critic;
  if (grads) {
    grads->actor.assign(actor.parameter_count(), 0.0);
    grads->critic.assign(critic ? critic->parameter_count() : 0, 0.0);
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  LossComponents acc;
  policy::ForwardCache actor_cache;
  policy::ForwardCache critic_cache;
  std::vector<double> up_logits;

  for (const auto& s : batch) {
    const auto out = actor.forward(nets.actor_params, s.obs, grads ? &actor_cache : nullptr);
    double value = out.value;
    if (critic) {
      value = critic->forward(nets.critic_params, s.critic_obs, grads ? &critic_cache : nullptr).value;
    }
    const auto logp = policy::log_softmax(out.logits);
    const auto lp_old = policy::log_softmax(s.logits_old);
    const std::size_t k = logp.size();
    if (static_cast<std::size_t>(s.action) >= k || lp_old.size() != k) {
      throw ShapeError("sample action or behaviour logits do not match the policy head");
    }

    const double ratio = std::exp(logp[s.action] - s.log_prob_old);
    const double surrogate = clipped_surrogate(ratio, s.advantage, cfg.clip_eps);
    double h = 0.0;
    double kl = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      h -= std::exp(logp[j]) * logp[j];
      kl += std::exp(lp_old[j]) * (lp_old[j] - logp[j]);
    }
    const double verr = value - s.ret;

    acc.policy += surrogate * inv_n;
    acc.value += verr * verr * inv_n;
    acc.entropy += h * inv_n;
    acc.kl += kl * inv_n;

    if (!grads) continue;
    // d total / d logits, per sample, scaled by 1/N.
    up_logits.assign(k, 0.0);
    const bool unclipped = ratio * s.advantage <= clipped_surrogate(ratio, s.advantage, cfg.clip_eps);
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(logp[j]);
      const double onehot = j == static_cast<std::size_t>(s.action) ? 1.0 : 0.0;
      double g = 0.0;
      if (unclipped) g -= s.advantage * ratio * (onehot - p);
      g += cfg.entropy_coef * p * (logp[j] + h);
      g += cfg.kl_coef * (p - std::exp(lp_old[j]));
      up_logits[j] = g * inv_n;
    }
    const double up_value = 2.0 * cfg.vf_coef * verr * inv_n;
    if (critic) {
      actor.accumulate_gradient(nets.actor_params, actor_cache, up_logits, 0.0, grads->actor);
      critic->accumulate_gradient(nets.critic_params, critic_cache, {}, up_value, grads->critic);
    } else {
      actor.accumulate_gradient(nets.actor_params, actor_cache, up_logits, up_value, grads->actor);
    }
  }

  acc.total = -acc.policy + cfg.vf_coef * acc.value - cfg.entropy_coef * acc.entropy +
              cfg.kl_coef * acc.kl;
  if (!std::isfinite(acc.total)) {
    std::ostringstream msg;
    msg << "non-finite PPO loss: total=" << acc.total << " policy=" << acc.policy
        << " value=" << acc.value << " entropy=" << acc.entropy << " kl=" << acc.kl
        << " batch=" << batch.size();
    throw NumericError(msg.str());
  }
  return acc;
}

void adam_update(std::span<double> params, std::span<const double> grad, AdamState& state,
                 double lr) {
  if (grad.size() != params.size()) throw ShapeError("gradient does not match parameter layout");
  for (double g : grad) {
    if (!std::isfinite(g)) throw NumericError("non-finite gradient passed to the optimizer");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw ShapeError("optimizer state does not match parameters");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * grad[i];
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
  }
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

LearnStats learn(LearnerState& state, const policy::Model& actor, const policy::Model* critic,
                 std::span<const Sample> samples, const PPOConfig& cfg, std::mt19937_64& rng) {
  LearnStats stats;
  if (samples.empty()) return stats;
  std::vector<std::size_t> order(samples.size());
  std::vector<Sample> minibatch;
  Gradients grads;
  const auto mb = static_cast<std::size_t>(cfg.minibatch_size);

  for (int epoch = 0; epoch < cfg.epochs_per_iter; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::size_t end = std::min(order.size(), start + mb);
      minibatch.clear();
      for (std::size_t i = start; i < end; ++i) minibatch.push_back(samples[order[i]]);

      Networks nets{&actor, state.actor_params, critic, state.critic_params};
      const auto loss = ppo_loss(minibatch, nets, cfg, &grads);
      clip_grad_norm(grads.actor, cfg.max_grad_norm);
      adam_update(state.actor_params, grads.actor, state.actor_opt, cfg.lr);
      if (critic) {
        clip_grad_norm(grads.critic, cfg.max_grad_norm);
        adam_update(state.critic_params, grads.critic, state.critic_opt, cfg.lr);
      }
      stats.mean.total += loss.total;
      stats.mean.policy += loss.policy;
      stats.mean.value += loss.value;
      stats.mean.entropy += loss.entropy;
      stats.mean.kl += loss.kl;
      stats.updates += 1;
    }
  }
  const double inv = 1.0 / stats.updates;
  stats.mean.total *= inv;
  stats.mean.policy *= inv;
  stats.mean.value *= inv;
  stats.mean.entropy *= inv;
  stats.mean.kl *= inv;
  return stats;
}

}  // namespace madqrl::ppo
