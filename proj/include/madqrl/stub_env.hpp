#pragma once

#include "madqrl/env.hpp"
#include "madqrl/errors.hpp"

namespace madqrl {

// Blank observations, a fixed per-step reward for both agents and episodes
// of fixed length. Used to exercise the training loop without physics.
class ConstantRewardEnv final : public MultiAgentEnv {
 public:
  ConstantRewardEnv(double reward, int episode_length, int obs_h, int obs_w)
      : reward_(reward), length_(episode_length), h_(obs_h), w_(obs_w) {
    if (episode_length <= 0 || obs_h <= 0 || obs_w <= 0) {
      throw ValidationError("stub env needs positive length and observation size");
    }
  }

  void reset(std::uint64_t) override { t_ = 0; }

  EnvStep step(const JointAction& actions) override {
    for (int a : actions) {
      if (a < -1 || a > 1) throw ValidationError("stub env actions must be -1, 0 or 1");
    }
    if (t_ >= length_) throw StateError("step called on a finished episode");
    ++t_;
    return {{reward_, reward_}, t_ >= length_};
  }

  Grid observe(int) const override { return Grid(h_, w_, 0.0); }
  Grid observe_full() const override { return Grid(h_, w_, 0.0); }
  int obs_h() const override { return h_; }
  int obs_w() const override { return w_; }

 private:
  double reward_;
  int length_;
  int h_;
  int w_;
  int t_ = 0;
};

}  // namespace madqrl
