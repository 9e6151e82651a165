#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>

#include "madqrl/env.hpp"

namespace madqrl::pong {

// Left agent drives a rectangular block paddle on x = 0, right agent a wedge
// ("cake") paddle on x = arena_w. Coordinates are native pixels, y grows down.
struct EnvConfig {
  int arena_w = 960;
  int arena_h = 560;
  int obs_w = 64;  // per-agent observation grid
  int obs_h = 64;
  double paddle_speed = 12.0;   // px/step
  double ball_speed = 9.0;      // px/step, constant magnitude
  double paddle_length = 120.0;
  double paddle_thickness = 20.0;
  double ball_radius = 10.0;
  double cake_deflection = 0.5235987755982988;  // rad added at the wedge tips
  double max_bounce_angle = 1.0471975511965976;  // rad from horizontal
  int max_cycles = 900;

  void validate() const;
  bool operator==(const EnvConfig&) const = default;
};

// 1/5-scale arena with 16x16 agent views.
EnvConfig desk_config();

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

struct EnvState {
  Vec2 ball_pos;
  Vec2 ball_vel;
  std::array<double, kNumAgents> paddle_pos{};  // paddle centre along y
  int t = 0;
  bool done = false;

  bool operator==(const EnvState&) const = default;
};

using Observations = std::array<Grid, kNumAgents>;

struct JointTransition {
  Observations observations;
  JointAction actions{};
  std::array<double, kNumAgents> rewards{};
  bool done = false;
};

std::pair<EnvState, Observations> reset(const EnvConfig& config, std::uint64_t seed);

// Advances `state` in place. Throws StateError once the episode is done and
// ValidationError for actions outside {-1, 0, 1}.
JointTransition step(const EnvConfig& config, EnvState& state, const JointAction& actions);

// Agent 0 sees columns [0, W/2), agent 1 sees [W/2, W); area-averaged to
// obs_h x obs_w. Throws IndexError for other agent ids.
Grid render_observation(const EnvConfig& config, const EnvState& state, int agent_id);

// Whole arena area-averaged to obs_h x obs_w.
Grid render_full(const EnvConfig& config, const EnvState& state);

// Native-resolution raster of columns [x0, x1): 1 inside a shape, 0 elsewhere.
Grid rasterize(const EnvConfig& config, const EnvState& state, int x0, int x1);

// Box-filter resample; every output cell is the area-weighted mean of the
// source pixels it covers.
Grid area_downscale(const Grid& src, int out_h, int out_w);

// x-coordinate of the wedge paddle's face at height y.
double cake_face_x(const EnvConfig& config, double paddle_center, double y);

class PongEnv final : public MultiAgentEnv {
 public:
  explicit PongEnv(EnvConfig config);

  void reset(std::uint64_t seed) override;
  EnvStep step(const JointAction& actions) override;
  Grid observe(int agent) const override;
  Grid observe_full() const override;
  int obs_h() const override { return config_.obs_h; }
  int obs_w() const override { return config_.obs_w; }

  const EnvState& state() const { return state_; }
  const EnvConfig& config() const { return config_; }

 private:
  EnvConfig config_;
  EnvState state_;
};

// CSV episode dump: step, ball_x, ball_y, paddle_0, paddle_1, action_0,
// action_1, reward_0, reward_1, done.
class TrajectoryWriter {
 public:
  explicit TrajectoryWriter(std::ostream& out);
  void record(const EnvState& state_after, const JointAction& actions,
              const std::array<double, kNumAgents>& rewards, bool done);

 private:
  std::ostream& out_;
};

}  // namespace madqrl::pong
