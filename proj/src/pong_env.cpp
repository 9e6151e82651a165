#include "madqrl/pong_env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include "madqrl/errors.hpp"

namespace madqrl {

Grid concat_views(const Grid& left, const Grid& right) {
  if (left.h != right.h) throw ShapeError("cannot concatenate views of different heights");
  Grid out(left.h, left.w + right.w);
  for (int y = 0; y < left.h; ++y) {
    for (int x = 0; x < left.w; ++x) out.at(y, x) = left.at(y, x);
    for (int x = 0; x < right.w; ++x) out.at(y, left.w + x) = right.at(y, x);
  }
  return out;
}

namespace pong {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct Span1d {
  int index;
  double weight;
};

// Source pixels overlapping each output cell along one axis, with overlap
// lengths normalised by the cell width.
std::vector<std::vector<Span1d>> box_weights(int src, int dst) {
  std::vector<std::vector<Span1d>> table(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int o = 0; o < dst; ++o) {
    const double lo = o * scale;
    const double hi = (o + 1) * scale;
    for (int s = static_cast<int>(std::floor(lo)); s < src && s < hi; ++s) {
      const double overlap = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
      if (overlap > 0.0) table[o].push_back({s, overlap / scale});
    }
  }
  return table;
}

void fill_if(Grid& g, int x0, int x1, int y_lo, int y_hi, int px_lo, int px_hi, auto&& inside) {
  y_lo = std::max(y_lo, 0);
  y_hi = std::min(y_hi, g.h - 1);
  px_lo = std::max(px_lo, x0);
  px_hi = std::min(px_hi, x1 - 1);
  for (int py = y_lo; py <= y_hi; ++py) {
    for (int px = px_lo; px <= px_hi; ++px) {
      if (inside(px + 0.5, py + 0.5)) g.at(py, px - x0) = 1.0;
    }
  }
}

void check_action(int a) {
  if (a < -1 || a > 1) throw ValidationError("pong actions must be -1, 0 or 1");
}

}  // namespace

void EnvConfig::validate() const {
  if (arena_w <= 0 || arena_h <= 0 || arena_w % 2 != 0) {
    throw ValidationError("arena must be positive with an even width");
  }
  if (obs_w <= 0 || obs_h <= 0) throw ValidationError("observation grid must be positive");
  if (!(paddle_speed > 0.0) || !(ball_speed > 0.0)) {
    throw ValidationError("paddle and ball speeds must be positive");
  }
  if (max_cycles <= 0) throw ValidationError("max_cycles must be positive");
  if (!(paddle_length > 0.0) || paddle_length > arena_h) {
    throw ValidationError("paddle length must be in (0, arena_h]");
  }
  if (!(paddle_thickness > 0.0) || !(ball_radius > 0.0)) {
    throw ValidationError("paddle thickness and ball radius must be positive");
  }
  if (2.0 * (paddle_thickness + ball_radius) >= arena_w / 2.0) {
    throw ValidationError("paddles and ball do not fit in the arena");
  }
  if (!(max_bounce_angle > 0.0) || max_bounce_angle >= std::numbers::pi / 2.0) {
    throw ValidationError("max_bounce_angle must be in (0, pi/2)");
  }
}

EnvConfig desk_config() {
  EnvConfig c;
  c.arena_w = 192;
  c.arena_h = 112;
  c.obs_w = 16;
  c.obs_h = 16;
  c.paddle_speed = 4.0;
  c.ball_speed = 4.0;
  c.paddle_length = 28.0;
  c.paddle_thickness = 6.0;
  c.ball_radius = 3.0;
  c.max_cycles = 300;
  return c;
}

double cake_face_x(const EnvConfig& config, double paddle_center, double y) {
  const double half = config.paddle_length / 2.0;
  const double frac = std::min(1.0, std::abs(y - paddle_center) / half);
  return config.arena_w - config.paddle_thickness + 0.5 * config.paddle_thickness * frac;
}

std::pair<EnvState, Observations> reset(const EnvConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const double quarter = std::numbers::pi / 4.0;
  const double angle = -quarter + 2.0 * quarter * uniform01(rng);
  const double dir = uniform01(rng) < 0.5 ? -1.0 : 1.0;

  EnvState s;
  s.ball_pos = {config.arena_w / 2.0, config.arena_h / 2.0};
  s.ball_vel = {dir * config.ball_speed * std::cos(angle), config.ball_speed * std::sin(angle)};
  s.paddle_pos = {config.arena_h / 2.0, config.arena_h / 2.0};
  s.t = 0;
  s.done = false;
  Observations obs{render_observation(config, s, 0), render_observation(config, s, 1)};
  return {s, std::move(obs)};
}

namespace {

EnvStep advance(const EnvConfig& config, EnvState& s, const JointAction& actions) {
  if (s.done) throw StateError("step called on a finished episode");
  for (int a : actions) check_action(a);

  const double half = config.paddle_length / 2.0;
  for (int i = 0; i < kNumAgents; ++i) {
    s.paddle_pos[i] = std::clamp(s.paddle_pos[i] + actions[i] * config.paddle_speed, half,
                                 config.arena_h - half);
  }

  const double r = config.ball_radius;
  const double w = config.arena_w;
  const double h = config.arena_h;
  const Vec2 prev = s.ball_pos;
  s.ball_pos.x += s.ball_vel.x;
  s.ball_pos.y += s.ball_vel.y;

  if (s.ball_pos.y - r < 0.0) {
    s.ball_pos.y = 2.0 * r - s.ball_pos.y;
    s.ball_vel.y = std::abs(s.ball_vel.y);
  } else if (s.ball_pos.y + r > h) {
    s.ball_pos.y = 2.0 * (h - r) - s.ball_pos.y;
    s.ball_vel.y = -std::abs(s.ball_vel.y);
  }

  // Paddles only catch a ball that crosses their face during this step.
  const double block_face = config.paddle_thickness;
  if (s.ball_vel.x < 0.0 && prev.x - r >= block_face && s.ball_pos.x - r < block_face &&
      std::abs(s.ball_pos.y - s.paddle_pos[0]) <= half + r) {
    s.ball_pos.x = 2.0 * (block_face + r) - s.ball_pos.x;
    s.ball_vel.x = std::abs(s.ball_vel.x);
  }

  const double cake_face = cake_face_x(config, s.paddle_pos[1], s.ball_pos.y);
  if (s.ball_vel.x > 0.0 && prev.x + r <= cake_face && s.ball_pos.x + r > cake_face &&
      std::abs(s.ball_pos.y - s.paddle_pos[1]) <= half + r) {
    s.ball_pos.x = 2.0 * (cake_face - r) - s.ball_pos.x;
    const double offset = std::clamp((s.ball_pos.y - s.paddle_pos[1]) / half, -1.0, 1.0);
    const double incoming = std::atan2(s.ball_vel.y, std::abs(s.ball_vel.x));
    const double outgoing = std::clamp(incoming + config.cake_deflection * offset,
                                       -config.max_bounce_angle, config.max_bounce_angle);
    s.ball_vel = {-config.ball_speed * std::cos(outgoing), config.ball_speed * std::sin(outgoing)};
  }

  s.t += 1;
  const bool exited = s.ball_pos.x < 0.0 || s.ball_pos.x > w;
  s.done = exited || s.t >= config.max_cycles;

  const double reward = s.done ? 0.0 : 1.0 / config.max_cycles;
  return {{reward, reward}, s.done};
}

}  // namespace

JointTransition step(const EnvConfig& config, EnvState& state, const JointAction& actions) {
  const auto result = advance(config, state, actions);
  JointTransition tr;
  tr.actions = actions;
  tr.done = result.done;
  tr.rewards = result.rewards;
  tr.observations = {render_observation(config, state, 0), render_observation(config, state, 1)};
  return tr;
}

Grid rasterize(const EnvConfig& config, const EnvState& s, int x0, int x1) {
  Grid g(config.arena_h, x1 - x0, 0.0);
  const double half = config.paddle_length / 2.0;
  const double t = config.paddle_thickness;
  const double w = config.arena_w;

  const double ly = s.paddle_pos[0];
  fill_if(g, x0, x1, static_cast<int>(std::floor(ly - half)), static_cast<int>(std::ceil(ly + half)),
          0, static_cast<int>(std::ceil(t)),
          [&](double x, double y) { return x <= t && std::abs(y - ly) <= half; });

  const double ry = s.paddle_pos[1];
  fill_if(g, x0, x1, static_cast<int>(std::floor(ry - half)), static_cast<int>(std::ceil(ry + half)),
          static_cast<int>(std::floor(w - t)), config.arena_w - 1, [&](double x, double y) {
            return std::abs(y - ry) <= half && x >= cake_face_x(config, ry, y);
          });

  const double r = config.ball_radius;
  const Vec2 b = s.ball_pos;
  fill_if(g, x0, x1, static_cast<int>(std::floor(b.y - r)), static_cast<int>(std::ceil(b.y + r)),
          static_cast<int>(std::floor(b.x - r)), static_cast<int>(std::ceil(b.x + r)),
          [&](double x, double y) {
            const double dx = x - b.x;
            const double dy = y - b.y;
            return dx * dx + dy * dy <= r * r;
          });
  return g;
}

Grid area_downscale(const Grid& src, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0 || src.h <= 0 || src.w <= 0) {
    throw ShapeError("area_downscale needs positive dimensions");
  }
  const auto wx = box_weights(src.w, out_w);
  const auto wy = box_weights(src.h, out_h);

  Grid rows(src.h, out_w, 0.0);
  for (int y = 0; y < src.h; ++y) {
    for (int ox = 0; ox < out_w; ++ox) {
      double acc = 0.0;
      for (const auto& [sx, weight] : wx[ox]) acc += weight * src.at(y, sx);
      rows.at(y, ox) = acc;
    }
  }
  Grid out(out_h, out_w, 0.0);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      double acc = 0.0;
      for (const auto& [sy, weight] : wy[oy]) acc += weight * rows.at(sy, ox);
      out.at(oy, ox) = std::clamp(acc, 0.0, 1.0);
    }
  }
  return out;
}

Grid render_observation(const EnvConfig& config, const EnvState& state, int agent_id) {
  if (agent_id < 0 || agent_id >= kNumAgents) {
    throw IndexError("agent id " + std::to_string(agent_id) + " is not 0 or 1");
  }
  const int mid = config.arena_w / 2;
  const int x0 = agent_id == 0 ? 0 : mid;
  const int x1 = agent_id == 0 ? mid : config.arena_w;
  return area_downscale(rasterize(config, state, x0, x1), config.obs_h, config.obs_w);
}

Grid render_full(const EnvConfig& config, const EnvState& state) {
  return area_downscale(rasterize(config, state, 0, config.arena_w), config.obs_h, config.obs_w);
}

PongEnv::PongEnv(EnvConfig config) : config_(config) {
  config_.validate();
  state_ = pong::reset(config_, 0).first;
}

void PongEnv::reset(std::uint64_t seed) { state_ = pong::reset(config_, seed).first; }

EnvStep PongEnv::step(const JointAction& actions) { return advance(config_, state_, actions); }

Grid PongEnv::observe(int agent) const { return render_observation(config_, state_, agent); }

Grid PongEnv::observe_full() const { return render_full(config_, state_); }

TrajectoryWriter::TrajectoryWriter(std::ostream& out) : out_(out) {
  out_ << "step,ball_x,ball_y,paddle_0,paddle_1,action_0,action_1,reward_0,reward_1,done\n";
}

void TrajectoryWriter::record(const EnvState& s, const JointAction& actions,
                              const std::array<double, kNumAgents>& rewards, bool done) {
  out_ << s.t << ',' << s.ball_pos.x << ',' << s.ball_pos.y << ',' << s.paddle_pos[0] << ','
       << s.paddle_pos[1] << ',' << actions[0] << ',' << actions[1] << ',' << rewards[0] << ','
       << rewards[1] << ',' << (done ? 1 : 0) << '\n';
}

}  // namespace pong
}  // namespace madqrl
