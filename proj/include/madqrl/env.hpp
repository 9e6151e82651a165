#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace madqrl {

inline constexpr int kNumAgents = 2;

// Row-major grayscale image.
struct Grid {
  int h = 0;
  int w = 0;
  std::vector<double> data;

  Grid() = default;
  Grid(int rows, int cols, double fill = 0.0)
      : h(rows), w(cols), data(static_cast<std::size_t>(rows) * cols, fill) {}

  double& at(int y, int x) { return data[static_cast<std::size_t>(y) * w + x]; }
  double at(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x]; }

  bool operator==(const Grid&) const = default;
};

// Per-agent movement in {-1, 0, +1}.
using JointAction = std::array<int, kNumAgents>;

struct EnvStep {
  std::array<double, kNumAgents> rewards{};
  bool done = false;
};

// Two-agent environment consumed by the rollout workers. Agent observations
// are the local views; the full observation covers the whole frame.
class MultiAgentEnv {
 public:
  virtual ~MultiAgentEnv() = default;

  virtual void reset(std::uint64_t seed) = 0;
  virtual EnvStep step(const JointAction& actions) = 0;

  virtual Grid observe(int agent) const = 0;
  virtual Grid observe_full() const = 0;

  virtual int obs_h() const = 0;
  virtual int obs_w() const = 0;
};

// Side-by-side concatenation of the two agent views (h x 2w).
Grid concat_views(const Grid& left, const Grid& right);

}  // namespace madqrl
