#include "pi2vec/env/reacher.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace pi2vec {

ContinuousEnv::ContinuousEnv(ReacherSpec spec) : spec_(spec) {
  if (!(spec_.noise_scale >= 0.0)) throw InputError("ContinuousEnv: noise_scale must be >= 0");
  if (!(spec_.step_size > 0.0)) throw InputError("ContinuousEnv: step_size must be > 0");
  if (spec_.horizon < 1) throw InputError("ContinuousEnv: horizon must be >= 1");
}

std::string ContinuousEnv::id() const {
  return fmt::format("reacher-noise{}-goal{}_{}", spec_.noise_scale, spec_.goal[0], spec_.goal[1]);
}

std::array<double, 2> ContinuousEnv::direction(int action) {
  if (action < 0 || action >= kActions) throw InputError("ContinuousEnv: action out of range");
  const double angle = action * std::numbers::pi / 4.0;
  return {std::cos(angle), std::sin(angle)};
}

bool ContinuousEnv::is_terminal(const State& s) const {
  if (s.is_tabular()) throw InputError("ContinuousEnv: expected a planar state");
  const double dx = s.pos[0] - spec_.goal[0];
  const double dy = s.pos[1] - spec_.goal[1];
  return dx * dx + dy * dy <= spec_.goal_radius * spec_.goal_radius;
}

State ContinuousEnv::sample_start(Rng& rng) const {
  const double x = spec_.start_low[0] + (spec_.start_high[0] - spec_.start_low[0]) * uniform01(rng);
  const double y = spec_.start_low[1] + (spec_.start_high[1] - spec_.start_low[1]) * uniform01(rng);
  return planar_state(x, y);
}

StepResult ContinuousEnv::step(const State& s, int action, Rng& rng) const {
  if (is_terminal(s)) {
    direction(action);
    return StepResult{s, 0.0, true};
  }
  const auto d = direction(action);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double nx = spec_.noise_scale > 0.0 ? spec_.noise_scale * noise(rng) : 0.0;
  const double ny = spec_.noise_scale > 0.0 ? spec_.noise_scale * noise(rng) : 0.0;
  const State next = planar_state(std::clamp(s.pos[0] + spec_.step_size * d[0] + nx, 0.0, 1.0),
                                  std::clamp(s.pos[1] + spec_.step_size * d[1] + ny, 0.0, 1.0));
  const bool done = is_terminal(next);
  return StepResult{next, done ? spec_.goal_reward : spec_.step_cost, done};
}

int ContinuousEnv::heading_action(const State& s) const {
  const double dx = spec_.goal[0] - s.pos[0];
  const double dy = spec_.goal[1] - s.pos[1];
  int best = 0;
  double best_dot = -1e300;
  for (int a = 0; a < kActions; ++a) {
    const auto d = direction(a);
    const double dot = d[0] * dx + d[1] * dy;
    if (dot > best_dot) {
      best_dot = dot;
      best = a;
    }
  }
  return best;
}

}  // namespace pi2vec
