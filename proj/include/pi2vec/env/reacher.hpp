#pragma once

#include <algorithm>
#include <array>

#include "pi2vec/env/environment.hpp"

namespace pi2vec {

struct ReacherSpec {
  double step_size = 0.05;
  double noise_scale = 0.01;
  std::array<double, 2> goal{0.8, 0.8};
  double goal_radius = 0.08;
  std::array<double, 2> start_low{0.05, 0.05};
  std::array<double, 2> start_high{0.25, 0.25};
  double goal_reward = 1.0;
  double step_cost = -0.01;
  int horizon = 100;
};

/// Point mass in the unit square moved by eight compass displacements with
/// Gaussian position noise. Entering the goal disc ends the episode.
class ContinuousEnv final : public Environment {
 public:
  static constexpr int kActions = 8;

  explicit ContinuousEnv(ReacherSpec spec = {});

  std::string id() const override;
  int num_actions() const override { return kActions; }
  bool is_tabular() const override { return false; }
  bool is_terminal(const State& s) const override;
  State sample_start(Rng& rng) const override;
  StepResult step(const State& s, int action, Rng& rng) const override;

  const ReacherSpec& spec() const { return spec_; }
  double reward_min() const { return std::min(spec_.step_cost, spec_.goal_reward); }
  double reward_max() const { return std::max(spec_.step_cost, spec_.goal_reward); }
  int horizon() const { return spec_.horizon; }

  /// Unit displacement of a compass action; 0 is east, counter-clockwise.
  static std::array<double, 2> direction(int action);
  /// Compass action whose direction is closest to the heading toward the goal.
  int heading_action(const State& s) const;

 private:
  ReacherSpec spec_;
};

}  // namespace pi2vec
