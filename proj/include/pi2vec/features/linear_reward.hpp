#pragma once

#include <cstdint>
#include <vector>

#include "pi2vec/env/gridworld.hpp"
#include "pi2vec/features/encoders.hpp"

namespace pi2vec {

/// Gridworld whose reward is exactly linear in the hand-crafted features of
/// the next state: r(s, a, s') = <phi(s'), w_task>.
///
/// Goal and pit are ordinary cells here (the task never terminates), so the
/// identity Q = <psi, w_task> holds at every state-action pair.
struct LinearRewardGridworld {
  GridSpec spec;
  TabularMDP mdp;
  EncoderPtr encoder;
  std::vector<double> w_task;
};

/// w_task favours the goal and penalizes the pit, plus seeded noise. It is
/// projected onto the row space of the state-feature matrix so that the
/// minimum-norm least-squares fit of the reward recovers it exactly.
LinearRewardGridworld make_linear_reward_gridworld(GridSpec spec, std::uint64_t seed);

}  // namespace pi2vec
