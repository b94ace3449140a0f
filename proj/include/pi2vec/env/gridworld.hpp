#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "pi2vec/env/tabular_mdp.hpp"

namespace pi2vec {

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

enum GridAction : int { kUp = 0, kRight = 1, kDown = 2, kLeft = 3 };
inline constexpr int kGridActions = 4;

/// Layout and reward parameters of a rectangular gridworld.
///
/// Cells are indexed `y * width + x`. With probability `slip` the executed
/// move is drawn uniformly from all four directions instead of the chosen
/// one; moves into a wall leave the agent in place.
struct GridSpec {
  int width = 8;
  int height = 8;
  double slip = 0.1;
  Cell start{0, 0};
  Cell goal{7, 7};
  Cell pit{3, 4};
  double goal_reward = 1.0;
  double pit_reward = -1.0;
  double step_cost = -0.01;
  // Extra reward when a move leaves the agent in place. Non-zero makes the
  // reward depend on (s, s') jointly rather than on s' alone.
  double bump_reward = 0.0;
  // When false the goal and pit are ordinary cells and episodes never end.
  bool terminal_goal_pit = true;

  int num_cells() const { return width * height; }
  int index(Cell c) const { return c.y * width + c.x; }
  Cell cell(int index) const { return Cell{index % width, index / width}; }
  bool contains(Cell c) const { return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height; }
};

/// Reward of the transition (s, a, s') in cell indices.
using GridRewardFn = std::function<double(int s, int a, int s_next)>;

/// The default 8x8 task: +1 goal, -1 pit (both terminal), -0.01 per step.
TabularMDP make_gridworld(const GridSpec& spec);

/// Gridworld dynamics from `spec` with an arbitrary reward function.
/// Terminal self-loops still carry zero reward.
TabularMDP make_gridworld(const GridSpec& spec, const GridRewardFn& reward, std::string id);

/// Default task plus a wall-bump penalty, so that r is not a function of the
/// next state alone.
GridSpec nonlinear_reward_grid_spec();

/// Deterministic successor cell of a move (ignoring slip).
Cell grid_move(const GridSpec& spec, Cell c, int action);

/// Cell centers mapped to [0, 1]^2, indexed by cell.
std::vector<std::array<double, 2>> grid_coordinates(const GridSpec& spec);

std::string grid_id(const GridSpec& spec, const std::string& variant);

}  // namespace pi2vec
