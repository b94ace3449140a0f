#include "pi2vec/env/gridworld.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace pi2vec {

namespace {

void check_spec(const GridSpec& spec) {
  if (spec.width < 1 || spec.height < 1) throw InputError("GridSpec: empty grid");
  if (!(spec.slip >= 0.0 && spec.slip <= 1.0)) throw InputError("GridSpec: slip must lie in [0, 1]");
  if (!spec.contains(spec.start) || !spec.contains(spec.goal) || !spec.contains(spec.pit)) {
    throw InputError("GridSpec: start, goal and pit must lie inside the grid");
  }
  if (spec.goal == spec.pit) throw InputError("GridSpec: goal and pit must differ");
}

}  // namespace

Cell grid_move(const GridSpec& spec, Cell c, int action) {
  static constexpr std::array<Cell, kGridActions> kDelta{{{0, 1}, {1, 0}, {0, -1}, {-1, 0}}};
  if (action < 0 || action >= kGridActions) throw InputError("grid_move: action out of range");
  const Cell moved{c.x + kDelta[action].x, c.y + kDelta[action].y};
  return spec.contains(moved) ? moved : c;
}

TabularMDP make_gridworld(const GridSpec& spec, const GridRewardFn& reward, std::string id) {
  check_spec(spec);
  const int n = spec.num_cells();
  std::vector<bool> terminal(n, false);
  if (spec.terminal_goal_pit) {
    terminal[spec.index(spec.goal)] = true;
    terminal[spec.index(spec.pit)] = true;
  }

  std::vector<std::vector<Outcome>> kernel(static_cast<std::size_t>(n) * kGridActions);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < kGridActions; ++a) {
      auto& row = kernel[static_cast<std::size_t>(s) * kGridActions + a];
      if (terminal[s]) {
        row.push_back(Outcome{s, 1.0, 0.0});
        continue;
      }
      // Accumulate per destination so each s' appears once.
      std::array<double, kGridActions> move_prob{};
      for (int m = 0; m < kGridActions; ++m) move_prob[m] = spec.slip / kGridActions;
      move_prob[a] += 1.0 - spec.slip;
      for (int m = 0; m < kGridActions; ++m) {
        if (move_prob[m] <= 0.0) continue;
        const int next = spec.index(grid_move(spec, spec.cell(s), m));
        auto it = std::find_if(row.begin(), row.end(), [&](const Outcome& o) { return o.next == next; });
        if (it == row.end()) {
          row.push_back(Outcome{next, move_prob[m], reward(s, a, next)});
        } else {
          it->prob += move_prob[m];
        }
      }
    }
  }
  std::vector<double> start(n, 0.0);
  start[spec.index(spec.start)] = 1.0;
  return TabularMDP(std::move(id), n, kGridActions, std::move(kernel), std::move(terminal), std::move(start));
}

TabularMDP make_gridworld(const GridSpec& spec) {
  check_spec(spec);
  const int goal = spec.index(spec.goal);
  const int pit = spec.index(spec.pit);
  auto reward = [spec, goal, pit](int s, int, int next) {
    if (next == goal) return spec.goal_reward;
    if (next == pit) return spec.pit_reward;
    return next == s ? spec.step_cost + spec.bump_reward : spec.step_cost;
  };
  const std::string variant = spec.bump_reward != 0.0 ? "nonlinear" : "default";
  return make_gridworld(spec, reward, grid_id(spec, variant));
}

GridSpec nonlinear_reward_grid_spec() {
  GridSpec spec;
  spec.bump_reward = -0.1;
  return spec;
}

std::vector<std::array<double, 2>> grid_coordinates(const GridSpec& spec) {
  std::vector<std::array<double, 2>> coords(spec.num_cells());
  const double sx = spec.width > 1 ? 1.0 / (spec.width - 1) : 0.0;
  const double sy = spec.height > 1 ? 1.0 / (spec.height - 1) : 0.0;
  for (int i = 0; i < spec.num_cells(); ++i) {
    const Cell c = spec.cell(i);
    coords[i] = {c.x * sx, c.y * sy};
  }
  return coords;
}

std::string grid_id(const GridSpec& spec, const std::string& variant) {
  return fmt::format("gridworld-{}x{}-{}", spec.width, spec.height, variant);
}

}  // namespace pi2vec
