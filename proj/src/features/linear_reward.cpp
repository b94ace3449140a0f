#include "pi2vec/features/linear_reward.hpp"

#include <memory>
#include <random>

#include <Eigen/Dense>

namespace pi2vec {

LinearRewardGridworld make_linear_reward_gridworld(GridSpec spec, std::uint64_t seed) {
  spec.terminal_goal_pit = false;
  auto encoder = std::make_shared<GridSemanticEncoder>(spec);
  const int n = spec.num_cells();
  const int dim = encoder->dim();

  Eigen::MatrixXd phi(n, dim);
  for (int s = 0; s < n; ++s) {
    const auto row = encoder->encode(tabular_state(s));
    phi.row(s) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), dim);
  }

  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  Eigen::VectorXd w0(dim);
  for (int d = 0; d < dim; ++d) w0[d] = noise(rng);
  w0[encoder->goal_dim()] += 1.0;
  w0[encoder->pit_dim()] -= 1.0;
  w0[encoder->distance_dim()] += 0.5;

  // Row-space projection: pinv(Phi) Phi w0.
  const Eigen::VectorXd target = phi * w0;
  const Eigen::VectorXd w = phi.completeOrthogonalDecomposition().solve(target);
  std::vector<double> w_task(w.data(), w.data() + dim);

  std::vector<double> reward_of(n);
  for (int s = 0; s < n; ++s) reward_of[s] = phi.row(s).dot(w);
  auto reward = [reward_of](int, int, int next) { return reward_of[next]; };
  TabularMDP mdp = make_gridworld(spec, reward, grid_id(spec, "linear"));
  return LinearRewardGridworld{spec, std::move(mdp), std::move(encoder), std::move(w_task)};
}

}  // namespace pi2vec
