#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pi2vec/env/policy.hpp"
#include "pi2vec/env/tabular_mdp.hpp"
#include "pi2vec/features/encoders.hpp"

namespace pi2vec {

/// Exact successor features, shape n_states x n_actions x N.
struct PsiTable {
  int n_states = 0;
  int n_actions = 0;
  int dim = 0;
  std::vector<double> values;

  std::span<const double> at(int s, int a) const {
    return {values.data() + (static_cast<std::size_t>(s) * n_actions + a) * dim, static_cast<std::size_t>(dim)};
  }
  std::span<double> at(int s, int a) {
    return {values.data() + (static_cast<std::size_t>(s) * n_actions + a) * dim, static_cast<std::size_t>(dim)};
  }
};

/// Iterative policy evaluation with vector rewards phi(s, s'):
///   psi(s,a) = E_{s'}[phi(s,s') + gamma * [s' not terminal] * sum_a' pi(a'|s') psi(s',a')].
/// Stops once an update changes no entry by more than `tol`. Needs the
/// policy's action probabilities (UnsupportedError otherwise).
PsiTable dp_successor_features(const TabularMDP& mdp, const Policy& policy, const TransitionFeatures& features,
                               double gamma, double tol);
/// Same on an arbitrary environment; throws UnsupportedError unless it is a TabularMDP.
PsiTable dp_successor_features(const Environment& env, const Policy& policy, const TransitionFeatures& features,
                               double gamma, double tol);

/// Sup-norm residual of the vector Bellman equation at `psi`.
double psi_bellman_residual(const TabularMDP& mdp, const Eigen::MatrixXd& pi, const TransitionFeatures& features,
                            double gamma, const PsiTable& psi);

struct MonteCarloEstimate {
  std::vector<double> mean;
  std::vector<double> std_error;
  int n_rollouts = 0;
};

/// Mean discounted feature sum over rollouts that take `a` in `s` and then
/// follow the policy, truncated at a terminal or after `horizon` transitions.
/// Rollout i uses seed derive_seed(seed, i).
MonteCarloEstimate monte_carlo_psi(const Environment& env, const Policy& policy, const TransitionFeatures& features,
                                   const State& s, int a, double gamma, int n_rollouts, int horizon,
                                   std::uint64_t seed);

}  // namespace pi2vec
