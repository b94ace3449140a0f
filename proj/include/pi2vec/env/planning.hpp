#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pi2vec/env/policy.hpp"
#include "pi2vec/env/tabular_mdp.hpp"

namespace pi2vec {

// Discounting convention used by every exact routine here: the episode ends
// on entering a terminal state, so (s, a, s') with terminal s' contributes
// r(s, a, s') and nothing after it.

/// Optimal Q-table (n_states x n_actions); returns once the sup-norm Bellman
/// residual is at most `tol`.
Eigen::MatrixXd value_iteration(const TabularMDP& mdp, double gamma, double tol);

/// Sup-norm residual of the optimality operator at `q`.
double optimality_residual(const TabularMDP& mdp, const Eigen::MatrixXd& q, double gamma);

/// argmax per row; ties go to the lowest action index.
std::vector<int> greedy_actions(const Eigen::MatrixXd& q);

/// Epsilon-greedy policies with respect to `q_optimal`, one per epsilon.
/// Policy i gets id "<prefix><i>_eps<epsilon>" and a seed derived from `seed`.
std::vector<PolicyPtr> make_policy_family(const TabularMDP& mdp, const Eigen::MatrixXd& q_optimal,
                                          std::span<const double> epsilons, std::uint64_t seed,
                                          const std::string& prefix = "p");

/// pi(a|s) for every state. Throws UnsupportedError for black-box policies.
Eigen::MatrixXd policy_matrix(const TabularMDP& mdp, const Policy& policy);

/// Exact Q^pi by a sparse linear solve of (I - gamma P_pi) q = r.
Eigen::MatrixXd evaluate_q(const TabularMDP& mdp, const Eigen::MatrixXd& pi, double gamma);

/// Sup-norm residual of the evaluation operator for pi at `q`.
double evaluation_residual(const TabularMDP& mdp, const Eigen::MatrixXd& pi, const Eigen::MatrixXd& q,
                           double gamma);

/// Expected discounted return from the start distribution.
double policy_return(const TabularMDP& mdp, const Policy& policy, double gamma);
double policy_return(const TabularMDP& mdp, const Eigen::MatrixXd& pi, double gamma);

}  // namespace pi2vec
