#include "pi2vec/env/planning.hpp"

#include <cmath>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <fmt/format.h>

namespace pi2vec {

namespace {

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError(fmt::format("gamma must lie in [0, 1), got {}", gamma));
}

// Expected continuation value of (s, a) under the per-state values `v`.
double backup(const TabularMDP& mdp, int s, int a, const Eigen::VectorXd& v, double gamma) {
  double total = 0.0;
  for (const auto& o : mdp.outcomes(s, a)) {
    total += o.prob * (o.reward + (mdp.terminal(o.next) ? 0.0 : gamma * v[o.next]));
  }
  return total;
}

}  // namespace

Eigen::MatrixXd value_iteration(const TabularMDP& mdp, double gamma, double tol) {
  check_gamma(gamma);
  if (!(tol > 0.0)) throw InputError("value_iteration: tol must be positive");
  const int ns = mdp.num_states();
  const int na = mdp.num_actions();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(ns, na);
  Eigen::MatrixXd next(ns, na);
  while (true) {
    const Eigen::VectorXd v = q.rowwise().maxCoeff();
    for (int s = 0; s < ns; ++s) {
      for (int a = 0; a < na; ++a) next(s, a) = backup(mdp, s, a, v, gamma);
    }
    const double change = (next - q).cwiseAbs().maxCoeff();
    q.swap(next);
    // |T q_k - q_k| = change; the returned q_{k+1} has residual <= gamma * change.
    if (change <= tol) return q;
  }
}

double optimality_residual(const TabularMDP& mdp, const Eigen::MatrixXd& q, double gamma) {
  const Eigen::VectorXd v = q.rowwise().maxCoeff();
  double worst = 0.0;
  for (int s = 0; s < mdp.num_states(); ++s) {
    for (int a = 0; a < mdp.num_actions(); ++a) {
      worst = std::max(worst, std::abs(backup(mdp, s, a, v, gamma) - q(s, a)));
    }
  }
  return worst;
}

std::vector<int> greedy_actions(const Eigen::MatrixXd& q) {
  std::vector<int> out(q.rows());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    int best = 0;
    for (Eigen::Index a = 1; a < q.cols(); ++a) {
      if (q(s, a) > q(s, best)) best = static_cast<int>(a);
    }
    out[s] = best;
  }
  return out;
}

std::vector<PolicyPtr> make_policy_family(const TabularMDP& mdp, const Eigen::MatrixXd& q_optimal,
                                          std::span<const double> epsilons, std::uint64_t seed,
                                          const std::string& prefix) {
  if (q_optimal.rows() != mdp.num_states() || q_optimal.cols() != mdp.num_actions()) {
    throw InputError("make_policy_family: Q-table shape does not match the MDP");
  }
  auto greedy = std::make_shared<const std::vector<int>>(greedy_actions(q_optimal));
  std::vector<PolicyPtr> family;
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    const double eps = epsilons[i];
    if (!(eps >= 0.0 && eps <= 1.0)) throw InputError(fmt::format("make_policy_family: epsilon {} outside [0, 1]", eps));
    PolicyInfo info{fmt::format("{}{:02d}_eps{:.3f}", prefix, i, eps), "eps_greedy", derive_seed(seed, i)};
    family.push_back(std::make_shared<EpsilonGreedyPolicy>(
        std::move(info), mdp.num_actions(), eps, [greedy](const State& s) { return (*greedy).at(s.index); }));
  }
  return family;
}

Eigen::MatrixXd policy_matrix(const TabularMDP& mdp, const Policy& policy) {
  if (policy.num_actions() != mdp.num_actions()) throw InputError("policy_matrix: action count mismatch");
  Eigen::MatrixXd pi(mdp.num_states(), mdp.num_actions());
  for (int s = 0; s < mdp.num_states(); ++s) {
    const auto probs = policy.action_probabilities(tabular_state(s));
    if (!probs) throw UnsupportedError(fmt::format("policy '{}' does not expose action probabilities", policy.id()));
    for (int a = 0; a < mdp.num_actions(); ++a) pi(s, a) = (*probs)[a];
  }
  return pi;
}

Eigen::MatrixXd evaluate_q(const TabularMDP& mdp, const Eigen::MatrixXd& pi, double gamma) {
  check_gamma(gamma);
  const int ns = mdp.num_states();
  const int na = mdp.num_actions();
  const int n = ns * na;
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd r(n);
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      const int row = s * na + a;
      triplets.emplace_back(row, row, 1.0);
      r[row] = mdp.expected_reward(s, a);
      for (const auto& o : mdp.outcomes(s, a)) {
        if (mdp.terminal(o.next)) continue;
        for (int b = 0; b < na; ++b) {
          const double w = gamma * o.prob * pi(o.next, b);
          if (w != 0.0) triplets.emplace_back(row, o.next * na + b, -w);
        }
      }
    }
  }
  Eigen::SparseMatrix<double> system(n, n);
  system.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(system);
  if (lu.info() != Eigen::Success) throw VerificationError("evaluate_q: factorization failed");
  Eigen::VectorXd q = lu.solve(r);
  // One round of iterative refinement keeps the residual near machine precision.
  const Eigen::VectorXd correction = lu.solve(r - system * q);
  q += correction;

  Eigen::MatrixXd out(ns, na);
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) out(s, a) = q[s * na + a];
  }
  return out;
}

double evaluation_residual(const TabularMDP& mdp, const Eigen::MatrixXd& pi, const Eigen::MatrixXd& q,
                           double gamma) {
  const Eigen::VectorXd v = (pi.array() * q.array()).rowwise().sum();
  double worst = 0.0;
  for (int s = 0; s < mdp.num_states(); ++s) {
    for (int a = 0; a < mdp.num_actions(); ++a) {
      worst = std::max(worst, std::abs(backup(mdp, s, a, v, gamma) - q(s, a)));
    }
  }
  return worst;
}

double policy_return(const TabularMDP& mdp, const Eigen::MatrixXd& pi, double gamma) {
  const Eigen::MatrixXd q = evaluate_q(mdp, pi, gamma);
  const double residual = evaluation_residual(mdp, pi, q, gamma);
  if (residual > 1e-10) throw VerificationError(fmt::format("policy_return: residual {} exceeds 1e-10", residual));
  const Eigen::VectorXd v = (pi.array() * q.array()).rowwise().sum();
  double total = 0.0;
  const auto start = mdp.start_distribution();
  for (int s = 0; s < mdp.num_states(); ++s) total += start[s] * v[s];
  return total;
}

double policy_return(const TabularMDP& mdp, const Policy& policy, double gamma) {
  return policy_return(mdp, policy_matrix(mdp, policy), gamma);
}

}  // namespace pi2vec
