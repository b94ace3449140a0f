#include "pi2vec/successor/oracles.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pi2vec/env/planning.hpp"

namespace pi2vec {

namespace {

// E_{s'}[phi(s, s')] per (s, a), row-major (s * A + a) x N.
std::vector<double> expected_features(const TabularMDP& mdp, const TransitionFeatures& features) {
  const int n = features.dim();
  const int n_sa = mdp.num_states() * mdp.num_actions();
  std::vector<double> out(static_cast<std::size_t>(n_sa) * n, 0.0);
  std::vector<double> phi(n);
  for (int s = 0; s < mdp.num_states(); ++s) {
    for (int a = 0; a < mdp.num_actions(); ++a) {
      double* row = out.data() + (static_cast<std::size_t>(s) * mdp.num_actions() + a) * n;
      for (const auto& o : mdp.outcomes(s, a)) {
        features.encode(tabular_state(s), tabular_state(o.next), phi);
        for (int d = 0; d < n; ++d) row[d] += o.prob * phi[d];
      }
    }
  }
  return out;
}

// One application of the evaluation operator; returns the sup-norm change.
double backup(const TabularMDP& mdp, const Eigen::MatrixXd& pi, const std::vector<double>& phi_bar, double gamma,
              const PsiTable& psi, PsiTable& out) {
  const int n = psi.dim;
  const int n_actions = mdp.num_actions();
  // v(s') = sum_a' pi(a'|s') psi(s', a'), zero at terminals.
  std::vector<double> v(static_cast<std::size_t>(mdp.num_states()) * n, 0.0);
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (mdp.terminal(s)) continue;
    double* vs = v.data() + static_cast<std::size_t>(s) * n;
    for (int a = 0; a < n_actions; ++a) {
      const double p = pi(s, a);
      if (p == 0.0) continue;
      const auto row = psi.at(s, a);
      for (int d = 0; d < n; ++d) vs[d] += p * row[d];
    }
  }
  double change = 0.0;
  for (int s = 0; s < mdp.num_states(); ++s) {
    for (int a = 0; a < n_actions; ++a) {
      auto dst = out.at(s, a);
      const double* base = phi_bar.data() + (static_cast<std::size_t>(s) * n_actions + a) * n;
      std::copy(base, base + n, dst.begin());
      for (const auto& o : mdp.outcomes(s, a)) {
        const double* vs = v.data() + static_cast<std::size_t>(o.next) * n;
        const double w = gamma * o.prob;
        for (int d = 0; d < n; ++d) dst[d] += w * vs[d];
      }
      const auto old = psi.at(s, a);
      for (int d = 0; d < n; ++d) change = std::max(change, std::abs(dst[d] - old[d]));
    }
  }
  return change;
}

}  // namespace

PsiTable dp_successor_features(const TabularMDP& mdp, const Policy& policy, const TransitionFeatures& features,
                               double gamma, double tol) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("dp_successor_features: gamma must lie in [0, 1)");
  if (!(tol > 0.0)) throw InputError("dp_successor_features: tol must be positive");
  if (policy.num_actions() != mdp.num_actions()) throw InputError("dp_successor_features: action count mismatch");
  const Eigen::MatrixXd pi = policy_matrix(mdp, policy);
  const auto phi_bar = expected_features(mdp, features);

  PsiTable psi{mdp.num_states(), mdp.num_actions(), features.dim(), {}};
  psi.values.assign(static_cast<std::size_t>(psi.n_states) * psi.n_actions * psi.dim, 0.0);
  PsiTable next = psi;
  // Plenty for gamma < 1 down to tolerances near machine precision.
  const int max_iterations = 200000;
  for (int it = 0; it < max_iterations; ++it) {
    const double change = backup(mdp, pi, phi_bar, gamma, psi, next);
    std::swap(psi.values, next.values);
    if (change <= tol) return psi;
  }
  throw VerificationError(fmt::format("dp_successor_features: no convergence to {} in {} sweeps", tol, max_iterations));
}

PsiTable dp_successor_features(const Environment& env, const Policy& policy, const TransitionFeatures& features,
                               double gamma, double tol) {
  const auto* mdp = dynamic_cast<const TabularMDP*>(&env);
  if (mdp == nullptr) throw UnsupportedError(fmt::format("dp_successor_features: '{}' is not tabular", env.id()));
  return dp_successor_features(*mdp, policy, features, gamma, tol);
}

double psi_bellman_residual(const TabularMDP& mdp, const Eigen::MatrixXd& pi, const TransitionFeatures& features,
                            double gamma, const PsiTable& psi) {
  PsiTable out = psi;
  backup(mdp, pi, expected_features(mdp, features), gamma, psi, out);
  double r = 0.0;
  for (std::size_t i = 0; i < psi.values.size(); ++i) r = std::max(r, std::abs(out.values[i] - psi.values[i]));
  return r;
}

MonteCarloEstimate monte_carlo_psi(const Environment& env, const Policy& policy, const TransitionFeatures& features,
                                   const State& s, int a, double gamma, int n_rollouts, int horizon,
                                   std::uint64_t seed) {
  if (n_rollouts < 1) throw InputError("monte_carlo_psi: n_rollouts must be >= 1");
  if (horizon < 1) throw InputError("monte_carlo_psi: horizon must be >= 1");
  const int n = features.dim();
  // Welford, so identical rollouts give an exactly zero spread.
  std::vector<double> mean(n, 0.0), m2(n, 0.0), total(n), phi(n);
  for (int i = 0; i < n_rollouts; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    std::fill(total.begin(), total.end(), 0.0);
    State state = s;
    int action = a;
    double discount = 1.0;
    for (int t = 0; t < horizon; ++t) {
      const StepResult r = env.step(state, action, rng);
      features.encode(state, r.next, phi);
      for (int d = 0; d < n; ++d) total[d] += discount * phi[d];
      if (r.terminal) break;
      discount *= gamma;
      state = r.next;
      action = policy.act(state, rng);
    }
    for (int d = 0; d < n; ++d) {
      const double delta = total[d] - mean[d];
      mean[d] += delta / (i + 1);
      m2[d] += delta * (total[d] - mean[d]);
    }
  }
  MonteCarloEstimate est;
  est.n_rollouts = n_rollouts;
  est.mean = mean;
  est.std_error.assign(n, 0.0);
  if (n_rollouts > 1) {
    for (int d = 0; d < n; ++d) est.std_error[d] = std::sqrt(m2[d] / (n_rollouts - 1) / n_rollouts);
  }
  return est;
}

}  // namespace pi2vec
