#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pi2vec/env/dataset.hpp"
#include "pi2vec/env/tabular_mdp.hpp"
#include "pi2vec/features/linear_reward.hpp"
#include "pi2vec/successor/model.hpp"

namespace pi2vec {

/// Outcome of one oracle comparison. `value` is compared against
/// `tolerance` in the direction the check documents.
struct CheckResult {
  std::string name;
  std::string subject;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// Random projections: per-row mass sums to 1 within 1e-9 and each row's
/// mean equals the mean of the clamped shifted atoms within one bin width.
/// value = worst mean gap in bin widths (pass when <= 1).
CheckResult check_projection_mean(int cases, std::uint64_t seed);

/// <psi_DP(s, a), w_task> against exact Q for every (s, a) and policy.
/// value = worst absolute gap (pass when <= tolerance).
CheckResult check_q_reconstruction(const LinearRewardGridworld& env, const std::vector<PolicyPtr>& policies,
                                   double gamma, double tolerance);

/// Trained model against DP psi over dataset (s, a) pairs seen at least
/// `min_visits` times. value = worst |error| / support range of that
/// dimension (pass when <= tolerance).
CheckResult check_fqe_vs_dp(const SuccessorFeatureModel& model, const Policy& policy, const TabularMDP& mdp,
                            const OfflineDataset& dataset, int min_visits, double tolerance);

/// Monte Carlo psi against DP psi on `pairs` random (state, dimension)
/// three standard errors. If every rollout gave the same sum, the allowance
/// is 3/rollouts * max|phi_d| / (1 - gamma) instead.
/// value = fraction that agree (pass when >= pass_fraction).
CheckResult check_mc_consistency(const TabularMDP& mdp, const Policy& policy, const TransitionFeatures& features,
                                 double gamma, int pairs, int rollouts, double pass_fraction, std::uint64_t seed);

}  // namespace pi2vec
