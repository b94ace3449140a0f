#include "pi2vec/pipeline/checks.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "pi2vec/env/planning.hpp"
#include "pi2vec/successor/oracles.hpp"

namespace pi2vec {

CheckResult check_projection_mean(int cases, std::uint64_t seed) {
  CheckResult r{"projection_mean", fmt::format("{} cases", cases), true, 0.0, 1.0, ""};
  Rng rng(seed);
  double worst_sum = 0.0;
  for (int c = 0; c < cases; ++c) {
    const int n = 1 + uniform_index(rng, 4);
    const int bins = 2 + uniform_index(rng, 50);
    FeatureBounds b;
    for (int d = 0; d < n; ++d) {
      const double lo = -5.0 * uniform01(rng);
      b.lower.push_back(lo);
      b.upper.push_back(lo + 0.1 + 10.0 * uniform01(rng));
    }
    const Support support(b, bins);
    std::vector<double> shift(n), next(static_cast<std::size_t>(n) * bins);
    for (int d = 0; d < n; ++d) {
      const double span = b.upper[d] - b.lower[d];
      shift[d] = b.lower[d] - 0.5 * span + 2.0 * span * uniform01(rng);
      double total = 0.0;
      for (int k = 0; k < bins; ++k) {
        const double p = uniform01(rng) < 0.4 ? 0.0 : uniform01(rng);
        next[d * bins + k] = p;
        total += p;
      }
      if (total == 0.0) next[d * bins + uniform_index(rng, bins)] = total = 1.0;
      for (int k = 0; k < bins; ++k) next[d * bins + k] /= total;
    }
    const double gamma = uniform01(rng);
    const auto out = categorical_project(shift, next, gamma, support);
    for (int d = 0; d < n; ++d) {
      double sum = 0.0, mean = 0.0, target = 0.0;
      for (int k = 0; k < bins; ++k) {
        sum += out[d * bins + k];
        mean += out[d * bins + k] * support.atom(d, k);
        const double moved = std::clamp(shift[d] + gamma * support.atom(d, k), b.lower[d], b.upper[d]);
        target += next[d * bins + k] * moved;
      }
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      r.value = std::max(r.value, std::abs(mean - target) / support.width(d));
    }
  }
  r.passed = worst_sum <= 1e-9 && r.value <= 1.0;
  r.detail = fmt::format("worst mass error {:.3g}", worst_sum);
  return r;
}

CheckResult check_q_reconstruction(const LinearRewardGridworld& env, const std::vector<PolicyPtr>& policies,
                                   double gamma, double tolerance) {
  CheckResult r{"q_reconstruction", env.mdp.id(), true, 0.0, tolerance, ""};
  const TransitionFeatures f(env.encoder, false);
  for (const auto& p : policies) {
    const auto psi = dp_successor_features(env.mdp, *p, f, gamma, 1e-12);
    const auto q = evaluate_q(env.mdp, policy_matrix(env.mdp, *p), gamma);
    for (int s = 0; s < env.mdp.num_states(); ++s) {
      for (int a = 0; a < env.mdp.num_actions(); ++a) {
        double dot = 0.0;
        for (int d = 0; d < f.dim(); ++d) dot += psi.at(s, a)[d] * env.w_task[d];
        r.value = std::max(r.value, std::abs(dot - q(s, a)));
      }
    }
  }
  r.passed = r.value <= tolerance;
  r.detail = fmt::format("{} policies", policies.size());
  return r;
}

CheckResult check_fqe_vs_dp(const SuccessorFeatureModel& model, const Policy& policy, const TabularMDP& mdp,
                            const OfflineDataset& dataset, int min_visits, double tolerance) {
  CheckResult r{"dp_vs_fqe", fmt::format("{}/{}", model.policy_id(), model.features().spec().name()), true, 0.0,
                tolerance, ""};
  if (model.gamma() == 0.0) r.name = "one_step_expectation";
  const auto dp = dp_successor_features(mdp, policy, model.features(), model.gamma(), 1e-10);
  std::map<std::pair<int, int>, int> visits;
  for (const auto& traj : dataset.trajectories) {
    for (const auto& t : traj.steps) ++visits[{t.state.index, t.action}];
  }
  int checked = 0;
  for (const auto& [key, count] : visits) {
    if (count < min_visits) continue;
    ++checked;
    const auto pred = predict_psi(model, tabular_state(key.first), key.second);
    const auto exact = dp.at(key.first, key.second);
    for (int d = 0; d < model.dim(); ++d) {
      const double range = model.support().upper(d) - model.support().lower(d);
      r.value = std::max(r.value, std::abs(pred[d] - exact[d]) / range);
    }
  }
  r.passed = checked > 0 && r.value <= tolerance;
  r.detail = fmt::format("{} (s,a) pairs with >= {} visits", checked, min_visits);
  return r;
}

CheckResult check_mc_consistency(const TabularMDP& mdp, const Policy& policy, const TransitionFeatures& features,
                                 double gamma, int pairs, int rollouts, double pass_fraction, std::uint64_t seed) {
  CheckResult r{"dp_vs_mc", fmt::format("{}/{}", policy.id(), features.spec().name()), true, 0.0, pass_fraction, ""};
  const auto dp = dp_successor_features(mdp, policy, features, gamma, 1e-12);
  // Truncation bias below 1e-9 of a unit feature.
  const int horizon =
      gamma > 0.0 ? std::min(5000, static_cast<int>(std::ceil(std::log(1e-9 * (1.0 - gamma)) / std::log(gamma)))) : 1;
  std::vector<int> live;
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (!mdp.terminal(s)) live.push_back(s);
  }
  // Largest |phi_d| over every state pair, for the zero-variance case below.
  std::vector<double> phi_max(features.dim(), 0.0);
  for (int s = 0; s < mdp.num_states(); ++s) {
    for (int s2 = 0; s2 < mdp.num_states(); ++s2) {
      const auto phi = features.encode(tabular_state(s), tabular_state(s2));
      for (int d = 0; d < features.dim(); ++d) phi_max[d] = std::max(phi_max[d], std::abs(phi[d]));
    }
  }
  Rng rng(seed);
  int agree = 0;
  for (int i = 0; i < pairs; ++i) {
    const int s = live[uniform_index(rng, static_cast<int>(live.size()))];
    const int a = uniform_index(rng, mdp.num_actions());
    const int d = uniform_index(rng, features.dim());
    const auto est = monte_carlo_psi(mdp, policy, features, tabular_state(s), a, gamma, rollouts, horizon,
                                     derive_seed(seed, static_cast<std::uint64_t>(i)));
    const double gap = std::abs(est.mean[d] - dp.at(s, a)[d]);
    // No variance seen: whatever the rollouts missed had probability below
    // 3/n (95%), and contributes at most phi_max / (1 - gamma) when it happens.
    const double unseen = 3.0 / rollouts * phi_max[d] / (1.0 - gamma) + 1e-12;
    const bool ok = est.std_error[d] > 0.0 ? gap <= 3.0 * est.std_error[d] : gap <= unseen;
    agree += ok ? 1 : 0;
  }
  r.value = static_cast<double>(agree) / pairs;
  r.passed = r.value >= pass_fraction;
  r.detail = fmt::format("{}/{} pairs within 3 SE, {} rollouts, horizon {}", agree, pairs, rollouts, horizon);
  return r;
}

}  // namespace pi2vec
