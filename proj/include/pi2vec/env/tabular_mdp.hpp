#pragma once

#include <span>
#include <string>
#include <vector>

#include "pi2vec/env/environment.hpp"

namespace pi2vec {

/// One entry of the sparse transition kernel P(s'|s,a) with its reward r(s,a,s').
struct Outcome {
  int next = 0;
  double prob = 0.0;
  double reward = 0.0;
};

/// Finite MDP with an explicit kernel. Terminal states are absorbing:
/// their only outcome is a zero-reward self-loop.
class TabularMDP final : public Environment {
 public:
  /// `kernel[s * n_actions + a]` lists the outcomes of (s, a). Throws
  /// InputError when any invariant (normalization, terminal self-loops,
  /// index ranges) is violated.
  TabularMDP(std::string id, int n_states, int n_actions,
             std::vector<std::vector<Outcome>> kernel, std::vector<bool> terminal,
             std::vector<double> start_distribution);

  std::string id() const override { return id_; }
  int num_actions() const override { return n_actions_; }
  bool is_tabular() const override { return true; }
  bool is_terminal(const State& s) const override;
  State sample_start(Rng& rng) const override;
  StepResult step(const State& s, int action, Rng& rng) const override;

  int num_states() const { return n_states_; }
  bool terminal(int s) const { return terminal_[check_state(s)]; }
  std::span<const Outcome> outcomes(int s, int a) const;
  std::span<const double> start_distribution() const { return start_; }

  /// Total probability of landing in s2 from (s, a).
  double probability(int s, int a, int s2) const;
  double expected_reward(int s, int a) const;

 private:
  int check_state(int s) const;

  std::string id_;
  int n_states_;
  int n_actions_;
  std::vector<std::vector<Outcome>> kernel_;
  std::vector<bool> terminal_;
  std::vector<double> start_;
};

/// Samples (next_state, reward, terminal) for a tabular (s, a).
StepResult step(const TabularMDP& mdp, int s, int a, Rng& rng);

}  // namespace pi2vec
