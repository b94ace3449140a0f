#include "pi2vec/env/policy.hpp"

namespace pi2vec {

std::optional<std::vector<double>> Policy::action_probabilities(const State&) const { return std::nullopt; }

int Policy::act_frozen(const State& s) const {
  Rng rng(splitmix64(info_.seed ^ state_hash(s)));
  return act(s, rng);
}

EpsilonGreedyPolicy::EpsilonGreedyPolicy(PolicyInfo info, int n_actions, double epsilon, GreedyFn greedy)
    : Policy(std::move(info)), n_actions_(n_actions), epsilon_(epsilon), greedy_(std::move(greedy)) {
  if (n_actions_ < 1) throw InputError("EpsilonGreedyPolicy: need at least one action");
  if (!(epsilon_ >= 0.0 && epsilon_ <= 1.0)) throw InputError("EpsilonGreedyPolicy: epsilon must lie in [0, 1]");
  if (!greedy_) throw InputError("EpsilonGreedyPolicy: missing greedy action map");
}

int EpsilonGreedyPolicy::act(const State& s, Rng& rng) const {
  if (epsilon_ > 0.0 && uniform01(rng) < epsilon_) return uniform_index(rng, n_actions_);
  return greedy_(s);
}

std::optional<std::vector<double>> EpsilonGreedyPolicy::action_probabilities(const State& s) const {
  std::vector<double> probs(n_actions_, epsilon_ / n_actions_);
  probs[greedy_(s)] += 1.0 - epsilon_;
  return probs;
}

}  // namespace pi2vec
