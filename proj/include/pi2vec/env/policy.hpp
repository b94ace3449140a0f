#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pi2vec/env/environment.hpp"

namespace pi2vec {

struct PolicyInfo {
  std::string id;
  std::string family;
  std::uint64_t seed = 0;
};

/// Black-box policy: consumers may only ask for actions.
///
/// `act` draws any randomness from the caller's generator. `act_frozen`
/// answers as a fixed function of (state, internal seed), which is how a
/// deployed policy is queried on canonical states.
class Policy {
 public:
  explicit Policy(PolicyInfo info) : info_(std::move(info)) {}
  virtual ~Policy() = default;

  virtual int num_actions() const = 0;
  virtual int act(const State& s, Rng& rng) const = 0;

  /// Action distribution, for oracles only. Black-box policies return nullopt.
  virtual std::optional<std::vector<double>> action_probabilities(const State& s) const;

  int act_frozen(const State& s) const;

  const PolicyInfo& info() const { return info_; }
  const std::string& id() const { return info_.id; }

 private:
  PolicyInfo info_;
};

using PolicyPtr = std::shared_ptr<const Policy>;
using GreedyFn = std::function<int(const State&)>;

/// With probability epsilon a uniformly random action, otherwise `greedy(s)`.
class EpsilonGreedyPolicy final : public Policy {
 public:
  EpsilonGreedyPolicy(PolicyInfo info, int n_actions, double epsilon, GreedyFn greedy);

  int num_actions() const override { return n_actions_; }
  int act(const State& s, Rng& rng) const override;
  std::optional<std::vector<double>> action_probabilities(const State& s) const override;

  double epsilon() const { return epsilon_; }

 private:
  int n_actions_;
  double epsilon_;
  GreedyFn greedy_;
};

}  // namespace pi2vec
