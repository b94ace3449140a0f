#include "pi2vec/env/tabular_mdp.hpp"

#include <cmath>

#include <fmt/format.h>

namespace pi2vec {

std::uint64_t state_hash(const State& s) {
  if (s.is_tabular()) return splitmix64(static_cast<std::uint64_t>(s.index));
  return fnv1a64(std::span<const double>(s.pos.data(), s.pos.size()));
}

namespace {

constexpr double kNormTolerance = 1e-12;

double sample_uniform(Rng& rng) { return uniform01(rng); }

}  // namespace

TabularMDP::TabularMDP(std::string id, int n_states, int n_actions,
                       std::vector<std::vector<Outcome>> kernel, std::vector<bool> terminal,
                       std::vector<double> start_distribution)
    : id_(std::move(id)),
      n_states_(n_states),
      n_actions_(n_actions),
      kernel_(std::move(kernel)),
      terminal_(std::move(terminal)),
      start_(std::move(start_distribution)) {
  if (n_states_ < 1 || n_actions_ < 1) throw InputError("TabularMDP: empty state or action set");
  const auto rows = static_cast<std::size_t>(n_states_) * static_cast<std::size_t>(n_actions_);
  if (kernel_.size() != rows) throw InputError("TabularMDP: kernel must have n_states*n_actions rows");
  if (terminal_.size() != static_cast<std::size_t>(n_states_)) throw InputError("TabularMDP: terminal mask size");
  if (start_.size() != static_cast<std::size_t>(n_states_)) throw InputError("TabularMDP: start distribution size");

  for (int s = 0; s < n_states_; ++s) {
    for (int a = 0; a < n_actions_; ++a) {
      const auto& row = kernel_[static_cast<std::size_t>(s) * n_actions_ + a];
      if (row.empty()) throw InputError(fmt::format("TabularMDP: no outcomes for ({}, {})", s, a));
      double total = 0.0;
      for (const auto& o : row) {
        if (o.next < 0 || o.next >= n_states_) throw InputError("TabularMDP: next state out of range");
        if (!(o.prob >= 0.0)) throw InputError("TabularMDP: negative probability");
        if (!std::isfinite(o.reward)) throw InputError("TabularMDP: non-finite reward");
        if (terminal_[s] && o.prob > 0.0 && (o.next != s || o.reward != 0.0)) {
          throw InputError(fmt::format("TabularMDP: terminal state {} must self-loop with zero reward", s));
        }
        total += o.prob;
      }
      if (std::abs(total - 1.0) > kNormTolerance) {
        throw InputError(fmt::format("TabularMDP: P(.|{},{}) sums to {}", s, a, total));
      }
    }
  }
  double start_total = 0.0;
  for (double p : start_) {
    if (!(p >= 0.0)) throw InputError("TabularMDP: negative start probability");
    start_total += p;
  }
  if (std::abs(start_total - 1.0) > kNormTolerance) throw InputError("TabularMDP: start distribution must sum to 1");
}

int TabularMDP::check_state(int s) const {
  if (s < 0 || s >= n_states_) throw InputError(fmt::format("state {} out of range [0, {})", s, n_states_));
  return s;
}

bool TabularMDP::is_terminal(const State& s) const {
  if (!s.is_tabular()) throw InputError("TabularMDP: expected a tabular state");
  return terminal(s.index);
}

std::span<const Outcome> TabularMDP::outcomes(int s, int a) const {
  check_state(s);
  if (a < 0 || a >= n_actions_) throw InputError(fmt::format("action {} out of range [0, {})", a, n_actions_));
  return kernel_[static_cast<std::size_t>(s) * n_actions_ + a];
}

double TabularMDP::probability(int s, int a, int s2) const {
  double p = 0.0;
  for (const auto& o : outcomes(s, a)) {
    if (o.next == s2) p += o.prob;
  }
  return p;
}

double TabularMDP::expected_reward(int s, int a) const {
  double r = 0.0;
  for (const auto& o : outcomes(s, a)) r += o.prob * o.reward;
  return r;
}

State TabularMDP::sample_start(Rng& rng) const {
  const double u = sample_uniform(rng);
  double acc = 0.0;
  int last = 0;
  for (int s = 0; s < n_states_; ++s) {
    if (start_[s] <= 0.0) continue;
    acc += start_[s];
    last = s;
    if (u < acc) return tabular_state(s);
  }
  return tabular_state(last);
}

StepResult TabularMDP::step(const State& s, int action, Rng& rng) const {
  if (!s.is_tabular()) throw InputError("TabularMDP: expected a tabular state");
  return pi2vec::step(*this, s.index, action, rng);
}

StepResult step(const TabularMDP& mdp, int s, int a, Rng& rng) {
  const auto row = mdp.outcomes(s, a);
  const double u = sample_uniform(rng);
  double acc = 0.0;
  const Outcome* chosen = nullptr;
  for (const auto& o : row) {
    if (o.prob <= 0.0) continue;
    chosen = &o;
    acc += o.prob;
    if (u < acc) break;
  }
  return StepResult{tabular_state(chosen->next), chosen->reward, mdp.terminal(chosen->next)};
}

}  // namespace pi2vec
