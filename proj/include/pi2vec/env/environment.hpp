#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "pi2vec/common.hpp"

namespace pi2vec {

/// A state of either a tabular or a planar environment.
///
/// Tabular states carry their index and leave `pos` zeroed; planar states
/// carry `index == -1` and a position in the unit square. Encoders that need
/// geometry for tabular states look it up from the index.
struct State {
  int index = -1;
  std::array<double, 2> pos{};

  bool is_tabular() const { return index >= 0; }
  bool operator==(const State&) const = default;
};

inline State tabular_state(int index) { return State{index, {0.0, 0.0}}; }
inline State planar_state(double x, double y) { return State{-1, {x, y}}; }

std::uint64_t state_hash(const State& s);

struct StepResult {
  State next;
  double reward = 0.0;
  bool terminal = false;
};

/// Simulator interface shared by the gridworlds and the continuous reacher.
/// Implementations are immutable after construction; all randomness comes
/// from the caller's generator.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string id() const = 0;
  virtual int num_actions() const = 0;
  virtual bool is_tabular() const = 0;
  virtual bool is_terminal(const State& s) const = 0;
  virtual State sample_start(Rng& rng) const = 0;
  virtual StepResult step(const State& s, int action, Rng& rng) const = 0;
};

}  // namespace pi2vec
