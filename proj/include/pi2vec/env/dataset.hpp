#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pi2vec/env/environment.hpp"
#include "pi2vec/env/policy.hpp"

namespace pi2vec {

struct Transition {
  State state;
  int action = 0;
  double reward = 0.0;
  State next_state;
  bool terminal = false;
  std::int64_t trajectory_id = 0;
  int step_index = 0;

  bool operator==(const Transition&) const = default;
};

struct Trajectory {
  std::int64_t id = 0;
  std::string policy_id;
  std::vector<Transition> steps;

  bool operator==(const Trajectory&) const = default;
};

/// One block of the data mixture, e.g. demonstrations or held-out policy runs.
struct DatasetSource {
  std::string label;
  std::vector<std::string> policy_ids;
  int trajectories_per_policy = 0;

  bool operator==(const DatasetSource&) const = default;
};

struct DatasetProvenance {
  std::string env_id;
  std::uint64_t seed = 0;
  int max_steps = 0;
  std::string config_hash;
  std::vector<DatasetSource> sources;

  bool operator==(const DatasetProvenance&) const = default;
};

/// Historical trajectories. Trajectory ids are unique and consecutive steps
/// chain (next_state of step t is the state of step t+1).
struct OfflineDataset {
  DatasetProvenance provenance;
  std::vector<Trajectory> trajectories;

  std::size_t num_transitions() const;
  bool operator==(const OfflineDataset&) const = default;
};

/// Throws InputError when ids repeat, steps do not chain, or a terminal
/// transition is followed by another step.
void validate_dataset(const OfflineDataset& dataset);

/// Flattened view of all transitions in dataset order.
std::vector<const Transition*> flatten(const OfflineDataset& dataset);

/// Runs `policy` from a start state until a terminal transition or
/// `max_steps` transitions.
Trajectory rollout(const Environment& env, const Policy& policy, int max_steps, std::uint64_t seed,
                   std::int64_t trajectory_id = 0);

struct SourceSpec {
  std::string label;
  std::vector<PolicyPtr> policies;
  int trajectories_per_policy = 0;
};

/// `n_traj_per_policy` rollouts of every policy under a single source label.
OfflineDataset generate_dataset(const Environment& env, std::span<const PolicyPtr> policies,
                                int n_traj_per_policy, int max_steps, std::uint64_t seed);

/// Mixture of sources, laid out source by source, policy by policy.
/// Trajectory k is rolled out with seed derive_seed(seed, k).
OfflineDataset generate_dataset(const Environment& env, std::span<const SourceSpec> sources, int max_steps,
                                std::uint64_t seed);

// Line-delimited JSON. Line 1 is the header record:
//   {"record":"header","format":"pi2vec-dataset","version":1,"env":...,
//    "seed":...,"max_steps":...,"config_hash":...,"sources":[...],
//    "fields":["trajectory_id","step_index","state","action","reward",
//              "next_state","terminal"]}
// then one transition per line with exactly those keys in that order.
// Tabular states are written as their index, planar states as [x, y].
// Trajectory owners follow from the header: sources in order, each policy
// owning `trajectories_per_policy` consecutive trajectories.
void write_dataset(std::ostream& out, const OfflineDataset& dataset);
OfflineDataset read_dataset(std::istream& in);

void save_dataset(const std::string& path, const OfflineDataset& dataset);
OfflineDataset load_dataset(const std::string& path);

}  // namespace pi2vec
