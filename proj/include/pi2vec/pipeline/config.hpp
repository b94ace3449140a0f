#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pi2vec/env/gridworld.hpp"
#include "pi2vec/env/reacher.hpp"
#include "pi2vec/env/tabular_mdp.hpp"
#include "pi2vec/features/encoders.hpp"
#include "pi2vec/features/linear_reward.hpp"
#include "pi2vec/successor/fqe.hpp"

namespace pi2vec {

/// Malformed or inconsistent experiment configuration (CLI exit code 2).
class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

struct EnvironmentConfig {
  std::string kind = "gridworld";  // gridworld | reacher
  GridSpec grid;
  std::string reward = "default";  // gridworld only: default | linear
  std::uint64_t reward_seed = 0;   // weight draw of the linear reward
  ReacherSpec reacher;
};

struct SourceConfig {
  std::string label;
  std::vector<int> policies;  // indices into the policy list; empty means all
  int trajectories_per_policy = 0;
};

struct DatasetConfig {
  int max_steps = 100;
  std::vector<SourceConfig> sources;
};

struct CanonicalConfig {
  int k = 50;
  bool first_state_only = false;
};

struct EvaluationConfig {
  int folds = 3;
  std::vector<double> lambda_grid = {0.0, 1e-4, 1e-3, 1e-2};
  bool fqe_baseline = true;
  bool offline_mode = true;
  int return_rollouts = 500;  // Monte Carlo returns for non-tabular environments
};

struct OracleConfig {
  double fqe_tolerance = 0.05;  // fraction of each dimension's support range
  int min_visits = 100;
  int mc_pairs = 20;
  int mc_rollouts = 2000;
  double mc_pass_fraction = 0.95;
  int projection_cases = 1000;
};

/// Everything an experiment run depends on. Every random stream is derived
/// from root_seed by name; fqe.seed is mixed into the per-model seeds.
struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t root_seed = 0;
  EnvironmentConfig environment;
  std::vector<double> epsilons;
  double planning_gamma = 0.99;
  DatasetConfig dataset;
  std::vector<std::string> encoders = {"hand_crafted"};
  FqeConfig fqe;
  CanonicalConfig canonical;
  std::vector<std::string> representations = {"pi2vec", "actions"};
  EvaluationConfig evaluation;
  OracleConfig oracle;
};

/// Strict parse: unknown keys, wrong types and inconsistent values throw ConfigError.
ExperimentConfig parse_config(const nlohmann::ordered_json& j);
ExperimentConfig load_config(const std::string& path);
/// Fully populated form; parse_config(to_json(c)) == c.
nlohmann::ordered_json to_json(const ExperimentConfig& c);
/// Hex FNV-1a of the compact normalized JSON.
std::string config_hash(const ExperimentConfig& c);

/// Named sub-seed of the experiment.
std::uint64_t sub_seed(const ExperimentConfig& c, const std::string& name);

/// The environment an experiment runs on, plus what encoders need to know.
struct ExperimentEnv {
  std::shared_ptr<const Environment> env;
  std::shared_ptr<const TabularMDP> mdp;  // null for the reacher
  std::shared_ptr<const ContinuousEnv> reacher;
  std::optional<LinearRewardGridworld> linear;
  EncoderContext context;
};

ExperimentEnv build_environment(const ExperimentConfig& c);

/// Epsilon-greedy family in config order: greedy w.r.t. optimal Q on
/// gridworlds, toward the goal on the reacher.
std::vector<PolicyPtr> build_policies(const ExperimentConfig& c, const ExperimentEnv& env);

}  // namespace pi2vec
