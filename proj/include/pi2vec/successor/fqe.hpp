#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pi2vec/env/dataset.hpp"
#include "pi2vec/successor/model.hpp"

namespace pi2vec {

struct FqeConfig {
  double learning_rate = 3e-5;
  // Learning rate at the last step, reached by geometric decay; 0 keeps it
  // constant.
  double final_learning_rate = 0.0;
  double gamma = 0.99;
  int batch_size = 64;
  int train_steps = 20000;
  int target_refresh_period = 100;
  int bins = 51;
  FqeMode mode = FqeMode::kDistributional;
  std::uint64_t seed = 0;
  Architecture architecture = Architecture::kTabular;
  int hidden = 64;
  // Tabular row count; 0 infers it from the largest state index in the data.
  int tabular_states = 0;
  // Empirical Bellman residual is logged every this many steps (and at the
  // start and end); 0 logs only at the start and end.
  int residual_log_period = 0;

  void validate() const;
};

nlohmann::ordered_json to_json(const FqeConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
FqeConfig fqe_config_from_json(const nlohmann::ordered_json& j);

struct TrainStats {
  std::vector<std::pair<int, double>> residual_log;  // (step, residual)
  double final_loss = 0.0;  // mean loss over the last refresh period
};

/// Fitted evaluation of psi for `policy` from the offline dataset. The
/// support comes from feature_bounds over the same data. Next actions are
/// sampled from the policy; terminal transitions bootstrap nothing. Fully
/// determined by (dataset, policy, features, config).
SuccessorFeatureModel train_fqe(const OfflineDataset& dataset, const Policy& policy,
                                const TransitionFeatures& features, const FqeConfig& config,
                                TrainStats* stats = nullptr);

/// Scalar fitted evaluation of the logged rewards (N = 1, phi = r).
struct ValueFqeModel {
  Support support;
  FqeMode mode = FqeMode::kDistributional;
  std::string policy_id;
  std::shared_ptr<const PsiNetwork> network;
  std::vector<double> params;

  double q(const State& s, int a) const;
  /// q(s, pi(s)) with the policy's frozen answer.
  double value(const Policy& policy, const State& s) const;
};

/// `input_encoder` feeds linear/mlp parameterizations; tabular ignores it.
ValueFqeModel train_value_fqe(const OfflineDataset& dataset, const Policy& policy, const EncoderPtr& input_encoder,
                              const FqeConfig& config);

/// Visit-weighted root mean square, over (s, a) groups in the dataset, of
/// the sup-norm gap between psi(s, a) and the group-mean one-step target
/// phi + gamma * E_{a'}[psi(s', a')]. The expectation uses the policy's
/// action probabilities when available, its frozen answer otherwise.
double empirical_bellman_residual(const SuccessorFeatureModel& model, const Policy& policy,
                                  const OfflineDataset& dataset);

}  // namespace pi2vec
