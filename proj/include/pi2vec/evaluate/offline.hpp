#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pi2vec/embed/embedding.hpp"
#include "pi2vec/env/dataset.hpp"
#include "pi2vec/features/encoders.hpp"
#include "pi2vec/successor/fqe.hpp"

namespace pi2vec {

/// Linear reward r ~ <phi(s, a, s'), w> fitted on logged transitions.
struct RewardModel {
  std::vector<double> weights;
  std::string encoder;
  double residual_rms = 0.0;
  bool min_norm = false;  // rank-deficient design; weights are the minimum-norm solution
};

/// Least squares of r on phi(s') (or phi(s') - phi(s) for delta features)
/// over every transition.
RewardModel fit_reward_model(const OfflineDataset& dataset, const TransitionFeatures& features);

/// <Psi, w>; the embedding must come from the same encoder.
double offline_return_estimate(const PolicyEmbedding& embedding, const RewardModel& reward);

/// Scalar FQE of the logged rewards, averaged over the dataset's start
/// states. The action at each start state is averaged over
/// `action_samples` draws from the policy (seeded from config.seed).
double fqe_value_baseline(const OfflineDataset& dataset, const Policy& policy, const EncoderPtr& input_encoder,
                          const FqeConfig& config, int action_samples = 32);

}  // namespace pi2vec
