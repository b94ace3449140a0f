#include "pi2vec/evaluate/offline.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace pi2vec {

namespace {
constexpr double kRankTolerance = 1e-10;
}

RewardModel fit_reward_model(const OfflineDataset& dataset, const TransitionFeatures& features) {
  const auto transitions = flatten(dataset);
  if (transitions.empty()) throw InputError("fit_reward_model: empty dataset");
  const int n = features.dim();
  const auto rows = static_cast<Eigen::Index>(transitions.size());
  Eigen::MatrixXd x(rows, n);
  Eigen::VectorXd y(rows);
  std::vector<double> phi(n);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& t = *transitions[i];
    features.encode(t.state, t.next_state, phi);
    x.row(i) = Eigen::Map<const Eigen::RowVectorXd>(phi.data(), n);
    y[i] = t.reward;
  }
  // Default rank tolerance is too tight for thousands of repeated rows.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(kRankTolerance);
  cod.compute(x);
  const Eigen::VectorXd w = cod.solve(y);
  RewardModel m;
  m.weights.assign(w.data(), w.data() + n);
  m.encoder = features.spec().name();
  m.min_norm = cod.rank() < n;
  m.residual_rms = std::sqrt((x * w - y).squaredNorm() / static_cast<double>(rows));
  return m;
}

double offline_return_estimate(const PolicyEmbedding& e, const RewardModel& reward) {
  if (e.representation != kPi2vecRepresentation) throw InputError("offline_return_estimate: needs a pi2vec embedding");
  if (e.encoder != reward.encoder) {
    throw InputError(fmt::format("offline_return_estimate: embedding uses '{}', reward model '{}'", e.encoder,
                                 reward.encoder));
  }
  if (e.vector.size() != reward.weights.size()) throw InputError("offline_return_estimate: dimension mismatch");
  double v = 0.0;
  for (std::size_t i = 0; i < e.vector.size(); ++i) v += e.vector[i] * reward.weights[i];
  return v;
}

double fqe_value_baseline(const OfflineDataset& dataset, const Policy& policy, const EncoderPtr& input_encoder,
                          const FqeConfig& config, int action_samples) {
  if (action_samples < 1) throw InputError("fqe_value_baseline: action_samples must be >= 1");
  const auto model = train_value_fqe(dataset, policy, input_encoder, config);
  Rng rng(derive_seed(config.seed, "fqe-baseline-actions"));
  double total = 0.0;
  int count = 0;
  for (const auto& traj : dataset.trajectories) {
    if (traj.steps.empty()) continue;
    const State& s0 = traj.steps.front().state;
    double v = 0.0;
    for (int k = 0; k < action_samples; ++k) v += model.q(s0, policy.act(s0, rng));
    total += v / action_samples;
    ++count;
  }
  if (count == 0) throw InputError("fqe_value_baseline: no start states");
  return total / count;
}

}  // namespace pi2vec
