#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pi2vec/env/policy.hpp"
#include "pi2vec/successor/categorical.hpp"
#include "pi2vec/successor/network.hpp"

namespace pi2vec {

enum class FqeMode { kDistributional, kExpected };

std::string to_string(FqeMode mode);
FqeMode parse_fqe_mode(const std::string& name);

/// Trained psi_theta for one policy. Immutable; predictions are safe to call
/// concurrently.
class SuccessorFeatureModel {
 public:
  SuccessorFeatureModel(Support support, double gamma, FqeMode mode, TransitionFeatures features,
                        std::string policy_id, std::shared_ptr<const PsiNetwork> network, std::vector<double> params,
                        std::string config_hash = "");

  int dim() const { return support_.dim(); }
  int bins() const { return support_.bins(); }
  double gamma() const { return gamma_; }
  FqeMode mode() const { return mode_; }
  const Support& support() const { return support_; }
  const TransitionFeatures& features() const { return features_; }
  const std::string& policy_id() const { return policy_id_; }
  const PsiNetwork& network() const { return *network_; }
  const std::shared_ptr<const PsiNetwork>& network_ptr() const { return network_; }
  const std::vector<double>& params() const { return params_; }
  const std::string& config_hash() const { return config_hash_; }

  /// N x B bin probabilities (distributional mode only).
  std::vector<double> distribution(const State& s, int a) const;
  void predict(const State& s, int a, std::span<double> out) const;

 private:
  Support support_;
  double gamma_;
  FqeMode mode_;
  TransitionFeatures features_;
  std::string policy_id_;
  std::shared_ptr<const PsiNetwork> network_;
  std::vector<double> params_;
  std::string config_hash_;
};

/// Numerically stable softmax over each consecutive group of `bins` entries.
void softmax_rows(std::span<double> logits, int bins);

/// Histogram expectations in distributional mode, raw outputs otherwise.
std::vector<double> predict_psi(const SuccessorFeatureModel& model, const State& s, int a);

/// psi(s, pi(s)) with pi(s) the policy's frozen answer at s. The policy must
/// be the one the model was trained for.
std::vector<double> predict_psi_on_policy(const SuccessorFeatureModel& model, const Policy& policy, const State& s);

// Checkpoint: one JSON header line
//   {"format":"pi2vec-psi-model","version":1,"n":..,"bins":..,"gamma":..,
//    "mode":..,"lower":[..],"upper":[..],"encoder":..,"policy_id":..,
//    "network":{..},"param_count":..,"checksum":..,"config_hash":..}
// followed by param_count raw little-endian doubles.
void write_model(std::ostream& out, const SuccessorFeatureModel& model);
SuccessorFeatureModel read_model(std::istream& in, const EncoderContext& context);
void save_model(const std::string& path, const SuccessorFeatureModel& model);
SuccessorFeatureModel load_model(const std::string& path, const EncoderContext& context);

/// Reads only the header line of a checkpoint.
nlohmann::ordered_json read_model_header(const std::string& path);

}  // namespace pi2vec
