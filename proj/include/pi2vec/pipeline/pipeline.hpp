#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pi2vec/embed/embedding.hpp"
#include "pi2vec/evaluate/performance.hpp"
#include "pi2vec/pipeline/checks.hpp"
#include "pi2vec/pipeline/config.hpp"

namespace pi2vec {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunOptions {
  std::filesystem::path out;
  int workers = 1;
  bool overwrite = false;
};

/// A parsed config with everything derived from it: hash, environment,
/// policies and encoders.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  const std::string& hash() const { return hash_; }
  const ExperimentEnv& env() const { return env_; }
  const std::vector<PolicyPtr>& policies() const { return policies_; }
  TransitionFeatures features(const std::string& encoder) const;
  /// FQE settings for one (policy, encoder) model, seed included.
  FqeConfig fqe_config(const std::string& policy_id, const std::string& encoder) const;
  /// True discounted returns at fqe.gamma: exact on gridworlds, Monte Carlo otherwise.
  std::vector<double> true_returns() const;

 private:
  ExperimentConfig config_;
  std::string hash_;
  ExperimentEnv env_;
  std::vector<PolicyPtr> policies_;
};

/// Loads the config, applying --seed-override to root_seed when given.
Experiment load_experiment(const std::string& config_path, std::optional<std::uint64_t> seed_override = {});

/// File layout of an output directory.
struct Workspace {
  std::filesystem::path root;

  std::filesystem::path manifest() const { return root / "manifest.json"; }
  std::filesystem::path dataset() const { return root / "dataset.jsonl"; }
  std::filesystem::path models() const { return root / "models"; }
  std::filesystem::path model(const std::string& policy_id, const std::string& encoder) const {
    return models() / (policy_id + "__" + encoder + ".psi");
  }
  std::filesystem::path canonical() const { return root / "canonical.json"; }
  std::filesystem::path embeddings_jsonl() const { return root / "embeddings.jsonl"; }
  std::filesystem::path embeddings_csv() const { return root / "embeddings.csv"; }
  std::filesystem::path returns() const { return root / "returns.csv"; }
  std::filesystem::path metrics() const { return root / "metrics.csv"; }
  std::filesystem::path scatter() const { return root / "scatter.csv"; }
  std::filesystem::path oracle() const { return root / "oracle_check.csv"; }
  std::filesystem::path report() const { return root / "report.txt"; }
};

struct GenerateResult {
  std::size_t trajectories = 0;
  std::size_t transitions = 0;
};
struct TrainResult {
  int trained = 0;
  int skipped = 0;
};
struct EmbedResult {
  CanonicalStateSet canonical;
  std::vector<PolicyEmbedding> embeddings;
};
struct EvaluateResult {
  std::vector<double> returns;
  std::vector<MetricsReport> reports;
};

GenerateResult cmd_generate(const Experiment& exp, const RunOptions& opt);
/// Trains every (policy, encoder) model; existing checkpoints with this
/// config hash are kept unless opt.overwrite.
TrainResult cmd_train(const Experiment& exp, const RunOptions& opt);
EmbedResult cmd_embed(const Experiment& exp, const RunOptions& opt);
EvaluateResult cmd_evaluate(const Experiment& exp, const RunOptions& opt);
/// Tabular environments only. Trains missing checkpoints first.
std::vector<CheckResult> cmd_oracle_check(const Experiment& exp, const RunOptions& opt);
/// Plain-text table of the mean rows of metrics.csv.
std::string cmd_report(const Experiment& exp, const RunOptions& opt);

}  // namespace pi2vec
