#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pi2vec/embed/embedding.hpp"

namespace pi2vec {

/// Affine map from a policy embedding to a predicted return.
struct PerformanceModel {
  std::vector<double> weights;
  double intercept = 0.0;
  double lambda = 0.0;
  std::string representation;
  std::string encoder;
  std::string fingerprint;
  bool min_norm = false;  // lambda = 0 on a rank-deficient design
};

/// Ridge regression with an unpenalized intercept: minimizes
/// sum (w.x + b - R)^2 + lambda |w|^2. Needs >= 2 embeddings of one kind.
PerformanceModel fit_performance(std::span<const PolicyEmbedding> embeddings, std::span<const double> returns,
                                 double lambda);

double predict_performance(const PerformanceModel& model, const PolicyEmbedding& embedding);

inline const std::vector<double> kDefaultLambdaGrid = {0.0, 1e-4, 1e-3, 1e-2};

/// Grid value with the smallest leave-one-out squared error; ties keep the
/// earlier entry. With fewer than three points returns the grid's 1e-3 entry
/// if present, else its first.
double select_lambda(std::span<const PolicyEmbedding> embeddings, std::span<const double> returns,
                     std::span<const double> grid);

/// Seeded shuffle of 0..n-1 cut into k contiguous chunks whose sizes differ
/// by at most one.
std::vector<std::vector<int>> kfold_assignment(int n, int k, std::uint64_t seed);

struct FoldMetrics {
  int fold = 0;
  double nmae = 0.0;
  std::optional<double> spearman;
  std::optional<double> pearson;
  double regret_at_1 = 0.0;
  int n_policies = 0;
  double lambda = 0.0;
  std::string selected;  // encoder picked for this fold by the best-encoder rule
};

struct PredictionRecord {
  std::string policy_id;
  int fold = 0;
  double truth = 0.0;
  double predicted = 0.0;
};

/// Per-fold metrics and their means. Metrics are computed over each fold's
/// held-out policies; NMAE and regret are normalized by the full set's range.
struct MetricsReport {
  std::string representation;
  std::string encoder;
  std::vector<FoldMetrics> folds;
  double nmae = 0.0;
  std::optional<double> spearman;  // mean over folds where defined
  std::optional<double> pearson;
  double regret_at_1 = 0.0;
  int n_policies = 0;
  double return_min = 0.0;
  double return_max = 0.0;
  std::vector<PredictionRecord> predictions;
};

/// Cross-validated performance regression: each fold is predicted by a model
/// fitted on the others, lambda chosen per fold by select_lambda.
MetricsReport kfold_cv(std::span<const PolicyEmbedding> embeddings, std::span<const double> returns, int k,
                       std::uint64_t seed, std::span<const double> lambda_grid = kDefaultLambdaGrid);

/// Scores fixed predictions (no fitting) on the same folds kfold_cv would use.
MetricsReport score_predictions(const std::string& representation, const std::string& encoder,
                                std::span<const std::string> policy_ids, std::span<const double> returns,
                                std::span<const double> predictions, int k, std::uint64_t seed);

/// Candidate embeddings per encoder, all over the same policies in the same order.
using EncoderEmbeddings = std::vector<std::pair<std::string, std::vector<PolicyEmbedding>>>;

/// Per outer fold, picks the encoder with the lowest inner-CV regret on the
/// training policies, then predicts the fold with it. Encoder column "best".
MetricsReport best_encoder_cv(const EncoderEmbeddings& candidates, std::span<const double> returns, int k,
                              std::uint64_t seed, std::span<const double> lambda_grid = kDefaultLambdaGrid);

// CSV with header representation,encoder,fold,nmae,spearman,pearson,
// regret_at_1,n_policies: one row per fold then a "mean" row. Undefined
// correlations are written as NA.
void write_metrics_header(std::ostream& out);
void write_metrics_rows(std::ostream& out, const MetricsReport& report);

// Scatter data: representation,encoder,fold,policy_id,true_return,predicted_return.
void write_scatter_header(std::ostream& out);
void write_scatter_rows(std::ostream& out, const MetricsReport& report);

}  // namespace pi2vec
