#include "pi2vec/evaluate/performance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "pi2vec/evaluate/metrics.hpp"

namespace pi2vec {

namespace {

void check_kind(std::span<const PolicyEmbedding> embeddings, std::span<const double> returns, const char* what) {
  if (embeddings.size() != returns.size()) throw InputError(fmt::format("{}: embeddings and returns differ in length", what));
  if (embeddings.empty()) throw InputError(fmt::format("{}: no embeddings", what));
  const auto& first = embeddings.front();
  if (first.vector.empty()) throw InputError(fmt::format("{}: empty embedding vector", what));
  for (const auto& e : embeddings) {
    if (e.fingerprint != first.fingerprint) throw InputError(fmt::format("{}: mixed canonical fingerprints", what));
    if (e.representation != first.representation || e.encoder != first.encoder || e.vector.size() != first.vector.size()) {
      throw InputError(fmt::format("{}: mixed embedding kinds", what));
    }
  }
  for (double r : returns) {
    if (!std::isfinite(r)) throw InputError(fmt::format("{}: non-finite return", what));
  }
}

template <typename T>
std::vector<T> pick(std::span<const T> all, const std::vector<int>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(all[i]);
  return out;
}

std::vector<int> complement(int n, const std::vector<int>& held) {
  std::vector<char> mark(n, 0);
  for (int i : held) mark[i] = 1;
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    if (!mark[i]) out.push_back(i);
  }
  return out;
}

FoldMetrics fold_metrics(int fold, std::span<const double> truth, std::span<const double> pred, double range) {
  FoldMetrics m;
  m.fold = fold;
  m.n_policies = static_cast<int>(truth.size());
  m.nmae = nmae(truth, pred, range);
  m.regret_at_1 = regret_at_1(truth, pred, range);
  if (truth.size() >= 2) {
    m.spearman = spearman(truth, pred);
    m.pearson = pearson(truth, pred);
  }
  return m;
}

void aggregate(MetricsReport& r) {
  const double k = static_cast<double>(r.folds.size());
  r.nmae = 0.0;
  r.regret_at_1 = 0.0;
  double s_sum = 0.0, p_sum = 0.0;
  int s_n = 0, p_n = 0;
  for (const auto& f : r.folds) {
    r.nmae += f.nmae / k;
    r.regret_at_1 += f.regret_at_1 / k;
    if (f.spearman) s_sum += *f.spearman, ++s_n;
    if (f.pearson) p_sum += *f.pearson, ++p_n;
  }
  r.spearman = s_n > 0 ? std::optional<double>(s_sum / s_n) : std::nullopt;
  r.pearson = p_n > 0 ? std::optional<double>(p_sum / p_n) : std::nullopt;
}

MetricsReport empty_report(const std::string& representation, const std::string& encoder,
                           std::span<const double> returns) {
  MetricsReport r;
  r.representation = representation;
  r.encoder = encoder;
  r.n_policies = static_cast<int>(returns.size());
  const auto [lo, hi] = std::minmax_element(returns.begin(), returns.end());
  r.return_min = *lo;
  r.return_max = *hi;
  if (!(r.return_max > r.return_min)) throw InputError("cross-validation: all policies have the same return");
  return r;
}

}  // namespace

PerformanceModel fit_performance(std::span<const PolicyEmbedding> embeddings, std::span<const double> returns,
                                 double lambda) {
  check_kind(embeddings, returns, "fit_performance");
  if (embeddings.size() < 2) throw InputError("fit_performance: need at least two policies");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("fit_performance: lambda must be >= 0");
  const int n = static_cast<int>(embeddings.size());
  const int dim = static_cast<int>(embeddings.front().vector.size());
  Eigen::MatrixXd x(n, dim);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x.row(i) = Eigen::Map<const Eigen::RowVectorXd>(embeddings[i].vector.data(), dim);
    y[i] = returns[i];
  }
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  PerformanceModel m;
  m.lambda = lambda;
  m.representation = embeddings.front().representation;
  m.encoder = embeddings.front().encoder;
  m.fingerprint = embeddings.front().fingerprint;
  Eigen::VectorXd w;
  if (lambda == 0.0) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(1e-10);
    cod.compute(xc);
    w = cod.solve(yc);
    m.min_norm = cod.rank() < dim;
  } else if (dim <= n) {
    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += lambda;
    w = gram.ldlt().solve(xc.transpose() * yc);
  } else {
    // Dual form is cheaper when there are more features than policies.
    Eigen::MatrixXd kernel = xc * xc.transpose();
    kernel.diagonal().array() += lambda;
    w = xc.transpose() * kernel.ldlt().solve(yc);
  }
  m.weights.assign(w.data(), w.data() + dim);
  m.intercept = y_mean - x_mean.dot(w);
  for (double v : m.weights) {
    if (!std::isfinite(v)) throw VerificationError("fit_performance: non-finite weights");
  }
  return m;
}

double predict_performance(const PerformanceModel& model, const PolicyEmbedding& e) {
  if (e.fingerprint != model.fingerprint) throw InputError("predict_performance: canonical fingerprint mismatch");
  if (e.representation != model.representation || e.encoder != model.encoder) {
    throw InputError("predict_performance: embedding kind mismatch");
  }
  if (e.vector.size() != model.weights.size()) throw InputError("predict_performance: dimension mismatch");
  double v = model.intercept;
  for (std::size_t i = 0; i < e.vector.size(); ++i) v += model.weights[i] * e.vector[i];
  return v;
}

double select_lambda(std::span<const PolicyEmbedding> embeddings, std::span<const double> returns,
                     std::span<const double> grid) {
  if (grid.empty()) throw InputError("select_lambda: empty grid");
  check_kind(embeddings, returns, "select_lambda");
  const int n = static_cast<int>(embeddings.size());
  if (n < 3) {
    const auto it = std::find(grid.begin(), grid.end(), 1e-3);
    return it != grid.end() ? *it : grid.front();
  }
  double best_lambda = grid.front();
  double best_err = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    double err = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto train = complement(n, {i});
      const auto model = fit_performance(pick(embeddings, train), pick(returns, train), lambda);
      const double diff = predict_performance(model, embeddings[i]) - returns[i];
      err += diff * diff;
    }
    if (err < best_err) {
      best_err = err;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

std::vector<std::vector<int>> kfold_assignment(int n, int k, std::uint64_t seed) {
  if (k < 2) throw InputError("kfold: k must be >= 2");
  if (n < k) throw InputError(fmt::format("kfold: {} policies cannot fill {} folds", n, k));
  if (n - (n + k - 1) / k < 2) {
    throw InputError(fmt::format("kfold: {} policies in {} folds leave fewer than two for training", n, k));
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);
  std::vector<std::vector<int>> folds(k);
  int pos = 0;
  for (int f = 0; f < k; ++f) {
    const int size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(order.begin() + pos, order.begin() + pos + size);
    pos += size;
  }
  return folds;
}

MetricsReport kfold_cv(std::span<const PolicyEmbedding> embeddings, std::span<const double> returns, int k,
                       std::uint64_t seed, std::span<const double> lambda_grid) {
  check_kind(embeddings, returns, "kfold_cv");
  const int n = static_cast<int>(embeddings.size());
  auto report = empty_report(embeddings.front().representation, embeddings.front().encoder, returns);
  const double range = report.return_max - report.return_min;
  const auto folds = kfold_assignment(n, k, seed);
  for (int f = 0; f < k; ++f) {
    const auto train = complement(n, folds[f]);
    const auto x_train = pick(embeddings, train);
    const auto y_train = pick(returns, train);
    const double lambda = select_lambda(x_train, y_train, lambda_grid);
    const auto model = fit_performance(x_train, y_train, lambda);
    std::vector<double> truth, pred;
    for (int i : folds[f]) {
      truth.push_back(returns[i]);
      pred.push_back(predict_performance(model, embeddings[i]));
      report.predictions.push_back({embeddings[i].policy_id, f, truth.back(), pred.back()});
    }
    auto m = fold_metrics(f, truth, pred, range);
    m.lambda = lambda;
    report.folds.push_back(std::move(m));
  }
  aggregate(report);
  return report;
}

MetricsReport score_predictions(const std::string& representation, const std::string& encoder,
                                std::span<const std::string> policy_ids, std::span<const double> returns,
                                std::span<const double> predictions, int k, std::uint64_t seed) {
  if (policy_ids.size() != returns.size() || predictions.size() != returns.size()) {
    throw InputError("score_predictions: length mismatch");
  }
  if (returns.empty()) throw InputError("score_predictions: no policies");
  auto report = empty_report(representation, encoder, returns);
  const double range = report.return_max - report.return_min;
  const auto folds = kfold_assignment(static_cast<int>(returns.size()), k, seed);
  for (int f = 0; f < k; ++f) {
    std::vector<double> truth, pred;
    for (int i : folds[f]) {
      truth.push_back(returns[i]);
      pred.push_back(predictions[i]);
      report.predictions.push_back({policy_ids[i], f, returns[i], predictions[i]});
    }
    report.folds.push_back(fold_metrics(f, truth, pred, range));
  }
  aggregate(report);
  return report;
}

MetricsReport best_encoder_cv(const EncoderEmbeddings& candidates, std::span<const double> returns, int k,
                              std::uint64_t seed, std::span<const double> lambda_grid) {
  if (candidates.empty()) throw InputError("best_encoder_cv: no candidate encoders");
  for (const auto& [name, set] : candidates) check_kind(set, returns, "best_encoder_cv");
  const int n = static_cast<int>(returns.size());
  auto report = empty_report(candidates.front().second.front().representation, "best", returns);
  const double range = report.return_max - report.return_min;
  const auto folds = kfold_assignment(n, k, seed);
  for (int f = 0; f < k; ++f) {
    const auto train = complement(n, folds[f]);
    const auto y_train = pick(returns, train);
    // Every inner training split needs two policies, so the largest inner
    // fold may hold at most n_train - 2 of them.
    const int n_train = static_cast<int>(train.size());
    int inner_k = std::min(k, n_train);
    while (inner_k < n_train && (n_train + inner_k - 1) / inner_k > n_train - 2) ++inner_k;
    const bool scorable = n_train >= 3 && (n_train + inner_k - 1) / inner_k <= n_train - 2;
    std::size_t best = 0;
    double best_regret = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const auto x_train = pick(std::span<const PolicyEmbedding>(candidates[c].second), train);
      double regret = std::numeric_limits<double>::infinity();
      // Unscorable splits leave every regret infinite, so the first candidate wins.
      if (value_range(y_train) > 0.0 && scorable) {
        regret = kfold_cv(x_train, y_train, inner_k, derive_seed(seed, fmt::format("inner{}", f)), lambda_grid)
                     .regret_at_1;
      }
      if (regret < best_regret) {
        best_regret = regret;
        best = c;
      }
    }
    const auto& chosen = candidates[best].second;
    const auto x_train = pick(std::span<const PolicyEmbedding>(chosen), train);
    const double lambda = select_lambda(x_train, y_train, lambda_grid);
    const auto model = fit_performance(x_train, y_train, lambda);
    std::vector<double> truth, pred;
    for (int i : folds[f]) {
      truth.push_back(returns[i]);
      pred.push_back(predict_performance(model, chosen[i]));
      report.predictions.push_back({chosen[i].policy_id, f, truth.back(), pred.back()});
    }
    auto m = fold_metrics(f, truth, pred, range);
    m.lambda = lambda;
    m.selected = candidates[best].first;
    report.folds.push_back(std::move(m));
  }
  aggregate(report);
  return report;
}

namespace {

std::string fmt_num(double v) { return fmt::format("{:.12g}", v); }
std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_num(*v) : "NA"; }

}  // namespace

void write_metrics_header(std::ostream& out) {
  out << "representation,encoder,fold,nmae,spearman,pearson,regret_at_1,n_policies\n";
}

void write_metrics_rows(std::ostream& out, const MetricsReport& r) {
  for (const auto& f : r.folds) {
    out << fmt::format("{},{},{},{},{},{},{},{}\n", r.representation, r.encoder, f.fold, fmt_num(f.nmae),
                       fmt_opt(f.spearman), fmt_opt(f.pearson), fmt_num(f.regret_at_1), f.n_policies);
  }
  out << fmt::format("{},{},mean,{},{},{},{},{}\n", r.representation, r.encoder, fmt_num(r.nmae), fmt_opt(r.spearman),
                     fmt_opt(r.pearson), fmt_num(r.regret_at_1), r.n_policies);
}

void write_scatter_header(std::ostream& out) {
  out << "representation,encoder,fold,policy_id,true_return,predicted_return\n";
}

void write_scatter_rows(std::ostream& out, const MetricsReport& r) {
  for (const auto& p : r.predictions) {
    out << fmt::format("{},{},{},{},{},{}\n", r.representation, r.encoder, p.fold, p.policy_id, fmt_num(p.truth),
                       fmt_num(p.predicted));
  }
}

}  // namespace pi2vec
