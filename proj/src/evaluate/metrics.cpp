#include "pi2vec/evaluate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "pi2vec/common.hpp"

namespace pi2vec {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) throw InputError(fmt::format("{}: length mismatch ({} vs {})", what, a.size(), b.size()));
  if (a.empty()) throw InputError(fmt::format("{}: empty input", what));
}

void check_range(double range, const char* what) {
  if (!(range > 0.0) || !std::isfinite(range)) throw InputError(fmt::format("{}: return range must be positive", what));
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, "pearson");
  if (x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> spearman(std::span<const double> truth, std::span<const double> predicted) {
  check_pair(truth, predicted, "spearman");
  const auto rt = average_ranks(truth);
  const auto rp = average_ranks(predicted);
  return pearson(rt, rp);
}

double nmae(std::span<const double> truth, std::span<const double> predicted, double range) {
  check_pair(truth, predicted, "nmae");
  check_range(range, "nmae");
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) total += std::abs(truth[i] - predicted[i]);
  return total / static_cast<double>(truth.size()) / range;
}

double regret_at_1(std::span<const double> truth, std::span<const double> predicted, double range) {
  check_pair(truth, predicted, "regret_at_1");
  check_range(range, "regret_at_1");
  // max_element returns the first maximum, i.e. the lowest index.
  const auto pick = std::max_element(predicted.begin(), predicted.end()) - predicted.begin();
  const double best = *std::max_element(truth.begin(), truth.end());
  return (best - truth[pick]) / range;
}

double value_range(std::span<const double> values) {
  if (values.empty()) throw InputError("value_range: empty input");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return *hi - *lo;
}

}  // namespace pi2vec
