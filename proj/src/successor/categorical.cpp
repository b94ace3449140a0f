#include "pi2vec/successor/categorical.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace pi2vec {

Support::Support(FeatureBounds bounds, int bins) : bounds_(std::move(bounds)), bins_(bins) {
  if (bins < 2) throw InputError("Support: need at least 2 bins");
  if (bounds_.lower.size() != bounds_.upper.size() || bounds_.lower.empty()) {
    throw InputError("Support: malformed bounds");
  }
  width_.resize(bounds_.lower.size());
  for (int d = 0; d < dim(); ++d) {
    if (!(bounds_.lower[d] < bounds_.upper[d]) || !std::isfinite(bounds_.lower[d]) || !std::isfinite(bounds_.upper[d])) {
      throw InputError(fmt::format("Support: degenerate bounds in dimension {}", d));
    }
    width_[d] = (bounds_.upper[d] - bounds_.lower[d]) / (bins - 1);
  }
}

void project_dimension(double shift, std::span<const double> next_row, double gamma, const Support& support, int d,
                       std::span<double> out_row) {
  const int n_bins = support.bins();
  const double lo = support.lower(d);
  const double hi = support.upper(d);
  const double inv_width = 1.0 / support.width(d);
  std::fill(out_row.begin(), out_row.end(), 0.0);
  for (int b = 0; b < n_bins; ++b) {
    const double p = next_row[b];
    if (p == 0.0) continue;
    const double z = std::clamp(shift + gamma * support.atom(d, b), lo, hi);
    const double pos = (z - lo) * inv_width;
    const int left = std::min(static_cast<int>(pos), n_bins - 1);
    if (left == n_bins - 1) {
      out_row[left] += p;
      continue;
    }
    const double frac = pos - left;
    out_row[left] += p * (1.0 - frac);
    out_row[left + 1] += p * frac;
  }
}

void categorical_project(std::span<const double> shift, std::span<const double> next_dist, double gamma,
                         const Support& support, std::span<double> out) {
  const int n = support.dim();
  const int bins = support.bins();
  const auto size = static_cast<std::size_t>(n) * bins;
  if (static_cast<int>(shift.size()) != n || next_dist.size() != size || out.size() != size) {
    throw InputError("categorical_project: size mismatch with the support");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InputError("categorical_project: gamma must lie in [0, 1]");
  for (int d = 0; d < n; ++d) {
    const auto row = next_dist.subspan(static_cast<std::size_t>(d) * bins, bins);
    double total = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) throw InputError("categorical_project: negative probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) throw InputError(fmt::format("categorical_project: row {} sums to {}", d, total));
    project_dimension(shift[d], row, gamma, support, d, out.subspan(static_cast<std::size_t>(d) * bins, bins));
  }
}

std::vector<double> categorical_project(std::span<const double> shift, std::span<const double> next_dist,
                                        double gamma, const Support& support) {
  std::vector<double> out(static_cast<std::size_t>(support.dim()) * support.bins());
  categorical_project(shift, next_dist, gamma, support, out);
  return out;
}

double expected_value(std::span<const double> row, const Support& support, int d) {
  double total = 0.0;
  for (int b = 0; b < support.bins(); ++b) total += row[b] * support.atom(d, b);
  return total;
}

std::vector<double> expected_values(std::span<const double> dist, const Support& support) {
  const int bins = support.bins();
  if (dist.size() != static_cast<std::size_t>(support.dim()) * bins) throw InputError("expected_values: size mismatch");
  std::vector<double> out(support.dim());
  for (int d = 0; d < support.dim(); ++d) out[d] = expected_value(dist.subspan(static_cast<std::size_t>(d) * bins, bins), support, d);
  return out;
}

}  // namespace pi2vec
