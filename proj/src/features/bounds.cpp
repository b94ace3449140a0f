#include "pi2vec/features/bounds.hpp"

#include <algorithm>
#include <limits>

namespace pi2vec {

FeatureBounds feature_bounds(const TransitionFeatures& features, const OfflineDataset& dataset, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("feature_bounds: gamma must lie in [0, 1)");
  if (dataset.num_transitions() == 0) throw InputError("feature_bounds: empty dataset");
  const int n = features.dim();
  std::vector<double> lo(n, std::numeric_limits<double>::infinity());
  std::vector<double> hi(n, -std::numeric_limits<double>::infinity());
  std::vector<double> phi(n);
  for (const auto& traj : dataset.trajectories) {
    for (const auto& t : traj.steps) {
      features.encode(t.state, t.next_state, phi);
      for (int d = 0; d < n; ++d) {
        lo[d] = std::min(lo[d], phi[d]);
        hi[d] = std::max(hi[d], phi[d]);
      }
    }
  }
  FeatureBounds b;
  b.lower.resize(n);
  b.upper.resize(n);
  const double scale = 1.0 / (1.0 - gamma);
  for (int d = 0; d < n; ++d) {
    b.lower[d] = std::min(0.0, lo[d]) * scale;
    b.upper[d] = std::max(0.0, hi[d]) * scale;
    if (b.upper[d] - b.lower[d] <= 0.0) {
      b.lower[d] -= 0.5;
      b.upper[d] += 0.5;
    }
  }
  return b;
}

}  // namespace pi2vec
