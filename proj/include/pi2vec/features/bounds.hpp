#pragma once

#include <vector>

#include "pi2vec/env/dataset.hpp"
#include "pi2vec/features/encoders.hpp"

namespace pi2vec {

/// Per-dimension histogram support for discounted feature sums.
struct FeatureBounds {
  std::vector<double> lower;
  std::vector<double> upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool operator==(const FeatureBounds&) const = default;
};

/// With [m, M] the range of transition features over the dataset, returns
/// [min(0, m) / (1 - gamma), max(0, M) / (1 - gamma)] per dimension. Any
/// discounted sum of in-range features lands inside. Dimensions that are
/// identically zero get [-0.5, 0.5] so the support never collapses.
FeatureBounds feature_bounds(const TransitionFeatures& features, const OfflineDataset& dataset, double gamma);

}  // namespace pi2vec
