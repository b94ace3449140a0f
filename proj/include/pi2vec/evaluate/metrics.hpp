#pragma once

#include <optional>
#include <span>
#include <vector>

namespace pi2vec {

/// Ranks starting at 1; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation; nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Spearman rho: Pearson over average-tie ranks. nullopt when a side is
/// constant or there are fewer than two items.
std::optional<double> spearman(std::span<const double> truth, std::span<const double> predicted);

/// mean |truth - predicted| / range. `range` is the spread of true returns
/// over the whole policy set, not just these items.
double nmae(std::span<const double> truth, std::span<const double> predicted, double range);

/// (max truth - truth[argmax predicted]) / range; argmax ties go to the
/// lowest index.
double regret_at_1(std::span<const double> truth, std::span<const double> predicted, double range);

/// max - min of the values; InputError when empty.
double value_range(std::span<const double> values);

}  // namespace pi2vec
