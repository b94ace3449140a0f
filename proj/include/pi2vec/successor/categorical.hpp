#pragma once

#include <span>
#include <vector>

#include "pi2vec/features/bounds.hpp"

namespace pi2vec {

/// Fixed histogram support: B evenly spaced atoms per dimension,
/// z_b = lower + b * (upper - lower) / (B - 1).
class Support {
 public:
  Support(FeatureBounds bounds, int bins);

  int dim() const { return bounds_.dim(); }
  int bins() const { return bins_; }
  double lower(int d) const { return bounds_.lower[d]; }
  double upper(int d) const { return bounds_.upper[d]; }
  double width(int d) const { return width_[d]; }
  double atom(int d, int b) const { return b == bins_ - 1 ? upper(d) : lower(d) + b * width_[d]; }
  const FeatureBounds& bounds() const { return bounds_; }

 private:
  FeatureBounds bounds_;
  int bins_;
  std::vector<double> width_;
};

/// Projects the law of shift + gamma * Z (Z on the atoms with probabilities
/// `next_row`) back onto the atoms of dimension d. Each shifted atom is
/// clamped to the support and split between its two neighbours in
/// proportion to distance. No argument checks; see categorical_project.
void project_dimension(double shift, std::span<const double> next_row, double gamma, const Support& support, int d,
                       std::span<double> out_row);

/// Row-wise projection of an N x B row-major distribution. Throws InputError
/// on size mismatches, gamma outside [0, 1] or rows that do not sum to 1.
void categorical_project(std::span<const double> shift, std::span<const double> next_dist, double gamma,
                         const Support& support, std::span<double> out);
std::vector<double> categorical_project(std::span<const double> shift, std::span<const double> next_dist,
                                        double gamma, const Support& support);

/// sum_b p_b z_b for dimension d.
double expected_value(std::span<const double> row, const Support& support, int d);

/// Per-dimension means of an N x B distribution.
std::vector<double> expected_values(std::span<const double> dist, const Support& support);

}  // namespace pi2vec
