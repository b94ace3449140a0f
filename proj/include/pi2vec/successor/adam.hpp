#pragma once

#include <span>
#include <vector>

#include "pi2vec/successor/network.hpp"

namespace pi2vec {

struct AdamConfig {
  double learning_rate = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam over a block-structured parameter vector. Only blocks that received
/// gradient are updated, each with its own step count for bias correction
/// (the usual "lazy" variant for sparse rows).
class BlockAdam {
 public:
  BlockAdam(const PsiNetwork& net, AdamConfig config);

  /// Applies one update to the listed blocks and zeroes their gradient.
  void step(std::span<double> theta, std::span<double> grad, std::span<const int> blocks);
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

 private:
  const PsiNetwork& net_;
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::vector<long> t_;
};

}  // namespace pi2vec
