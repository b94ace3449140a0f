#include "pi2vec/successor/adam.hpp"

#include <cmath>

namespace pi2vec {

BlockAdam::BlockAdam(const PsiNetwork& net, AdamConfig config)
    : net_(net), config_(config), m_(net.param_count(), 0.0), v_(net.param_count(), 0.0), t_(net.num_blocks(), 0) {}

void BlockAdam::step(std::span<double> theta, std::span<double> grad, std::span<const int> blocks) {
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  for (int block : blocks) {
    const long t = ++t_[block];
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    const double step = config_.learning_rate / c1;
    const std::size_t begin = net_.block_offset(block);
    const std::size_t end = begin + net_.block_size(block);
    for (std::size_t i = begin; i < end; ++i) {
      const double g = grad[i];
      m_[i] = b1 * m_[i] + (1.0 - b1) * g;
      v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
      theta[i] -= step * m_[i] / (std::sqrt(v_[i] / c2) + config_.epsilon);
      grad[i] = 0.0;
    }
  }
}

}  // namespace pi2vec
