#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mdaforge/matrix.hpp"

namespace mdaforge {

struct AdamWConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
///   theta <- theta - lr (m_hat / (sqrt(v_hat) + eps) + wd theta)
/// One moment pair per parameter, created on the first step.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  /// Updates every parameter in place. Throws NonFiniteError, leaving all
  /// parameters untouched, if any gradient entry is NaN or infinite.
  void step(std::span<Matrix* const> params, std::span<const Matrix* const> grads);

  std::int64_t steps() const { return step_; }
  const AdamWConfig& config() const { return config_; }

 private:
  AdamWConfig config_;
  std::int64_t step_ = 0;
  std::vector<Matrix> first_moment_;
  std::vector<Matrix> second_moment_;
};

}  // namespace mdaforge
