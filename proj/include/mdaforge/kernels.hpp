#pragma once

// Dense numeric kernels behind the autodiff tape and the optimizer.
//
// Every kernel exists twice: `serial::` is the plain reference loop nest and
// `omp::` splits the outermost output dimension across OpenMP threads. Both
// accumulate each output element in the same order, so their results are
// bit-identical regardless of thread count. The unqualified functions in
// `kernels::` validate shapes and dispatch to the parallel version when the
// library was built with OpenMP.

#include <cstddef>
#include <span>

#include "mdaforge/matrix.hpp"

namespace mdaforge::kernels {

struct AdamWCoefficients {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double weight_decay;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

namespace serial {
// out += a * b. Zero entries of `a` are skipped (hashed features are sparse).
void gemm_acc(const Matrix& a, const Matrix& b, Matrix& out);
// out += a^T * b
void gemm_at_b_acc(const Matrix& a, const Matrix& b, Matrix& out);
// out += a * b^T
void gemm_a_bt_acc(const Matrix& a, const Matrix& b, Matrix& out);
// out(i, j) = ||a_i - b_j||^2
void pairwise_sq_dist(const Matrix& a, const Matrix& b, Matrix& out);
void adamw_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, const AdamWCoefficients& c);
}  // namespace serial

namespace omp {
void gemm_acc(const Matrix& a, const Matrix& b, Matrix& out);
void gemm_at_b_acc(const Matrix& a, const Matrix& b, Matrix& out);
void gemm_a_bt_acc(const Matrix& a, const Matrix& b, Matrix& out);
void pairwise_sq_dist(const Matrix& a, const Matrix& b, Matrix& out);
void adamw_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, const AdamWCoefficients& c);
}  // namespace omp

void gemm_acc(const Matrix& a, const Matrix& b, Matrix& out);
void gemm_at_b_acc(const Matrix& a, const Matrix& b, Matrix& out);
void gemm_a_bt_acc(const Matrix& a, const Matrix& b, Matrix& out);
void pairwise_sq_dist(const Matrix& a, const Matrix& b, Matrix& out);
void adamw_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, const AdamWCoefficients& c);

/// Number of threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace mdaforge::kernels
