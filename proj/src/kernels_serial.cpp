#include <cmath>

#include "mdaforge/kernels.hpp"

namespace mdaforge::kernels::serial {

void gemm_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* out_row = out.data() + i * m;
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* b_row = b.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) out_row[j] += aik * b_row[j];
    }
  }
}

void gemm_at_b_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows(), p = a.cols(), m = b.cols();
  for (std::size_t k = 0; k < p; ++k) {
    double* out_row = out.data() + k * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* b_row = b.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) out_row[j] += aik * b_row[j];
    }
  }
}

void gemm_a_bt_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows(), inner = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* a_row = a.data() + i * inner;
    for (std::size_t j = 0; j < m; ++j) {
      const double* b_row = b.data() + j * inner;
      double acc = 0.0;
      for (std::size_t k = 0; k < inner; ++k) acc += a_row[k] * b_row[k];
      out(i, j) += acc;
    }
  }
}

void pairwise_sq_dist(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows(), d = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* a_row = a.data() + i * d;
    for (std::size_t j = 0; j < m; ++j) {
      const double* b_row = b.data() + j * d;
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = a_row[k] - b_row[k];
        acc += diff * diff;
      }
      out(i, j) = acc;
    }
  }
}

void adamw_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, const AdamWCoefficients& c) {
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = m[i] / c.bias_correction1;
    const double v_hat = v[i] / c.bias_correction2;
    theta[i] -= c.lr * (m_hat / (std::sqrt(v_hat) + c.eps) + c.weight_decay * theta[i]);
  }
}

}  // namespace mdaforge::kernels::serial
