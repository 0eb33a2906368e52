#include <cmath>
#include <cstddef>

#include "mdaforge/error.hpp"
#include "mdaforge/kernels.hpp"

#ifdef MDAFORGE_HAVE_OPENMP
#include <omp.h>
#endif

namespace mdaforge::kernels {

namespace {
// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape() + " and " + b.shape());
}
}  // namespace

namespace omp {

void gemm_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
  const std::size_t inner = a.cols(), m = b.cols();
  [[maybe_unused]] const bool big = a.size() * m > kParallelWork;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double* out_row = out.data() + i * m;
    const double* a_row = a.data() + i * inner;
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = a_row[k];
      if (aik == 0.0) continue;
      const double* b_row = b.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) out_row[j] += aik * b_row[j];
    }
  }
}

void gemm_at_b_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows(), m = b.cols();
  const auto p = static_cast<std::ptrdiff_t>(a.cols());
  [[maybe_unused]] const bool big = a.size() * m > kParallelWork;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t k = 0; k < p; ++k) {
    double* out_row = out.data() + k * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double aik = a(i, static_cast<std::size_t>(k));
      if (aik == 0.0) continue;
      const double* b_row = b.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) out_row[j] += aik * b_row[j];
    }
  }
}

void gemm_a_bt_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
  const std::size_t inner = a.cols(), m = b.rows();
  [[maybe_unused]] const bool big = a.size() * m > kParallelWork;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double* a_row = a.data() + i * inner;
    for (std::size_t j = 0; j < m; ++j) {
      const double* b_row = b.data() + j * inner;
      double acc = 0.0;
      for (std::size_t k = 0; k < inner; ++k) acc += a_row[k] * b_row[k];
      out(static_cast<std::size_t>(i), j) += acc;
    }
  }
}

void pairwise_sq_dist(const Matrix& a, const Matrix& b, Matrix& out) {
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
  const std::size_t d = a.cols(), m = b.rows();
  [[maybe_unused]] const bool big = a.size() * m > kParallelWork;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double* a_row = a.data() + i * d;
    for (std::size_t j = 0; j < m; ++j) {
      const double* b_row = b.data() + j * d;
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = a_row[k] - b_row[k];
        acc += diff * diff;
      }
      out(static_cast<std::size_t>(i), j) = acc;
    }
  }
}

void adamw_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, const AdamWCoefficients& c) {
  const auto n = static_cast<std::ptrdiff_t>(theta.size());
  [[maybe_unused]] const bool big = theta.size() > kParallelWork;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = m[i] / c.bias_correction1;
    const double v_hat = v[i] / c.bias_correction2;
    theta[i] -= c.lr * (m_hat / (std::sqrt(v_hat) + c.eps) + c.weight_decay * theta[i]);
  }
}

}  // namespace omp

#ifdef MDAFORGE_HAVE_OPENMP
namespace impl = omp;
#else
namespace impl = serial;
#endif

void gemm_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  require(a.cols() == b.rows(), "gemm", a, b);
  require(out.rows() == a.rows() && out.cols() == b.cols(), "gemm(out)", out, b);
  impl::gemm_acc(a, b, out);
}

void gemm_at_b_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  require(a.rows() == b.rows(), "gemm_at_b", a, b);
  require(out.rows() == a.cols() && out.cols() == b.cols(), "gemm_at_b(out)", out, b);
  impl::gemm_at_b_acc(a, b, out);
}

void gemm_a_bt_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  require(a.cols() == b.cols(), "gemm_a_bt", a, b);
  require(out.rows() == a.rows() && out.cols() == b.rows(), "gemm_a_bt(out)", out, b);
  impl::gemm_a_bt_acc(a, b, out);
}

void pairwise_sq_dist(const Matrix& a, const Matrix& b, Matrix& out) {
  require(a.cols() == b.cols(), "pairwise_sq_dist", a, b);
  require(out.rows() == a.rows() && out.cols() == b.rows(), "pairwise_sq_dist(out)", out, b);
  impl::pairwise_sq_dist(a, b, out);
}

void adamw_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, const AdamWCoefficients& c) {
  if (grad.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
    throw ShapeError("adamw_update: parameter, gradient and moment sizes differ");
  }
  impl::adamw_update(theta, grad, m, v, c);
}

int max_threads() {
#ifdef MDAFORGE_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace mdaforge::kernels
