// Scalar reference kernels. These define the exact arithmetic every SIMD
// backend must reproduce bit-for-bit; see kernels.hpp for the contract.
#include <cmath>
#include <cstddef>

#include "kernels_table.hpp"

namespace aflow::kernels::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  for (std::size_t k = 0; k < n4; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (std::size_t k = n4; k < n; ++k) s += a[k] * b[k];
  return s;
}

double sumsq_scalar(const double* a, std::size_t n) { return dot_scalar(a, a, n); }

void affine_scalar(const double* w, const double* bias, const double* x,
                   double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t j = 0; j < rows; ++j)
    y[j] = bias[j] + dot_scalar(w + j * cols, x, cols);
}

void matvec_t_acc_scalar(const double* w, const double* dy, double* dx,
                         std::size_t rows, std::size_t cols) {
  for (std::size_t j = 0; j < rows; ++j) {
    const double d = dy[j];
    const double* row = w + j * cols;
    for (std::size_t k = 0; k < cols; ++k) dx[k] += row[k] * d;
  }
}

void rank1_acc_scalar(double* gw, const double* dy, const double* x,
                      std::size_t rows, std::size_t cols) {
  for (std::size_t j = 0; j < rows; ++j) {
    const double d = dy[j];
    double* row = gw + j * cols;
    for (std::size_t k = 0; k < cols; ++k) row[k] += d * x[k];
  }
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void ema_scalar(double rho, const double* x, double* y, std::size_t n) {
  const double w = 1.0 - rho;
  for (std::size_t i = 0; i < n; ++i) y[i] = rho * y[i] + w * x[i];
}

void adam_scalar(double* p, double* m, double* v, const double* g,
                 std::size_t n, double lr, double beta1, double beta2,
                 double eps, double bc1, double bc2) {
  const double w1 = 1.0 - beta1;
  const double w2 = 1.0 - beta2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + w1 * g[i];
    v[i] = beta2 * v[i] + w2 * (g[i] * g[i]);
    p[i] = p[i] - lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

}  // namespace

const KernelTable scalar_table = {
    dot_scalar,      sumsq_scalar, affine_scalar, matvec_t_acc_scalar,
    rank1_acc_scalar, axpy_scalar,  ema_scalar,    adam_scalar,
};

}  // namespace aflow::kernels::detail
