// NEON backend (aarch64, 2-wide f64). Two vector accumulators emulate the
// four-partial-sum reduction of the scalar reference, so results stay
// bit-identical; tails run scalar and no FMA is emitted.
#if defined(__aarch64__) || defined(_M_ARM64)

#include <arm_neon.h>

#include <cmath>
#include <cstddef>

#include "kernels_table.hpp"

namespace aflow::kernels::detail {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  float64x2_t acc01 = vdupq_n_f64(0.0);  // partial sums s0, s1
  float64x2_t acc23 = vdupq_n_f64(0.0);  // partial sums s2, s3
  for (std::size_t k = 0; k < n4; k += 4) {
    acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(a + k), vld1q_f64(b + k)));
    acc23 = vaddq_f64(acc23,
                      vmulq_f64(vld1q_f64(a + k + 2), vld1q_f64(b + k + 2)));
  }
  double s = vaddvq_f64(acc01) + vaddvq_f64(acc23);
  for (std::size_t k = n4; k < n; ++k) s += a[k] * b[k];
  return s;
}

double sumsq_neon(const double* a, std::size_t n) { return dot_neon(a, a, n); }

void affine_neon(const double* w, const double* bias, const double* x,
                 double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t j = 0; j < rows; ++j)
    y[j] = bias[j] + dot_neon(w + j * cols, x, cols);
}

void matvec_t_acc_neon(const double* w, const double* dy, double* dx,
                       std::size_t rows, std::size_t cols) {
  const std::size_t c2 = cols & ~std::size_t{1};
  for (std::size_t j = 0; j < rows; ++j) {
    const double d = dy[j];
    const float64x2_t dv = vdupq_n_f64(d);
    const double* row = w + j * cols;
    for (std::size_t k = 0; k < c2; k += 2) {
      const float64x2_t acc = vld1q_f64(dx + k);
      vst1q_f64(dx + k, vaddq_f64(acc, vmulq_f64(vld1q_f64(row + k), dv)));
    }
    for (std::size_t k = c2; k < cols; ++k) dx[k] += row[k] * d;
  }
}

void rank1_acc_neon(double* gw, const double* dy, const double* x,
                    std::size_t rows, std::size_t cols) {
  const std::size_t c2 = cols & ~std::size_t{1};
  for (std::size_t j = 0; j < rows; ++j) {
    const double d = dy[j];
    const float64x2_t dv = vdupq_n_f64(d);
    double* row = gw + j * cols;
    for (std::size_t k = 0; k < c2; k += 2) {
      const float64x2_t acc = vld1q_f64(row + k);
      vst1q_f64(row + k, vaddq_f64(acc, vmulq_f64(dv, vld1q_f64(x + k))));
    }
    for (std::size_t k = c2; k < cols; ++k) row[k] += d * x[k];
  }
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
  const std::size_t n2 = n & ~std::size_t{1};
  const float64x2_t av = vdupq_n_f64(a);
  for (std::size_t i = 0; i < n2; i += 2) {
    const float64x2_t yv = vld1q_f64(y + i);
    vst1q_f64(y + i, vaddq_f64(yv, vmulq_f64(av, vld1q_f64(x + i))));
  }
  for (std::size_t i = n2; i < n; ++i) y[i] += a * x[i];
}

void ema_neon(double rho, const double* x, double* y, std::size_t n) {
  const double w = 1.0 - rho;
  const std::size_t n2 = n & ~std::size_t{1};
  const float64x2_t rv = vdupq_n_f64(rho);
  const float64x2_t wv = vdupq_n_f64(w);
  for (std::size_t i = 0; i < n2; i += 2) {
    const float64x2_t yv = vld1q_f64(y + i);
    const float64x2_t xv = vld1q_f64(x + i);
    vst1q_f64(y + i, vaddq_f64(vmulq_f64(rv, yv), vmulq_f64(wv, xv)));
  }
  for (std::size_t i = n2; i < n; ++i) y[i] = rho * y[i] + w * x[i];
}

void adam_neon(double* p, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bc1,
               double bc2) {
  const double w1 = 1.0 - beta1;
  const double w2 = 1.0 - beta2;
  const std::size_t n2 = n & ~std::size_t{1};
  const float64x2_t b1v = vdupq_n_f64(beta1), w1v = vdupq_n_f64(w1);
  const float64x2_t b2v = vdupq_n_f64(beta2), w2v = vdupq_n_f64(w2);
  const float64x2_t lrv = vdupq_n_f64(lr), epsv = vdupq_n_f64(eps);
  const float64x2_t bc1v = vdupq_n_f64(bc1), bc2v = vdupq_n_f64(bc2);
  for (std::size_t i = 0; i < n2; i += 2) {
    const float64x2_t gv = vld1q_f64(g + i);
    float64x2_t mv = vld1q_f64(m + i);
    float64x2_t vv = vld1q_f64(v + i);
    mv = vaddq_f64(vmulq_f64(b1v, mv), vmulq_f64(w1v, gv));
    vv = vaddq_f64(vmulq_f64(b2v, vv), vmulq_f64(w2v, vmulq_f64(gv, gv)));
    vst1q_f64(m + i, mv);
    vst1q_f64(v + i, vv);
    const float64x2_t mhat = vdivq_f64(mv, bc1v);
    const float64x2_t denom =
        vaddq_f64(vsqrtq_f64(vdivq_f64(vv, bc2v)), epsv);
    const float64x2_t pv = vld1q_f64(p + i);
    vst1q_f64(p + i, vsubq_f64(pv, vdivq_f64(vmulq_f64(lrv, mhat), denom)));
  }
  for (std::size_t i = n2; i < n; ++i) {
    m[i] = beta1 * m[i] + w1 * g[i];
    v[i] = beta2 * v[i] + w2 * (g[i] * g[i]);
    p[i] = p[i] - lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

}  // namespace

const KernelTable neon_table = {
    dot_neon,      sumsq_neon, affine_neon, matvec_t_acc_neon,
    rank1_acc_neon, axpy_neon,  ema_neon,    adam_neon,
};

}  // namespace aflow::kernels::detail

#endif  // aarch64
