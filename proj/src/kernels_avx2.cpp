// AVX2 backend. Mirrors the scalar reference arithmetic exactly: vector
// lanes play the role of the four interleaved partial sums, horizontal
// combines are (s0+s1)+(s2+s3), tails run scalar, and there is no FMA.
#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstddef>

#include "kernels_table.hpp"

namespace aflow::kernels::detail {
namespace {

// (l0+l1) + (l2+l3)
inline double hsum4(__m256d acc) {
  const __m128d lo = _mm256_castpd256_pd128(acc);
  const __m128d hi = _mm256_extractf128_pd(acc, 1);
  const __m128d lo_s = _mm_hadd_pd(lo, lo);
  const __m128d hi_s = _mm_hadd_pd(hi, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo_s, hi_s));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t k = 0; k < n4; k += 4) {
    const __m256d av = _mm256_loadu_pd(a + k);
    const __m256d bv = _mm256_loadu_pd(b + k);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(av, bv));
  }
  double s = hsum4(acc);
  for (std::size_t k = n4; k < n; ++k) s += a[k] * b[k];
  return s;
}

double sumsq_avx2(const double* a, std::size_t n) { return dot_avx2(a, a, n); }

void affine_avx2(const double* w, const double* bias, const double* x,
                 double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t j = 0; j < rows; ++j)
    y[j] = bias[j] + dot_avx2(w + j * cols, x, cols);
}

void matvec_t_acc_avx2(const double* w, const double* dy, double* dx,
                       std::size_t rows, std::size_t cols) {
  const std::size_t c4 = cols & ~std::size_t{3};
  for (std::size_t j = 0; j < rows; ++j) {
    const double d = dy[j];
    const __m256d dv = _mm256_set1_pd(d);
    const double* row = w + j * cols;
    for (std::size_t k = 0; k < c4; k += 4) {
      const __m256d acc = _mm256_loadu_pd(dx + k);
      const __m256d rv = _mm256_loadu_pd(row + k);
      _mm256_storeu_pd(dx + k, _mm256_add_pd(acc, _mm256_mul_pd(rv, dv)));
    }
    for (std::size_t k = c4; k < cols; ++k) dx[k] += row[k] * d;
  }
}

void rank1_acc_avx2(double* gw, const double* dy, const double* x,
                    std::size_t rows, std::size_t cols) {
  const std::size_t c4 = cols & ~std::size_t{3};
  for (std::size_t j = 0; j < rows; ++j) {
    const double d = dy[j];
    const __m256d dv = _mm256_set1_pd(d);
    double* row = gw + j * cols;
    for (std::size_t k = 0; k < c4; k += 4) {
      const __m256d acc = _mm256_loadu_pd(row + k);
      const __m256d xv = _mm256_loadu_pd(x + k);
      _mm256_storeu_pd(row + k, _mm256_add_pd(acc, _mm256_mul_pd(dv, xv)));
    }
    for (std::size_t k = c4; k < cols; ++k) row[k] += d * x[k];
  }
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d av = _mm256_set1_pd(a);
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d yv = _mm256_loadu_pd(y + i);
    const __m256d xv = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(yv, _mm256_mul_pd(av, xv)));
  }
  for (std::size_t i = n4; i < n; ++i) y[i] += a * x[i];
}

void ema_avx2(double rho, const double* x, double* y, std::size_t n) {
  const double w = 1.0 - rho;
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d rv = _mm256_set1_pd(rho);
  const __m256d wv = _mm256_set1_pd(w);
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d yv = _mm256_loadu_pd(y + i);
    const __m256d xv = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(
        y + i, _mm256_add_pd(_mm256_mul_pd(rv, yv), _mm256_mul_pd(wv, xv)));
  }
  for (std::size_t i = n4; i < n; ++i) y[i] = rho * y[i] + w * x[i];
}

void adam_avx2(double* p, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bc1,
               double bc2) {
  const double w1 = 1.0 - beta1;
  const double w2 = 1.0 - beta2;
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d b1v = _mm256_set1_pd(beta1), w1v = _mm256_set1_pd(w1);
  const __m256d b2v = _mm256_set1_pd(beta2), w2v = _mm256_set1_pd(w2);
  const __m256d lrv = _mm256_set1_pd(lr), epsv = _mm256_set1_pd(eps);
  const __m256d bc1v = _mm256_set1_pd(bc1), bc2v = _mm256_set1_pd(bc2);
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    mv = _mm256_add_pd(_mm256_mul_pd(b1v, mv), _mm256_mul_pd(w1v, gv));
    vv = _mm256_add_pd(_mm256_mul_pd(b2v, vv),
                       _mm256_mul_pd(w2v, _mm256_mul_pd(gv, gv)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_div_pd(mv, bc1v);
    const __m256d denom =
        _mm256_add_pd(_mm256_sqrt_pd(_mm256_div_pd(vv, bc2v)), epsv);
    const __m256d pv = _mm256_loadu_pd(p + i);
    _mm256_storeu_pd(
        p + i,
        _mm256_sub_pd(pv, _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom)));
  }
  for (std::size_t i = n4; i < n; ++i) {
    m[i] = beta1 * m[i] + w1 * g[i];
    v[i] = beta2 * v[i] + w2 * (g[i] * g[i]);
    p[i] = p[i] - lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

}  // namespace

const KernelTable avx2_table = {
    dot_avx2,      sumsq_avx2, affine_avx2, matvec_t_acc_avx2,
    rank1_acc_avx2, axpy_avx2,  ema_avx2,    adam_avx2,
};

}  // namespace aflow::kernels::detail

#endif  // x86-64
