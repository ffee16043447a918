// Dense f64 kernels behind the network, optimizer and EMA inner loops.
//
// Three backends: a scalar reference, AVX2, and NEON. The active one is
// picked at runtime from CPU features (override with set_backend() or the
// AFLOW_KERNELS environment variable: "scalar", "avx2", "neon").
//
// Every backend is bit-exact against the scalar reference. The reference
// fixes the arithmetic completely:
//   * reductions (dot, sumsq, affine rows) run four interleaved partial sums
//     over the 4-aligned prefix, combined as (s0+s1)+(s2+s3), then add the
//     tail elements sequentially;
//   * accumulating kernels keep ascending index order;
//   * no FMA anywhere (the build also disables FP contraction).
// test_kernels.cpp asserts bitwise equality across backends.
#pragma once

#include <cstddef>
#include <string>

namespace aflow::kernels {

enum class Backend { scalar, avx2, neon };

Backend active_backend();
bool backend_available(Backend b);
// Throws ConfigError if the backend is not available on this CPU.
void set_backend(Backend b);
const char* backend_name(Backend b);

// sum_i a[i] * b[i]
double dot(const double* a, const double* b, std::size_t n);

// sum_i a[i]^2
double sumsq(const double* a, std::size_t n);

// y[j] = bias[j] + dot(w[j,:], x); w is row-major rows x cols.
void affine(const double* w, const double* bias, const double* x, double* y,
            std::size_t rows, std::size_t cols);

// dx[k] += sum_j w[j,k] * dy[j]; j ascends, so per-element order is fixed.
void matvec_t_acc(const double* w, const double* dy, double* dx,
                  std::size_t rows, std::size_t cols);

// gw[j,k] += dy[j] * x[k]
void rank1_acc(double* gw, const double* dy, const double* x,
               std::size_t rows, std::size_t cols);

// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);

// y[i] = rho * y[i] + (1 - rho) * x[i]
void ema(double rho, const double* x, double* y, std::size_t n);

// Fused Adam update. bc1/bc2 are the precomputed bias corrections 1 - beta^t.
//   m = b1*m + (1-b1)*g
//   v = b2*v + (1-b2)*g*g
//   p = p - lr * (m/bc1) / (sqrt(v/bc2) + eps)
void adam(double* p, double* m, double* v, const double* g, std::size_t n,
          double lr, double beta1, double beta2, double eps, double bc1,
          double bc2);

}  // namespace aflow::kernels
