// Internal dispatch table shared by the kernel backends.
#pragma once

#include <cstddef>

namespace aflow::kernels::detail {

struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sumsq)(const double*, std::size_t);
  void (*affine)(const double*, const double*, const double*, double*,
                 std::size_t, std::size_t);
  void (*matvec_t_acc)(const double*, const double*, double*, std::size_t,
                       std::size_t);
  void (*rank1_acc)(double*, const double*, const double*, std::size_t,
                    std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*ema)(double, const double*, double*, std::size_t);
  void (*adam)(double*, double*, double*, const double*, std::size_t, double,
               double, double, double, double, double);
};

extern const KernelTable scalar_table;

#if defined(__x86_64__) || defined(_M_X64)
#define AFLOW_HAVE_AVX2_BACKEND 1
extern const KernelTable avx2_table;
#endif

#if defined(__aarch64__) || defined(_M_ARM64)
#define AFLOW_HAVE_NEON_BACKEND 1
extern const KernelTable neon_table;
#endif

}  // namespace aflow::kernels::detail
