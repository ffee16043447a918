// Runtime backend selection. The scalar table is always present; SIMD tables
// are linked in when compiled for the matching architecture and chosen at
// startup (or via the AFLOW_KERNELS environment variable: scalar|avx2|neon).
#include "aflow/kernels.hpp"

#include <cstdlib>
#include <string>

#include "aflow/errors.hpp"
#include "kernels_table.hpp"

namespace aflow::kernels {
namespace {

using detail::KernelTable;

const KernelTable* table_for(Backend b) {
  switch (b) {
    case Backend::scalar:
      return &detail::scalar_table;
#if defined(AFLOW_HAVE_AVX2_BACKEND)
    case Backend::avx2:
      return &detail::avx2_table;
#endif
#if defined(AFLOW_HAVE_NEON_BACKEND)
    case Backend::neon:
      return &detail::neon_table;
#endif
    default:
      return nullptr;
  }
}

bool cpu_supports(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(AFLOW_HAVE_AVX2_BACKEND)
      return __builtin_cpu_supports("avx2") != 0;
#else
      return false;
#endif
    case Backend::neon:
      // NEON f64 is baseline on aarch64; the table exists iff we built for it.
      return table_for(Backend::neon) != nullptr;
  }
  return false;
}

Backend detect_default() {
  if (const char* env = std::getenv("AFLOW_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return Backend::scalar;
    if (want == "avx2" && backend_available(Backend::avx2)) return Backend::avx2;
    if (want == "neon" && backend_available(Backend::neon)) return Backend::neon;
    // Unknown or unavailable request: fall through to auto-detection.
  }
  if (backend_available(Backend::avx2)) return Backend::avx2;
  if (backend_available(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

struct Active {
  Backend backend;
  const KernelTable* table;
};

Active& active() {
  static Active a = [] {
    const Backend b = detect_default();
    return Active{b, table_for(b)};
  }();
  return a;
}

}  // namespace

bool backend_available(Backend b) {
  return table_for(b) != nullptr && cpu_supports(b);
}

Backend active_backend() { return active().backend; }

void set_backend(Backend b) {
  if (!backend_available(b))
    throw ConfigError(std::string("kernel backend not available on this host: ") +
                      backend_name(b));
  active() = Active{b, table_for(b)};
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "unknown";
}

double dot(const double* a, const double* b, std::size_t n) {
  return active().table->dot(a, b, n);
}

double sumsq(const double* a, std::size_t n) { return active().table->sumsq(a, n); }

void affine(const double* w, const double* bias, const double* x, double* y,
            std::size_t rows, std::size_t cols) {
  active().table->affine(w, bias, x, y, rows, cols);
}

void matvec_t_acc(const double* w, const double* dy, double* dx,
                  std::size_t rows, std::size_t cols) {
  active().table->matvec_t_acc(w, dy, dx, rows, cols);
}

void rank1_acc(double* gw, const double* dy, const double* x, std::size_t rows,
               std::size_t cols) {
  active().table->rank1_acc(gw, dy, x, rows, cols);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  active().table->axpy(a, x, y, n);
}

void ema(double rho, const double* x, double* y, std::size_t n) {
  active().table->ema(rho, x, y, n);
}

void adam(double* p, double* m, double* v, const double* g, std::size_t n,
          double lr, double beta1, double beta2, double eps, double bc1,
          double bc2) {
  active().table->adam(p, m, v, g, n, lr, beta1, beta2, eps, bc1, bc2);
}

}  // namespace aflow::kernels
