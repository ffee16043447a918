// Kernel backends: the SIMD variants must reproduce the scalar reference
// bit-for-bit across awkward sizes (tails, single elements, large buffers).
#include "aflow/kernels.hpp"

#include <bit>
#include <cstdint>
#include <vector>

#include "aflow/errors.hpp"
#include "aflow/rng.hpp"
#include "doctest.h"

namespace k = aflow::kernels;

namespace {

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same_bits(a[i], b[i])) return false;
  return true;
}

std::vector<double> random_vec(aflow::Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.gauss();
  return v;
}

struct BackendGuard {
  k::Backend saved = k::active_backend();
  ~BackendGuard() { k::set_backend(saved); }
};

const std::vector<std::size_t> kSizes = {1,  2,  3,  4,  5,  7,  8,  9,
                                         15, 16, 17, 31, 33, 64, 67, 257};

}  // namespace

TEST_CASE("scalar backend is always available") {
  CHECK(k::backend_available(k::Backend::scalar));
  BackendGuard guard;
  k::set_backend(k::Backend::scalar);
  CHECK(k::active_backend() == k::Backend::scalar);
}

TEST_CASE("requesting a missing backend throws ConfigError") {
  const k::Backend missing = k::backend_available(k::Backend::avx2)
                                 ? k::Backend::neon
                                 : k::Backend::avx2;
  if (!k::backend_available(missing))
    CHECK_THROWS_AS(k::set_backend(missing), aflow::ConfigError);
}

TEST_CASE("backend names are stable") {
  CHECK(std::string(k::backend_name(k::Backend::scalar)) == "scalar");
  CHECK(std::string(k::backend_name(k::Backend::avx2)) == "avx2");
  CHECK(std::string(k::backend_name(k::Backend::neon)) == "neon");
}

TEST_CASE("scalar dot agrees with naive accumulation to rounding error") {
  BackendGuard guard;
  k::set_backend(k::Backend::scalar);
  aflow::Rng rng(42);
  for (std::size_t n : kSizes) {
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);
    double naive = 0.0;
    for (std::size_t i = 0; i < n; ++i) naive += a[i] * b[i];
    CHECK(k::dot(a.data(), b.data(), n) ==
          doctest::Approx(naive).epsilon(1e-12));
  }
}

TEST_CASE("simd backends match scalar bit-for-bit") {
  std::vector<k::Backend> simd;
  for (k::Backend b : {k::Backend::avx2, k::Backend::neon})
    if (k::backend_available(b)) simd.push_back(b);
  if (simd.empty()) {
    MESSAGE("no SIMD backend on this host; scalar-only run");
    return;
  }

  BackendGuard guard;
  aflow::Rng rng(1234);

  for (k::Backend b : simd) {
    CAPTURE(k::backend_name(b));
    for (std::size_t cols : kSizes) {
      for (std::size_t rows : {std::size_t{1}, std::size_t{3}, std::size_t{8}}) {
        CAPTURE(rows);
        CAPTURE(cols);
        const auto w = random_vec(rng, rows * cols);
        const auto x = random_vec(rng, cols);
        const auto bias = random_vec(rng, rows);
        const auto dy = random_vec(rng, rows);
        const auto g = random_vec(rng, cols);

        // --- scalar reference pass ---
        k::set_backend(k::Backend::scalar);
        const double dot_s = k::dot(x.data(), g.data(), cols);
        const double ssq_s = k::sumsq(x.data(), cols);
        std::vector<double> y_s(rows);
        k::affine(w.data(), bias.data(), x.data(), y_s.data(), rows, cols);
        std::vector<double> dx_s = random_vec(rng, cols, 0.1);
        auto dx_b = dx_s;
        k::matvec_t_acc(w.data(), dy.data(), dx_s.data(), rows, cols);
        std::vector<double> gw_s = random_vec(rng, rows * cols, 0.1);
        auto gw_b = gw_s;
        k::rank1_acc(gw_s.data(), dy.data(), x.data(), rows, cols);
        std::vector<double> ax_s = random_vec(rng, cols);
        auto ax_b = ax_s;
        k::axpy(0.37, x.data(), ax_s.data(), cols);
        std::vector<double> em_s = random_vec(rng, cols);
        auto em_b = em_s;
        k::ema(0.9, x.data(), em_s.data(), cols);
        std::vector<double> p_s = random_vec(rng, cols);
        std::vector<double> m_s = random_vec(rng, cols, 0.01);
        std::vector<double> v_s(cols, 0.5);
        auto p_b = p_s;
        auto m_b = m_s;
        auto v_b = v_s;
        k::adam(p_s.data(), m_s.data(), v_s.data(), g.data(), cols, 1e-3, 0.9,
                0.999, 1e-8, 0.1, 0.01);

        // --- SIMD pass on identical inputs ---
        k::set_backend(b);
        CHECK(same_bits(k::dot(x.data(), g.data(), cols), dot_s));
        CHECK(same_bits(k::sumsq(x.data(), cols), ssq_s));
        std::vector<double> y_b(rows);
        k::affine(w.data(), bias.data(), x.data(), y_b.data(), rows, cols);
        CHECK(same_bits(y_b, y_s));
        k::matvec_t_acc(w.data(), dy.data(), dx_b.data(), rows, cols);
        CHECK(same_bits(dx_b, dx_s));
        k::rank1_acc(gw_b.data(), dy.data(), x.data(), rows, cols);
        CHECK(same_bits(gw_b, gw_s));
        k::axpy(0.37, x.data(), ax_b.data(), cols);
        CHECK(same_bits(ax_b, ax_s));
        k::ema(0.9, x.data(), em_b.data(), cols);
        CHECK(same_bits(em_b, em_s));
        k::adam(p_b.data(), m_b.data(), v_b.data(), g.data(), cols, 1e-3, 0.9,
                0.999, 1e-8, 0.1, 0.01);
        CHECK(same_bits(p_b, p_s));
        CHECK(same_bits(m_b, m_s));
        CHECK(same_bits(v_b, v_s));
      }
    }
  }
}

TEST_CASE("adam single step matches hand-computed update") {
  BackendGuard guard;
  k::set_backend(k::Backend::scalar);
  // One parameter, fresh state, first step: bc1 = 1-beta1, bc2 = 1-beta2,
  // so m_hat = g and v_hat = g^2, giving p -= lr * g / (|g| + eps).
  double p = 2.0, m = 0.0, v = 0.0;
  const double g = -0.5, lr = 0.01, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  k::adam(&p, &m, &v, &g, 1, lr, beta1, beta2, eps, 1.0 - beta1, 1.0 - beta2);
  const double expect = 2.0 - lr * g / (std::sqrt(g * g) + eps);
  CHECK(p == doctest::Approx(expect).epsilon(1e-15));
  CHECK(m == doctest::Approx((1.0 - beta1) * g));
  CHECK(v == doctest::Approx((1.0 - beta2) * g * g));
}
