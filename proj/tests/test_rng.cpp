#include "aflow/rng.hpp"

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "doctest.h"

using aflow::Rng;

TEST_CASE("same seed reproduces the exact stream") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(7), d(7);
  for (int i = 0; i < 100; ++i) CHECK(c.gauss() == d.gauss());
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += (a.next_u64() == b.next_u64());
  CHECK(same == 0);
}

TEST_CASE("split children are independent of parent consumption") {
  Rng fresh(99);
  Rng child_before = fresh.split(5);
  Rng consumed(99);
  for (int i = 0; i < 57; ++i) consumed.next_u64();
  Rng child_after = consumed.split(5);
  for (int i = 0; i < 32; ++i)
    CHECK(child_before.next_u64() == child_after.next_u64());
}

TEST_CASE("split children with distinct tags differ from each other and parent") {
  Rng parent(3);
  Rng c1 = parent.split(1);
  Rng c2 = parent.split(2);
  Rng p2(3);
  std::set<std::uint64_t> firsts = {c1.next_u64(), c2.next_u64(), p2.next_u64()};
  CHECK(firsts.size() == 3);
}

TEST_CASE("next_double lies in [0,1) and uniform respects bounds") {
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double x = rng.uniform(-2.5, 4.0);
    CHECK(x >= -2.5);
    CHECK(x < 4.0);
  }
}

TEST_CASE("below(n) is bounded and hits all residues") {
  Rng rng(13);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const std::uint64_t v = rng.below(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("gauss matches standard normal moments") {
  Rng rng(2024);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0, finite_tail = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.gauss();
    sum += x;
    sumsq += x * x;
    if (std::abs(x) > 5.0) finite_tail += 1.0;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);       // ~4.5 standard errors
  CHECK(std::abs(var - 1.0) < 0.02);  // ~6 standard errors
  CHECK(finite_tail / n < 1e-3);      // P(|Z|>5) ~ 6e-7
}

TEST_CASE("gauss_vector equals sequential gauss draws") {
  Rng a(5), b(5);
  const std::vector<double> v = a.gauss_vector(31);
  REQUIRE(v.size() == 31);
  for (double x : v) CHECK(x == b.gauss());
}
