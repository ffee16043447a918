// Counter-based splittable RNG. Every random draw in the project flows from
// one master seed through split() streams, so any run is reproducible from
// the seed alone and independent streams can be handed to parallel work
// without coordination.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace aflow {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(mix(seed) ^ kKeySalt)) {}

  // Output i of the stream is mix(key + GOLDEN * i): a keyed counter, not a
  // recurrence, so jumping and splitting are cheap.
  std::uint64_t next_u64() { return mix(key_ + kGolden * ++ctr_); }

  // Uniform in [0, 1), 53-bit mantissa.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Unbiased-enough bounded draw via 128-bit multiply (Lemire reduction).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  // std::normal_distribution is not used anywhere: its output is
  // implementation-defined and would break cross-toolchain reproducibility.
  double gauss() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::vector<double> gauss_vector(std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) v = gauss();
    return out;
  }

  // Derive an independent child stream. Depends only on the key and the tag,
  // not on how much of this stream has been consumed.
  Rng split(std::uint64_t tag) const {
    Rng child(0);
    child.key_ = mix(key_ ^ mix(tag + kSplitSalt));
    child.ctr_ = 0;
    child.has_spare_ = false;
    return child;
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kKeySalt = 0xA02B9FE5E0A1B4C3ull;
  static constexpr std::uint64_t kSplitSalt = 0x632BE59BD9B4E019ull;

  // splitmix64 finalizer; bijective on u64.
  static std::uint64_t mix(std::uint64_t z) {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace aflow
