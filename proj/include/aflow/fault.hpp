// Deliberate fault injection for exercising the verify suite's failure path:
// when armed, VelocityModel::backward flips the sign of the upstream gradient,
// so every analytic parameter gradient comes out negated and exactly the
// finite-difference audits must go red. Used by the `verify --inject-fault`
// flag and the harness tests; never armed in normal operation.
#pragma once

namespace aflow::fault {

inline bool& flip_grad_sign() {
  static bool armed = false;
  return armed;
}

struct ScopedGradSignFlip {
  ScopedGradSignFlip() { flip_grad_sign() = true; }
  ~ScopedGradSignFlip() { flip_grad_sign() = false; }
  ScopedGradSignFlip(const ScopedGradSignFlip&) = delete;
  ScopedGradSignFlip& operator=(const ScopedGradSignFlip&) = delete;
};

}  // namespace aflow::fault
