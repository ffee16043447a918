// Flat-vector optimizers over model parameters.
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "aflow/errors.hpp"
#include "aflow/kernels.hpp"

namespace aflow {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;

  void prepare(std::size_t n) {
    if (m.size() != n) {
      m.assign(n, 0.0);
      v.assign(n, 0.0);
      step = 0;
    }
  }
};

inline void require_finite(const std::vector<double>& g, const char* what) {
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!std::isfinite(g[i]))
      throw NumericError(std::string(what) + ": non-finite value at index " +
                         std::to_string(i));
}

// Bias-corrected Adam. Refuses non-finite gradients before touching any
// state, so a poisoned step cannot corrupt the moments.
inline void adam_step(std::vector<double>& params, const std::vector<double>& grad,
                      AdamState& state, const AdamConfig& cfg) {
  if (grad.size() != params.size())
    throw InputError("adam_step: gradient length " + std::to_string(grad.size()) +
                     " does not match parameter count " +
                     std::to_string(params.size()));
  require_finite(grad, "adam_step gradient");
  state.prepare(params.size());
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  kernels::adam(params.data(), state.m.data(), state.v.data(), grad.data(),
                params.size(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, bc1, bc2);
}

inline void sgd_step(std::vector<double>& params, const std::vector<double>& grad,
                     double lr) {
  if (grad.size() != params.size())
    throw InputError("sgd_step: gradient length does not match parameter count");
  require_finite(grad, "sgd_step gradient");
  kernels::axpy(-lr, grad.data(), params.data(), params.size());
}

}  // namespace aflow
