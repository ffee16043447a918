// Straight-line interpolation between data and noise, the matching velocity
// target, and the two equivalent per-sample regression losses: one in
// velocity space, one on the implied clean-sample prediction. The exact
// algebraic bridge f(x_t) - x0 = -t (v - target) makes the prediction loss
// t^2 times the velocity loss, which tests pin down to rounding error.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aflow/errors.hpp"

namespace aflow {

struct Interpolant {
  std::vector<double> x_t;              // (1-t) x0 + t eps
  double t = 0.0;
  std::vector<double> velocity_target;  // eps - x0
};

namespace detail {
inline void check_same_size(std::span<const double> a, std::span<const double> b,
                            const char* what) {
  if (a.size() != b.size())
    throw InputError(std::string(what) + ": size mismatch (" +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
}
inline void check_unit_time(double t, const char* what) {
  if (!(t >= 0.0 && t <= 1.0))
    throw InputError(std::string(what) + ": t = " + std::to_string(t) +
                     " outside [0, 1]");
}
}  // namespace detail

inline Interpolant interpolate(std::span<const double> x0,
                               std::span<const double> eps, double t) {
  detail::check_same_size(x0, eps, "interpolate");
  detail::check_unit_time(t, "interpolate");
  Interpolant out;
  out.t = t;
  out.x_t.resize(x0.size());
  out.velocity_target.resize(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    out.x_t[i] = (1.0 - t) * x0[i] + t * eps[i];
    out.velocity_target[i] = eps[i] - x0[i];
  }
  return out;
}

// Clean-sample prediction implied by a velocity field: f = x_t - t v.
inline std::vector<double> predict_clean(std::span<const double> x_t, double t,
                                         std::span<const double> v) {
  detail::check_same_size(x_t, v, "predict_clean");
  std::vector<double> f(x_t.size());
  for (std::size_t i = 0; i < x_t.size(); ++i) f[i] = x_t[i] - t * v[i];
  return f;
}

// A scalar loss together with its gradient w.r.t. the model's velocity
// output, ready to feed into VelocityModel::backward.
struct LossGrad {
  double value = 0.0;
  std::vector<double> grad_v;
};

// ||v - target||^2 per sample (sum over dimensions).
inline LossGrad flow_matching_loss(std::span<const double> v,
                                   std::span<const double> velocity_target) {
  detail::check_same_size(v, velocity_target, "flow_matching_loss");
  LossGrad out;
  out.grad_v.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - velocity_target[i];
    out.value += d * d;
    out.grad_v[i] = 2.0 * d;
  }
  return out;
}

// ||f(x_t) - x0||^2 with f = x_t - t v; gradient w.r.t. v is -t * 2 (f - x0).
inline LossGrad prediction_loss(std::span<const double> x_t, double t,
                                std::span<const double> v,
                                std::span<const double> x0) {
  detail::check_same_size(x_t, v, "prediction_loss");
  detail::check_same_size(x_t, x0, "prediction_loss");
  LossGrad out;
  out.grad_v.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = x_t[i] - t * v[i];
    const double d = f - x0[i];
    out.value += d * d;
    out.grad_v[i] = -2.0 * t * d;
  }
  return out;
}

}  // namespace aflow
