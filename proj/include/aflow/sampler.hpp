// Generation by integrating the learned velocity field from noise (t=1) to
// data (t=0) on a uniform grid. The deterministic path is plain Euler; the
// stochastic path adds noise with scale sigma(t) = sigma_scale * sqrt(t) and
// the matching correction drift toward the predicted noise endpoint, and
// reports exact per-step Gaussian transition log-densities.
#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "aflow/errors.hpp"
#include "aflow/model.hpp"
#include "aflow/rng.hpp"

namespace aflow {

enum class SampleMode { ode, sde };

inline const char* sample_mode_name(SampleMode m) {
  return m == SampleMode::ode ? "ode" : "sde";
}

inline SampleMode sample_mode_from_name(const std::string& s) {
  if (s == "ode") return SampleMode::ode;
  if (s == "sde") return SampleMode::sde;
  throw ConfigError("unknown sampler mode '" + s + "' (expected ode or sde)");
}

struct SamplerConfig {
  int steps = 10;
  SampleMode mode = SampleMode::ode;
  double sigma_scale = 0.3;  // sigma(t) = sigma_scale * sqrt(t); sde only
  // Clamp on t in the correction-drift denominator; <= 0 selects dt/2.
  double t_floor = -1.0;

  void validate() const {
    if (steps < 1) throw ConfigError("sampler: steps must be >= 1");
    if (!(sigma_scale >= 0.0) || !std::isfinite(sigma_scale))
      throw ConfigError("sampler: sigma_scale must be finite and >= 0");
  }
  double dt() const { return 1.0 / static_cast<double>(steps); }
  double effective_t_floor() const { return t_floor > 0.0 ? t_floor : 0.5 * dt(); }
};

// State before step k: x at time t = 1 - k*dt.
struct OdeStep {
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> v;
};

struct SdeStep {
  double t = 0.0;
  double std = 0.0;       // transition std (per dimension)
  double logprob = 0.0;   // log N(x_next; mean, std^2 I)
  std::vector<double> x;  // state at time t
  std::vector<double> v;
  std::vector<double> mean;
  std::vector<double> x_next;
};

inline double gaussian_logpdf_diag(std::span<const double> x,
                                   std::span<const double> mean, double std) {
  if (x.size() != mean.size())
    throw InputError("gaussian_logpdf_diag: size mismatch");
  if (!(std > 0.0))
    throw InputError("gaussian_logpdf_diag: std must be positive");
  constexpr double half_log_2pi = 0.91893853320467274178;  // 0.5*log(2*pi)
  double lp = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = (x[i] - mean[i]) / std;
    lp += -half_log_2pi - std::log(std) - 0.5 * z * z;
  }
  return lp;
}

namespace detail {
inline void check_state_finite(std::span<const double> x, int step, double t) {
  for (double xi : x)
    if (!std::isfinite(xi))
      throw NumericError("sampler diverged at step " + std::to_string(step) +
                         " (t = " + std::to_string(t) + "): non-finite state");
}
}  // namespace detail

// Euler integration of dx/dt = v(x, t, c) from t=1 down to t=0.
inline std::vector<double> sample_ode(const VelocityModel& model,
                                      std::span<const double> x1,
                                      std::span<const double> cond,
                                      const SamplerConfig& cfg,
                                      std::vector<OdeStep>* trace = nullptr) {
  cfg.validate();
  const double dt = cfg.dt();
  std::vector<double> x(x1.begin(), x1.end());
  Workspace ws;
  if (trace) trace->clear();
  for (int k = 0; k < cfg.steps; ++k) {
    const double t = 1.0 - k * dt;
    detail::check_state_finite(x, k, t);
    const auto v = model.forward(x, t, cond, ws);
    if (trace) {
      OdeStep rec;
      rec.t = t;
      rec.x = x;
      rec.v.assign(v.begin(), v.end());
      trace->push_back(std::move(rec));
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= v[i] * dt;
  }
  detail::check_state_finite(x, cfg.steps, 0.0);
  return x;
}

// Stochastic sampler sharing the ODE's marginals. Per step at time t:
//   x_hat1 = x + (1-t) v                   (predicted noise endpoint)
//   mean   = x - [v - sigma_t^2/(2 t~) * x_hat1] dt,  t~ = max(t, t_floor)
//   x'     = mean + sigma_t sqrt(dt) * xi,  xi ~ N(0, I)
// sigma_scale = 0 degenerates to the exact deterministic Euler step (std and
// logprob recorded as 0).
inline std::vector<double> sample_sde(const VelocityModel& model,
                                      std::span<const double> x1,
                                      std::span<const double> cond,
                                      const SamplerConfig& cfg, Rng& rng,
                                      std::vector<SdeStep>* trace = nullptr,
                                      double* total_logprob = nullptr) {
  cfg.validate();
  const double dt = cfg.dt();
  const double tf = cfg.effective_t_floor();
  std::vector<double> x(x1.begin(), x1.end());
  std::vector<double> mean(x.size());
  Workspace ws;
  if (trace) trace->clear();
  if (total_logprob) *total_logprob = 0.0;

  for (int k = 0; k < cfg.steps; ++k) {
    const double t = 1.0 - k * dt;
    detail::check_state_finite(x, k, t);
    const auto v = model.forward(x, t, cond, ws);

    SdeStep rec;
    if (trace) {
      rec.t = t;
      rec.x = x;
      rec.v.assign(v.begin(), v.end());
    }

    if (cfg.sigma_scale == 0.0) {
      // Deterministic limit: bitwise-identical to the ODE step.
      for (std::size_t i = 0; i < x.size(); ++i) x[i] -= v[i] * dt;
      if (trace) {
        rec.mean = x;
        rec.x_next = x;
        trace->push_back(std::move(rec));
      }
      continue;
    }

    const double sigma_t = cfg.sigma_scale * std::sqrt(t);
    const double coef = sigma_t * sigma_t / (2.0 * std::max(t, tf));
    const double std_step = sigma_t * std::sqrt(dt);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double x_hat1 = x[i] + (1.0 - t) * v[i];
      mean[i] = x[i] - (v[i] - coef * x_hat1) * dt;
    }
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = mean[i] + std_step * rng.gauss();
    // Evaluated from the realized state so a later recomputation of the
    // transition density reproduces this value bit-for-bit.
    const double lp = gaussian_logpdf_diag(x, mean, std_step);
    if (total_logprob) *total_logprob += lp;
    if (trace) {
      rec.std = std_step;
      rec.logprob = lp;
      rec.mean = mean;
      rec.x_next = x;
      trace->push_back(std::move(rec));
    }
  }
  detail::check_state_finite(x, cfg.steps, 0.0);
  return x;
}

}  // namespace aflow
