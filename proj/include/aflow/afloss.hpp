// The forward-process policy objective: an advantage-weighted pull of the
// clean-sample prediction toward the observed rollout, regularized toward the
// rollout model's own prediction (strength gamma) and a frozen reference
// (strength lambda). Everything is a quadratic in f_theta, so the per-sample
// curvature is exactly advantage + gamma + lambda.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aflow/errors.hpp"
#include "aflow/kernels.hpp"
#include "aflow/model.hpp"

namespace aflow {

struct ModelTriple {
  const VelocityModel* policy = nullptr;     // theta, receives gradients
  const VelocityModel* rollout = nullptr;    // EMA snapshot the samples came from
  const VelocityModel* reference = nullptr;  // frozen pretrained anchor

  void validate() const {
    if (!policy || !rollout || !reference)
      throw InputError("model triple: policy, rollout, and reference must all be set");
    if (rollout->arch() != policy->arch() || reference->arch() != policy->arch())
      throw InputError("model triple: all three models must share one architecture");
  }
};

struct AfLossResult {
  double total = 0.0;
  double adv_term = 0.0;      // A ||f - x0||^2
  double rollout_term = 0.0;  // gamma ||f - f_old||^2
  double ref_term = 0.0;      // lambda ||f - f_ref||^2
  double quad_coeff = 0.0;    // A + gamma + lambda
  std::vector<double> grad_v;  // dLoss/dv_theta at this sample
};

// Per-sample loss and its gradient w.r.t. the policy's velocity output. The
// policy forward pass is cached in ws_policy so the caller can backpropagate
// grad_v immediately afterwards; rollout/reference predictions are treated as
// constants.
inline AfLossResult advantageflow_loss(const ModelTriple& models,
                                       std::span<const double> x_t, double t,
                                       std::span<const double> cond,
                                       std::span<const double> x0,
                                       double advantage, double gamma,
                                       double lambda, Workspace& ws_policy,
                                       Workspace& ws_scratch) {
  models.validate();
  if (x0.size() != x_t.size())
    throw InputError("advantageflow_loss: x0/x_t size mismatch");
  if (!std::isfinite(advantage) || !std::isfinite(gamma) || !std::isfinite(lambda))
    throw InputError("advantageflow_loss: non-finite coefficient");

  const std::size_t d = x_t.size();
  const auto v_pol = models.policy->forward(x_t, t, cond, ws_policy);

  AfLossResult out;
  out.quad_coeff = advantage + gamma + lambda;
  out.grad_v.assign(d, 0.0);

  // f_theta and the advantage term.
  std::vector<double> f_pol(d), diff_x0(d);
  for (std::size_t i = 0; i < d; ++i) {
    f_pol[i] = x_t[i] - t * v_pol[i];
    diff_x0[i] = f_pol[i] - x0[i];
    out.adv_term += diff_x0[i] * diff_x0[i];
  }
  out.adv_term *= advantage;

  // Proximity to the rollout model's prediction.
  std::vector<double> diff_old(d);
  {
    const auto v_old = models.rollout->forward(x_t, t, cond, ws_scratch);
    for (std::size_t i = 0; i < d; ++i) {
      const double f_old = x_t[i] - t * v_old[i];
      diff_old[i] = f_pol[i] - f_old;
      out.rollout_term += diff_old[i] * diff_old[i];
    }
    out.rollout_term *= gamma;
  }

  // Proximity to the frozen reference.
  std::vector<double> diff_ref(d);
  {
    const auto v_ref = models.reference->forward(x_t, t, cond, ws_scratch);
    for (std::size_t i = 0; i < d; ++i) {
      const double f_ref = x_t[i] - t * v_ref[i];
      diff_ref[i] = f_pol[i] - f_ref;
      out.ref_term += diff_ref[i] * diff_ref[i];
    }
    out.ref_term *= lambda;
  }

  out.total = out.adv_term + out.rollout_term + out.ref_term;
  if (!std::isfinite(out.total))
    throw NumericError("advantageflow_loss: non-finite loss at t = " +
                       std::to_string(t));
  // dLoss/df = 2 [A (f-x0) + gamma (f-f_old) + lambda (f-f_ref)]; df/dv = -t.
  for (std::size_t i = 0; i < d; ++i) {
    const double df = 2.0 * (advantage * diff_x0[i] + gamma * diff_old[i] +
                             lambda * diff_ref[i]);
    out.grad_v[i] = -t * df;
  }
  return out;
}

// rollout <- rho * rollout + (1 - rho) * policy, elementwise over parameters.
inline void ema_update(VelocityModel& rollout, const VelocityModel& policy,
                       double rho) {
  if (rollout.arch() != policy.arch())
    throw InputError("ema_update: architecture mismatch");
  if (!(rho >= 0.0 && rho <= 1.0))
    throw ConfigError("ema_update: rho must lie in [0, 1]");
  kernels::ema(rho, policy.params().data(), rollout.params().data(),
               rollout.params().size());
}

}  // namespace aflow
