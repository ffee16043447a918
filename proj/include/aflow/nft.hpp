// Preference-weighted branch loss over implicit positive/negative policies
// and its numeric equivalence to the forward-process objective. The positive
// branch blends toward the current policy, the negative branch away from it:
//   v+ = (1-beta) v_old + beta v_theta,   v- = (1+beta) v_old - beta v_theta
//   branch loss = r ||v+ - v||^2 + (1-r) ||v- - v||^2
// In prediction space (replace each velocity residual by the implied
// clean-sample residual) its gradient matches the advantage-weighted loss
// with advantage beta*A and proximity weight beta*(beta - A); the value gap
// (1 - beta A) t^2 ||v_old - v||^2 carries no dependence on theta.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aflow/afloss.hpp"
#include "aflow/errors.hpp"
#include "aflow/flow.hpp"
#include "aflow/model.hpp"
#include "aflow/rng.hpp"

namespace aflow {

enum class NftSpace { velocity, prediction };

struct NftBranchInputs {
  double beta = 1.0;    // >= 0; 0 detaches the loss from theta entirely
  double r_norm = 0.5;  // normalized optimality score in [0, 1]
  std::span<const double> v_target;  // v = eps - x0 for the drawn pair

  double advantage() const { return 2.0 * r_norm - 1.0; }

  void validate(std::size_t data_dim) const {
    if (!(beta >= 0.0) || !std::isfinite(beta))
      throw InputError("nft: beta must be finite and >= 0");
    if (!(r_norm >= 0.0 && r_norm <= 1.0))
      throw InputError("nft: r_norm = " + std::to_string(r_norm) +
                       " outside [0, 1]");
    if (v_target.size() != data_dim)
      throw InputError("nft: velocity target has size " +
                       std::to_string(v_target.size()) + ", expected " +
                       std::to_string(data_dim));
  }
};

struct NftLossResult {
  double loss = 0.0;
  double advantage = 0.0;  // 2 r_norm - 1
  // Velocity-space diagnostics: e = v_old - v, d = v_theta - v_old.
  double e_sqnorm = 0.0;
  double d_sqnorm = 0.0;
  double ed_inner = 0.0;
  std::vector<double> grad_v;  // dLoss/dv_theta
};

inline NftLossResult nft_branch_loss(const VelocityModel& policy,
                                     const VelocityModel& rollout,
                                     const NftBranchInputs& inputs,
                                     std::span<const double> x0,
                                     std::span<const double> x_t, double t,
                                     std::span<const double> cond,
                                     NftSpace space, Workspace& ws_policy,
                                     Workspace& ws_scratch) {
  if (rollout.arch() != policy.arch())
    throw InputError("nft: policy and rollout architectures differ");
  const std::size_t d = policy.arch().data_dim;
  inputs.validate(d);
  if (x0.size() != d || x_t.size() != d)
    throw InputError("nft: x0/x_t dimension mismatch");

  const double beta = inputs.beta;
  const double r = inputs.r_norm;
  const auto v_pol = policy.forward(x_t, t, cond, ws_policy);
  const auto v_old = rollout.forward(x_t, t, cond, ws_scratch);

  NftLossResult out;
  out.advantage = inputs.advantage();
  out.grad_v.assign(d, 0.0);

  for (std::size_t i = 0; i < d; ++i) {
    const double e = v_old[i] - inputs.v_target[i];
    const double dd = v_pol[i] - v_old[i];
    out.e_sqnorm += e * e;
    out.d_sqnorm += dd * dd;
    out.ed_inner += e * dd;

    const double v_plus = (1.0 - beta) * v_old[i] + beta * v_pol[i];
    const double v_minus = (1.0 + beta) * v_old[i] - beta * v_pol[i];
    if (space == NftSpace::velocity) {
      const double rp = v_plus - inputs.v_target[i];
      const double rm = v_minus - inputs.v_target[i];
      out.loss += r * rp * rp + (1.0 - r) * rm * rm;
      out.grad_v[i] = 2.0 * beta * (r * rp - (1.0 - r) * rm);
    } else {
      const double rp = (x_t[i] - t * v_plus) - x0[i];
      const double rm = (x_t[i] - t * v_minus) - x0[i];
      out.loss += r * rp * rp + (1.0 - r) * rm * rm;
      out.grad_v[i] = 2.0 * t * beta * ((1.0 - r) * rm - r * rp);
    }
  }
  return out;
}

struct NftEquivalenceReport {
  double beta = 0.0;
  std::size_t n_samples = 0;
  double max_grad_abs_diff = 0.0;   // vs the matched advantage-weighted loss
  double max_gap_formula_dev = 0.0;  // gap vs (1 - beta A) t^2 ||e||^2
  double max_gap_theta_dev = 0.0;    // gap drift under a theta perturbation
  double grad_tol = 1e-8;
  double gap_tol = 1e-10;
  bool pass = false;
};

// Draws fresh (x0, eps, t, c, r_norm) per sample and compares, in prediction
// space, the branch-loss gradient against the advantage-weighted loss with
// advantage beta*A, proximity weight beta*(beta - A), and no reference term.
// t is kept in [0.05, 1] so the prediction-space scaling stays well away
// from the degenerate t = 0 point. The policy is perturbed (and restored) to
// certify that the loss gap carries no theta dependence.
inline NftEquivalenceReport equivalence_check(VelocityModel& policy,
                                              const VelocityModel& rollout,
                                              double beta,
                                              std::size_t n_samples, Rng& rng) {
  if (rollout.arch() != policy.arch())
    throw InputError("equivalence_check: architecture mismatch");
  if (n_samples < 1) throw InputError("equivalence_check: need >= 1 sample");

  const std::size_t d = policy.arch().data_dim;
  const std::size_t cd = policy.arch().cond_dim;
  NftEquivalenceReport rep;
  rep.beta = beta;
  rep.n_samples = n_samples;

  Workspace wsp, wss;
  GradVector g_nft, g_af;
  const ModelTriple triple{&policy, &rollout, &rollout};  // lambda = 0

  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto x0 = rng.gauss_vector(d);
    const auto eps = rng.gauss_vector(d);
    const auto cond = rng.gauss_vector(cd);
    const double t = rng.uniform(0.05, 1.0);
    const double r_norm = rng.next_double();
    const auto interp = interpolate(x0, eps, t);

    NftBranchInputs inputs;
    inputs.beta = beta;
    inputs.r_norm = r_norm;
    inputs.v_target = interp.velocity_target;
    const double A = inputs.advantage();

    const auto nft = nft_branch_loss(policy, rollout, inputs, x0, interp.x_t,
                                     t, cond, NftSpace::prediction, wsp, wss);
    policy.backward(wsp, nft.grad_v, g_nft, /*accumulate=*/false);

    const auto af =
        advantageflow_loss(triple, interp.x_t, t, cond, x0, beta * A,
                           beta * (beta - A), 0.0, wsp, wss);
    policy.backward(wsp, af.grad_v, g_af, /*accumulate=*/false);

    for (std::size_t p = 0; p < g_nft.size(); ++p)
      rep.max_grad_abs_diff =
          std::max(rep.max_grad_abs_diff, std::abs(g_nft[p] - g_af[p]));

    const double gap = nft.loss - af.total;
    const double formula = (1.0 - beta * A) * t * t * nft.e_sqnorm;
    rep.max_gap_formula_dev =
        std::max(rep.max_gap_formula_dev, std::abs(gap - formula));

    // Move theta, re-evaluate both losses: the gap must not move.
    auto& params = policy.params();
    const auto saved = params;
    for (double& p : params) p += 0.01 * rng.gauss();
    const auto nft2 = nft_branch_loss(policy, rollout, inputs, x0, interp.x_t,
                                      t, cond, NftSpace::prediction, wsp, wss);
    const auto af2 =
        advantageflow_loss(triple, interp.x_t, t, cond, x0, beta * A,
                           beta * (beta - A), 0.0, wsp, wss);
    params = saved;
    rep.max_gap_theta_dev =
        std::max(rep.max_gap_theta_dev, std::abs((nft2.loss - af2.total) - gap));
  }

  rep.pass = rep.max_grad_abs_diff <= rep.grad_tol &&
             rep.max_gap_formula_dev <= rep.gap_tol &&
             rep.max_gap_theta_dev <= rep.gap_tol;
  return rep;
}

}  // namespace aflow
