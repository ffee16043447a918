// Self-contained property suites behind the `verify` subcommand and the
// acceptance gate: finite-difference gradient audits for every loss, the
// t^2 loss identity, the tilted-target and natural-gradient oracles, the
// two-anchor variance comparison, the branch-loss equivalence, and the
// degenerate-input contracts. Each check is deterministic given its seed.
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "aflow/advantage.hpp"
#include "aflow/afloss.hpp"
#include "aflow/flow.hpp"
#include "aflow/grad_check.hpp"
#include "aflow/model.hpp"
#include "aflow/nft.hpp"
#include "aflow/oracles.hpp"
#include "aflow/rng.hpp"
#include "aflow/sampler.hpp"

namespace aflow {

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;  // the measured statistic (worst case over the suite)
  double bound = 0.0;  // what the statistic must stay within
  std::string detail;
};

namespace detail {

// A rotation of small architectures so gradient audits cover both
// activations, multiple depths, and conditional inputs.
inline ArchSpec audit_arch(std::size_t i) {
  static const std::vector<ArchSpec> specs = {
      ArchSpec{1, 0, {6}, Activation::tanh},
      ArchSpec{2, 1, {8, 4}, Activation::silu},
      ArchSpec{3, 0, {6, 6}, Activation::tanh},
      ArchSpec{2, 2, {10}, Activation::silu},
      ArchSpec{1, 1, {4, 4, 4}, Activation::tanh},
  };
  return specs[i % specs.size()];
}

struct AuditDraw {
  std::vector<double> x0, eps, cond;
  double t = 0.5;
  Interpolant interp;
};

inline AuditDraw audit_draw(const ArchSpec& arch, Rng& rng) {
  AuditDraw d;
  d.x0 = rng.gauss_vector(arch.data_dim);
  d.eps = rng.gauss_vector(arch.data_dim);
  d.cond = rng.gauss_vector(arch.cond_dim);
  d.t = rng.uniform(0.05, 0.95);
  d.interp = interpolate(d.x0, d.eps, d.t);
  return d;
}

inline void fold_grad_report(CheckResult& out, const GradCheckReport& rep) {
  out.value = std::max(out.value, rep.max_rel_err);
  out.pass = out.pass && rep.pass;
}

}  // namespace detail

// --- gradient audits (finite differences vs backward) ----------------------

inline CheckResult check_grad_flow_matching(std::uint64_t seed,
                                            std::size_t n_models = 5) {
  CheckResult out{"grad_flow_matching", true, 0.0, 1e-5, ""};
  Rng rng(seed);
  for (std::size_t i = 0; i < n_models; ++i) {
    Rng stream = rng.split(i);
    auto model = VelocityModel::xavier(detail::audit_arch(i), stream);
    const auto d = detail::audit_draw(model.arch(), stream);
    Workspace ws;
    const auto v = model.forward(d.interp.x_t, d.t, d.cond, ws);
    const auto lg = flow_matching_loss(v, d.interp.velocity_target);
    GradVector g;
    model.backward(ws, lg.grad_v, g, /*accumulate=*/false);
    auto loss = [&] {
      Workspace w;
      const auto vv = model.forward(d.interp.x_t, d.t, d.cond, w);
      return flow_matching_loss(vv, d.interp.velocity_target).value;
    };
    detail::fold_grad_report(out, grad_check(model, loss, g, stream));
  }
  return out;
}

inline CheckResult check_grad_prediction_loss(std::uint64_t seed,
                                              std::size_t n_models = 5) {
  CheckResult out{"grad_prediction_loss", true, 0.0, 1e-5, ""};
  Rng rng(seed + 1);
  for (std::size_t i = 0; i < n_models; ++i) {
    Rng stream = rng.split(i);
    auto model = VelocityModel::xavier(detail::audit_arch(i + 1), stream);
    const auto d = detail::audit_draw(model.arch(), stream);
    Workspace ws;
    const auto v = model.forward(d.interp.x_t, d.t, d.cond, ws);
    const auto lg = prediction_loss(d.interp.x_t, d.t, v, d.x0);
    GradVector g;
    model.backward(ws, lg.grad_v, g, /*accumulate=*/false);
    auto loss = [&] {
      Workspace w;
      const auto vv = model.forward(d.interp.x_t, d.t, d.cond, w);
      return prediction_loss(d.interp.x_t, d.t, vv, d.x0).value;
    };
    detail::fold_grad_report(out, grad_check(model, loss, g, stream));
  }
  return out;
}

inline CheckResult check_grad_advantageflow(std::uint64_t seed,
                                            GammaSchedule schedule,
                                            std::size_t n_models = 5) {
  GammaConfig gcfg;
  gcfg.schedule = schedule;
  CheckResult out{std::string("grad_advantageflow_") +
                      gamma_schedule_name(schedule),
                  true, 0.0, 1e-5, ""};
  Rng rng(seed + 2);
  for (std::size_t i = 0; i < n_models; ++i) {
    Rng stream = rng.split(i);
    const auto arch = detail::audit_arch(i + 2);
    auto policy = VelocityModel::xavier(arch, stream);
    const auto rollout = VelocityModel::xavier(arch, stream);
    const auto reference = VelocityModel::xavier(arch, stream);
    const ModelTriple triple{&policy, &rollout, &reference};
    const auto d = detail::audit_draw(arch, stream);
    const double a = stream.uniform(-1.0, 1.0);
    const double gamma = gamma_value(gcfg, a);
    const double lambda = 0.001;

    Workspace w1, w2;
    const auto res = advantageflow_loss(triple, d.interp.x_t, d.t, d.cond,
                                        d.x0, a, gamma, lambda, w1, w2);
    GradVector g;
    policy.backward(w1, res.grad_v, g, /*accumulate=*/false);
    auto loss = [&] {
      Workspace u1, u2;
      return advantageflow_loss(triple, d.interp.x_t, d.t, d.cond, d.x0, a,
                                gamma, lambda, u1, u2)
          .total;
    };
    detail::fold_grad_report(out, grad_check(policy, loss, g, stream));
  }
  return out;
}

inline CheckResult check_grad_nft_branch(std::uint64_t seed,
                                         std::size_t n_models = 5) {
  CheckResult out{"grad_nft_branch", true, 0.0, 1e-5, ""};
  Rng rng(seed + 3);
  for (std::size_t i = 0; i < n_models; ++i) {
    Rng stream = rng.split(i);
    const auto arch = detail::audit_arch(i + 3);
    auto policy = VelocityModel::xavier(arch, stream);
    const auto rollout = VelocityModel::xavier(arch, stream);
    const auto d = detail::audit_draw(arch, stream);

    NftBranchInputs in;
    in.beta = stream.uniform(0.1, 1.0);
    in.r_norm = stream.next_double();
    in.v_target = d.interp.velocity_target;
    const auto space = i % 2 == 0 ? NftSpace::prediction : NftSpace::velocity;

    Workspace w1, w2;
    const auto res = nft_branch_loss(policy, rollout, in, d.x0, d.interp.x_t,
                                     d.t, d.cond, space, w1, w2);
    GradVector g;
    policy.backward(w1, res.grad_v, g, /*accumulate=*/false);
    auto loss = [&] {
      Workspace u1, u2;
      return nft_branch_loss(policy, rollout, in, d.x0, d.interp.x_t, d.t,
                             d.cond, space, u1, u2)
          .loss;
    };
    detail::fold_grad_report(out, grad_check(policy, loss, g, stream));
  }
  return out;
}

// --- exact identities -------------------------------------------------------

// prediction_loss == t^2 * flow_matching_loss; the deviation is measured
// relative to max(1, the losses), which keeps the criterion meaningful at
// t ~ 0 where both sides vanish.
inline CheckResult check_t2_identity(std::uint64_t seed,
                                     std::size_t n_samples = 1000) {
  CheckResult out{"t2_identity", true, 0.0, 1e-12, ""};
  Rng rng(seed + 4);
  ArchSpec arch{3, 1, {8, 8}, Activation::tanh};
  const auto model = VelocityModel::xavier(arch, rng);
  Workspace ws;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto d = detail::audit_draw(arch, rng);
    const double t = rng.next_double();  // full range, including tiny t
    const auto interp = interpolate(d.x0, d.eps, t);
    const auto v = model.forward(interp.x_t, t, d.cond, ws);
    const double fm = flow_matching_loss(v, interp.velocity_target).value;
    const double pred = prediction_loss(interp.x_t, t, v, d.x0).value;
    const double denom = std::max({1.0, std::abs(pred), t * t * fm});
    out.value = std::max(out.value, std::abs(pred - t * t * fm) / denom);
  }
  out.pass = out.value <= out.bound;
  return out;
}

namespace detail {

// Random finite distribution with probabilities bounded away from zero.
inline FiniteDist random_check_dist(Rng& rng, std::size_t n,
                                    std::size_t dim) {
  FiniteDist d;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d.support.push_back(rng.gauss_vector(dim));
    d.rewards.push_back(rng.uniform(-1.0, 2.0));
    d.probs.push_back(0.05 + rng.next_double());
    total += d.probs.back();
  }
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    d.probs[i] /= total;
    acc += d.probs[i];
  }
  d.probs[n - 1] = 1.0 - acc;  // exact unit total
  return d;
}

inline double min_centered_advantage(const FiniteDist& d) {
  double m = 0.0;
  for (double a : centered_advantage(d)) m = std::min(m, a);
  return m;
}

}  // namespace detail

// Tilted-target suite: algebraic normalization, the reward-gain identity,
// and the positivity boundary behaving exactly at eta = 1/|min A|.
inline CheckResult check_tilt_suite(std::uint64_t seed,
                                    std::size_t n_dists = 100) {
  CheckResult out{"tilt_suite", true, 0.0, 1e-12, ""};
  Rng rng(seed + 5);
  for (std::size_t k = 0; k < n_dists; ++k) {
    const std::size_t n_points = 2 + rng.below(39);
    const std::size_t dim = 1 + rng.below(3);
    const auto d = detail::random_check_dist(rng, n_points, dim);
    const double eta_max = 1.0 / -detail::min_centered_advantage(d);
    const double eta = std::min(0.5 * eta_max, 5.0);

    const auto q = tilt(d, eta);
    double qsum = 0.0;
    for (double p : q.probs) qsum += p;
    out.value = std::max(out.value, std::abs(qsum - 1.0));

    const double gain = reward_gain(d, eta);
    const double expected = eta * reward_variance(d);
    const double rel =
        std::abs(gain - expected) / std::max(1.0, std::abs(expected));
    out.value = std::max(out.value, rel);

    bool boundary_ok = true;
    try {
      tilt(d, eta_max * (1.0 + 1e-9));
      boundary_ok = false;  // must have thrown
    } catch (const DomainError&) {
    }
    try {
      tilt(d, eta_max * (1.0 - 1e-9));
    } catch (const DomainError&) {
      boundary_ok = false;
    }
    if (!boundary_ok) {
      out.pass = false;
      out.detail = "positivity boundary misplaced at dist " + std::to_string(k);
    }
  }
  out.pass = out.pass && out.value <= out.bound;
  return out;
}

// Natural-gradient direction: one first-order step reproduces the tilt
// bit-for-bit, and the defining inner-product condition holds against random
// zero-mean test functions.
inline CheckResult check_fisher_rao(std::uint64_t seed,
                                    std::size_t n_test_fns = 50) {
  CheckResult out{"fisher_rao", true, 0.0, 1e-12, ""};
  Rng rng(seed + 6);
  for (std::size_t k = 0; k < 25; ++k) {
    const std::size_t n_points = 2 + rng.below(20);
    const std::size_t dim = 1 + rng.below(2);
    const auto d = detail::random_check_dist(rng, n_points, dim);
    const auto delta = fisher_rao_direction(d);
    const double eta = std::min(0.5 / -detail::min_centered_advantage(d), 5.0);
    const auto q = tilt(d, eta);
    for (std::size_t i = 0; i < d.size(); ++i)
      if (d.probs[i] + eta * delta[i] != q.probs[i]) {
        out.pass = false;
        out.detail = "first-order step is not bitwise the tilt at point " +
                     std::to_string(i);
      }

    const auto adv = centered_advantage(d);
    for (std::size_t f = 0; f < n_test_fns / 25 + 1; ++f) {
      // Zero-mean test function under p.
      std::vector<double> u = rng.gauss_vector(d.size());
      double mean_u = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i) mean_u += d.probs[i] * u[i];
      for (double& ui : u) ui -= mean_u;

      double lhs = 0.0, rhs = 0.0;  // <u*, u>_p vs E_p[r u]
      for (std::size_t i = 0; i < d.size(); ++i) {
        lhs += d.probs[i] * adv[i] * u[i];
        rhs += d.probs[i] * d.rewards[i] * u[i];
      }
      out.value = std::max(out.value,
                           std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
    }
  }
  out.pass = out.pass && out.value <= out.bound;
  return out;
}

// Same-draw split of the tilted objective recombines to the direct estimate.
inline CheckResult check_decomposition(std::uint64_t seed,
                                       std::size_t n_configs = 10) {
  CheckResult out{"loss_decomposition", true, 0.0, 1e-12, ""};
  Rng rng(seed + 7);
  for (std::size_t k = 0; k < n_configs; ++k) {
    const std::size_t dim = 1 + rng.below(3);
    const std::size_t n_points = 2 + rng.below(10);
    const auto d = detail::random_check_dist(rng, n_points, dim);
    ArchSpec arch{dim, 0, {6}, Activation::tanh};
    Rng mrng = rng.split(k);
    const auto model = VelocityModel::xavier(arch, mrng);
    const double eta = std::min(0.5 / -detail::min_centered_advantage(d), 5.0);
    Rng draw = rng.split(1000 + k);
    const auto res = decompose_loss(model, d, eta, 200, draw);
    out.value = std::max(out.value, std::abs(res.recombined - res.direct) /
                                        std::max(1.0, std::abs(res.direct)));
  }
  out.pass = out.value <= out.bound;
  return out;
}

// Conditional-mean anchor never increases gradient variance (statistical
// margin three standard errors), and both anchors share one gradient mean.
inline CheckResult check_rao_blackwell(std::uint64_t seed,
                                       std::size_t n_seeds = 3,
                                       std::size_t n_trials = 10000) {
  CheckResult out{"rao_blackwell", true, 0.0, 0.0, ""};
  for (std::size_t s = 0; s < n_seeds; ++s) {
    Rng rng(seed + 8 + s);
    GaussianToy toy;  // prior N(0,1), noise 1, t = 0.5
    ArchSpec arch{1, 0, {6, 6}, Activation::tanh};
    auto model = VelocityModel::xavier(arch, rng);
    const auto rep = rao_blackwell_check(toy, model, n_trials, rng);
    const double ratio = rep.var_rollout / rep.var_sample;
    out.value = std::max(out.value, ratio);
    out.bound = 1.0 + rep.var_margin;
    if (!rep.pass) {
      out.pass = false;
      out.detail = "seed " + std::to_string(s) + ": variance ratio " +
                   std::to_string(ratio) + ", mean-agreement stat " +
                   std::to_string(rep.mean_diff_stat) + " (bound " +
                   std::to_string(rep.mean_diff_bound) + ")";
    }
  }
  out.pass = out.pass && out.value <= out.bound;
  return out;
}

// Branch-loss gradients match the matched advantage-weighted objective and
// the value gap carries no parameter dependence.
inline CheckResult check_nft_equivalence(std::uint64_t seed,
                                         std::size_t n_samples = 500) {
  CheckResult out{"nft_equivalence", true, 0.0, 1e-8, ""};
  Rng rng(seed + 11);
  ArchSpec arch{2, 1, {8, 6}, Activation::tanh};
  auto policy = VelocityModel::xavier(arch, rng);
  const auto rollout = VelocityModel::xavier(arch, rng);
  for (double beta : {0.1, 0.5, 1.0}) {
    Rng stream = rng.split(static_cast<std::uint64_t>(beta * 1000));
    const auto rep = equivalence_check(policy, rollout, beta, n_samples, stream);
    out.value = std::max(out.value, rep.max_grad_abs_diff);
    if (!rep.pass) {
      out.pass = false;
      out.detail = "beta " + std::to_string(beta) + ": grad diff " +
                   std::to_string(rep.max_grad_abs_diff) + ", gap drift " +
                   std::to_string(rep.max_gap_theta_dev);
    }
  }
  out.pass = out.pass && out.value <= out.bound;
  return out;
}

// Degenerate inputs follow their documented contracts bit-for-bit.
inline CheckResult check_degenerate_inputs(std::uint64_t seed) {
  CheckResult out{"degenerate_inputs", true, 0.0, 0.0, ""};
  auto fail = [&out](const std::string& what) {
    out.pass = false;
    out.detail = out.detail.empty() ? what : out.detail + "; " + what;
    out.value = 1.0;
  };

  // Single-sample groups carry no comparative signal.
  for (const auto& row : compute_advantages({{5.0}, {-3.0}, {0.1}}))
    for (double a : row)
      if (a != 0.0) fail("K=1 advantage not zero");

  // Zero-variance batches are guarded to zero.
  for (const auto& row : compute_advantages({{2.5, 2.5}, {2.5, 2.5}}))
    for (double a : row)
      if (a != 0.0) fail("zero-variance advantage not zero");

  // EMA endpoints.
  Rng rng(seed + 12);
  ArchSpec arch{2, 0, {6}, Activation::tanh};
  const auto policy = VelocityModel::xavier(arch, rng);
  auto rollout = VelocityModel::xavier(arch, rng);
  const auto rollout_init = rollout.params();
  ema_update(rollout, policy, 1.0);
  if (rollout.params() != rollout_init) fail("rho=1 moved the rollout");
  ema_update(rollout, policy, 0.0);
  if (rollout.params() != policy.params()) fail("rho=0 did not copy the policy");

  // Zero-noise stochastic sampling degenerates to the deterministic path.
  SamplerConfig det;
  det.mode = SampleMode::sde;
  det.sigma_scale = 0.0;
  const auto x1 = rng.gauss_vector(2);
  Rng noise(1);
  double lp = 0.0;
  const auto xs = sample_sde(policy, x1, {}, det, noise, nullptr, &lp);
  SamplerConfig ode_cfg;
  if (xs != sample_ode(policy, x1, {}, ode_cfg) || lp != 0.0)
    fail("sigma=0 stochastic path is not the deterministic path");

  // eta = 0 tilt is the identity.
  Rng drng(seed + 13);
  const auto dist = detail::random_check_dist(drng, 7, 2);
  if (tilt(dist, 0.0).probs != dist.probs) fail("eta=0 tilt changed probs");

  return out;
}

// The full default suite behind `verify`.
inline std::vector<CheckResult> run_verify_checks(std::uint64_t seed) {
  return {
      check_grad_flow_matching(seed),
      check_grad_prediction_loss(seed),
      check_grad_advantageflow(seed, GammaSchedule::constant),
      check_grad_advantageflow(seed, GammaSchedule::adaptive),
      check_grad_advantageflow(seed, GammaSchedule::nft),
      check_grad_nft_branch(seed),
      check_t2_identity(seed),
      check_tilt_suite(seed),
      check_fisher_rao(seed),
      check_decomposition(seed),
      check_rao_blackwell(seed),
      check_nft_equivalence(seed),
      check_degenerate_inputs(seed),
  };
}

}  // namespace aflow
