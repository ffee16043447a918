// Closed-form verification layer: finite-support distributions where every
// expectation is exact, plus a conjugate Gaussian toy whose posterior mean is
// available in closed form. These are the independent oracles the property
// suites compare the training-side code against.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aflow/errors.hpp"
#include "aflow/flow.hpp"
#include "aflow/model.hpp"
#include "aflow/rng.hpp"

namespace aflow {

// ---------------------------------------------------------------------------
// Finite distribution with per-point rewards.
// ---------------------------------------------------------------------------

struct FiniteDist {
  std::vector<std::vector<double>> support;  // n points in R^dim
  std::vector<double> probs;                 // nonnegative, sums to 1
  std::vector<double> rewards;               // r(x) per support point

  std::size_t size() const { return probs.size(); }
  std::size_t dim() const { return support.empty() ? 0 : support[0].size(); }

  void validate() const {
    if (probs.empty()) throw InputError("finite dist: empty support");
    if (support.size() != probs.size() || rewards.size() != probs.size())
      throw InputError("finite dist: support/probs/rewards sizes disagree");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (!(probs[i] >= 0.0))
        throw InputError("finite dist: negative probability at point " +
                         std::to_string(i));
      if (!std::isfinite(rewards[i]))
        throw InputError("finite dist: non-finite reward at point " +
                         std::to_string(i));
      if (support[i].size() != support[0].size())
        throw InputError("finite dist: ragged support");
      total += probs[i];
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw InputError("finite dist: probabilities sum to " +
                       std::to_string(total) + ", expected 1");
  }

  std::size_t sample_index(Rng& rng) const {
    const double u = rng.next_double();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.size() - 1;  // u landed in the rounding tail
  }
};

inline double expected_reward(const FiniteDist& dist) {
  double m = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) m += dist.probs[i] * dist.rewards[i];
  return m;
}

inline double reward_variance(const FiniteDist& dist) {
  const double m = expected_reward(dist);
  double v = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const double d = dist.rewards[i] - m;
    v += dist.probs[i] * d * d;
  }
  return v;
}

// A(x) = r(x) - E_p[r]; integrates to zero under p by construction.
inline std::vector<double> centered_advantage(const FiniteDist& dist) {
  dist.validate();
  const double mean = expected_reward(dist);
  std::vector<double> adv(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) adv[i] = dist.rewards[i] - mean;
  return adv;
}

// q(x) = (1 + eta A(x)) p(x), computed as p + eta*(A*p) so that one
// first-order step along the Fisher-Rao direction reproduces it bitwise.
// Normalization is automatic because the perturbation integrates to zero.
inline FiniteDist tilt(const FiniteDist& dist, double eta) {
  dist.validate();
  if (!(eta >= 0.0) || !std::isfinite(eta))
    throw InputError("tilt: eta must be finite and >= 0");
  const std::vector<double> adv = centered_advantage(dist);

  double min_adv = 0.0;
  for (double a : adv) min_adv = std::min(min_adv, a);

  FiniteDist out = dist;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (1.0 + eta * adv[i] < 0.0) {
      std::string msg = "tilt: 1 + eta*A < 0 at support point " +
                        std::to_string(i) + " (A = " + std::to_string(adv[i]) +
                        ", eta = " + std::to_string(eta) + ")";
      if (min_adv < 0.0)
        msg += "; max admissible eta = " + std::to_string(1.0 / -min_adv);
      throw DomainError(msg);
    }
    out.probs[i] = dist.probs[i] + eta * (adv[i] * dist.probs[i]);
  }
  return out;
}

// E_q[r] - E_p[r]; equals eta * Var_p(r) by the tilt construction.
inline double reward_gain(const FiniteDist& dist, double eta) {
  return expected_reward(tilt(dist, eta)) - expected_reward(dist);
}

// Steepest-ascent direction of E[r] in the Fisher-Rao geometry: delta_p = A p.
inline std::vector<double> fisher_rao_direction(const FiniteDist& dist) {
  dist.validate();
  for (std::size_t i = 0; i < dist.size(); ++i)
    if (dist.probs[i] == 0.0)
      throw DomainError(
          "fisher_rao_direction: zero probability at support point " +
          std::to_string(i) + " (tangent u*p needs p > 0)");
  const std::vector<double> adv = centered_advantage(dist);
  std::vector<double> delta(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i)
    delta[i] = adv[i] * dist.probs[i];
  return delta;
}

// ---------------------------------------------------------------------------
// Same-draw decomposition of the tilted-target objective: the Monte-Carlo
// estimate of E_q ||f(x_t) - x0||^2 splits into a reward-independent part and
// eta times a reward-weighted part; with shared draws the recombination is an
// algebraic identity, not a statistical one.
// ---------------------------------------------------------------------------

struct DecomposeResult {
  double reward_independent = 0.0;  // mean of per-draw prediction losses
  double reward_dependent = 0.0;    // mean of A-weighted prediction losses
  double recombined = 0.0;          // independent + eta * dependent
  double direct = 0.0;              // mean of (1 + eta A) weighted losses
};

inline DecomposeResult decompose_loss(const VelocityModel& model,
                                      const FiniteDist& dist, double eta,
                                      std::size_t n_samples, Rng& rng) {
  dist.validate();
  if (n_samples < 1) throw InputError("decompose_loss: n_samples must be >= 1");
  if (dist.dim() != model.arch().data_dim || model.arch().cond_dim != 0)
    throw InputError("decompose_loss: model must be unconditional with data_dim "
                     "matching the support");
  const std::vector<double> adv = centered_advantage(dist);

  Workspace ws;
  DecomposeResult out;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const std::size_t idx = dist.sample_index(rng);
    const std::vector<double>& x0 = dist.support[idx];
    const std::vector<double> eps = rng.gauss_vector(x0.size());
    const double t = rng.uniform(0.001, 1.0);
    const auto interp = interpolate(x0, eps, t);
    const auto v = model.forward(interp.x_t, t, {}, ws);
    double loss = 0.0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
      const double f = interp.x_t[i] - t * v[i];
      const double d = f - x0[i];
      loss += d * d;
    }
    out.reward_independent += loss;
    out.reward_dependent += adv[idx] * loss;
    out.direct += (1.0 + eta * adv[idx]) * loss;
  }
  const double inv_n = 1.0 / static_cast<double>(n_samples);
  out.reward_independent *= inv_n;
  out.reward_dependent *= inv_n;
  out.direct *= inv_n;
  out.recombined = out.reward_independent + eta * out.reward_dependent;
  return out;
}

// ---------------------------------------------------------------------------
// Conjugate Gaussian toy: x0 ~ N(mu0, s0^2 I), eps ~ N(0, sn^2 I),
// x_t = (1-t) x0 + t eps. The conditional mean E[x0 | x_t] is linear.
// ---------------------------------------------------------------------------

struct GaussianToy {
  std::vector<double> prior_mean = {0.0};
  double prior_var = 1.0;  // s0^2; zero makes x0 deterministic
  double noise_var = 1.0;  // sn^2
  double t = 0.5;

  std::size_t dim() const { return prior_mean.size(); }

  void validate() const {
    if (prior_mean.empty()) throw InputError("gaussian toy: empty prior mean");
    if (!(prior_var >= 0.0)) throw InputError("gaussian toy: prior_var must be >= 0");
    if (!(noise_var > 0.0)) throw InputError("gaussian toy: noise_var must be > 0");
    if (!(t > 0.0 && t <= 1.0))
      throw InputError("gaussian toy: t must lie in (0, 1]");
  }

  // E[x0 | x_t] = mu0 + (1-t) s0^2 / ((1-t)^2 s0^2 + t^2 sn^2) (x_t - (1-t) mu0)
  std::vector<double> posterior_mean(std::span<const double> x_t) const {
    validate();
    if (x_t.size() != dim())
      throw InputError("gaussian toy: x_t dimension mismatch");
    const double a = 1.0 - t;
    const double gain = a * prior_var / (a * a * prior_var + t * t * noise_var);
    std::vector<double> out(dim());
    for (std::size_t i = 0; i < dim(); ++i)
      out[i] = prior_mean[i] + gain * (x_t[i] - a * prior_mean[i]);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Two-anchor variance comparison. g_sample regresses the prediction onto the
// drawn x0, g_rollout onto the closed-form conditional mean. Both have the
// same expectation; the conditional-mean anchor can only shrink the variance.
// ---------------------------------------------------------------------------

struct RaoBlackwellReport {
  double var_sample = 0.0;    // mean over parameters of per-parameter variance
  double var_rollout = 0.0;
  double var_margin = 0.0;    // 3 / sqrt(n_trials)
  // Chi-square-style agreement of the two gradient means: sum over parameters
  // of (mean difference / SE)^2. Its null mean is the number of contributing
  // parameters k, and because per-trial gradient coordinates are correlated,
  // its null variance is 2 * sum_pq rho_pq^2 (not 2k); the bound is the
  // 3-standard-error point of that null: k + 3 sqrt(2 sum rho^2).
  double mean_diff_stat = 0.0;
  double mean_diff_bound = 0.0;
  // Cross term <x0 - f_old, f_old - f_theta> in units of its standard error.
  double cross_term_z = 0.0;
  std::size_t n_trials = 0;
  bool pass = false;
};

inline RaoBlackwellReport rao_blackwell_check(const GaussianToy& toy,
                                              const VelocityModel& model,
                                              std::size_t n_trials, Rng& rng) {
  toy.validate();
  if (model.arch().data_dim != toy.dim() || model.arch().cond_dim != 0)
    throw InputError("rao_blackwell_check: model must be unconditional with "
                     "data_dim matching the toy");
  if (n_trials < 2) throw InputError("rao_blackwell_check: need >= 2 trials");

  const std::size_t d = toy.dim();
  const std::size_t n_params = model.param_count();
  const double t = toy.t;
  const double s0 = std::sqrt(toy.prior_var);
  const double sn = std::sqrt(toy.noise_var);

  std::vector<double> sum_s(n_params, 0.0), sumsq_s(n_params, 0.0);
  std::vector<double> sum_r(n_params, 0.0), sumsq_r(n_params, 0.0);
  std::vector<double> sum_d(n_params, 0.0);
  // Lower triangle of sum_trials d_p d_q, for the correlation-aware bound.
  std::vector<double> sum_dd(n_params * (n_params + 1) / 2, 0.0);
  double cross_sum = 0.0, cross_sumsq = 0.0;

  Workspace ws;
  GradVector g_sample, g_rollout;
  std::vector<double> x0(d), x_t(d), f_theta(d), diff(n_params);
  std::vector<double> up_s(d), up_r(d);

  for (std::size_t trial = 0; trial < n_trials; ++trial) {
    for (std::size_t i = 0; i < d; ++i) {
      x0[i] = toy.prior_mean[i] + s0 * rng.gauss();
      const double eps = sn * rng.gauss();
      x_t[i] = (1.0 - t) * x0[i] + t * eps;
    }
    const std::vector<double> f_old = toy.posterior_mean(x_t);
    const auto v = model.forward(x_t, t, {}, ws);
    for (std::size_t i = 0; i < d; ++i) f_theta[i] = x_t[i] - t * v[i];

    // d||f - anchor||^2 / dv = -2 t (f - anchor)
    for (std::size_t i = 0; i < d; ++i) {
      up_s[i] = -2.0 * t * (f_theta[i] - x0[i]);
      up_r[i] = -2.0 * t * (f_theta[i] - f_old[i]);
    }
    model.backward(ws, up_s, g_sample, /*accumulate=*/false);
    model.backward(ws, up_r, g_rollout, /*accumulate=*/false);

    for (std::size_t p = 0; p < n_params; ++p) {
      sum_s[p] += g_sample[p];
      sumsq_s[p] += g_sample[p] * g_sample[p];
      sum_r[p] += g_rollout[p];
      sumsq_r[p] += g_rollout[p] * g_rollout[p];
      diff[p] = g_sample[p] - g_rollout[p];
      sum_d[p] += diff[p];
    }
    std::size_t tri = 0;
    for (std::size_t p = 0; p < n_params; ++p)
      for (std::size_t q = 0; q <= p; ++q, ++tri)
        sum_dd[tri] += diff[p] * diff[q];
    double cross = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      cross += (x0[i] - f_old[i]) * (f_old[i] - f_theta[i]);
    cross_sum += cross;
    cross_sumsq += cross * cross;
  }

  const double n = static_cast<double>(n_trials);
  RaoBlackwellReport rep;
  rep.n_trials = n_trials;
  rep.var_margin = 3.0 / std::sqrt(n);

  auto tri_at = [&](std::size_t p, std::size_t q) {  // q <= p
    return sum_dd[p * (p + 1) / 2 + q];
  };
  std::vector<double> mean_d(n_params), var_d(n_params);
  double diff_stat = 0.0, k_eff = 0.0, sum_rho2 = 0.0;
  for (std::size_t p = 0; p < n_params; ++p) {
    const double mean_s = sum_s[p] / n;
    const double mean_r = sum_r[p] / n;
    rep.var_sample += sumsq_s[p] / n - mean_s * mean_s;
    rep.var_rollout += sumsq_r[p] / n - mean_r * mean_r;
    mean_d[p] = sum_d[p] / n;
    var_d[p] = tri_at(p, p) / n - mean_d[p] * mean_d[p];
    // A parameter with (numerically) identical gradients contributes nothing.
    if (var_d[p] > 0.0) {
      diff_stat += mean_d[p] * mean_d[p] / (var_d[p] / n);
      k_eff += 1.0;
    }
  }
  for (std::size_t p = 0; p < n_params; ++p) {
    if (!(var_d[p] > 0.0)) continue;
    for (std::size_t q = 0; q <= p; ++q) {
      if (!(var_d[q] > 0.0)) continue;
      const double cov = tri_at(p, q) / n - mean_d[p] * mean_d[q];
      const double rho2 = cov * cov / (var_d[p] * var_d[q]);
      sum_rho2 += (p == q) ? rho2 : 2.0 * rho2;
    }
  }
  rep.var_sample /= static_cast<double>(n_params);
  rep.var_rollout /= static_cast<double>(n_params);
  rep.mean_diff_stat = diff_stat;
  rep.mean_diff_bound = k_eff + 3.0 * std::sqrt(2.0 * sum_rho2);

  const double cross_mean = cross_sum / n;
  const double cross_var = cross_sumsq / n - cross_mean * cross_mean;
  rep.cross_term_z =
      cross_var > 0.0 ? std::abs(cross_mean) / std::sqrt(cross_var / n) : 0.0;

  rep.pass = rep.var_rollout <= rep.var_sample * (1.0 + rep.var_margin) &&
             rep.mean_diff_stat <= rep.mean_diff_bound && rep.cross_term_z <= 3.0;
  return rep;
}

}  // namespace aflow
