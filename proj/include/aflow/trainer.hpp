// Reward-driven fine-tuning loops. The main trainer rolls out the EMA
// rollout policy with the deterministic sampler, scores and standardizes
// rewards into clipped advantages, and descends the advantage-weighted
// prediction loss on freshly noised rollouts. A minimal policy-gradient
// baseline (stochastic rollouts, per-step ratio clip) shares the metrics
// schema so runs are directly comparable.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "aflow/advantage.hpp"
#include "aflow/afloss.hpp"
#include "aflow/checkpoint.hpp"
#include "aflow/errors.hpp"
#include "aflow/flow.hpp"
#include "aflow/model.hpp"
#include "aflow/optim.hpp"
#include "aflow/rng.hpp"
#include "aflow/sampler.hpp"
#include "aflow/tasks.hpp"

namespace aflow {

struct TrainConfig {
  std::size_t L = 32;  // prompts per batch
  std::size_t K = 4;   // samples per prompt
  GammaConfig gamma;
  double lambda = 0.001;  // reference regularization strength
  double rho = 0.9;       // EMA retention for the rollout policy
  std::size_t iterations = 100;
  std::size_t inner_steps = 1;  // optimizer passes per batch
  SamplerConfig sampler;        // rollout sampler (10 steps by default)
  AdamConfig adam;
  std::size_t eval_every = 10;
  std::size_t eval_samples = 256;
  int eval_steps = 40;      // evaluation uses a finer grid than training
  double clip_ratio = 0.2;  // policy-gradient baseline only
  std::string abort_checkpoint_path;  // where to park the last good state
  std::uint64_t seed = 0;

  // Throws ConfigError on hard violations; returns soft warnings.
  std::vector<std::string> validate() const {
    if (L < 1 || K < 1) throw ConfigError("train: L and K must be >= 1");
    if (!(rho >= 0.0 && rho <= 1.0))
      throw ConfigError("train: rho must lie in [0, 1]");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw ConfigError("train: lambda must be finite and >= 0");
    if (iterations < 1) throw ConfigError("train: iterations must be >= 1");
    if (inner_steps < 1) throw ConfigError("train: inner_steps must be >= 1");
    if (!(adam.lr > 0.0)) throw ConfigError("train: learning rate must be > 0");
    if (eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
    if (eval_samples < 1) throw ConfigError("train: eval_samples must be >= 1");
    if (eval_steps < 1) throw ConfigError("train: eval_steps must be >= 1");
    if (!(clip_ratio > 0.0 && clip_ratio < 1.0))
      throw ConfigError("train: clip_ratio must lie in (0, 1)");
    gamma.validate();
    sampler.validate();

    std::vector<std::string> warnings;
    if (gamma.schedule == GammaSchedule::constant &&
        !(gamma.gamma_const + lambda > 1.0))
      warnings.push_back(
          "constant gamma + lambda <= 1: per-sample strict convexity is not "
          "guaranteed against a clipped advantage of -1");
    return warnings;
  }
};

struct IterationMetrics {
  std::size_t iter = 0;
  double wall_s = 0.0;
  double mean_reward = 0.0;  // over this iteration's training rollouts
  double eval_reward = 0.0;  // latest evaluation result, carried forward
  double min_quad_coeff = 0.0;
  double max_quad_coeff = 0.0;
  double adv_term = 0.0;  // batch-mean loss terms at the pre-update params
  double rollout_term = 0.0;
  double ref_term = 0.0;
};

using MetricsCallback = std::function<void(const IterationMetrics&)>;

// The three-model state: learned policy, EMA rollout copy, frozen reference.
struct TrainableModels {
  VelocityModel policy;
  VelocityModel rollout;
  VelocityModel reference;

  static TrainableModels from_pretrained(const VelocityModel& m) {
    return TrainableModels{m, m, m};
  }

  ModelTriple triple() {
    return ModelTriple{&policy, &rollout, &reference};
  }
};

struct EvalResult {
  double mean_reward = 0.0;
  double sem_reward = 0.0;  // standard error of the mean
  std::vector<double> component_means;
  std::vector<double> component_sems;
  std::size_t n_samples = 0;
};

// Deterministic-sampler evaluation: mean total reward plus per-component
// statistics, cycling through the task's conditions round-robin.
inline EvalResult evaluate_policy(const VelocityModel& model, const Task& task,
                                  std::size_t n_samples, int steps, Rng& rng) {
  if (n_samples < 1)
    throw InputError("evaluate_policy: need at least one sample");
  SamplerConfig cfg;
  cfg.steps = steps;
  cfg.mode = SampleMode::ode;

  const auto conditions = task.conditions();
  const std::size_t n_comp = task.reward_component_names().size();
  EvalResult out;
  out.n_samples = n_samples;
  std::vector<double> comp_sum(n_comp, 0.0), comp_sumsq(n_comp, 0.0);
  double total_sum = 0.0, total_sumsq = 0.0;

  for (std::size_t j = 0; j < n_samples; ++j) {
    const auto& cond = conditions[j % conditions.size()];
    const auto x1 = rng.gauss_vector(task.data_dim());
    const auto x = sample_ode(model, x1, cond, cfg);
    const auto comps = task.reward_components(x);
    const double total = task.reward_total(x);
    total_sum += total;
    total_sumsq += total * total;
    for (std::size_t c = 0; c < n_comp; ++c) {
      comp_sum[c] += comps[c];
      comp_sumsq[c] += comps[c] * comps[c];
    }
  }

  const double n = static_cast<double>(n_samples);
  auto sem = [n](double sum, double sumsq) {
    if (n < 2) return 0.0;
    const double mean = sum / n;
    const double var = std::max(0.0, (sumsq - n * mean * mean) / (n - 1.0));
    return std::sqrt(var / n);
  };
  out.mean_reward = total_sum / n;
  out.sem_reward = sem(total_sum, total_sumsq);
  for (std::size_t c = 0; c < n_comp; ++c) {
    out.component_means.push_back(comp_sum[c] / n);
    out.component_sems.push_back(sem(comp_sum[c], comp_sumsq[c]));
  }
  return out;
}

struct PretrainStepMetrics {
  std::size_t step = 0;
  double loss = 0.0;  // batch-mean clean-sample prediction loss
};

using PretrainCallback = std::function<void(const PretrainStepMetrics&)>;

// Flow-matching pretraining: descend the batch-mean clean-sample prediction
// loss on data drawn from the task generator, with a fresh (t, eps) per
// sample. steps = 0 is a valid no-op (the model is left untouched).
inline std::vector<PretrainStepMetrics> pretrain_flow(
    VelocityModel& model, const Task& task, std::size_t steps,
    std::size_t batch, const AdamConfig& adam, Rng& rng,
    std::size_t record_every = 50, const PretrainCallback& on_step = {}) {
  if (batch < 1) throw ConfigError("pretrain: batch must be >= 1");
  if (model.arch().data_dim != task.data_dim() ||
      model.arch().cond_dim != task.cond_dim())
    throw InputError("pretrain: model architecture does not fit the task");
  if (record_every < 1) record_every = 1;

  const auto conditions = task.conditions();
  const double inv_batch = 1.0 / static_cast<double>(batch);
  AdamState state;
  state.prepare(model.param_count());
  GradVector grad;
  Workspace ws;
  std::vector<PretrainStepMetrics> history;

  for (std::size_t step = 1; step <= steps; ++step) {
    grad.assign(model.param_count(), 0.0);
    double loss_sum = 0.0;
    for (std::size_t j = 0; j < batch; ++j) {
      const auto& cond = conditions[rng.below(conditions.size())];
      const auto x0 = task.sample_x0(cond, rng);
      const double t = rng.next_double();
      const auto eps = rng.gauss_vector(x0.size());
      const auto interp = interpolate(x0, eps, t);
      const auto v = model.forward(interp.x_t, t, cond, ws);
      const auto lg = prediction_loss(interp.x_t, t, v, x0);
      loss_sum += lg.value;
      model.backward(ws, lg.grad_v, grad, /*accumulate=*/true);
    }
    for (double& g : grad) g *= inv_batch;
    adam_step(model.params(), grad, state, adam);
    if (step % record_every == 0 || step == steps) {
      const PretrainStepMetrics m{step, loss_sum * inv_batch};
      history.push_back(m);
      if (on_step) on_step(m);
    }
  }
  return history;
}

namespace detail {

constexpr std::uint64_t kEvalStreamTag = 0x45564153ull;  // derived eval stream

inline bool want_eval(std::size_t iter, const TrainConfig& cfg) {
  return iter == 1 || iter == cfg.iterations || iter % cfg.eval_every == 0;
}

// On a numeric abort, park the pre-iteration parameters where the config
// asks, then let the error propagate.
inline void park_abort_checkpoint(const TrainConfig& cfg,
                                  TrainableModels& models,
                                  const std::vector<double>& good_params) {
  if (cfg.abort_checkpoint_path.empty()) return;
  VelocityModel snapshot = models.policy;
  snapshot.params() = good_params;
  save_checkpoint(cfg.abort_checkpoint_path, snapshot);
}

struct RolloutBatch {
  std::vector<std::size_t> cond_index;            // per prompt
  std::vector<std::vector<double>> x0;            // L*K clean samples
  std::vector<std::vector<double>> rewards;       // L x K
  std::vector<std::vector<double>> advantages;    // L x K
  double mean_reward = 0.0;
};

}  // namespace detail

// Advantage-weighted fine-tuning. Per iteration: L conditions are drawn with
// replacement, K deterministic rollouts are generated per condition from the
// ROLLOUT model, rewards are standardized into clipped advantages, and
// inner_steps optimizer updates descend the batch-mean loss with a fresh
// (t, eps) draw per sample and per pass. The rollout model then takes an EMA
// step toward the policy. A numeric error aborts after writing the last good
// parameters to abort_checkpoint_path (when set).
inline std::vector<IterationMetrics> train_advantageflow(
    TrainableModels& models, const Task& task, const TrainConfig& cfg,
    Rng& rng, const MetricsCallback& on_iteration = {}) {
  cfg.validate();
  if (models.policy.arch().data_dim != task.data_dim() ||
      models.policy.arch().cond_dim != task.cond_dim())
    throw InputError("train: model architecture does not fit the task");

  const auto conditions = task.conditions();
  const std::size_t d = task.data_dim();
  const std::size_t batch = cfg.L * cfg.K;
  const double inv_batch = 1.0 / static_cast<double>(batch);

  AdamState adam_state;
  adam_state.prepare(models.policy.param_count());
  GradVector grad;
  Workspace wsp, wss;
  Rng eval_base = rng.split(detail::kEvalStreamTag);

  std::vector<IterationMetrics> history;
  double last_eval = std::numeric_limits<double>::quiet_NaN();
  const auto t0 = std::chrono::steady_clock::now();

  for (std::size_t iter = 1; iter <= cfg.iterations; ++iter) {
    const std::vector<double> good_params = models.policy.params();
    try {
      // --- rollouts from the rollout policy ------------------------------
      detail::RolloutBatch b;
      b.rewards.assign(cfg.L, std::vector<double>(cfg.K, 0.0));
      for (std::size_t i = 0; i < cfg.L; ++i) {
        b.cond_index.push_back(rng.below(conditions.size()));
        const auto& cond = conditions[b.cond_index.back()];
        for (std::size_t k = 0; k < cfg.K; ++k) {
          const auto x1 = rng.gauss_vector(d);
          auto x0 = sample_ode(models.rollout, x1, cond, cfg.sampler);
          b.rewards[i][k] = task.reward_total(x0);
          b.mean_reward += b.rewards[i][k] * inv_batch;
          b.x0.push_back(std::move(x0));
        }
      }
      b.advantages = compute_advantages(b.rewards);

      IterationMetrics m;
      m.iter = iter;
      m.mean_reward = b.mean_reward;
      m.min_quad_coeff = std::numeric_limits<double>::infinity();
      m.max_quad_coeff = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < cfg.L; ++i)
        for (std::size_t k = 0; k < cfg.K; ++k) {
          const double a = b.advantages[i][k];
          const double q = a + gamma_value(cfg.gamma, a) + cfg.lambda;
          m.min_quad_coeff = std::min(m.min_quad_coeff, q);
          m.max_quad_coeff = std::max(m.max_quad_coeff, q);
        }

      // --- optimizer passes over the batch -------------------------------
      const ModelTriple triple = models.triple();
      for (std::size_t pass = 0; pass < cfg.inner_steps; ++pass) {
        grad.assign(models.policy.param_count(), 0.0);
        for (std::size_t i = 0; i < cfg.L; ++i) {
          const auto& cond = conditions[b.cond_index[i]];
          for (std::size_t k = 0; k < cfg.K; ++k) {
            const auto& x0 = b.x0[i * cfg.K + k];
            const double t = rng.next_double();
            const auto eps = rng.gauss_vector(d);
            const auto interp = interpolate(x0, eps, t);
            const double a = b.advantages[i][k];
            const auto res = advantageflow_loss(
                triple, interp.x_t, t, cond, x0, a,
                gamma_value(cfg.gamma, a), cfg.lambda, wsp, wss);
            models.policy.backward(wsp, res.grad_v, grad, /*accumulate=*/true);
            if (pass == 0) {
              m.adv_term += res.adv_term * inv_batch;
              m.rollout_term += res.rollout_term * inv_batch;
              m.ref_term += res.ref_term * inv_batch;
            }
          }
        }
        for (double& g : grad) g *= inv_batch;
        adam_step(models.policy.params(), grad, adam_state, cfg.adam);
      }

      ema_update(models.rollout, models.policy, cfg.rho);

      if (detail::want_eval(iter, cfg)) {
        Rng eval_rng = eval_base.split(iter);
        last_eval = evaluate_policy(models.policy, task, cfg.eval_samples,
                                    cfg.eval_steps, eval_rng)
                        .mean_reward;
      }
      m.eval_reward = last_eval;
      m.wall_s = std::chrono::duration<double>(
                     std::chrono::steady_clock::now() - t0)
                     .count();
      history.push_back(m);
      if (on_iteration) on_iteration(m);
    } catch (const NumericError&) {
      detail::park_abort_checkpoint(cfg, models, good_params);
      throw;
    }
  }
  return history;
}

// Minimal policy-gradient comparator. Rollouts come from a per-iteration
// snapshot of the policy through the stochastic sampler; the update ascends
// the advantage-weighted transition log-densities with a per-step ratio clip
// at 1 +/- clip_ratio (single epoch over the batch per inner step). Requires
// a noisy sampler: the deterministic limit has no transition density.
inline std::vector<IterationMetrics> train_grpo_baseline(
    TrainableModels& models, const Task& task, const TrainConfig& cfg,
    Rng& rng, const MetricsCallback& on_iteration = {}) {
  cfg.validate();
  if (cfg.sampler.mode != SampleMode::sde)
    throw ConfigError("grpo: the sde sampler is required");
  if (cfg.sampler.sigma_scale == 0.0)
    throw ConfigError(
        "grpo: sigma_scale = 0 makes transitions deterministic; the "
        "log-density gradient is undefined");
  if (models.policy.arch().data_dim != task.data_dim() ||
      models.policy.arch().cond_dim != task.cond_dim())
    throw InputError("train: model architecture does not fit the task");

  const auto conditions = task.conditions();
  const std::size_t d = task.data_dim();
  const std::size_t batch = cfg.L * cfg.K;
  const double inv_batch = 1.0 / static_cast<double>(batch);
  const double dt = cfg.sampler.dt();
  const double tf = cfg.sampler.effective_t_floor();

  AdamState adam_state;
  adam_state.prepare(models.policy.param_count());
  GradVector grad;
  Workspace ws;
  std::vector<double> mean_th(d), upstream(d);
  Rng eval_base = rng.split(detail::kEvalStreamTag);

  std::vector<IterationMetrics> history;
  double last_eval = std::numeric_limits<double>::quiet_NaN();
  const auto t0 = std::chrono::steady_clock::now();

  for (std::size_t iter = 1; iter <= cfg.iterations; ++iter) {
    const std::vector<double> good_params = models.policy.params();
    try {
      // On-policy snapshot: this iteration's rollouts and recorded
      // log-densities come from the pre-update parameters.
      models.rollout.params() = models.policy.params();

      std::vector<std::size_t> cond_index;
      std::vector<std::vector<SdeStep>> traces(batch);
      std::vector<std::vector<double>> rewards(cfg.L,
                                               std::vector<double>(cfg.K));
      double mean_reward = 0.0;
      for (std::size_t i = 0; i < cfg.L; ++i) {
        cond_index.push_back(rng.below(conditions.size()));
        const auto& cond = conditions[cond_index.back()];
        for (std::size_t k = 0; k < cfg.K; ++k) {
          const auto x1 = rng.gauss_vector(d);
          const auto x0 = sample_sde(models.rollout, x1, cond, cfg.sampler,
                                     rng, &traces[i * cfg.K + k]);
          rewards[i][k] = task.reward_total(x0);
          mean_reward += rewards[i][k] * inv_batch;
        }
      }
      const auto advantages = compute_advantages(rewards);

      IterationMetrics m;
      m.iter = iter;
      m.mean_reward = mean_reward;
      // The convexity diagnostic does not exist for the policy-gradient
      // objective; recorded as NaN to keep the schema shared.
      m.min_quad_coeff = std::numeric_limits<double>::quiet_NaN();
      m.max_quad_coeff = std::numeric_limits<double>::quiet_NaN();

      for (std::size_t pass = 0; pass < cfg.inner_steps; ++pass) {
        grad.assign(models.policy.param_count(), 0.0);
        double surrogate = 0.0;  // batch-mean clipped objective (ascended)
        for (std::size_t i = 0; i < cfg.L; ++i) {
          const auto& cond = conditions[cond_index[i]];
          for (std::size_t k = 0; k < cfg.K; ++k) {
            const double a = advantages[i][k];
            if (a == 0.0) continue;
            for (const auto& rec : traces[i * cfg.K + k]) {
              const auto v = models.policy.forward(rec.x, rec.t, cond, ws);
              const double sigma_t =
                  cfg.sampler.sigma_scale * std::sqrt(rec.t);
              const double coef =
                  sigma_t * sigma_t / (2.0 * std::max(rec.t, tf));
              for (std::size_t j = 0; j < d; ++j) {
                const double x_hat1 = rec.x[j] + (1.0 - rec.t) * v[j];
                mean_th[j] = rec.x[j] - (v[j] - coef * x_hat1) * dt;
              }
              const double lp =
                  gaussian_logpdf_diag(rec.x_next, mean_th, rec.std);
              const double ratio = std::exp(lp - rec.logprob);
              const double clipped = std::clamp(ratio, 1.0 - cfg.clip_ratio,
                                                1.0 + cfg.clip_ratio);
              surrogate += std::min(ratio * a, clipped * a) * inv_batch;
              if (ratio * a > clipped * a) continue;  // clipped: flat region
              // d(-ratio*a)/d(mean) chained through mean's dependence on v.
              const double dmean_dv = -dt * (1.0 - coef * (1.0 - rec.t));
              const double inv_var = 1.0 / (rec.std * rec.std);
              for (std::size_t j = 0; j < d; ++j)
                upstream[j] = -a * ratio * (rec.x_next[j] - mean_th[j]) *
                              inv_var * dmean_dv;
              models.policy.backward(ws, upstream, grad, /*accumulate=*/true);
            }
          }
        }
        if (pass == 0) m.adv_term = -surrogate;
        for (double& g : grad) g *= inv_batch;
        adam_step(models.policy.params(), grad, adam_state, cfg.adam);
      }

      if (detail::want_eval(iter, cfg)) {
        Rng eval_rng = eval_base.split(iter);
        last_eval = evaluate_policy(models.policy, task, cfg.eval_samples,
                                    cfg.eval_steps, eval_rng)
                        .mean_reward;
      }
      m.eval_reward = last_eval;
      m.wall_s = std::chrono::duration<double>(
                     std::chrono::steady_clock::now() - t0)
                     .count();
      history.push_back(m);
      if (on_iteration) on_iteration(m);
    } catch (const NumericError&) {
      detail::park_abort_checkpoint(cfg, models, good_params);
      throw;
    }
  }
  return history;
}

}  // namespace aflow
