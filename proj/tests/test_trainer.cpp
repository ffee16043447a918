#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "aflow/checkpoint.hpp"
#include "aflow/trainer.hpp"
#include "doctest.h"

using namespace aflow;

namespace {

ArchSpec small_arch() { return ArchSpec{2, 0, {8, 8}, Activation::tanh}; }

VelocityModel seed_model(std::uint64_t seed) {
  Rng rng(seed);
  return VelocityModel::xavier(small_arch(), rng);
}

TrainConfig fast_config() {
  TrainConfig cfg;
  cfg.L = 4;
  cfg.K = 4;
  cfg.iterations = 5;
  cfg.sampler.steps = 5;
  cfg.eval_every = 2;
  cfg.eval_samples = 64;
  cfg.eval_steps = 8;
  return cfg;
}

double max_abs_diff(const std::vector<double>& a,
                    const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("train config validation and convexity warning") {
  TrainConfig cfg = fast_config();
  CHECK(cfg.validate().empty());  // gamma 1.1 + lambda 0.001 > 1

  cfg.gamma.gamma_const = 0.9;
  const auto warnings = cfg.validate();
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("convexity") != std::string::npos);

  cfg = fast_config();
  cfg.L = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = fast_config();
  cfg.rho = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = fast_config();
  cfg.lambda = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = fast_config();
  cfg.clip_ratio = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = fast_config();
  cfg.inner_steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("pretrain: zero steps is a bit-exact no-op") {
  Task task(symmetric_two_gauss());
  auto model = seed_model(1);
  const auto before = model.params();
  Rng rng(2);
  const auto hist = pretrain_flow(model, task, 0, 16, AdamConfig{}, rng);
  CHECK(hist.empty());
  CHECK(model.params() == before);
}

namespace {

// Held-out batch-mean prediction loss; no parameter updates.
double heldout_prediction_loss(const VelocityModel& model, const Task& task,
                               std::size_t n, Rng& rng) {
  Workspace ws;
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const auto x0 = task.sample_x0({}, rng);
    const double t = rng.next_double();
    const auto eps = rng.gauss_vector(x0.size());
    const auto interp = interpolate(x0, eps, t);
    const auto v = model.forward(interp.x_t, t, {}, ws);
    sum += prediction_loss(interp.x_t, t, v, x0).value;
  }
  return sum / static_cast<double>(n);
}

}  // namespace

TEST_CASE("pretrain: held-out loss improves and recording cadence holds") {
  // The per-step batch loss is too noisy to trend-test (its weighting puts
  // most mass on high-noise draws), so the check is a held-out comparison
  // against the untouched initialization.
  Task task(symmetric_two_gauss());
  const auto init = seed_model(3);
  auto model = init;
  Rng rng(4);
  AdamConfig adam;
  adam.lr = 3e-3;
  const auto hist = pretrain_flow(model, task, 600, 32, adam, rng,
                                  /*record_every=*/50);
  REQUIRE(hist.size() == 12);
  CHECK(hist.front().step == 50);
  CHECK(hist.back().step == 600);
  for (const auto& m : hist) CHECK(std::isfinite(m.loss));

  Rng h1(100), h2(100);
  const double before = heldout_prediction_loss(init, task, 2000, h1);
  const double after = heldout_prediction_loss(model, task, 2000, h2);
  CHECK(after < before);

  // Cadence includes a final partial interval.
  auto m2 = seed_model(3);
  Rng rng2(4);
  const auto part = pretrain_flow(m2, task, 10, 8, adam, rng2, 4);
  REQUIRE(part.size() == 3);
  CHECK(part[0].step == 4);
  CHECK(part[1].step == 8);
  CHECK(part[2].step == 10);
}

TEST_CASE("architecture/task mismatch is refused") {
  Task task(symmetric_two_gauss());
  Rng arch_rng(5);
  auto wrong = VelocityModel::xavier(ArchSpec{3, 0, {4}, Activation::tanh},
                                     arch_rng);
  Rng rng(6);
  CHECK_THROWS_AS(pretrain_flow(wrong, task, 1, 4, AdamConfig{}, rng),
                  InputError);
  auto models = TrainableModels::from_pretrained(wrong);
  CHECK_THROWS_AS(train_advantageflow(models, task, fast_config(), rng),
                  InputError);
}

TEST_CASE("short advantage run: metrics schema and convexity bounds") {
  Task task(symmetric_two_gauss());
  auto models = TrainableModels::from_pretrained(seed_model(7));
  TrainConfig cfg = fast_config();
  Rng rng(8);
  const auto hist = train_advantageflow(models, task, cfg, rng);
  REQUIRE(hist.size() == cfg.iterations);

  double prev_wall = 0.0;
  for (const auto& m : hist) {
    // Clipped advantages with gamma 1.1, lambda 0.001.
    CHECK(m.min_quad_coeff >= 0.101);
    CHECK(m.max_quad_coeff <= 2.101);
    CHECK(m.min_quad_coeff <= m.max_quad_coeff);
    CHECK(m.mean_reward >= 0.0);
    CHECK(m.mean_reward <= 1.0);
    CHECK(std::isfinite(m.adv_term));
    CHECK(std::isfinite(m.rollout_term));
    CHECK(m.rollout_term >= 0.0);
    CHECK(m.ref_term >= 0.0);
    CHECK(m.wall_s >= prev_wall);
    prev_wall = m.wall_s;
  }
  // Evaluations happen at iteration 1, every eval_every, and at the end.
  CHECK(std::isfinite(hist.front().eval_reward));
  CHECK(std::isfinite(hist.back().eval_reward));
}

TEST_CASE("K = 1: zero advantages, curvature pinned at gamma + lambda") {
  Task task(symmetric_two_gauss());
  auto models = TrainableModels::from_pretrained(seed_model(9));
  TrainConfig cfg = fast_config();
  cfg.K = 1;
  cfg.L = 6;
  cfg.iterations = 8;
  Rng rng(10);
  const auto hist = train_advantageflow(models, task, cfg, rng);
  for (const auto& m : hist) {
    CHECK(m.min_quad_coeff == cfg.gamma.gamma_const + cfg.lambda);
    CHECK(m.max_quad_coeff == cfg.gamma.gamma_const + cfg.lambda);
    CHECK(m.adv_term == 0.0);  // every term is scaled by A = 0
  }
  // No reward signal: evaluation stays at the initial level within noise.
  CHECK(std::abs(hist.back().eval_reward - hist.front().eval_reward) < 0.15);
}

TEST_CASE("frozen rollout with heavy regularization pins the parameters") {
  Task task(symmetric_two_gauss());
  const auto init = seed_model(11);

  auto run = [&](double gamma_const) {
    auto models = TrainableModels::from_pretrained(init);
    TrainConfig cfg = fast_config();
    cfg.rho = 1.0;  // rollout frozen at the initialization
    cfg.gamma.gamma_const = gamma_const;
    cfg.lambda = 0.0;
    cfg.iterations = 40;
    cfg.adam.lr = 1e-2;
    Rng rng(12);
    train_advantageflow(models, task, cfg, rng);
    return max_abs_diff(models.policy.params(), init.params());
  };

  const double drift_pinned = run(1000.0);
  const double drift_free = run(0.0);  // warns; convexity not needed here
  CHECK(drift_pinned < 0.1);
  CHECK(drift_pinned * 3.0 < drift_free);
}

TEST_CASE("numeric blow-up aborts after parking the last good parameters") {
  Task task(symmetric_two_gauss());
  auto init = seed_model(13);
  for (double& p : init.params()) p = 1e200;  // finite but doomed
  auto models = TrainableModels::from_pretrained(init);

  const auto path = std::filesystem::temp_directory_path() /
                    "aflow_trainer_abort_test.ckpt";
  std::filesystem::remove(path);
  TrainConfig cfg = fast_config();
  cfg.abort_checkpoint_path = path.string();
  Rng rng(14);
  CHECK_THROWS_AS(train_advantageflow(models, task, cfg, rng), NumericError);
  REQUIRE(std::filesystem::exists(path));
  const auto recovered = load_checkpoint(path);
  CHECK(recovered.params() == init.params());
  std::filesystem::remove(path);
}

TEST_CASE("policy-gradient baseline refuses deterministic rollouts") {
  Task task(symmetric_two_gauss());
  auto models = TrainableModels::from_pretrained(seed_model(15));
  Rng rng(16);

  TrainConfig cfg = fast_config();
  cfg.sampler.mode = SampleMode::ode;
  CHECK_THROWS_AS(train_grpo_baseline(models, task, cfg, rng), ConfigError);

  cfg.sampler.mode = SampleMode::sde;
  cfg.sampler.sigma_scale = 0.0;
  CHECK_THROWS_AS(train_grpo_baseline(models, task, cfg, rng), ConfigError);
}

TEST_CASE("policy-gradient baseline: constant rewards give a bitwise no-op") {
  TaskSpec spec = symmetric_two_gauss();
  spec.reward = RewardSpec{};
  spec.reward.kind = RewardKind::quadrant;
  spec.reward.mask = {0, 0};  // every point scores 1
  Task task(spec);

  auto models = TrainableModels::from_pretrained(seed_model(17));
  const auto before = models.policy.params();
  TrainConfig cfg = fast_config();
  cfg.sampler.mode = SampleMode::sde;
  cfg.iterations = 3;
  Rng rng(18);
  const auto hist = train_grpo_baseline(models, task, cfg, rng);
  CHECK(models.policy.params() == before);
  for (const auto& m : hist) {
    CHECK(m.mean_reward == 1.0);
    CHECK(m.adv_term == 0.0);
    CHECK(std::isnan(m.min_quad_coeff));
  }
}

TEST_CASE("policy-gradient baseline: short run stays finite") {
  Task task(symmetric_two_gauss());
  auto models = TrainableModels::from_pretrained(seed_model(19));
  TrainConfig cfg = fast_config();
  cfg.sampler.mode = SampleMode::sde;
  cfg.inner_steps = 2;  // second pass exercises the ratio-clip path
  Rng rng(20);
  const auto hist = train_grpo_baseline(models, task, cfg, rng);
  REQUIRE(hist.size() == cfg.iterations);
  for (const auto& m : hist) {
    CHECK(std::isfinite(m.mean_reward));
    CHECK(std::isfinite(m.adv_term));
  }
  CHECK(std::isfinite(hist.back().eval_reward));
  for (double p : models.policy.params()) CHECK(std::isfinite(p));
}

TEST_CASE("same seed, same trajectory: metrics identical modulo wall time") {
  Task task(symmetric_two_gauss());
  auto run = [&] {
    auto models = TrainableModels::from_pretrained(seed_model(21));
    TrainConfig cfg = fast_config();
    Rng rng(22);
    return train_advantageflow(models, task, cfg, rng);
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].iter == b[i].iter);
    CHECK(a[i].mean_reward == b[i].mean_reward);
    CHECK(a[i].eval_reward == b[i].eval_reward);
    CHECK(a[i].min_quad_coeff == b[i].min_quad_coeff);
    CHECK(a[i].max_quad_coeff == b[i].max_quad_coeff);
    CHECK(a[i].adv_term == b[i].adv_term);
    CHECK(a[i].rollout_term == b[i].rollout_term);
    CHECK(a[i].ref_term == b[i].ref_term);
  }
}

TEST_CASE("evaluate_policy: zero field leaves standard normal samples") {
  Task task(symmetric_two_gauss());
  const auto model = VelocityModel::zeros(small_arch());
  Rng rng(23);
  const auto res = evaluate_policy(model, task, 2000, 4, rng);
  // Samples are N(0, I): the right mode wins exactly when x > 0.
  CHECK(res.mean_reward == doctest::Approx(0.5).epsilon(0.08));
  CHECK(res.sem_reward > 0.0);
  REQUIRE(res.component_means.size() == 1);
  CHECK(res.component_means[0] == res.mean_reward);

  Rng rng2(24);
  CHECK_THROWS_AS(evaluate_policy(model, task, 0, 4, rng2), InputError);
}
