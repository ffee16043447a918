#include "aflow/afloss.hpp"

#include <cmath>
#include <vector>

#include "aflow/grad_check.hpp"
#include "aflow/rng.hpp"
#include "doctest.h"

using namespace aflow;

namespace {

// data_dim=1 affine model with zero weights: v(x,t) = b everywhere.
VelocityModel bias_model(double b) {
  ArchSpec a;
  a.data_dim = 1;
  VelocityModel m(a);
  m.params() = {0.0, 0.0, b};
  return m;
}

ArchSpec mlp_arch() {
  ArchSpec a;
  a.data_dim = 2;
  a.cond_dim = 1;
  a.hidden = {8, 6};
  return a;
}

}  // namespace

TEST_CASE("hand-checkable loss decomposition") {
  // f = x_t - t v with x_t = 0, t = 1, so f = -b for a pure-bias model.
  // policy b=-2 -> f=2, rollout b=-1 -> f_old=1, reference b=0 -> f_ref=0,
  // x0 = 0, A = -0.5, gamma = 1.1, lambda = 0.001:
  //   adv     = -0.5 * (2-0)^2 = -2
  //   rollout =  1.1 * (2-1)^2 =  1.1
  //   ref     = 0.001 * (2-0)^2 = 0.004
  const auto policy = bias_model(-2.0);
  const auto rollout = bias_model(-1.0);
  const auto reference = bias_model(0.0);
  const ModelTriple models{&policy, &rollout, &reference};
  Workspace wsp, wss;
  const std::vector<double> x_t = {0.0}, x0 = {0.0};
  const auto r = advantageflow_loss(models, x_t, 1.0, {}, x0, -0.5, 1.1, 0.001,
                                    wsp, wss);
  CHECK(r.adv_term == doctest::Approx(-2.0));
  CHECK(r.rollout_term == doctest::Approx(1.1));
  CHECK(r.ref_term == doctest::Approx(0.004));
  CHECK(r.total == doctest::Approx(-0.896));
  CHECK(r.quad_coeff == doctest::Approx(0.601));
}

TEST_CASE("loss vanishes when all models and targets coincide") {
  Rng rng(2);
  VelocityModel m = VelocityModel::xavier(mlp_arch(), rng);
  const ModelTriple models{&m, &m, &m};
  Workspace wsp, wss;
  const auto x_t = rng.gauss_vector(2);
  const auto c = rng.gauss_vector(1);
  const double t = 0.5;
  // x0 equal to the policy's own prediction kills the advantage term too.
  const auto v = m.velocity(x_t, t, c);
  std::vector<double> x0(2);
  for (int i = 0; i < 2; ++i) x0[i] = x_t[i] - t * v[i];
  const auto r = advantageflow_loss(models, x_t, t, c, x0, 0.8, 1.1, 0.001,
                                    wsp, wss);
  CHECK(r.total == doctest::Approx(0.0));
  CHECK(r.grad_v[0] == doctest::Approx(0.0));
  CHECK(r.grad_v[1] == doctest::Approx(0.0));
}

TEST_CASE("parameter gradient matches finite differences") {
  Rng rng(31);
  VelocityModel policy = VelocityModel::xavier(mlp_arch(), rng);
  const VelocityModel rollout = VelocityModel::xavier(mlp_arch(), rng);
  const VelocityModel reference = VelocityModel::xavier(mlp_arch(), rng);
  const ModelTriple models{&policy, &rollout, &reference};

  const auto x_t = rng.gauss_vector(2);
  const auto c = rng.gauss_vector(1);
  const auto x0 = rng.gauss_vector(2);
  const double t = 0.45, A = -0.6, gamma = 1.1, lambda = 0.001;

  Workspace wsp, wss;
  const auto r =
      advantageflow_loss(models, x_t, t, c, x0, A, gamma, lambda, wsp, wss);
  GradVector g;
  policy.backward(wsp, r.grad_v, g, false);

  auto loss = [&] {
    Workspace w1, w2;
    return advantageflow_loss(models, x_t, t, c, x0, A, gamma, lambda, w1, w2)
        .total;
  };
  Rng pick(7);
  const auto rep = grad_check(policy, loss, g, pick);
  CAPTURE(rep.max_rel_err);
  CHECK(rep.pass);
}

TEST_CASE("gradient stays correct when the anchor models move") {
  // The anchors enter the loss only through their (constant) predictions;
  // after changing them, the analytic gradient must still match finite
  // differences over the policy parameters.
  Rng rng(32);
  VelocityModel policy = VelocityModel::xavier(mlp_arch(), rng);
  VelocityModel rollout = VelocityModel::xavier(mlp_arch(), rng);
  const VelocityModel reference = VelocityModel::xavier(mlp_arch(), rng);
  const auto x_t = rng.gauss_vector(2);
  const auto c = rng.gauss_vector(1);
  const auto x0 = rng.gauss_vector(2);

  for (double shift : {0.0, 0.25}) {
    for (double& p : rollout.params()) p += shift;
    const ModelTriple models{&policy, &rollout, &reference};
    Workspace wsp, wss;
    const auto r = advantageflow_loss(models, x_t, 0.6, c, x0, 0.9, 0.2, 0.001,
                                      wsp, wss);
    GradVector g;
    policy.backward(wsp, r.grad_v, g, false);
    CHECK(g.size() == policy.param_count());
    auto loss = [&] {
      Workspace w1, w2;
      return advantageflow_loss(models, x_t, 0.6, c, x0, 0.9, 0.2, 0.001, w1, w2)
          .total;
    };
    Rng pick(7);
    CHECK(grad_check(policy, loss, g, pick).pass);
  }
}

TEST_CASE("per-sample curvature equals 2 quad_coeff t^2 for a bias policy") {
  // With v = b, f = x_t - t b is linear in b, so the loss is an exact
  // quadratic in b with second derivative 2 (A + gamma + lambda) t^2.
  const auto rollout = bias_model(0.3);
  const auto reference = bias_model(-0.1);
  const std::vector<double> x_t = {0.7}, x0 = {0.2};
  const double t = 0.8, h = 0.25;

  for (auto [A, gamma] : std::vector<std::pair<double, double>>{
           {0.9, 1.1}, {-1.0, 1.1}, {-1.0, 0.5}}) {
    const double lambda = 0.001;
    auto eval = [&](double b) {
      const auto policy = bias_model(b);
      const ModelTriple models{&policy, &rollout, &reference};
      Workspace wsp, wss;
      return advantageflow_loss(models, x_t, t, {}, x0, A, gamma, lambda, wsp,
                                wss)
          .total;
    };
    const double second_diff =
        (eval(0.5 + h) - 2.0 * eval(0.5) + eval(0.5 - h)) / (h * h);
    const double quad = A + gamma + lambda;
    CHECK(second_diff == doctest::Approx(2.0 * quad * t * t).epsilon(1e-9));
    // Positive curvature iff the combined coefficient is positive.
    CHECK((second_diff > 0) == (quad > 0));
  }
}

TEST_CASE("loss validates inputs") {
  const auto policy = bias_model(0.0);
  const auto rollout = bias_model(0.0);
  ModelTriple missing{&policy, &rollout, nullptr};
  Workspace wsp, wss;
  CHECK_THROWS_AS(advantageflow_loss(missing, std::vector{0.0}, 0.5, {},
                                     std::vector{0.0}, 0.0, 1.0, 0.0, wsp, wss),
                  InputError);

  ArchSpec other;
  other.data_dim = 2;
  const VelocityModel mismatched(other);
  ModelTriple bad{&policy, &rollout, &mismatched};
  CHECK_THROWS_AS(advantageflow_loss(bad, std::vector{0.0}, 0.5, {},
                                     std::vector{0.0}, 0.0, 1.0, 0.0, wsp, wss),
                  InputError);
}

TEST_CASE("ema_update blends parameters and respects the endpoints") {
  ArchSpec a;
  a.data_dim = 1;
  VelocityModel target(a), source(a);
  target.params() = {1.0, 2.0, 3.0};
  source.params() = {2.0, 0.0, -1.0};

  auto frozen = target;
  ema_update(frozen, source, 1.0);
  CHECK(frozen.params() == target.params());

  auto copied = target;
  ema_update(copied, source, 0.0);
  CHECK(copied.params() == source.params());

  auto blended = target;
  ema_update(blended, source, 0.9);
  CHECK(blended.params()[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 2.0));
  CHECK(blended.params()[1] == doctest::Approx(1.8));
  CHECK(blended.params()[2] == doctest::Approx(2.6));

  CHECK_THROWS_AS(ema_update(blended, source, 1.5), ConfigError);
  ArchSpec b;
  b.data_dim = 2;
  VelocityModel wrong(b);
  CHECK_THROWS_AS(ema_update(wrong, source, 0.5), InputError);
}

TEST_CASE("repeated ema updates contract toward the policy") {
  ArchSpec a;
  a.data_dim = 1;
  a.hidden = {4};
  Rng rng(9);
  VelocityModel policy = VelocityModel::xavier(a, rng);
  VelocityModel rollout = VelocityModel::xavier(a, rng);
  double prev = 1e300;
  for (int i = 0; i < 100; ++i) {
    ema_update(rollout, policy, 0.8);
    double dist = 0.0;
    for (std::size_t j = 0; j < policy.param_count(); ++j) {
      const double d = rollout.params()[j] - policy.params()[j];
      dist += d * d;
    }
    CHECK(dist < prev);
    prev = dist;
  }
  // Squared distance contracts by 0.8^2 per update: 0.8^200 ~ 4e-20.
  CHECK(prev < 1e-15);
}
