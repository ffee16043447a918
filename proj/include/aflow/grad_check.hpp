// Independent gradient verification by central finite differences. The loss
// is treated as a black box over the flat parameter vector, so this checks
// the full forward/backward pipeline rather than any single layer.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "aflow/model.hpp"
#include "aflow/rng.hpp"

namespace aflow {

struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t worst_coord = 0;
  std::size_t n_checked = 0;
  bool pass = false;
};

// loss() must evaluate the scalar objective at the model's current parameters.
// analytic is dLoss/dparams as produced by backward. Checks n_coords randomly
// chosen coordinates (all of them when the model is small enough).
//
// Each coordinate is scored as |fd - g| / max(|fd|, |g|, scale_floor): purely
// relative for coordinates above the floor, absolute (in units of the floor)
// below it. Central differences carry ~|loss|*eps/step of roundoff noise, so
// near-zero coordinates cannot meaningfully be held to a relative criterion.
inline GradCheckReport grad_check(VelocityModel& model,
                                  const std::function<double()>& loss,
                                  const GradVector& analytic, Rng& rng,
                                  std::size_t n_coords = 200,
                                  double step = 1e-6, double tol = 1e-5,
                                  double scale_floor = 1e-3) {
  auto& params = model.params();
  const std::size_t n = params.size();

  std::vector<std::size_t> coords;
  if (n <= n_coords) {
    coords.resize(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = i;
  } else {
    coords.reserve(n_coords);
    for (std::size_t i = 0; i < n_coords; ++i)
      coords.push_back(static_cast<std::size_t>(rng.below(n)));
  }

  GradCheckReport report;
  for (std::size_t i : coords) {
    const double saved = params[i];
    params[i] = saved + step;
    const double lp = loss();
    params[i] = saved - step;
    const double lm = loss();
    params[i] = saved;
    const double fd = (lp - lm) / (2.0 * step);
    const double abs_err = std::abs(fd - analytic[i]);
    const double denom =
        std::max({std::abs(fd), std::abs(analytic[i]), scale_floor});
    const double rel_err = abs_err / denom;
    if (rel_err > report.max_rel_err) {
      report.max_rel_err = rel_err;
      report.worst_coord = i;
    }
    report.max_abs_err = std::max(report.max_abs_err, abs_err);
    ++report.n_checked;
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace aflow
