// Group-relative advantages and the strength schedules for the proximity
// term. Advantages are centered per prompt group, normalized by the global
// deviation scale, and clipped to [-1, 1]; a degenerate batch (all rewards
// equal) yields all-zero advantages rather than dividing by ~0.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "aflow/errors.hpp"

namespace aflow {

inline constexpr double kAdvantageScaleFloor = 1e-8;

inline std::vector<std::vector<double>> compute_advantages(
    const std::vector<std::vector<double>>& rewards) {
  if (rewards.empty()) throw InputError("compute_advantages: no reward groups");
  std::size_t total = 0;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    if (rewards[i].empty())
      throw InputError("compute_advantages: reward group " + std::to_string(i) +
                       " is empty");
    for (double r : rewards[i])
      if (!std::isfinite(r))
        throw InputError("compute_advantages: non-finite reward in group " +
                         std::to_string(i));
    total += rewards[i].size();
  }

  // Per-group means, then the pooled deviation scale over all samples.
  std::vector<double> group_mean(rewards.size());
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    double s = 0.0;
    for (double r : rewards[i]) s += r;
    group_mean[i] = s / static_cast<double>(rewards[i].size());
    for (double r : rewards[i]) {
      const double d = r - group_mean[i];
      sq_sum += d * d;
    }
  }
  const double scale = std::sqrt(sq_sum / static_cast<double>(total));

  std::vector<std::vector<double>> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    adv[i].resize(rewards[i].size());
    if (scale < kAdvantageScaleFloor) continue;  // stays all-zero
    for (std::size_t k = 0; k < rewards[i].size(); ++k)
      adv[i][k] =
          std::clamp((rewards[i][k] - group_mean[i]) / scale, -1.0, 1.0);
  }
  return adv;
}

// Strength of the pull toward the rollout model, possibly advantage-dependent.
enum class GammaSchedule { constant, adaptive, nft };

inline const char* gamma_schedule_name(GammaSchedule s) {
  switch (s) {
    case GammaSchedule::constant:
      return "constant";
    case GammaSchedule::adaptive:
      return "adaptive";
    case GammaSchedule::nft:
      return "nft";
  }
  return "unknown";
}

inline GammaSchedule gamma_schedule_from_name(const std::string& s) {
  if (s == "constant") return GammaSchedule::constant;
  if (s == "adaptive") return GammaSchedule::adaptive;
  if (s == "nft") return GammaSchedule::nft;
  throw ConfigError("unknown gamma schedule '" + s +
                    "' (expected constant, adaptive, or nft)");
}

struct GammaConfig {
  GammaSchedule schedule = GammaSchedule::constant;
  // Constant schedule weight. Strict per-sample convexity needs
  // gamma_const + lambda > 1 (to dominate any clipped advantage); that is
  // checked where lambda is known, at training-config validation.
  double gamma_const = 1.1;
  double beta = 1.0;  // nft schedule mixing strength

  void validate() const {
    if (schedule == GammaSchedule::constant &&
        !(gamma_const >= 0.0 && std::isfinite(gamma_const)))
      throw ConfigError("gamma: constant schedule needs a finite weight >= 0");
    if (schedule == GammaSchedule::nft && !(beta > 0.0 && beta <= 1.0))
      throw ConfigError("gamma: nft schedule needs beta in (0, 1]");
  }
};

inline double gamma_value(const GammaConfig& cfg, double advantage) {
  cfg.validate();
  switch (cfg.schedule) {
    case GammaSchedule::constant:
      return cfg.gamma_const;
    case GammaSchedule::adaptive:
      return 1.0 - advantage;
    case GammaSchedule::nft:
      return cfg.beta * (cfg.beta - advantage);
  }
  throw ConfigError("gamma: unknown schedule");
}

}  // namespace aflow
