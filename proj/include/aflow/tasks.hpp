// Toy data distributions and reward functions for low-dimensional studies.
// A Task couples a clean-sample generator with a reward defined on the whole
// data space; conditions steer generation only, never the reward.
#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "aflow/errors.hpp"
#include "aflow/rng.hpp"

namespace aflow {

enum class Generator { two_gauss, ring, labeled_modes };
enum class RewardKind { mode_indicator, neg_distance, quadrant, weighted_sum };

inline std::string generator_name(Generator g) {
  switch (g) {
    case Generator::two_gauss: return "two_gauss";
    case Generator::ring: return "ring";
    case Generator::labeled_modes: return "labeled_modes";
  }
  return "?";
}

inline Generator generator_from_name(const std::string& s) {
  if (s == "two_gauss") return Generator::two_gauss;
  if (s == "ring") return Generator::ring;
  if (s == "labeled_modes") return Generator::labeled_modes;
  throw ConfigError("unknown generator: " + s);
}

inline std::string reward_name(RewardKind k) {
  switch (k) {
    case RewardKind::mode_indicator: return "mode_indicator";
    case RewardKind::neg_distance: return "neg_distance";
    case RewardKind::quadrant: return "quadrant";
    case RewardKind::weighted_sum: return "weighted_sum";
  }
  return "?";
}

inline RewardKind reward_from_name(const std::string& s) {
  if (s == "mode_indicator") return RewardKind::mode_indicator;
  if (s == "neg_distance") return RewardKind::neg_distance;
  if (s == "quadrant") return RewardKind::quadrant;
  if (s == "weighted_sum") return RewardKind::weighted_sum;
  throw ConfigError("unknown reward: " + s);
}

struct RewardSpec {
  RewardKind kind = RewardKind::neg_distance;
  int target_mode = 0;             // mode_indicator
  std::vector<double> point;       // neg_distance
  std::vector<int> mask;           // quadrant: entries in {-1, 0, +1}
  std::vector<double> weights;     // weighted_sum
  std::vector<RewardSpec> parts;   // weighted_sum (one level deep)
};

struct TaskSpec {
  Generator generator = Generator::two_gauss;
  // two_gauss / labeled_modes
  std::vector<std::vector<double>> means;
  std::vector<double> weights;
  double mode_std = 0.25;
  // ring
  double radius = 2.0;
  double width = 0.1;
  // labeled_modes
  int n_labels = 0;
  RewardSpec reward;

  std::size_t data_dim() const {
    switch (generator) {
      case Generator::two_gauss:
        return means.empty() ? 0 : means[0].size();
      case Generator::ring:
      case Generator::labeled_modes:
        return 2;
    }
    return 0;
  }

  std::size_t cond_dim() const {
    return generator == Generator::labeled_modes
               ? static_cast<std::size_t>(n_labels)
               : 0;
  }
};

namespace detail {

inline void validate_reward(const RewardSpec& r, std::size_t dim, bool nested) {
  switch (r.kind) {
    case RewardKind::mode_indicator:
      if (r.target_mode < 0)
        throw ConfigError("mode_indicator: negative target mode");
      break;
    case RewardKind::neg_distance:
      if (r.point.size() != dim)
        throw ConfigError("neg_distance: point has dimension " +
                          std::to_string(r.point.size()) + ", data has " +
                          std::to_string(dim));
      for (double v : r.point)
        if (!std::isfinite(v)) throw ConfigError("neg_distance: non-finite point");
      break;
    case RewardKind::quadrant:
      if (r.mask.size() != dim)
        throw ConfigError("quadrant: mask size mismatch");
      for (int m : r.mask)
        if (m < -1 || m > 1)
          throw ConfigError("quadrant: mask entries must be -1, 0, or +1");
      break;
    case RewardKind::weighted_sum:
      if (nested) throw ConfigError("weighted_sum: cannot nest weighted sums");
      if (r.parts.empty() || r.parts.size() != r.weights.size())
        throw ConfigError("weighted_sum: need equally many parts and weights");
      for (double w : r.weights)
        if (!std::isfinite(w)) throw ConfigError("weighted_sum: non-finite weight");
      for (const auto& p : r.parts) validate_reward(p, dim, /*nested=*/true);
      break;
  }
}

}  // namespace detail

// Runtime task: validated spec plus sampling, mode geometry, and rewards.
class Task {
 public:
  explicit Task(TaskSpec spec) : spec_(std::move(spec)) {
    switch (spec_.generator) {
      case Generator::two_gauss: {
        if (spec_.means.size() < 2)
          throw ConfigError("two_gauss: need at least two component means");
        const std::size_t d = spec_.means[0].size();
        if (d == 0) throw ConfigError("two_gauss: zero-dimensional means");
        for (const auto& m : spec_.means)
          if (m.size() != d) throw ConfigError("two_gauss: ragged means");
        if (spec_.weights.size() != spec_.means.size())
          throw ConfigError("two_gauss: one weight per component required");
        double sum = 0.0;
        for (double w : spec_.weights) {
          if (!(w >= 0.0)) throw ConfigError("two_gauss: negative weight");
          sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9)
          throw ConfigError("two_gauss: weights sum to " + std::to_string(sum) +
                            ", expected 1");
        centers_ = spec_.means;
        break;
      }
      case Generator::ring:
        if (!(spec_.radius > 0.0) || !(spec_.width >= 0.0))
          throw ConfigError("ring: radius must be > 0 and width >= 0");
        break;
      case Generator::labeled_modes: {
        if (spec_.n_labels < 1)
          throw ConfigError("labeled_modes: need at least one label");
        // Labels map to equally spaced centers on a circle of radius 2.
        for (int k = 0; k < spec_.n_labels; ++k) {
          const double a =
              2.0 * std::numbers::pi * static_cast<double>(k) / spec_.n_labels;
          centers_.push_back({2.0 * std::cos(a), 2.0 * std::sin(a)});
        }
        break;
      }
    }
    if (!(spec_.mode_std > 0.0))
      throw ConfigError("task: mode_std must be > 0");
    detail::validate_reward(spec_.reward, spec_.data_dim(), /*nested=*/false);
    if (reward_needs_modes(spec_.reward) && centers_.empty())
      throw ConfigError("mode_indicator reward requires a generator with modes");
    if (reward_needs_modes(spec_.reward)) check_mode_targets(spec_.reward);
  }

  const TaskSpec& spec() const { return spec_; }
  std::size_t data_dim() const { return spec_.data_dim(); }
  std::size_t cond_dim() const { return spec_.cond_dim(); }
  const std::vector<std::vector<double>>& mode_centers() const {
    return centers_;
  }

  // Distinct conditioning vectors; a single empty condition when the
  // generator is unconditional.
  std::vector<std::vector<double>> conditions() const {
    if (spec_.generator != Generator::labeled_modes) return {{}};
    std::vector<std::vector<double>> out;
    for (int k = 0; k < spec_.n_labels; ++k) {
      std::vector<double> onehot(spec_.n_labels, 0.0);
      onehot[static_cast<std::size_t>(k)] = 1.0;
      out.push_back(std::move(onehot));
    }
    return out;
  }

  std::vector<double> sample_x0(std::span<const double> cond, Rng& rng) const {
    switch (spec_.generator) {
      case Generator::two_gauss: {
        const double u = rng.next_double();
        std::size_t c = 0;
        double acc = 0.0;
        for (; c + 1 < spec_.weights.size(); ++c) {
          acc += spec_.weights[c];
          if (u < acc) break;
        }
        std::vector<double> x = centers_[c];
        for (double& v : x) v += spec_.mode_std * rng.gauss();
        return x;
      }
      case Generator::ring: {
        const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double r = spec_.radius + spec_.width * rng.gauss();
        return {r * std::cos(a), r * std::sin(a)};
      }
      case Generator::labeled_modes: {
        if (cond.size() != cond_dim())
          throw InputError("sample_x0: condition has size " +
                           std::to_string(cond.size()) + ", expected " +
                           std::to_string(cond_dim()));
        std::size_t label = 0;
        double best = cond.empty() ? 0.0 : cond[0];
        for (std::size_t i = 1; i < cond.size(); ++i)
          if (cond[i] > best) best = cond[i], label = i;
        std::vector<double> x = centers_[label];
        for (double& v : x) v += spec_.mode_std * rng.gauss();
        return x;
      }
    }
    throw InputError("sample_x0: unknown generator");
  }

  std::size_t nearest_mode(std::span<const double> x) const {
    if (centers_.empty())
      throw InputError("nearest_mode: task has no mode centers");
    std::size_t best = 0;
    double best_d = sq_dist(x, centers_[0]);
    for (std::size_t i = 1; i < centers_.size(); ++i) {
      const double d = sq_dist(x, centers_[i]);
      if (d < best_d) best_d = d, best = i;
    }
    return best;
  }

  // Unweighted component values; a one-element vector for simple rewards.
  std::vector<double> reward_components(std::span<const double> x) const {
    if (spec_.reward.kind != RewardKind::weighted_sum)
      return {eval_reward(spec_.reward, x)};
    std::vector<double> out;
    for (const auto& part : spec_.reward.parts)
      out.push_back(eval_reward(part, x));
    return out;
  }

  double reward_total(std::span<const double> x) const {
    if (spec_.reward.kind != RewardKind::weighted_sum)
      return eval_reward(spec_.reward, x);
    double total = 0.0;
    for (std::size_t j = 0; j < spec_.reward.parts.size(); ++j)
      total += spec_.reward.weights[j] * eval_reward(spec_.reward.parts[j], x);
    return total;
  }

  std::vector<std::string> reward_component_names() const {
    if (spec_.reward.kind != RewardKind::weighted_sum)
      return {reward_name(spec_.reward.kind)};
    std::vector<std::string> out;
    for (std::size_t j = 0; j < spec_.reward.parts.size(); ++j)
      out.push_back(reward_name(spec_.reward.parts[j].kind) + "_" +
                    std::to_string(j));
    return out;
  }

 private:
  static bool reward_needs_modes(const RewardSpec& r) {
    if (r.kind == RewardKind::mode_indicator) return true;
    if (r.kind == RewardKind::weighted_sum)
      for (const auto& p : r.parts)
        if (p.kind == RewardKind::mode_indicator) return true;
    return false;
  }

  void check_mode_targets(const RewardSpec& r) const {
    if (r.kind == RewardKind::mode_indicator &&
        static_cast<std::size_t>(r.target_mode) >= centers_.size())
      throw ConfigError("mode_indicator: target mode " +
                        std::to_string(r.target_mode) + " out of range");
    for (const auto& p : r.parts) check_mode_targets(p);
  }

  static double sq_dist(std::span<const double> a,
                        std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
    return s;
  }

  double eval_reward(const RewardSpec& r, std::span<const double> x) const {
    if (x.size() != data_dim())
      throw InputError("reward: point has dimension " +
                       std::to_string(x.size()) + ", expected " +
                       std::to_string(data_dim()));
    switch (r.kind) {
      case RewardKind::mode_indicator:
        return nearest_mode(x) == static_cast<std::size_t>(r.target_mode)
                   ? 1.0
                   : 0.0;
      case RewardKind::neg_distance:
        return -std::sqrt(sq_dist(x, r.point));
      case RewardKind::quadrant:
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (r.mask[i] > 0 && !(x[i] > 0.0)) return 0.0;
          if (r.mask[i] < 0 && !(x[i] < 0.0)) return 0.0;
        }
        return 1.0;
      case RewardKind::weighted_sum:
        throw InputError("reward: nested weighted_sum");
    }
    throw InputError("reward: unknown kind");
  }

  TaskSpec spec_;
  std::vector<std::vector<double>> centers_;
};

// The standard acceptance task: symmetric two-Gaussian mixture at (+/-2, 0).
inline TaskSpec symmetric_two_gauss() {
  TaskSpec spec;
  spec.generator = Generator::two_gauss;
  spec.means = {{2.0, 0.0}, {-2.0, 0.0}};
  spec.weights = {0.5, 0.5};
  spec.reward.kind = RewardKind::mode_indicator;
  spec.reward.target_mode = 0;  // the right-hand mode
  return spec;
}

}  // namespace aflow
