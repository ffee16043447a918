// Declarative run configuration: one JSON file fully determines a run (task,
// architecture, pretraining, finetuning). Parsing is strict — a missing
// required field, a type mismatch, or an unrecognized key fails at startup
// with the offending field's dotted path — and the resolved config (defaults
// materialized) serializes back out so a finished run's directory is
// self-describing.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "json.hpp"

#include "aflow/arch.hpp"
#include "aflow/errors.hpp"
#include "aflow/tasks.hpp"
#include "aflow/trainer.hpp"

namespace aflow {

struct PretrainConfig {
  std::size_t steps = 3000;
  std::size_t batch = 64;
  AdamConfig adam{.lr = 3e-3};
  std::size_t record_every = 50;

  void validate() const {
    if (batch < 1) throw ConfigError("pretrain: batch must be >= 1");
    if (!(adam.lr > 0.0)) throw ConfigError("pretrain: lr must be > 0");
    if (record_every < 1)
      throw ConfigError("pretrain: record_every must be >= 1");
  }
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir;
  std::vector<std::size_t> hidden = {16, 16};
  Activation activation = Activation::tanh;
  TaskSpec task;
  PretrainConfig pretrain;
  TrainConfig train;

  // The model signature is derived, never configured: the task dictates the
  // data and condition dimensions.
  ArchSpec arch() const {
    return ArchSpec{task.data_dim(), task.cond_dim(), hidden, activation};
  }
};

namespace detail {

// A JSON node that knows its dotted path, for error messages.
struct Node {
  const nlohmann::json* j;
  std::string path;

  std::string sub(const std::string& key) const {
    return path.empty() ? key : path + "." + key;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("field " + path + ": " + what);
  }

  void require_object() const {
    if (!j->is_object()) fail("expected an object");
  }

  bool has(const char* key) const {
    return j->is_object() && j->contains(key);
  }

  Node child(const char* key) const {
    require_object();
    const auto it = j->find(key);
    if (it == j->end())
      throw ConfigError("missing required field: " + sub(key));
    return Node{&*it, sub(key)};
  }

  // Rejects keys outside the allowed set, so typos fail loudly instead of
  // silently falling back to defaults.
  void allow_keys(std::initializer_list<const char*> keys) const {
    require_object();
    for (const auto& item : j->items()) {
      bool known = false;
      for (const char* k : keys) known = known || item.key() == k;
      if (!known) throw ConfigError("unknown field: " + sub(item.key()));
    }
  }

  double num() const {
    if (!j->is_number()) fail("expected a number");
    return j->get<double>();
  }

  std::uint64_t uint() const {
    if (j->is_number_unsigned()) return j->get<std::uint64_t>();
    if (j->is_number_integer() && j->get<std::int64_t>() >= 0)
      return static_cast<std::uint64_t>(j->get<std::int64_t>());
    fail("expected a nonnegative integer");
  }

  int sint() const {
    if (!j->is_number_integer()) fail("expected an integer");
    return static_cast<int>(j->get<std::int64_t>());
  }

  std::string str() const {
    if (!j->is_string()) fail("expected a string");
    return j->get<std::string>();
  }

  std::vector<Node> elements() const {
    if (!j->is_array()) fail("expected an array");
    std::vector<Node> out;
    out.reserve(j->size());
    for (std::size_t i = 0; i < j->size(); ++i)
      out.push_back(Node{&(*j)[i], path + "[" + std::to_string(i) + "]"});
    return out;
  }

  std::vector<double> num_vec() const {
    std::vector<double> out;
    for (const Node& e : elements()) out.push_back(e.num());
    return out;
  }
};

inline RewardSpec parse_reward(const Node& n) {
  RewardSpec spec;
  spec.kind = reward_from_name(n.child("kind").str());
  switch (spec.kind) {
    case RewardKind::mode_indicator:
      n.allow_keys({"kind", "target_mode"});
      spec.target_mode = n.child("target_mode").sint();
      break;
    case RewardKind::neg_distance:
      n.allow_keys({"kind", "point"});
      spec.point = n.child("point").num_vec();
      break;
    case RewardKind::quadrant: {
      n.allow_keys({"kind", "mask"});
      for (const Node& e : n.child("mask").elements())
        spec.mask.push_back(e.sint());
      break;
    }
    case RewardKind::weighted_sum: {
      n.allow_keys({"kind", "parts"});
      for (const Node& part : n.child("parts").elements()) {
        part.allow_keys({"weight", "reward"});
        spec.weights.push_back(part.child("weight").num());
        spec.parts.push_back(parse_reward(part.child("reward")));
      }
      break;
    }
  }
  return spec;
}

inline TaskSpec parse_task(const Node& n) {
  TaskSpec spec;
  spec.generator = generator_from_name(n.child("generator").str());
  switch (spec.generator) {
    case Generator::two_gauss: {
      n.allow_keys({"generator", "means", "weights", "mode_std", "reward"});
      for (const Node& m : n.child("means").elements())
        spec.means.push_back(m.num_vec());
      if (n.has("weights")) {
        spec.weights = n.child("weights").num_vec();
      } else if (!spec.means.empty()) {
        spec.weights.assign(spec.means.size(),
                            1.0 / static_cast<double>(spec.means.size()));
      }
      if (n.has("mode_std")) spec.mode_std = n.child("mode_std").num();
      break;
    }
    case Generator::ring:
      n.allow_keys({"generator", "radius", "width", "reward"});
      if (n.has("radius")) spec.radius = n.child("radius").num();
      if (n.has("width")) spec.width = n.child("width").num();
      break;
    case Generator::labeled_modes:
      n.allow_keys({"generator", "n_labels", "mode_std", "reward"});
      spec.n_labels = n.child("n_labels").sint();
      if (n.has("mode_std")) spec.mode_std = n.child("mode_std").num();
      break;
  }
  spec.reward = parse_reward(n.child("reward"));
  return spec;
}

inline void parse_arch_into(const Node& n, RunConfig& cfg) {
  n.allow_keys({"hidden", "activation"});
  if (n.has("hidden")) {
    cfg.hidden.clear();
    for (const Node& e : n.child("hidden").elements())
      cfg.hidden.push_back(static_cast<std::size_t>(e.uint()));
  }
  if (n.has("activation"))
    cfg.activation = activation_from_name(n.child("activation").str());
}

inline void parse_pretrain_into(const Node& n, RunConfig& cfg) {
  n.allow_keys({"steps", "batch", "lr", "record_every"});
  auto& p = cfg.pretrain;
  if (n.has("steps")) p.steps = n.child("steps").uint();
  if (n.has("batch")) p.batch = n.child("batch").uint();
  if (n.has("lr")) p.adam.lr = n.child("lr").num();
  if (n.has("record_every")) p.record_every = n.child("record_every").uint();
}

inline void parse_gamma_into(const Node& n, GammaConfig& g) {
  n.allow_keys({"schedule", "gamma_const", "beta"});
  g.schedule = gamma_schedule_from_name(n.child("schedule").str());
  if (n.has("gamma_const")) g.gamma_const = n.child("gamma_const").num();
  if (n.has("beta")) g.beta = n.child("beta").num();
}

inline void parse_sampler_into(const Node& n, SamplerConfig& s) {
  n.allow_keys({"steps", "mode", "sigma_scale", "t_floor"});
  if (n.has("steps")) s.steps = n.child("steps").sint();
  if (n.has("mode")) s.mode = sample_mode_from_name(n.child("mode").str());
  if (n.has("sigma_scale")) s.sigma_scale = n.child("sigma_scale").num();
  if (n.has("t_floor")) s.t_floor = n.child("t_floor").num();
}

inline void parse_train_into(const Node& n, RunConfig& cfg,
                             std::size_t n_conditions) {
  n.allow_keys({"L", "K", "iterations", "lambda", "rho", "inner_steps", "lr",
                "eval_every", "eval_samples", "eval_steps", "clip_ratio",
                "gamma", "sampler"});
  auto& t = cfg.train;
  // Batch geometry defaults to 32 condition slots, shrunk to the number of
  // distinct conditions the task actually has; an explicit L always wins.
  if (n.has("L"))
    t.L = n.child("L").uint();
  else
    t.L = std::min<std::size_t>(t.L, std::max<std::size_t>(1, n_conditions));
  if (n.has("K")) t.K = n.child("K").uint();
  if (n.has("iterations")) t.iterations = n.child("iterations").uint();
  if (n.has("lambda")) t.lambda = n.child("lambda").num();
  if (n.has("rho")) t.rho = n.child("rho").num();
  if (n.has("inner_steps")) t.inner_steps = n.child("inner_steps").uint();
  if (n.has("lr")) t.adam.lr = n.child("lr").num();
  if (n.has("eval_every")) t.eval_every = n.child("eval_every").uint();
  if (n.has("eval_samples")) t.eval_samples = n.child("eval_samples").uint();
  if (n.has("eval_steps")) t.eval_steps = n.child("eval_steps").sint();
  if (n.has("clip_ratio")) t.clip_ratio = n.child("clip_ratio").num();
  if (n.has("gamma")) parse_gamma_into(n.child("gamma"), t.gamma);
  if (n.has("sampler")) parse_sampler_into(n.child("sampler"), t.sampler);
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& root) {
  const detail::Node n{&root, ""};
  n.allow_keys({"seed", "output_dir", "arch", "task", "pretrain", "train"});
  RunConfig cfg;
  cfg.train.adam.lr = 2e-3;  // finetune default, calibrated on the toy tasks
  cfg.seed = n.child("seed").uint();
  cfg.output_dir = n.child("output_dir").str();
  cfg.task = detail::parse_task(n.child("task"));

  // Constructing the task now surfaces geometry/reward violations with the
  // config file still on the stack.
  const Task task(cfg.task);
  const std::size_t n_conditions = task.conditions().size();
  if (n.has("arch")) detail::parse_arch_into(n.child("arch"), cfg);
  if (n.has("pretrain")) detail::parse_pretrain_into(n.child("pretrain"), cfg);
  if (n.has("train"))
    detail::parse_train_into(n.child("train"), cfg, n_conditions);
  else
    cfg.train.L = std::min<std::size_t>(cfg.train.L,
                                        std::max<std::size_t>(1, n_conditions));

  cfg.pretrain.validate();
  cfg.arch().validate();
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path.string());
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config is not valid JSON (" + path.string() +
                      "): " + e.what());
  }
  return parse_run_config(root);
}

namespace detail {

inline nlohmann::json reward_json(const RewardSpec& r) {
  nlohmann::json j{{"kind", reward_name(r.kind)}};
  switch (r.kind) {
    case RewardKind::mode_indicator:
      j["target_mode"] = r.target_mode;
      break;
    case RewardKind::neg_distance:
      j["point"] = r.point;
      break;
    case RewardKind::quadrant:
      j["mask"] = r.mask;
      break;
    case RewardKind::weighted_sum: {
      nlohmann::json parts = nlohmann::json::array();
      for (std::size_t i = 0; i < r.parts.size(); ++i)
        parts.push_back(nlohmann::json{{"weight", r.weights[i]},
                                       {"reward", reward_json(r.parts[i])}});
      j["parts"] = std::move(parts);
      break;
    }
  }
  return j;
}

inline nlohmann::json task_json(const TaskSpec& t) {
  nlohmann::json j{{"generator", generator_name(t.generator)}};
  switch (t.generator) {
    case Generator::two_gauss:
      j["means"] = t.means;
      j["weights"] = t.weights;
      j["mode_std"] = t.mode_std;
      break;
    case Generator::ring:
      j["radius"] = t.radius;
      j["width"] = t.width;
      break;
    case Generator::labeled_modes:
      j["n_labels"] = t.n_labels;
      j["mode_std"] = t.mode_std;
      break;
  }
  j["reward"] = reward_json(t.reward);
  return j;
}

}  // namespace detail

// The fully resolved config: parsing this back yields the identical RunConfig,
// so the copy dropped into the output directory reproduces the run.
inline nlohmann::json run_config_json(const RunConfig& cfg) {
  return nlohmann::json{
      {"seed", cfg.seed},
      {"output_dir", cfg.output_dir},
      {"arch",
       {{"hidden", cfg.hidden},
        {"activation", activation_name(cfg.activation)}}},
      {"task", detail::task_json(cfg.task)},
      {"pretrain",
       {{"steps", cfg.pretrain.steps},
        {"batch", cfg.pretrain.batch},
        {"lr", cfg.pretrain.adam.lr},
        {"record_every", cfg.pretrain.record_every}}},
      {"train",
       {{"L", cfg.train.L},
        {"K", cfg.train.K},
        {"iterations", cfg.train.iterations},
        {"lambda", cfg.train.lambda},
        {"rho", cfg.train.rho},
        {"inner_steps", cfg.train.inner_steps},
        {"lr", cfg.train.adam.lr},
        {"eval_every", cfg.train.eval_every},
        {"eval_samples", cfg.train.eval_samples},
        {"eval_steps", cfg.train.eval_steps},
        {"clip_ratio", cfg.train.clip_ratio},
        {"gamma",
         {{"schedule", gamma_schedule_name(cfg.train.gamma.schedule)},
          {"gamma_const", cfg.train.gamma.gamma_const},
          {"beta", cfg.train.gamma.beta}}},
        {"sampler",
         {{"steps", cfg.train.sampler.steps},
          {"mode", sample_mode_name(cfg.train.sampler.mode)},
          {"sigma_scale", cfg.train.sampler.sigma_scale},
          {"t_floor", cfg.train.sampler.t_floor}}}}}};
}

}  // namespace aflow
