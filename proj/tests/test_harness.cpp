// Config parsing, metrics serialization, and the verify-check suites — the
// layers between the numerics and the command-line tool.
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "aflow/checks.hpp"
#include "aflow/config.hpp"
#include "aflow/fault.hpp"
#include "aflow/metrics.hpp"
#include "doctest.h"

using namespace aflow;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json full_config_json() {
  return json{
      {"seed", 11},
      {"output_dir", "/tmp/aflow_harness_out"},
      {"arch", {{"hidden", {8, 4}}, {"activation", "silu"}}},
      {"task",
       {{"generator", "two_gauss"},
        {"means", {{-2.0, 0.0}, {2.0, 0.0}}},
        {"mode_std", 0.25},
        {"reward", {{"kind", "mode_indicator"}, {"target_mode", 1}}}}},
      {"pretrain", {{"steps", 100}, {"batch", 16}, {"lr", 0.001}}},
      {"train",
       {{"L", 6},
        {"K", 3},
        {"iterations", 7},
        {"gamma", {{"schedule", "adaptive"}}},
        {"sampler", {{"steps", 12}, {"mode", "sde"}, {"sigma_scale", 0.2}}}}}};
}

fs::path temp_file(const char* name) {
  const auto p = fs::temp_directory_path() / name;
  fs::remove(p);
  return p;
}

bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof a) == 0;
}

}  // namespace

// --- run config -------------------------------------------------------------

TEST_CASE("config: full parse, then resolved form round-trips") {
  const RunConfig cfg = parse_run_config(full_config_json());
  CHECK(cfg.seed == 11);
  CHECK(cfg.output_dir == "/tmp/aflow_harness_out");
  CHECK(cfg.hidden == std::vector<std::size_t>{8, 4});
  CHECK(cfg.activation == Activation::silu);
  CHECK(cfg.arch().data_dim == 2);
  CHECK(cfg.arch().cond_dim == 0);
  CHECK(cfg.pretrain.steps == 100);
  CHECK(cfg.pretrain.batch == 16);
  CHECK(cfg.pretrain.adam.lr == 0.001);
  CHECK(cfg.pretrain.record_every == 50);  // untouched default
  CHECK(cfg.train.L == 6);
  CHECK(cfg.train.K == 3);
  CHECK(cfg.train.iterations == 7);
  CHECK(cfg.train.gamma.schedule == GammaSchedule::adaptive);
  CHECK(cfg.train.sampler.mode == SampleMode::sde);
  CHECK(cfg.train.sampler.sigma_scale == 0.2);
  CHECK(cfg.train.adam.lr == 2e-3);  // finetune default, not Adam's generic

  // Serializing the resolved config and parsing it back must be a fixpoint.
  const json j1 = run_config_json(cfg);
  const json j2 = run_config_json(parse_run_config(j1));
  CHECK(j1 == j2);
}

TEST_CASE("config: group count defaults to the task's condition count") {
  json j{{"seed", 1},
         {"output_dir", "x"},
         {"task",
          {{"generator", "two_gauss"},
           {"means", {{-2.0, 0.0}, {2.0, 0.0}}},
           {"reward", {{"kind", "mode_indicator"}, {"target_mode", 0}}}}}};
  // Unconditional task: one (empty) condition.
  CHECK(parse_run_config(j).train.L == 1);

  j["task"] = {{"generator", "labeled_modes"},
               {"n_labels", 4},
               {"reward", {{"kind", "mode_indicator"}, {"target_mode", 0}}}};
  CHECK(parse_run_config(j).train.L == 4);

  // An explicit L always wins over the shrink rule.
  j["train"] = {{"L", 32}, {"gamma", {{"schedule", "constant"}}}};
  CHECK(parse_run_config(j).train.L == 32);
}

TEST_CASE("config: strict errors carry the offending dotted path") {
  json j = full_config_json();

  j.erase("seed");
  CHECK_THROWS_WITH_AS(parse_run_config(j),
                       "missing required field: seed", ConfigError);

  j = full_config_json();
  j["task"].erase("reward");
  CHECK_THROWS_WITH_AS(parse_run_config(j),
                       "missing required field: task.reward", ConfigError);

  j = full_config_json();
  j["train"]["lerning_rate"] = 0.1;
  CHECK_THROWS_WITH_AS(parse_run_config(j),
                       "unknown field: train.lerning_rate", ConfigError);

  j = full_config_json();
  j["train"]["L"] = -3;
  CHECK_THROWS_WITH_AS(parse_run_config(j),
                       "field train.L: expected a nonnegative integer",
                       ConfigError);

  j = full_config_json();
  j["task"]["reward"] = {
      {"kind", "weighted_sum"},
      {"parts",
       {{{"weight", 1.0},
         {"reward", {{"kind", "mode_indicator"}, {"target_mode", 0}}}},
        {{"weight", 0.5},
         {"reward", {{"kind", "neg_distance"}, {"point", "oops"}}}}}}};
  CHECK_THROWS_WITH_AS(
      parse_run_config(j),
      "field task.reward.parts[1].reward.point: expected an array",
      ConfigError);

  // Nested validation (not syntax) also surfaces as ConfigError.
  j = full_config_json();
  j["pretrain"]["batch"] = 0;
  CHECK_THROWS_AS(parse_run_config(j), ConfigError);
}

TEST_CASE("config: composite reward parses recursively") {
  json j = full_config_json();
  j["task"]["reward"] = {
      {"kind", "weighted_sum"},
      {"parts",
       {{{"weight", 1.0},
         {"reward", {{"kind", "mode_indicator"}, {"target_mode", 0}}}},
        {{"weight", 0.5},
         {"reward", {{"kind", "neg_distance"}, {"point", {2.0, 0.0}}}}}}}};
  const RunConfig cfg = parse_run_config(j);
  const Task task(cfg.task);
  const auto names = task.reward_component_names();
  REQUIRE(names.size() == 2);
  CHECK(names[0] == "mode_indicator_0");
  CHECK(names[1] == "neg_distance_1");
  // Round-trip keeps the nested structure.
  CHECK(run_config_json(cfg) == run_config_json(parse_run_config(run_config_json(cfg))));
}

TEST_CASE("config: unreadable or malformed files are config errors") {
  CHECK_THROWS_AS(load_run_config("/nonexistent/aflow.json"), ConfigError);

  const auto p = temp_file("aflow_harness_bad.json");
  std::ofstream(p) << "{ not json";
  CHECK_THROWS_AS(load_run_config(p), ConfigError);
  fs::remove(p);
}

// --- metrics serialization ---------------------------------------------------

TEST_CASE("metrics: doubles survive the csv round-trip bit for bit") {
  IterationMetrics m;
  m.iter = 17;
  m.wall_s = 0.1;  // not exactly representable
  m.mean_reward = 1.0 / 3.0;
  m.eval_reward = std::nan("");  // no eval this iteration
  m.min_quad_coeff = 5e-324;  // smallest denormal
  m.max_quad_coeff = 2.1009999999999995;
  m.adv_term = -0.25;
  m.rollout_term = std::numeric_limits<double>::infinity();
  m.ref_term = 1e308;

  const auto p = temp_file("aflow_harness_roundtrip.csv");
  std::ofstream(p) << kFinetuneCsvHeader << "\n" << finetune_csv_row(m) << "\n";
  const auto rows = read_finetune_csv(p);
  fs::remove(p);

  REQUIRE(rows.size() == 1);
  const auto& r = rows[0];
  CHECK(r.iter == 17);
  CHECK(same_bits(r.wall_s, m.wall_s));
  CHECK(same_bits(r.mean_reward, m.mean_reward));
  CHECK(std::isnan(r.eval_reward));
  CHECK(same_bits(r.min_quad_coeff, m.min_quad_coeff));
  CHECK(same_bits(r.max_quad_coeff, m.max_quad_coeff));
  CHECK(same_bits(r.adv_term, m.adv_term));
  CHECK(std::isinf(r.rollout_term));
  CHECK(same_bits(r.ref_term, m.ref_term));
}

TEST_CASE("metrics: csv reader rejects malformed input") {
  CHECK_THROWS_AS(read_finetune_csv("/nonexistent/finetune.csv"), InputError);

  const auto p = temp_file("aflow_harness_malformed.csv");
  std::ofstream(p) << "step,loss\n1,0.5\n";
  CHECK_THROWS_AS(read_finetune_csv(p), InputError);  // wrong header

  std::ofstream(p) << kFinetuneCsvHeader << "\n1,2,3\n";
  CHECK_THROWS_AS(read_finetune_csv(p), InputError);  // wrong field count

  std::ofstream(p) << kFinetuneCsvHeader << "\n1,0.5,x,0,0,0,0,0,0\n";
  CHECK_THROWS_AS(read_finetune_csv(p), InputError);  // not a number

  std::ofstream(p) << kFinetuneCsvHeader << "\n";
  CHECK_THROWS_AS(read_finetune_csv(p), InputError);  // no data rows
  fs::remove(p);
}

TEST_CASE("metrics: jsonl serializes non-finite values as null") {
  IterationMetrics m;
  m.iter = 3;
  m.eval_reward = std::nan("");
  m.mean_reward = 0.5;
  const json j = json::parse(finetune_jsonl_row(m));
  CHECK(j["eval_reward"].is_null());
  CHECK(j["mean_reward"] == 0.5);
  CHECK(j["iter"] == 3);
  // The csv row keeps the value readable instead.
  CHECK(finetune_csv_row(m).find("nan") != std::string::npos);
}

// --- verify checks ----------------------------------------------------------

TEST_CASE("verify checks: every suite passes and the roster is stable") {
  const auto checks = run_verify_checks(42);
  const std::vector<std::string> expected{
      "grad_flow_matching",       "grad_prediction_loss",
      "grad_advantageflow_constant", "grad_advantageflow_adaptive",
      "grad_advantageflow_nft",   "grad_nft_branch",
      "t2_identity",              "tilt_suite",
      "fisher_rao",               "loss_decomposition",
      "rao_blackwell",            "nft_equivalence",
      "degenerate_inputs"};
  REQUIRE(checks.size() == expected.size());
  for (std::size_t i = 0; i < checks.size(); ++i) {
    CAPTURE(checks[i].name);
    CHECK(checks[i].name == expected[i]);
    CHECK(checks[i].pass);
    CHECK(checks[i].value <= checks[i].bound);
  }
}

TEST_CASE("verify checks: a planted gradient sign flip fails exactly the "
          "gradient suites") {
  fault::ScopedGradSignFlip planted;
  const auto checks = run_verify_checks(42);
  for (const auto& c : checks) {
    CAPTURE(c.name);
    const bool is_grad = c.name.rfind("grad_", 0) == 0;
    CHECK(c.pass == !is_grad);
    // A flipped sign doubles the relative error: |(-g) - g| / |g| = 2.
    if (is_grad) CHECK(c.value == doctest::Approx(2.0).epsilon(1e-9));
  }
}

TEST_CASE("verify report: matches the documented schema") {
  const auto checks = run_verify_checks(7);
  const json report = verify_report_json(checks, 7);
  CHECK(report["seed"] == 7);
  CHECK(report["all_pass"] == true);
  REQUIRE(report["checks"].is_array());
  REQUIRE(report["checks"].size() == checks.size());

  std::ifstream is(fs::path(AFLOW_SOURCE_DIR) / "docs" /
                   "verify_report.schema.json");
  REQUIRE(is.good());
  const json schema = json::parse(is);

  // Keep the shipped schema honest: every required key present with the
  // declared type, and no keys beyond the declared properties.
  auto type_ok = [](const json& decl, const json& v) {
    std::vector<std::string> allowed;
    if (decl.is_string())
      allowed.push_back(decl.get<std::string>());
    else
      for (const auto& t : decl) allowed.push_back(t.get<std::string>());
    for (const auto& t : allowed) {
      if (t == "integer" && v.is_number_integer()) return true;
      if (t == "number" && v.is_number()) return true;
      if (t == "boolean" && v.is_boolean()) return true;
      if (t == "string" && v.is_string()) return true;
      if (t == "array" && v.is_array()) return true;
      if (t == "object" && v.is_object()) return true;
      if (t == "null" && v.is_null()) return true;
    }
    return false;
  };
  auto conforms = [&](const json& obj_schema, const json& obj) {
    for (const auto& req : obj_schema["required"])
      REQUIRE(obj.contains(req.get<std::string>()));
    const auto& props = obj_schema["properties"];
    for (const auto& [key, value] : obj.items()) {
      REQUIRE(props.contains(key));  // additionalProperties: false
      CHECK(type_ok(props[key]["type"], value));
    }
  };
  conforms(schema, report);
  const json& item_schema = schema["properties"]["checks"]["items"];
  for (const auto& item : report["checks"]) conforms(item_schema, item);
}
