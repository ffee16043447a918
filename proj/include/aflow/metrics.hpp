// Serialization of run artifacts: training curves as CSV (round-trip-exact
// %.17g doubles, byte-stable across identical runs), per-iteration JSONL, and
// the verify-suite JSON report. The CSV schemas here are the interchange
// format consumed by `compare`, so readers validate headers strictly.
#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "aflow/checks.hpp"
#include "aflow/errors.hpp"
#include "aflow/trainer.hpp"

namespace aflow {

// Shortest representation that parses back to the identical double; NaN and
// infinities come out as strtod-compatible "nan" / "inf" / "-inf".
inline std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline constexpr const char* kFinetuneCsvHeader =
    "iter,wall_s,mean_reward,eval_reward,min_quad_coeff,max_quad_coeff,"
    "adv_term,rollout_term,ref_term";

inline constexpr const char* kPretrainCsvHeader = "step,loss";

inline std::string finetune_csv_row(const IterationMetrics& m) {
  std::string row = std::to_string(m.iter);
  for (double v : {m.wall_s, m.mean_reward, m.eval_reward, m.min_quad_coeff,
                   m.max_quad_coeff, m.adv_term, m.rollout_term, m.ref_term})
    row += "," + fmt_double(v);
  return row;
}

inline std::string pretrain_csv_row(const PretrainStepMetrics& m) {
  return std::to_string(m.step) + "," + fmt_double(m.loss);
}

// One JSON object per line; non-finite numbers serialize as null (JSON has no
// NaN), which is why the CSV, not the JSONL, is the lossless record.
inline std::string finetune_jsonl_row(const IterationMetrics& m) {
  nlohmann::json j{{"iter", m.iter},
                   {"wall_s", m.wall_s},
                   {"mean_reward", m.mean_reward},
                   {"eval_reward", m.eval_reward},
                   {"min_quad_coeff", m.min_quad_coeff},
                   {"max_quad_coeff", m.max_quad_coeff},
                   {"adv_term", m.adv_term},
                   {"rollout_term", m.rollout_term},
                   {"ref_term", m.ref_term}};
  return j.dump();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline double parse_double_field(const std::string& s, const std::string& ctx) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw InputError("metrics csv: cannot parse '" + s + "' in " + ctx);
  return v;
}

}  // namespace detail

inline std::vector<IterationMetrics> read_finetune_csv(
    const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("metrics csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != kFinetuneCsvHeader)
    throw InputError("metrics csv: " + path.string() +
                     " does not start with the training-curve header");
  std::vector<IterationMetrics> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 9)
      throw InputError("metrics csv: row with " + std::to_string(f.size()) +
                       " fields (expected 9) in " + path.string());
    const std::string ctx = path.string();
    IterationMetrics m;
    m.iter = static_cast<std::size_t>(
        detail::parse_double_field(f[0], ctx));
    m.wall_s = detail::parse_double_field(f[1], ctx);
    m.mean_reward = detail::parse_double_field(f[2], ctx);
    m.eval_reward = detail::parse_double_field(f[3], ctx);
    m.min_quad_coeff = detail::parse_double_field(f[4], ctx);
    m.max_quad_coeff = detail::parse_double_field(f[5], ctx);
    m.adv_term = detail::parse_double_field(f[6], ctx);
    m.rollout_term = detail::parse_double_field(f[7], ctx);
    m.ref_term = detail::parse_double_field(f[8], ctx);
    rows.push_back(m);
  }
  if (rows.empty())
    throw InputError("metrics csv: no data rows in " + path.string());
  return rows;
}

// --- verify report ----------------------------------------------------------

inline nlohmann::json verify_report_json(const std::vector<CheckResult>& checks,
                                         std::uint64_t seed) {
  nlohmann::json items = nlohmann::json::array();
  bool all = true;
  for (const auto& c : checks) {
    nlohmann::json item{{"check_name", c.name},
                        {"value", c.value},
                        {"bound", c.bound},
                        {"pass", c.pass}};
    if (!c.detail.empty()) item["detail"] = c.detail;
    items.push_back(std::move(item));
    all = all && c.pass;
  }
  return nlohmann::json{
      {"seed", seed}, {"all_pass", all}, {"checks", std::move(items)}};
}

}  // namespace aflow
