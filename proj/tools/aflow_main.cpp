// Command-line harness around the library. Five subcommands cover the whole
// workflow: `pretrain` (flow matching on a task generator), `finetune`
// (reward finetuning, advantage-weighted or policy-gradient), `verify` (the
// numerical property suites as a JSON report), `compare` (time-to-threshold
// between two finished runs), and `eval` (reward statistics of a checkpoint).
// A run directory is self-describing: resolved config copy, CSV/JSONL curves,
// checkpoints, and summary JSON.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "aflow/checkpoint.hpp"
#include "aflow/checks.hpp"
#include "aflow/config.hpp"
#include "aflow/fault.hpp"
#include "aflow/metrics.hpp"
#include "aflow/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aflow;

namespace {

// Deterministic per-phase RNG streams, all derived from the config seed.
constexpr std::uint64_t kInitStream = 0x696e6974;      // model initialization
constexpr std::uint64_t kPretrainStream = 0x64617461;  // pretraining data
constexpr std::uint64_t kTrainStream = 0x74756e65;     // finetuning loop
constexpr std::uint64_t kPreEvalStream = 0x70726576;   // pre-finetune eval
constexpr std::uint64_t kPostEvalStream = 0x706f7374;  // post-run eval

struct RunPaths {
  fs::path dir;
  fs::path config_copy() const { return dir / "config.json"; }
  fs::path pretrain_csv() const { return dir / "pretrain.csv"; }
  fs::path pretrained_ckpt() const { return dir / "pretrained.ckpt"; }
  fs::path pretrain_summary() const { return dir / "pretrain_summary.json"; }
  fs::path finetune_csv() const { return dir / "finetune.csv"; }
  fs::path finetune_jsonl() const { return dir / "finetune.jsonl"; }
  fs::path finetuned_ckpt() const { return dir / "finetuned.ckpt"; }
  fs::path finetune_summary() const { return dir / "finetune_summary.json"; }
  fs::path abort_ckpt() const { return dir / "abort.ckpt"; }
};

RunConfig load_config(const std::string& path) {
  RunConfig cfg = load_run_config(path);
  // The one supported environment override: where the run writes.
  if (const char* env = std::getenv("AFLOW_OUTPUT_DIR"); env && *env)
    cfg.output_dir = env;
  return cfg;
}

RunPaths prepare_output_dir(const RunConfig& cfg) {
  RunPaths paths{fs::path(cfg.output_dir)};
  fs::create_directories(paths.dir);
  std::ofstream os(paths.config_copy());
  os << run_config_json(cfg).dump(2) << "\n";
  if (!os)
    throw InputError("cannot write " + paths.config_copy().string());
  return paths;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream os(path);
  os << j.dump(2) << "\n";
  if (!os) throw InputError("cannot write " + path.string());
}

json eval_json(const EvalResult& r, const std::vector<std::string>& names) {
  json comps = json::object();
  for (std::size_t i = 0; i < names.size(); ++i)
    comps[names[i]] = {{"mean", r.component_means[i]},
                       {"sem", r.component_sems[i]}};
  return {{"mean_reward", r.mean_reward},
          {"sem_reward", r.sem_reward},
          {"n_samples", r.n_samples},
          {"components", std::move(comps)}};
}

void print_eval(const char* label, const EvalResult& r,
                const std::vector<std::string>& names) {
  std::cout << label << ": reward " << r.mean_reward << " +- " << r.sem_reward
            << " (n=" << r.n_samples << ")\n";
  for (std::size_t i = 0; i < names.size(); ++i)
    std::cout << "  " << names[i] << ": " << r.component_means[i] << " +- "
              << r.component_sems[i] << "\n";
}

// Fraction of ODE samples landing nearest each mode center (generators
// without mode centers report an empty vector).
std::vector<double> mode_masses(const VelocityModel& model, const Task& task,
                                std::size_t n, int steps, Rng& rng) {
  if (task.mode_centers().empty()) return {};
  std::vector<double> mass(task.mode_centers().size(), 0.0);
  const auto conds = task.conditions();
  SamplerConfig cfg;
  cfg.steps = steps;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cond = conds[i % conds.size()];
    const auto x1 = rng.gauss_vector(task.data_dim());
    const auto x = sample_ode(model, x1, cond, cfg);
    mass[task.nearest_mode(x)] += 1.0;
  }
  for (double& m : mass) m /= static_cast<double>(n);
  return mass;
}

void check_arch_matches(const VelocityModel& model, const RunConfig& cfg,
                        const std::string& ckpt) {
  if (model.arch() == cfg.arch()) return;
  const auto a = model.arch();
  const auto b = cfg.arch();
  throw CheckpointError(
      "checkpoint " + ckpt + " has data_dim=" + std::to_string(a.data_dim) +
      " cond_dim=" + std::to_string(a.cond_dim) + " and " +
      std::to_string(a.hidden.size()) +
      " hidden layers, but the config needs data_dim=" +
      std::to_string(b.data_dim) + " cond_dim=" + std::to_string(b.cond_dim) +
      " and " + std::to_string(b.hidden.size()) + " hidden layers");
}

int cmd_pretrain(const std::string& config_path) {
  const RunConfig cfg = load_config(config_path);
  const Task task(cfg.task);
  const RunPaths paths = prepare_output_dir(cfg);

  Rng root(cfg.seed);
  Rng init_rng = root.split(kInitStream);
  auto model = VelocityModel::xavier(cfg.arch(), init_rng);

  std::ofstream csv(paths.pretrain_csv());
  csv << kPretrainCsvHeader << "\n";
  Rng data_rng = root.split(kPretrainStream);
  pretrain_flow(model, task, cfg.pretrain.steps, cfg.pretrain.batch,
                cfg.pretrain.adam, data_rng, cfg.pretrain.record_every,
                [&](const PretrainStepMetrics& m) {
                  csv << pretrain_csv_row(m) << "\n";
                });
  if (!csv) throw InputError("cannot write " + paths.pretrain_csv().string());
  csv.close();
  save_checkpoint(paths.pretrained_ckpt(), model);

  Rng eval_rng = root.split(kPostEvalStream);
  const auto eval = evaluate_policy(model, task, cfg.train.eval_samples,
                                    cfg.train.eval_steps, eval_rng);
  Rng mass_rng = eval_rng.split(1);
  const auto masses = mode_masses(model, task, cfg.train.eval_samples,
                                  cfg.train.eval_steps, mass_rng);

  const auto names = task.reward_component_names();
  json summary{{"steps", cfg.pretrain.steps},
               {"eval", eval_json(eval, names)},
               {"mode_masses", masses}};
  write_json_file(paths.pretrain_summary(), summary);

  std::cout << "pretrained " << cfg.pretrain.steps << " steps -> "
            << paths.pretrained_ckpt().string() << "\n";
  print_eval("final eval", eval, names);
  if (!masses.empty()) {
    std::cout << "mode masses:";
    for (double m : masses) std::cout << " " << m;
    std::cout << "\n";
  }
  return 0;
}

int cmd_finetune(const std::string& config_path, const std::string& algo,
                 std::string checkpoint) {
  const RunConfig cfg = load_config(config_path);
  const Task task(cfg.task);
  const RunPaths paths = prepare_output_dir(cfg);
  if (checkpoint.empty()) checkpoint = paths.pretrained_ckpt().string();

  auto pretrained = load_checkpoint(checkpoint);
  check_arch_matches(pretrained, cfg, checkpoint);

  TrainConfig tc = cfg.train;
  tc.abort_checkpoint_path = paths.abort_ckpt().string();
  for (const auto& w : tc.validate()) std::cerr << "warning: " << w << "\n";
  // Fail fast (same checks the trainer makes) before truncating output files.
  if (algo == "grpo") {
    if (tc.sampler.mode != SampleMode::sde)
      throw ConfigError("grpo: the sde sampler is required");
    if (tc.sampler.sigma_scale == 0.0)
      throw ConfigError(
          "grpo: sigma_scale = 0 makes transitions deterministic; the "
          "log-density gradient is undefined");
  }

  Rng root(cfg.seed);
  Rng pre_rng = root.split(kPreEvalStream);
  const auto pre = evaluate_policy(pretrained, task, tc.eval_samples,
                                   tc.eval_steps, pre_rng);
  const auto names = task.reward_component_names();
  print_eval("pre-finetune eval", pre, names);

  std::ofstream csv(paths.finetune_csv());
  csv << kFinetuneCsvHeader << "\n";
  std::ofstream jsonl(paths.finetune_jsonl());
  const MetricsCallback cb = [&](const IterationMetrics& m) {
    csv << finetune_csv_row(m) << "\n";
    jsonl << finetune_jsonl_row(m) << "\n";
  };

  auto models = TrainableModels::from_pretrained(pretrained);
  Rng train_rng = root.split(kTrainStream);
  if (algo == "advflow")
    train_advantageflow(models, task, tc, train_rng, cb);
  else
    train_grpo_baseline(models, task, tc, train_rng, cb);
  if (!csv) throw InputError("cannot write " + paths.finetune_csv().string());
  csv.close();
  jsonl.close();
  save_checkpoint(paths.finetuned_ckpt(), models.policy);

  Rng post_rng = root.split(kPostEvalStream);
  const auto post = evaluate_policy(models.policy, task, tc.eval_samples,
                                    tc.eval_steps, post_rng);
  print_eval("post-finetune eval", post, names);

  json summary{{"algo", algo},
               {"iterations", tc.iterations},
               {"checkpoint_in", checkpoint},
               {"pre", eval_json(pre, names)},
               {"post", eval_json(post, names)}};
  write_json_file(paths.finetune_summary(), summary);
  std::cout << "finetuned -> " << paths.finetuned_ckpt().string() << "\n";
  return 0;
}

int cmd_verify(std::uint64_t seed, const std::string& out,
               const std::string& inject_fault) {
  std::optional<fault::ScopedGradSignFlip> planted;
  if (inject_fault == "grad-sign")
    planted.emplace();
  else if (!inject_fault.empty())
    throw ConfigError("unknown fault '" + inject_fault +
                      "' (supported: grad-sign)");

  const auto checks = run_verify_checks(seed);
  const json report = verify_report_json(checks, seed);
  write_json_file(out, report);

  bool all = true;
  for (const auto& c : checks) {
    std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name
              << "  value=" << fmt_double(c.value)
              << " bound=" << fmt_double(c.bound);
    if (!c.detail.empty()) std::cout << "  (" << c.detail << ")";
    std::cout << "\n";
    all = all && c.pass;
  }
  std::cout << (all ? "verify: all checks passed" : "verify: FAILURES above")
            << " -> " << out << "\n";
  return all ? 0 : 1;
}

struct Crossing {
  bool reached = false;
  std::size_t iter = 0;
  double wall_s = 0.0;
};

Crossing first_crossing(const std::vector<IterationMetrics>& rows,
                        double threshold) {
  for (const auto& m : rows)
    if (m.eval_reward >= threshold) return {true, m.iter, m.wall_s};
  return {};
}

json crossing_json(const Crossing& c) {
  if (!c.reached) return {{"reached", false}};
  return {{"reached", true}, {"iter", c.iter}, {"wall_s", c.wall_s}};
}

int cmd_compare(const std::string& run_a, const std::string& run_b,
                double threshold, const std::string& out_csv) {
  const auto a = read_finetune_csv(fs::path(run_a) / "finetune.csv");
  const auto b = read_finetune_csv(fs::path(run_b) / "finetune.csv");

  // Side-by-side curve aligned on iteration (inner join).
  std::ofstream csv(out_csv);
  csv << "iter,eval_a,eval_b,wall_a,wall_b\n";
  for (std::size_t i = 0, j = 0; i < a.size() && j < b.size();) {
    if (a[i].iter < b[j].iter) {
      ++i;
    } else if (b[j].iter < a[i].iter) {
      ++j;
    } else {
      csv << a[i].iter << "," << fmt_double(a[i].eval_reward) << ","
          << fmt_double(b[j].eval_reward) << "," << fmt_double(a[i].wall_s)
          << "," << fmt_double(b[j].wall_s) << "\n";
      ++i;
      ++j;
    }
  }
  if (!csv) throw InputError("cannot write " + out_csv);
  csv.close();

  const Crossing ca = first_crossing(a, threshold);
  const Crossing cb = first_crossing(b, threshold);
  json summary{{"threshold", threshold},
               {"run_a", run_a},
               {"run_b", run_b},
               {"a", crossing_json(ca)},
               {"b", crossing_json(cb)}};
  if (ca.reached && cb.reached) {
    summary["iter_ratio"] =
        static_cast<double>(ca.iter) / static_cast<double>(cb.iter);
    summary["wall_ratio"] = cb.wall_s > 0.0 ? ca.wall_s / cb.wall_s : 0.0;
  } else {
    summary["iter_ratio"] = "not reached";
    summary["wall_ratio"] = "not reached";
  }
  fs::path summary_path = fs::path(out_csv);
  summary_path.replace_extension();
  summary_path += "_summary.json";
  write_json_file(summary_path, summary);

  auto describe = [&](const char* name, const Crossing& c) {
    std::cout << name << ": ";
    if (c.reached)
      std::cout << "reached " << threshold << " at iter " << c.iter << " ("
                << c.wall_s << " s)\n";
    else
      std::cout << "threshold " << threshold << " not reached\n";
  };
  describe("run A", ca);
  describe("run B", cb);
  std::cout << "time-to-threshold ratio (A/B): ";
  if (ca.reached && cb.reached)
    std::cout << summary["iter_ratio"].get<double>() << " by iteration, "
              << summary["wall_ratio"].get<double>() << " by wall clock\n";
  else
    std::cout << "not reached\n";
  std::cout << "side-by-side curve -> " << out_csv << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& config_path,
             std::size_t n_samples, int steps, const std::string& out) {
  const RunConfig cfg = load_config(config_path);
  const Task task(cfg.task);
  auto model = load_checkpoint(checkpoint);
  if (model.arch().data_dim != task.data_dim() ||
      model.arch().cond_dim != task.cond_dim())
    throw CheckpointError("checkpoint " + checkpoint +
                          " does not fit the task: model is data_dim=" +
                          std::to_string(model.arch().data_dim) +
                          " cond_dim=" + std::to_string(model.arch().cond_dim) +
                          ", task needs data_dim=" +
                          std::to_string(task.data_dim()) +
                          " cond_dim=" + std::to_string(task.cond_dim()));

  Rng rng = Rng(cfg.seed).split(kPostEvalStream).split(
      static_cast<std::uint64_t>(steps));
  const auto eval = evaluate_policy(model, task, n_samples, steps, rng);
  const auto names = task.reward_component_names();
  std::cout << "steps=" << steps << "\n";
  print_eval("eval", eval, names);
  if (!out.empty())
    write_json_file(out, json{{"checkpoint", checkpoint},
                              {"steps", steps},
                              {"eval", eval_json(eval, names)}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rectified-flow training, finetuning, and verification harness"};
  app.require_subcommand(1);

  std::string config_path, algo = "advflow", checkpoint, inject_fault;
  std::string run_a, run_b, out_csv = "compare.csv";
  std::string report_out = "verify_report.json", eval_out;
  std::uint64_t verify_seed = 42;
  double threshold = 0.8;
  std::size_t n_samples = 1024;
  int steps = 40;

  auto* pre = app.add_subcommand("pretrain", "flow-matching pretraining");
  pre->add_option("--config", config_path, "run config JSON")->required();

  auto* fin = app.add_subcommand("finetune", "reward finetuning");
  fin->add_option("--config", config_path, "run config JSON")->required();
  fin->add_option("--algo", algo, "advflow or grpo")
      ->check(CLI::IsMember({"advflow", "grpo"}));
  fin->add_option("--checkpoint", checkpoint,
                  "starting checkpoint (default: <output_dir>/pretrained.ckpt)");

  auto* ver = app.add_subcommand("verify", "run all numerical property suites");
  ver->add_option("--seed", verify_seed, "suite seed");
  ver->add_option("--out", report_out, "report JSON path");
  ver->add_option("--inject-fault", inject_fault,
                  "test-only fault (grad-sign) to prove the suites can fail");

  auto* cmp = app.add_subcommand("compare", "time-to-threshold of two runs");
  cmp->add_option("--run-a", run_a, "first run directory")->required();
  cmp->add_option("--run-b", run_b, "second run directory")->required();
  cmp->add_option("--threshold", threshold, "eval-reward threshold");
  cmp->add_option("--out", out_csv, "side-by-side CSV path");

  auto* ev = app.add_subcommand("eval", "reward statistics of a checkpoint");
  ev->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  ev->add_option("--config", config_path, "run config JSON (for the task)")
      ->required();
  ev->add_option("--samples", n_samples, "number of ODE samples");
  ev->add_option("--steps", steps, "sampler steps");
  ev->add_option("--out", eval_out, "also write statistics JSON here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pre->parsed()) return cmd_pretrain(config_path);
    if (fin->parsed()) return cmd_finetune(config_path, algo, checkpoint);
    if (ver->parsed()) return cmd_verify(verify_seed, report_out, inject_fault);
    if (cmp->parsed()) return cmd_compare(run_a, run_b, threshold, out_csv);
    if (ev->parsed())
      return cmd_eval(checkpoint, config_path, n_samples, steps, eval_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
