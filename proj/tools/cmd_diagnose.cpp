#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cli_common.hpp"
#include "ib/attacks.hpp"
#include "ib/checkpoint.hpp"
#include "ib/csv.hpp"
#include "ib/diagnostics.hpp"
#include "ib/errors.hpp"
#include "ib/report.hpp"

namespace ibcli {

namespace {

struct DiagnoseArgs {
  std::string config;
  std::string checkpoint;
  std::string dataset = "mnist";
  std::string data_dir;
  std::int64_t limit = 200;
  double eps = 0.2;
  double alpha = 0.01;
  std::int64_t steps = 40;
  std::string restart_counts = "1,5,20";
  std::string eval_mode;  // "" = model default
  int samples = 12;
  int eval_samples = 12;
  std::uint64_t seed = 0;
  std::int64_t toy_n = 10000;
  std::string out = "runs";
};

const std::vector<std::string> kKeys = {
    "checkpoint", "dataset", "data_dir",       "limit",
    "eps",        "alpha",   "steps",          "restart_counts",
    "eval_mode",  "samples", "eval_samples",   "seed",
    "toy_n",      "out"};

void apply_config(DiagnoseArgs& a, const json& c) {
  if (c.contains("checkpoint")) a.checkpoint = c["checkpoint"].get<std::string>();
  if (c.contains("dataset")) a.dataset = c["dataset"].get<std::string>();
  if (c.contains("data_dir")) a.data_dir = c["data_dir"].get<std::string>();
  if (c.contains("limit")) a.limit = c["limit"].get<std::int64_t>();
  if (c.contains("eps")) a.eps = c["eps"].get<double>();
  if (c.contains("alpha")) a.alpha = c["alpha"].get<double>();
  if (c.contains("steps")) a.steps = c["steps"].get<std::int64_t>();
  if (c.contains("restart_counts"))
    a.restart_counts = c["restart_counts"].get<std::string>();
  if (c.contains("eval_mode")) a.eval_mode = c["eval_mode"].get<std::string>();
  if (c.contains("samples")) a.samples = c["samples"].get<int>();
  if (c.contains("eval_samples")) a.eval_samples = c["eval_samples"].get<int>();
  if (c.contains("seed")) a.seed = c["seed"].get<std::uint64_t>();
  if (c.contains("toy_n")) a.toy_n = c["toy_n"].get<std::int64_t>();
  if (c.contains("out")) a.out = c["out"].get<std::string>();
}

json resolved_config(const DiagnoseArgs& a) {
  json c;
  c["checkpoint"] = a.checkpoint;
  c["dataset"] = a.dataset;
  c["limit"] = a.limit;
  c["eps"] = a.eps;
  c["alpha"] = a.alpha;
  c["steps"] = a.steps;
  c["restart_counts"] = a.restart_counts;
  c["eval_mode"] = a.eval_mode;
  c["samples"] = a.samples;
  c["eval_samples"] = a.eval_samples;
  c["seed"] = a.seed;
  c["toy_n"] = a.toy_n;
  c["out"] = a.out;
  return c;
}

void run_diagnose(const DiagnoseArgs& flags, const CLI::App* cli) {
  DiagnoseArgs a;
  apply_config(a, load_config_file(flags.config, kKeys));
  const auto given = [cli](const char* name) { return cli->count(name) > 0; };
  if (given("--checkpoint")) a.checkpoint = flags.checkpoint;
  if (given("--dataset")) a.dataset = flags.dataset;
  if (given("--data-dir")) a.data_dir = flags.data_dir;
  if (given("--limit")) a.limit = flags.limit;
  if (given("--eps")) a.eps = flags.eps;
  if (given("--alpha")) a.alpha = flags.alpha;
  if (given("--steps")) a.steps = flags.steps;
  if (given("--restart-counts")) a.restart_counts = flags.restart_counts;
  if (given("--eval-mode")) a.eval_mode = flags.eval_mode;
  if (given("--samples")) a.samples = flags.samples;
  if (given("--eval-samples")) a.eval_samples = flags.eval_samples;
  if (given("--seed")) a.seed = flags.seed;
  if (given("--toy-n")) a.toy_n = flags.toy_n;
  if (given("--out")) a.out = flags.out;

  if (a.checkpoint.empty())
    throw ib::ConfigError("--checkpoint is required");

  const ib::LoadedCheckpoint lc =
      ib::load_checkpoint(checkpoint_base(a.checkpoint));
  const ib::Model& m = lc.model;
  const ib::LabeledDataset ds =
      load_eval_dataset(a.dataset, a.data_dir, a.toy_n, a.seed);
  const ib::EvalMode emode = a.eval_mode.empty()
                                 ? m.default_eval()
                                 : ib::eval_mode_from_name(a.eval_mode);

  RunDir run = make_run_dir(a.out, "diagnose");
  run.add_dataset(ds.name, ds.fingerprint);

  // Restart curve under the pinned default PGD budget.
  ib::AttackConfig cfg;
  cfg.epsilon = a.eps;
  cfg.alpha = a.alpha;
  cfg.steps = a.steps;
  cfg.samples = a.samples;
  cfg.eval_samples = a.eval_samples;
  cfg.eval_mode = a.eval_mode.empty() ? std::nullopt
                                      : std::optional<ib::EvalMode>(emode);
  cfg.seed = a.seed;
  cfg.bounded = ds.bounded01;
  const std::vector<int> counts = parse_int_list(a.restart_counts);
  const ib::RestartCurve curve =
      ib::restart_curve(m, ds, a.limit, cfg, counts);

  ib::RobustnessReport report;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    ib::ReportRow row;
    row.model_id = model_label(m);
    row.seed = lc.meta.seed;
    row.attack = "pgd";
    row.epsilon = a.eps;
    row.restarts = counts[i];
    row.eval_mode = ib::eval_mode_name(emode);
    row.standard_acc = curve.standard_acc;
    row.robust_acc = curve.robust_acc[i];
    row.n_examples = curve.n;
    row.num_classes = static_cast<int>(ds.num_classes);
    report.add_row(row);
  }

  // Solid-gray sanity check (pixel data only: it needs inputs in [0,1]).
  if (ds.bounded01) {
    const ib::GrayCheckResult gray =
        ib::gray_image_check(m, ds, a.limit, emode, a.eval_samples, a.seed);
    ib::Finding f;
    f.name = "gray_check";
    f.flagged = gray.flagged;
    f.numbers = {{"oracle_acc", gray.oracle_acc},
                 {"fgs_acc", gray.fgs_acc},
                 {"chance", gray.chance},
                 {"threshold", gray.threshold},
                 {"gray_prediction", static_cast<double>(gray.gray_prediction)}};
    report.findings.push_back(f);
  }

  // Collapse assessment on this checkpoint's standard accuracy.
  {
    std::vector<ib::Exclusion> excluded;
    (void)ib::collapse_filter(report, &excluded);
    ib::Finding f;
    f.name = "collapse";
    f.flagged = !excluded.empty();
    f.numbers = {{"standard_acc", curve.standard_acc},
                 {"threshold", 2.0 / static_cast<double>(ds.num_classes)}};
    report.findings.push_back(f);
  }

  ib::write_restart_curve_csv(run.file("restart_curve.csv"), curve);
  ib::write_report_csv(run.file("report.csv"), report);
  ib::write_report_json(run.file("diagnostics.json"), report);

  finish_run(run, "diagnose", resolved_config(a), {a.seed});
  std::printf("%s\n", run.path.c_str());
}

}  // namespace

void setup_cmd_diagnose(CLI::App& app) {
  auto args = std::make_shared<DiagnoseArgs>();
  CLI::App* sub = app.add_subcommand(
      "diagnose", "Gradient-obfuscation diagnostics for a checkpoint");
  sub->add_option("--config", args->config, "JSON config file");
  sub->add_option("--checkpoint", args->checkpoint, "Checkpoint base path");
  sub->add_option("--dataset", args->dataset,
                  "mnist | toy-ours | toy-tsipras");
  sub->add_option("--data-dir", args->data_dir, "Dataset directory");
  sub->add_option("--limit", args->limit, "Examples to evaluate (0 = all)");
  sub->add_option("--eps", args->eps, "PGD epsilon for the restart curve");
  sub->add_option("--alpha", args->alpha, "PGD step size");
  sub->add_option("--steps", args->steps, "PGD iterations per restart");
  sub->add_option("--restart-counts", args->restart_counts,
                  "Ascending restart budgets, e.g. 1,5,20");
  sub->add_option("--eval-mode", args->eval_mode, "mean | stochastic");
  sub->add_option("--samples", args->samples, "Gradient samples S");
  sub->add_option("--eval-samples", args->eval_samples,
                  "Prediction samples S");
  sub->add_option("--seed", args->seed, "Diagnostic seed");
  sub->add_option("--toy-n", args->toy_n, "Toy evaluation set size");
  sub->add_option("--out", args->out, "Output root directory");
  sub->callback([args, sub]() { run_diagnose(*args, sub); });
}

}  // namespace ibcli
