#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cli_common.hpp"
#include "ib/checkpoint.hpp"
#include "ib/csv.hpp"
#include "ib/errors.hpp"
#include "ib/report.hpp"
#include "ib/toy_experiment.hpp"

namespace ibcli {

namespace {

struct ToyArgs {
  std::string config;
  std::string which = "ours";  // ours | tsipras
  std::string model = "linear_det";
  double beta = 0.01;
  int bottleneck = 0;       // 0 = task default
  std::int64_t iters = 0;   // 0 = task default
  std::int64_t batch_size = 1024;
  double lr = 0.003;
  std::int64_t eval_n = 10000;
  int samples = 12;
  std::string estimator = "sampled";
  std::string seeds = "0";
  std::string out = "runs";
  int workers = 1;
};

const std::vector<std::string> kKeys = {
    "which", "model",  "beta",    "bottleneck", "iters", "batch_size",
    "lr",    "eval_n", "samples", "estimator",  "seeds", "out",
    "workers"};

void apply_config(ToyArgs& a, const json& c) {
  if (c.contains("which")) a.which = c["which"].get<std::string>();
  if (c.contains("model")) a.model = c["model"].get<std::string>();
  if (c.contains("beta")) a.beta = c["beta"].get<double>();
  if (c.contains("bottleneck")) a.bottleneck = c["bottleneck"].get<int>();
  if (c.contains("iters")) a.iters = c["iters"].get<std::int64_t>();
  if (c.contains("batch_size")) a.batch_size = c["batch_size"].get<std::int64_t>();
  if (c.contains("lr")) a.lr = c["lr"].get<double>();
  if (c.contains("eval_n")) a.eval_n = c["eval_n"].get<std::int64_t>();
  if (c.contains("samples")) a.samples = c["samples"].get<int>();
  if (c.contains("estimator")) a.estimator = c["estimator"].get<std::string>();
  if (c.contains("seeds")) {
    a.seeds = c["seeds"].is_string()
                  ? c["seeds"].get<std::string>()
                  : std::to_string(c["seeds"].get<std::uint64_t>());
  }
  if (c.contains("out")) a.out = c["out"].get<std::string>();
  if (c.contains("workers")) a.workers = c["workers"].get<int>();
}

json resolved_config(const ToyArgs& a) {
  json c;
  c["which"] = a.which;
  c["model"] = a.model;
  c["beta"] = a.beta;
  c["bottleneck"] = a.bottleneck;
  c["iters"] = a.iters;
  c["batch_size"] = a.batch_size;
  c["lr"] = a.lr;
  c["eval_n"] = a.eval_n;
  c["samples"] = a.samples;
  c["estimator"] = a.estimator;
  c["seeds"] = a.seeds;
  c["out"] = a.out;
  c["workers"] = a.workers;
  return c;
}

void run_toy_cmd(const ToyArgs& flags, const CLI::App* cli) {
  ToyArgs a;
  apply_config(a, load_config_file(flags.config, kKeys));
  const auto given = [cli](const char* name) { return cli->count(name) > 0; };
  if (given("--which")) a.which = flags.which;
  if (given("--model")) a.model = flags.model;
  if (given("--beta")) a.beta = flags.beta;
  if (given("--bottleneck")) a.bottleneck = flags.bottleneck;
  if (given("--iters")) a.iters = flags.iters;
  if (given("--batch-size")) a.batch_size = flags.batch_size;
  if (given("--lr")) a.lr = flags.lr;
  if (given("--eval-n")) a.eval_n = flags.eval_n;
  if (given("--samples")) a.samples = flags.samples;
  if (given("--estimator")) a.estimator = flags.estimator;
  if (given("--seeds")) a.seeds = flags.seeds;
  if (given("--out")) a.out = flags.out;
  if (given("--workers")) a.workers = flags.workers;

  ib::ToyRunConfig base;
  if (a.which == "ours")
    base.task = ib::TaskKind::toy_ours;
  else if (a.which == "tsipras")
    base.task = ib::TaskKind::toy_tsipras;
  else
    throw ib::ConfigError("--which must be ours or tsipras, got '" + a.which +
                          "'");
  base.model = ib::toy_model_from_name(a.model);
  base.beta = a.beta;
  base.bottleneck = a.bottleneck;
  base.iterations = a.iters;
  base.batch_size = a.batch_size;
  base.lr = a.lr;
  base.eval_n = a.eval_n;
  base.samples = a.samples;
  base.estimator = ib::rate_estimator_from_name(a.estimator);

  const std::vector<std::uint64_t> seeds = parse_seeds(a.seeds);

  RunDir run = make_run_dir(a.out, "toy");

  std::vector<ib::ToyReport> reports(seeds.size());
  parallel_for_jobs(a.workers, static_cast<std::int64_t>(seeds.size()),
                    [&](std::int64_t j) {
                      ib::ToyRunConfig cfg = base;
                      cfg.seed = seeds[static_cast<std::size_t>(j)];
                      reports[static_cast<std::size_t>(j)] = ib::run_toy(cfg);
                    });

  ib::RobustnessReport combined;
  for (std::size_t j = 0; j < reports.size(); ++j) {
    const ib::ToyReport& tr = reports[j];
    for (const ib::ReportRow& row : tr.report.rows) combined.add_row(row);
    for (const std::string& w : tr.report.warnings)
      combined.warnings.push_back(w);

    const std::string sub = run.file("seed-" + std::to_string(seeds[j]));
    std::filesystem::create_directories(sub);
    const ib::LabeledDataset ev =
        ib::make_toy_dataset(base.task, base.eval_n, seeds[j]);
    run.add_dataset(ev.name, ev.fingerprint);
    ib::CheckpointMeta meta;
    meta.seed = seeds[j];
    meta.epochs = tr.config.iterations;
    meta.polyak = false;
    meta.dataset = ib::task_name(tr.config.task);
    meta.dataset_fingerprint = ev.fingerprint;
    if (!tr.report.rows.empty())
      meta.std_acc = tr.report.rows.front().standard_acc;
    ib::save_checkpoint(sub + "/checkpoint", tr.train.model,
                        &tr.train.raw_params, meta);
  }

  // Closed-form reference rows: one per oracle, seed-independent.
  for (const ib::ToyOracle& oracle : ib::bayes_oracles(base.task)) {
    ib::ReportRow row;
    row.model_id = "oracle-" + oracle.name;
    row.seed = 0;
    row.attack = "analytic";
    row.epsilon = base.task == ib::TaskKind::toy_ours ? 1.0 : 0.6;
    row.restarts = 0;
    row.eval_mode = "mean";
    row.standard_acc = oracle.clean_acc;
    row.robust_acc = oracle.robust_acc;
    row.n_examples = 0;
    row.num_classes = 2;
    combined.rows.push_back(row);  // analytic: skip sample-size warning logic
  }

  ib::write_report_csv(run.file("report.csv"), combined);
  ib::write_report_json(run.file("report.json"), combined);

  finish_run(run, "toy", resolved_config(a), seeds);
  std::printf("%s\n", run.path.c_str());
}

}  // namespace

void setup_cmd_toy(CLI::App& app) {
  auto args = std::make_shared<ToyArgs>();
  CLI::App* sub = app.add_subcommand(
      "toy", "Train and score a model on a synthetic task");
  sub->add_option("--config", args->config, "JSON config file");
  sub->add_option("--which", args->which, "ours | tsipras");
  sub->add_option("--model", args->model, "linear_det | vib");
  sub->add_option("--beta", args->beta, "VIB rate weight");
  sub->add_option("--bottleneck", args->bottleneck,
                  "Bottleneck K (0 = task default)");
  sub->add_option("--iters", args->iters,
                  "Training iterations (0 = task default)");
  sub->add_option("--batch-size", args->batch_size, "Batch size");
  sub->add_option("--lr", args->lr, "SGD learning rate");
  sub->add_option("--eval-n", args->eval_n, "Evaluation set size");
  sub->add_option("--samples", args->samples, "S for stochastic passes");
  sub->add_option("--estimator", args->estimator,
                  "Rate term: sampled | analytic");
  sub->add_option("--seeds,--seed", args->seeds,
                  "Seed, list (1,2,5) or range (0..9)");
  sub->add_option("--out", args->out, "Output root directory");
  sub->add_option("--workers", args->workers, "Worker threads");
  sub->callback([args, sub]() { run_toy_cmd(*args, sub); });
}

}  // namespace ibcli
