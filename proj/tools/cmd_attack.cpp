#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
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

struct AttackArgs {
  std::string config;
  std::vector<std::string> checkpoints;
  std::string dataset = "mnist";
  std::string data_dir;
  std::string family;  // fgs | pgd | apgd_ce | apgd_dlr | mt
  std::string suite;   // aa+mt
  std::string eps = "0.2";
  double alpha = 0.0;  // 0 = epsilon / 10
  std::int64_t steps = 40;
  std::string restarts = "1";  // list => restart curve (pgd only)
  std::string loss;            // "" = family default
  std::string grad_mode;       // "" = model default
  std::string eval_mode;       // "" = model default
  int samples = 12;
  int eval_samples = 12;
  std::int64_t limit = 1000;
  std::uint64_t seed = 0;
  std::int64_t toy_n = 10000;
  bool per_example = false;
  std::string out = "runs";
  int workers = 1;
};

const std::vector<std::string> kKeys = {
    "checkpoint", "dataset",     "data_dir", "family",  "suite",
    "eps",        "alpha",       "steps",    "restarts", "loss",
    "grad_mode",  "eval_mode",   "samples",  "eval_samples",
    "limit",      "seed",        "toy_n",    "per_example",
    "out",        "workers"};

void apply_config(AttackArgs& a, const json& c) {
  if (c.contains("checkpoint")) {
    a.checkpoints.clear();
    if (c["checkpoint"].is_array())
      for (const auto& v : c["checkpoint"])
        a.checkpoints.push_back(v.get<std::string>());
    else
      a.checkpoints.push_back(c["checkpoint"].get<std::string>());
  }
  if (c.contains("dataset")) a.dataset = c["dataset"].get<std::string>();
  if (c.contains("data_dir")) a.data_dir = c["data_dir"].get<std::string>();
  if (c.contains("family")) a.family = c["family"].get<std::string>();
  if (c.contains("suite")) a.suite = c["suite"].get<std::string>();
  if (c.contains("eps")) {
    a.eps = c["eps"].is_string() ? c["eps"].get<std::string>()
                                 : ib::format_double(c["eps"].get<double>());
  }
  if (c.contains("alpha")) a.alpha = c["alpha"].get<double>();
  if (c.contains("steps")) a.steps = c["steps"].get<std::int64_t>();
  if (c.contains("restarts")) {
    a.restarts = c["restarts"].is_string()
                     ? c["restarts"].get<std::string>()
                     : std::to_string(c["restarts"].get<std::int64_t>());
  }
  if (c.contains("loss")) a.loss = c["loss"].get<std::string>();
  if (c.contains("grad_mode")) a.grad_mode = c["grad_mode"].get<std::string>();
  if (c.contains("eval_mode")) a.eval_mode = c["eval_mode"].get<std::string>();
  if (c.contains("samples")) a.samples = c["samples"].get<int>();
  if (c.contains("eval_samples"))
    a.eval_samples = c["eval_samples"].get<int>();
  if (c.contains("limit")) a.limit = c["limit"].get<std::int64_t>();
  if (c.contains("seed")) a.seed = c["seed"].get<std::uint64_t>();
  if (c.contains("toy_n")) a.toy_n = c["toy_n"].get<std::int64_t>();
  if (c.contains("per_example")) a.per_example = c["per_example"].get<bool>();
  if (c.contains("out")) a.out = c["out"].get<std::string>();
  if (c.contains("workers")) a.workers = c["workers"].get<int>();
}

json resolved_config(const AttackArgs& a) {
  json c;
  c["checkpoint"] = a.checkpoints;
  c["dataset"] = a.dataset;
  c["family"] = a.family;
  c["suite"] = a.suite;
  c["eps"] = a.eps;
  c["alpha"] = a.alpha;
  c["steps"] = a.steps;
  c["restarts"] = a.restarts;
  c["loss"] = a.loss;
  c["grad_mode"] = a.grad_mode;
  c["eval_mode"] = a.eval_mode;
  c["samples"] = a.samples;
  c["eval_samples"] = a.eval_samples;
  c["limit"] = a.limit;
  c["seed"] = a.seed;
  c["toy_n"] = a.toy_n;
  c["per_example"] = a.per_example;
  c["out"] = a.out;
  c["workers"] = a.workers;
  return c;
}

struct JobOutput {
  std::vector<ib::ReportRow> rows;
  std::optional<ib::RestartCurve> curve;
  ib::CsvTable per_example;  // empty header when not requested
};

ib::LabeledDataset head_copy(const ib::LabeledDataset& ds, std::int64_t n) {
  return n > 0 && n < ds.n() ? ds.head(n) : ds;
}

// One (checkpoint, epsilon) evaluation.
JobOutput run_job(const AttackArgs& a, const std::string& ckpt_path,
                  const ib::LabeledDataset& ds, double eps,
                  const std::vector<int>& curve_counts) {
  const ib::LoadedCheckpoint lc = ib::load_checkpoint(checkpoint_base(ckpt_path));
  const ib::Model& m = lc.model;

  ib::AttackConfig cfg;
  cfg.epsilon = eps;
  cfg.alpha = a.alpha > 0 ? a.alpha : eps / 10.0;
  cfg.steps = a.steps;
  cfg.restarts = curve_counts.empty() ? std::stoll(a.restarts)
                                      : curve_counts.back();
  cfg.samples = a.samples;
  cfg.eval_samples = a.eval_samples;
  cfg.seed = a.seed;
  cfg.bounded = ds.bounded01;

  if (!a.grad_mode.empty()) {
    if (a.grad_mode == "mean")
      cfg.grad_mode = ib::GradMode::mean;
    else if (a.grad_mode == "stochastic")
      cfg.grad_mode = ib::GradMode::stochastic;
    else
      throw ib::ConfigError("grad_mode must be mean or stochastic, got '" +
                            a.grad_mode + "'");
  }
  std::optional<ib::EvalMode> emode;
  if (!a.eval_mode.empty()) emode = ib::eval_mode_from_name(a.eval_mode);
  cfg.eval_mode = emode;
  const ib::EvalMode row_eval = emode ? *emode : m.default_eval();

  std::string attack_name;
  JobOutput out;

  const auto make_row = [&](const std::string& name, std::int64_t restarts,
                            double std_acc, double rob_acc, std::int64_t n) {
    ib::ReportRow row;
    row.model_id = model_label(m);
    row.seed = lc.meta.seed;
    row.attack = name;
    row.epsilon = eps;
    row.restarts = restarts;
    row.eval_mode = ib::eval_mode_name(row_eval);
    row.standard_acc = std_acc;
    row.robust_acc = rob_acc;
    row.n_examples = n;
    row.num_classes = ds.num_classes;
    return row;
  };

  const auto fill_per_example = [&](const ib::AttackOutcome& o) {
    if (!a.per_example) return;
    const ib::LabeledDataset sub = head_copy(ds, a.limit);
    const std::int64_t n = o.n();
    const std::int64_t d = sub.dim();
    const std::span<const double> adv = o.x_adv.f64();
    const std::span<const double> clean = sub.x.f64();
    out.per_example.header = {"example_id", "label",
                              "success",    "first_success_restart",
                              "loss",       "linf_delta"};
    for (std::int64_t i = 0; i < n; ++i) {
      double linf = 0.0;
      for (std::int64_t j = 0; j < d; ++j)
        linf = std::max(linf, std::abs(adv[i * d + j] - clean[i * d + j]));
      out.per_example.rows.push_back(
          {ib::format_int(i), ib::format_int(sub.y[static_cast<std::size_t>(i)]),
           ib::format_int(o.success[static_cast<std::size_t>(i)]),
           ib::format_int(o.first_success_restart[static_cast<std::size_t>(i)]),
           ib::format_double(o.loss[static_cast<std::size_t>(i)]),
           ib::format_double(linf)});
    }
  };

  if (!a.suite.empty()) {
    const ib::LabeledDataset sub = head_copy(ds, a.limit);
    std::vector<std::int64_t> ids(static_cast<std::size_t>(sub.n()));
    for (std::size_t i = 0; i < ids.size(); ++i)
      ids[i] = static_cast<std::int64_t>(i);
    const ib::EnsembleReport rep =
        ib::ensemble_aa_mt(m, sub.x, sub.y, ids, eps, a.seed, ds.bounded01,
                           cfg.lo, cfg.hi);
    // Standard accuracy equals 1 minus the clean-stage break fraction.
    const double std_acc =
        1.0 - static_cast<double>(rep.stages.front().broke) /
                  static_cast<double>(rep.n);
    std::int64_t broke_so_far = 0;
    static const std::int64_t kStageRestarts[] = {0, 5, 5, 10};
    for (std::size_t si = 0; si < rep.stages.size(); ++si) {
      broke_so_far += rep.stages[si].broke;
      out.rows.push_back(make_row(
          "aa+mt/" + rep.stages[si].name,
          si < std::size(kStageRestarts) ? kStageRestarts[si] : 0, std_acc,
          1.0 - static_cast<double>(broke_so_far) / static_cast<double>(rep.n),
          rep.n));
    }
    out.rows.push_back(make_row("aa+mt", 20, std_acc, rep.robust_acc, rep.n));
    fill_per_example(rep.combined);
    return out;
  }

  // Per-family objective; explicit --loss is honored only where the family
  // leaves it free.
  if (a.family == "fgs" || a.family == "pgd") {
    cfg.loss = a.loss.empty() ? ib::AttackLoss::cross_entropy
                              : ib::attack_loss_from_name(a.loss);
  } else if (!a.loss.empty()) {
    throw ib::ConfigError("--loss is fixed by family '" + a.family + "'");
  }
  if (a.family == "apgd_ce") cfg.loss = ib::AttackLoss::cross_entropy;
  if (a.family == "apgd_dlr") cfg.loss = ib::AttackLoss::dlr;
  if (a.family == "mt") cfg.loss = ib::AttackLoss::margin;

  ib::AttackFn fn;
  if (a.family == "fgs") {
    attack_name = "fgs";
    fn = [&cfg](const ib::Model& mm, const ib::Tensor& x,
                std::span<const std::int32_t> y,
                std::span<const std::int64_t> ids) {
      return ib::fgs_attack(mm, x, y, ids, cfg);
    };
  } else if (a.family == "pgd") {
    attack_name = cfg.loss == ib::AttackLoss::cross_entropy
                      ? "pgd"
                      : std::string("pgd-") + ib::attack_loss_name(cfg.loss);
    fn = [&cfg](const ib::Model& mm, const ib::Tensor& x,
                std::span<const std::int32_t> y,
                std::span<const std::int64_t> ids) {
      return ib::pgd_attack(mm, x, y, ids, cfg);
    };
  } else if (a.family == "apgd_ce" || a.family == "apgd_dlr") {
    attack_name = a.family;
    fn = [&cfg](const ib::Model& mm, const ib::Tensor& x,
                std::span<const std::int32_t> y,
                std::span<const std::int64_t> ids) {
      return ib::auto_pgd_attack(mm, x, y, ids, cfg);
    };
  } else if (a.family == "mt") {
    attack_name = "multitargeted";
    fn = [&cfg](const ib::Model& mm, const ib::Tensor& x,
                std::span<const std::int32_t> y,
                std::span<const std::int64_t> ids) {
      return ib::multi_targeted_attack(mm, x, y, ids, cfg);
    };
  } else {
    throw ib::ConfigError(
        "family must be fgs, pgd, apgd_ce, apgd_dlr or mt, got '" + a.family +
        "'");
  }

  if (!curve_counts.empty()) {
    ib::RestartCurve curve =
        ib::restart_curve(m, ds, a.limit, cfg, curve_counts);
    out.rows.push_back(make_row(attack_name, curve_counts.back(),
                                curve.standard_acc, curve.robust_acc.back(),
                                curve.n));
    fill_per_example(curve.outcome);
    out.curve = std::move(curve);
    return out;
  }

  const ib::RobustEval re =
      ib::robust_accuracy(m, ds, a.limit, fn, row_eval, a.eval_samples, a.seed);
  out.rows.push_back(make_row(attack_name, cfg.restarts, re.standard_acc,
                              re.robust_acc, re.n));
  fill_per_example(re.outcome);
  return out;
}

void run_attack(const AttackArgs& flags, const CLI::App* cli) {
  AttackArgs a;
  apply_config(a, load_config_file(flags.config, kKeys));
  const auto given = [cli](const char* name) { return cli->count(name) > 0; };
  if (given("--checkpoint")) a.checkpoints = flags.checkpoints;
  if (given("--dataset")) a.dataset = flags.dataset;
  if (given("--data-dir")) a.data_dir = flags.data_dir;
  if (given("--family")) a.family = flags.family;
  if (given("--suite")) a.suite = flags.suite;
  if (given("--eps")) a.eps = flags.eps;
  if (given("--alpha")) a.alpha = flags.alpha;
  if (given("--steps")) a.steps = flags.steps;
  if (given("--restarts")) a.restarts = flags.restarts;
  if (given("--loss")) a.loss = flags.loss;
  if (given("--grad-mode")) a.grad_mode = flags.grad_mode;
  if (given("--eval-mode")) a.eval_mode = flags.eval_mode;
  if (given("--samples")) a.samples = flags.samples;
  if (given("--eval-samples")) a.eval_samples = flags.eval_samples;
  if (given("--limit")) a.limit = flags.limit;
  if (given("--seed")) a.seed = flags.seed;
  if (given("--toy-n")) a.toy_n = flags.toy_n;
  if (given("--per-example")) a.per_example = flags.per_example;
  if (given("--out")) a.out = flags.out;
  if (given("--workers")) a.workers = flags.workers;

  if (a.checkpoints.empty())
    throw ib::ConfigError("at least one --checkpoint is required");
  if (a.family.empty() == a.suite.empty())
    throw ib::ConfigError("exactly one of --family or --suite is required");
  if (!a.suite.empty() && a.suite != "aa+mt")
    throw ib::ConfigError("unknown suite '" + a.suite + "' (expected aa+mt)");

  const std::vector<double> eps_list = parse_epsilon_list(a.eps);
  std::vector<int> curve_counts = parse_int_list(a.restarts);
  {
    if (curve_counts.empty())
      throw ib::ConfigError("--restarts must not be empty");
    if (curve_counts.size() > 1 && a.family != "pgd")
      throw ib::ConfigError("restart curves require --family pgd");
    if (curve_counts.size() == 1) curve_counts.clear();  // plain run
  }

  const ib::LabeledDataset ds =
      load_eval_dataset(a.dataset, a.data_dir, a.toy_n, a.seed);

  RunDir run = make_run_dir(a.out, "attack");
  run.add_dataset(ds.name, ds.fingerprint);

  const std::int64_t jobs =
      static_cast<std::int64_t>(a.checkpoints.size() * eps_list.size());
  std::vector<JobOutput> results(static_cast<std::size_t>(jobs));
  parallel_for_jobs(a.workers, jobs, [&](std::int64_t j) {
    const std::size_t ci = static_cast<std::size_t>(j) / eps_list.size();
    const std::size_t ei = static_cast<std::size_t>(j) % eps_list.size();
    results[static_cast<std::size_t>(j)] =
        run_job(a, a.checkpoints[ci], ds, eps_list[ei], curve_counts);
  });

  ib::RobustnessReport report;
  for (std::size_t j = 0; j < results.size(); ++j) {
    const std::size_t ci = j / eps_list.size();
    const std::size_t ei = j % eps_list.size();
    const std::string tag =
        "c" + std::to_string(ci) + "-eps" + ib::format_double(eps_list[ei]);
    for (const ib::ReportRow& row : results[j].rows) report.add_row(row);
    if (results[j].curve)
      ib::write_restart_curve_csv(run.file("restart_curve-" + tag + ".csv"),
                                  *results[j].curve);
    if (!results[j].per_example.header.empty())
      ib::write_csv(run.file("per_example-" + tag + ".csv"),
                    results[j].per_example);
  }
  ib::write_report_csv(run.file("report.csv"), report);
  ib::write_report_json(run.file("report.json"), report);

  finish_run(run, "attack", resolved_config(a), {a.seed});
  std::printf("%s\n", run.path.c_str());
}

}  // namespace

void setup_cmd_attack(CLI::App& app) {
  auto args = std::make_shared<AttackArgs>();
  CLI::App* sub = app.add_subcommand(
      "attack", "Evaluate checkpoints under a white-box attack");
  sub->add_option("--config", args->config, "JSON config file");
  sub->add_option("--checkpoint", args->checkpoints,
                  "Checkpoint base path(s); repeatable");
  sub->add_option("--dataset", args->dataset,
                  "mnist | toy-ours | toy-tsipras");
  sub->add_option("--data-dir", args->data_dir, "Dataset directory");
  sub->add_option("--family", args->family,
                  "fgs | pgd | apgd_ce | apgd_dlr | mt");
  sub->add_option("--suite", args->suite, "aa+mt ensemble");
  sub->add_option("--eps", args->eps,
                  "Epsilon list; decimals or fractions like 8/255");
  sub->add_option("--alpha", args->alpha, "Step size (0 = eps/10)");
  sub->add_option("--steps", args->steps, "Iterations per restart");
  sub->add_option("--restarts", args->restarts,
                  "Restart count, or list like 1,10,100 for a curve (pgd)");
  sub->add_option("--loss", args->loss,
                  "cross_entropy | dlr | margin (fgs/pgd only)");
  sub->add_option("--grad-mode", args->grad_mode, "mean | stochastic");
  sub->add_option("--eval-mode", args->eval_mode, "mean | stochastic");
  sub->add_option("--samples", args->samples, "Gradient samples S");
  sub->add_option("--eval-samples", args->eval_samples,
                  "Prediction samples S");
  sub->add_option("--limit", args->limit, "Examples to attack (0 = all)");
  sub->add_option("--seed", args->seed, "Attack seed");
  sub->add_option("--toy-n", args->toy_n, "Toy evaluation set size");
  sub->add_flag("--per-example", args->per_example,
                "Write per-example outcome CSV");
  sub->add_option("--out", args->out, "Output root directory");
  sub->add_option("--workers", args->workers, "Worker threads");
  sub->callback([args, sub]() { run_attack(*args, sub); });
}

}  // namespace ibcli
