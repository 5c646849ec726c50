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
#include "ib/train.hpp"

namespace ibcli {

namespace {

struct TrainArgs {
  std::string config;
  std::string dataset = "mnist";
  std::string data_dir;
  std::string model = "vib";
  double beta = 0.01;
  double rho = 3.0;
  int bottleneck = 256;
  std::string hidden = "1024,1024";
  int samples = 12;
  std::int64_t epochs = 200;
  std::int64_t batch_size = 100;
  double lr = 1e-4;
  double lr_decay = 0.97;
  std::int64_t lr_every = 2;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double polyak = 0.999;
  std::int64_t anneal_epochs = 0;  // 0 = no rate-weight ramp
  std::string estimator = "analytic";
  std::string dtype = "f64";
  std::string seeds = "0";
  std::int64_t limit_train = 0;  // 0 = full split
  std::int64_t limit_eval = 2000;
  std::int64_t eval_every = 10;
  std::string out = "runs";
  int workers = 1;
};

const std::vector<std::string> kKeys = {
    "dataset",    "model",      "beta",        "rho",        "bottleneck",
    "hidden",     "samples",    "epochs",      "batch_size", "lr",
    "lr_decay",   "lr_every",   "adam_beta1",  "adam_beta2", "polyak",
    "anneal_epochs", "estimator", "dtype",     "seeds",      "limit_train",
    "limit_eval", "eval_every", "out",         "workers",    "data_dir"};

void apply_config(TrainArgs& a, const json& j) {
  if (j.contains("dataset")) a.dataset = j["dataset"].get<std::string>();
  if (j.contains("model")) a.model = j["model"].get<std::string>();
  if (j.contains("beta")) a.beta = j["beta"].get<double>();
  if (j.contains("rho")) a.rho = j["rho"].get<double>();
  if (j.contains("bottleneck")) a.bottleneck = j["bottleneck"].get<int>();
  if (j.contains("hidden")) a.hidden = j["hidden"].get<std::string>();
  if (j.contains("samples")) a.samples = j["samples"].get<int>();
  if (j.contains("epochs")) a.epochs = j["epochs"].get<std::int64_t>();
  if (j.contains("batch_size")) a.batch_size = j["batch_size"].get<std::int64_t>();
  if (j.contains("lr")) a.lr = j["lr"].get<double>();
  if (j.contains("lr_decay")) a.lr_decay = j["lr_decay"].get<double>();
  if (j.contains("lr_every")) a.lr_every = j["lr_every"].get<std::int64_t>();
  if (j.contains("adam_beta1")) a.adam_beta1 = j["adam_beta1"].get<double>();
  if (j.contains("adam_beta2")) a.adam_beta2 = j["adam_beta2"].get<double>();
  if (j.contains("polyak")) a.polyak = j["polyak"].get<double>();
  if (j.contains("anneal_epochs"))
    a.anneal_epochs = j["anneal_epochs"].get<std::int64_t>();
  if (j.contains("estimator")) a.estimator = j["estimator"].get<std::string>();
  if (j.contains("dtype")) a.dtype = j["dtype"].get<std::string>();
  if (j.contains("seeds")) a.seeds = j["seeds"].get<std::string>();
  if (j.contains("limit_train")) a.limit_train = j["limit_train"].get<std::int64_t>();
  if (j.contains("limit_eval")) a.limit_eval = j["limit_eval"].get<std::int64_t>();
  if (j.contains("eval_every")) a.eval_every = j["eval_every"].get<std::int64_t>();
  if (j.contains("out")) a.out = j["out"].get<std::string>();
  if (j.contains("workers")) a.workers = j["workers"].get<int>();
  if (j.contains("data_dir")) a.data_dir = j["data_dir"].get<std::string>();
}

json resolved_config(const TrainArgs& a) {
  json j;
  j["dataset"] = a.dataset;
  j["model"] = a.model;
  j["beta"] = a.beta;
  j["rho"] = a.rho;
  j["bottleneck"] = a.bottleneck;
  j["hidden"] = a.hidden;
  j["samples"] = a.samples;
  j["epochs"] = a.epochs;
  j["batch_size"] = a.batch_size;
  j["lr"] = a.lr;
  j["lr_decay"] = a.lr_decay;
  j["lr_every"] = a.lr_every;
  j["adam_beta1"] = a.adam_beta1;
  j["adam_beta2"] = a.adam_beta2;
  j["polyak"] = a.polyak;
  j["anneal_epochs"] = a.anneal_epochs;
  j["estimator"] = a.estimator;
  j["dtype"] = a.dtype;
  j["seeds"] = a.seeds;
  j["limit_train"] = a.limit_train;
  j["limit_eval"] = a.limit_eval;
  j["eval_every"] = a.eval_every;
  j["out"] = a.out;
  j["workers"] = a.workers;
  return j;
}

void write_history_csv(const std::string& path,
                       const std::vector<ib::HistoryRow>& history) {
  ib::CsvTable t;
  t.header = {"epoch", "loss", "ce", "rate", "lr", "rate_weight", "std_acc"};
  for (const ib::HistoryRow& h : history)
    t.rows.push_back({ib::format_int(h.step), ib::format_double(h.loss),
                      ib::format_double(h.ce), ib::format_double(h.rate),
                      ib::format_double(h.lr), ib::format_double(h.rate_weight),
                      ib::format_double(h.eval_acc)});
  ib::write_csv(path, t);
}

void run_train(const TrainArgs& flags, const CLI::App* cli) {
  // Precedence: built-in defaults < config file < flags given on the line.
  TrainArgs a;
  apply_config(a, load_config_file(flags.config, kKeys));
  const auto given = [cli](const char* name) { return cli->count(name) > 0; };
  if (given("--dataset")) a.dataset = flags.dataset;
  if (given("--data-dir")) a.data_dir = flags.data_dir;
  if (given("--model")) a.model = flags.model;
  if (given("--beta")) a.beta = flags.beta;
  if (given("--rho")) a.rho = flags.rho;
  if (given("--bottleneck")) a.bottleneck = flags.bottleneck;
  if (given("--hidden")) a.hidden = flags.hidden;
  if (given("--samples")) a.samples = flags.samples;
  if (given("--epochs")) a.epochs = flags.epochs;
  if (given("--batch-size")) a.batch_size = flags.batch_size;
  if (given("--lr")) a.lr = flags.lr;
  if (given("--lr-decay")) a.lr_decay = flags.lr_decay;
  if (given("--lr-every")) a.lr_every = flags.lr_every;
  if (given("--adam-beta1")) a.adam_beta1 = flags.adam_beta1;
  if (given("--adam-beta2")) a.adam_beta2 = flags.adam_beta2;
  if (given("--polyak")) a.polyak = flags.polyak;
  if (given("--anneal-epochs")) a.anneal_epochs = flags.anneal_epochs;
  if (given("--estimator")) a.estimator = flags.estimator;
  if (given("--dtype")) a.dtype = flags.dtype;
  if (given("--seeds")) a.seeds = flags.seeds;
  if (given("--limit-train")) a.limit_train = flags.limit_train;
  if (given("--limit-eval")) a.limit_eval = flags.limit_eval;
  if (given("--eval-every")) a.eval_every = flags.eval_every;
  if (given("--out")) a.out = flags.out;
  if (given("--workers")) a.workers = flags.workers;

  if (a.dataset != "mnist")
    throw ib::ConfigError(
        "train handles the mnist dataset; use the 'toy' command for the "
        "synthetic tasks");
  const ib::ModelKind kind = ib::model_kind_from_name(a.model);
  const std::vector<std::uint64_t> seeds = parse_seeds(a.seeds);

  ib::LabeledDataset train_ds =
      ib::load_mnist(resolve_data_dir(a.data_dir), /*train=*/true);
  ib::LabeledDataset eval_ds =
      ib::load_mnist(resolve_data_dir(a.data_dir), /*train=*/false);
  if (a.limit_train > 0) train_ds = train_ds.head(a.limit_train);
  if (a.limit_eval > 0) eval_ds = eval_ds.head(a.limit_eval);

  ib::Architecture arch;
  arch.kind = kind;
  arch.input_dim = train_ds.dim();
  for (int h : parse_int_list(a.hidden))
    arch.hidden.push_back(h);
  arch.bottleneck = a.bottleneck;
  arch.num_classes = train_ds.num_classes;
  arch.rescale_input = true;
  if (a.dtype == "f32")
    arch.dtype = ib::DType::f32;
  else if (a.dtype == "f64")
    arch.dtype = ib::DType::f64;
  else
    throw ib::ConfigError("dtype must be f64 or f32, got '" + a.dtype + "'");

  ib::TrainConfig tc;
  tc.opt.kind = ib::OptKind::adam;
  tc.opt.lr = a.lr;
  tc.opt.beta1 = a.adam_beta1;
  tc.opt.beta2 = a.adam_beta2;
  tc.schedule.factor = a.lr_decay;
  tc.schedule.every_epochs = a.lr_every;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch_size;
  tc.polyak = a.polyak;
  tc.estimator = ib::rate_estimator_from_name(a.estimator);
  tc.eval_every = a.eval_every;
  tc.eval_samples = a.samples;
  if (a.anneal_epochs > 0) {
    tc.anneal.enabled = true;
    tc.anneal.ramp_epochs = a.anneal_epochs;
    if (kind == ib::ModelKind::vib) {
      tc.anneal.initial = 1e-8;
      tc.anneal.target = a.beta;
    } else if (kind == ib::ModelKind::ceb) {
      tc.anneal.initial = 100.0;
      tc.anneal.target = a.rho;
    } else {
      throw ib::ConfigError("annealing applies to vib/ceb models only");
    }
  }

  RunDir run = make_run_dir(a.out, "train");
  run.add_dataset(train_ds.name, train_ds.fingerprint);
  run.add_dataset(eval_ds.name, eval_ds.fingerprint);

  parallel_for_jobs(a.workers, static_cast<std::int64_t>(seeds.size()),
                    [&](std::int64_t si) {
    const std::uint64_t seed = seeds[static_cast<std::size_t>(si)];
    ib::Model init;
    init.arch = arch;
    init.beta = a.beta;
    init.rho = a.rho;
    init.samples = a.samples;
    init.params = ib::init_params(arch, ib::InitScheme::xavier_uniform, seed);

    ib::TrainConfig tcs = tc;
    tcs.seed = seed;
    ib::TrainResult res = ib::train(init, train_ds, &eval_ds, tcs);

    const std::string sub = run.file("seed-" + std::to_string(seed));
    std::filesystem::create_directories(sub);
    write_history_csv(sub + "/history.csv", res.history);

    ib::CheckpointMeta meta;
    meta.seed = seed;
    meta.epochs = a.epochs;
    meta.polyak = res.polyak_used;
    meta.dataset = train_ds.name;
    meta.dataset_fingerprint = train_ds.fingerprint;
    for (auto it = res.history.rbegin(); it != res.history.rend(); ++it)
      if (it->eval_acc >= 0.0) {
        meta.std_acc = it->eval_acc;
        break;
      }
    ib::save_checkpoint(sub + "/checkpoint", res.model, &res.raw_params, meta);
  });

  finish_run(run, "train", resolved_config(a), seeds);
  std::printf("%s\n", run.path.c_str());
}

}  // namespace

void setup_cmd_train(CLI::App& app) {
  auto args = std::make_shared<TrainArgs>();
  CLI::App* sub = app.add_subcommand("train", "Train a classifier checkpoint");
  sub->add_option("--config", args->config, "JSON config file (flags override)");
  sub->add_option("--dataset", args->dataset, "Training dataset (mnist)");
  sub->add_option("--data-dir", args->data_dir, "Directory with the IDX files");
  sub->add_option("--model", args->model, "det | vib | ceb");
  sub->add_option("--beta", args->beta, "VIB rate weight");
  sub->add_option("--rho", args->rho, "CEB rate parameter (weight = exp(-rho))");
  sub->add_option("--bottleneck", args->bottleneck, "Bottleneck width K");
  sub->add_option("--hidden", args->hidden, "Hidden relu widths, comma separated");
  sub->add_option("--samples", args->samples, "S for stochastic passes");
  sub->add_option("--epochs", args->epochs, "Training epochs");
  sub->add_option("--batch-size", args->batch_size, "Examples per step");
  sub->add_option("--lr", args->lr, "Adam learning rate");
  sub->add_option("--lr-decay", args->lr_decay, "LR decay factor");
  sub->add_option("--lr-every", args->lr_every, "Epochs between LR decays");
  sub->add_option("--adam-beta1", args->adam_beta1, "Adam beta1");
  sub->add_option("--adam-beta2", args->adam_beta2, "Adam beta2");
  sub->add_option("--polyak", args->polyak, "Parameter EMA decay (0 disables)");
  sub->add_option("--anneal-epochs", args->anneal_epochs,
                  "Ramp the rate weight over this many epochs (0 = off)");
  sub->add_option("--estimator", args->estimator, "analytic | sampled rate");
  sub->add_option("--dtype", args->dtype, "f64 | f32 parameters");
  sub->add_option("--seeds,--seed", args->seeds,
                  "Seed list: 0 | 0,1,2 | 0..9");
  sub->add_option("--limit-train", args->limit_train, "Cap training examples");
  sub->add_option("--limit-eval", args->limit_eval, "Cap history-eval examples");
  sub->add_option("--eval-every", args->eval_every, "Epochs between history evals");
  sub->add_option("--out", args->out, "Output root for run directories");
  sub->add_option("--workers", args->workers, "Parallel seed jobs");
  sub->callback([args, sub]() { run_train(*args, sub); });
}

}  // namespace ibcli
