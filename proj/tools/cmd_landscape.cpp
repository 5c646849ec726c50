#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cli_common.hpp"
#include "ib/checkpoint.hpp"
#include "ib/errors.hpp"
#include "ib/landscape.hpp"
#include "ib/report.hpp"
#include "ib/tensor.hpp"

namespace ibcli {

namespace {

struct LandscapeArgs {
  std::string config;
  std::string checkpoint;
  std::string dataset = "mnist";
  std::string data_dir;
  std::int64_t index = 0;  // example to map
  double eps = 0.2;
  int resolution = 51;
  double extent = 1.5;
  std::string mode = "mean";  // surface loss mode
  int samples = 12;
  std::int64_t pgd_steps = 40;
  std::uint64_t seed = 0;
  std::int64_t toy_n = 10000;
  std::string out = "runs";
};

const std::vector<std::string> kKeys = {
    "checkpoint", "dataset", "data_dir", "index",     "eps",
    "resolution", "extent",  "mode",     "samples",   "pgd_steps",
    "seed",       "toy_n",   "out"};

void apply_config(LandscapeArgs& a, const json& c) {
  if (c.contains("checkpoint")) a.checkpoint = c["checkpoint"].get<std::string>();
  if (c.contains("dataset")) a.dataset = c["dataset"].get<std::string>();
  if (c.contains("data_dir")) a.data_dir = c["data_dir"].get<std::string>();
  if (c.contains("index")) a.index = c["index"].get<std::int64_t>();
  if (c.contains("eps")) a.eps = c["eps"].get<double>();
  if (c.contains("resolution")) a.resolution = c["resolution"].get<int>();
  if (c.contains("extent")) a.extent = c["extent"].get<double>();
  if (c.contains("mode")) a.mode = c["mode"].get<std::string>();
  if (c.contains("samples")) a.samples = c["samples"].get<int>();
  if (c.contains("pgd_steps")) a.pgd_steps = c["pgd_steps"].get<std::int64_t>();
  if (c.contains("seed")) a.seed = c["seed"].get<std::uint64_t>();
  if (c.contains("toy_n")) a.toy_n = c["toy_n"].get<std::int64_t>();
  if (c.contains("out")) a.out = c["out"].get<std::string>();
}

json resolved_config(const LandscapeArgs& a) {
  json c;
  c["checkpoint"] = a.checkpoint;
  c["dataset"] = a.dataset;
  c["index"] = a.index;
  c["eps"] = a.eps;
  c["resolution"] = a.resolution;
  c["extent"] = a.extent;
  c["mode"] = a.mode;
  c["samples"] = a.samples;
  c["pgd_steps"] = a.pgd_steps;
  c["seed"] = a.seed;
  c["toy_n"] = a.toy_n;
  c["out"] = a.out;
  return c;
}

void run_landscape(const LandscapeArgs& flags, const CLI::App* cli) {
  LandscapeArgs a;
  apply_config(a, load_config_file(flags.config, kKeys));
  const auto given = [cli](const char* name) { return cli->count(name) > 0; };
  if (given("--checkpoint")) a.checkpoint = flags.checkpoint;
  if (given("--dataset")) a.dataset = flags.dataset;
  if (given("--data-dir")) a.data_dir = flags.data_dir;
  if (given("--index")) a.index = flags.index;
  if (given("--eps")) a.eps = flags.eps;
  if (given("--resolution")) a.resolution = flags.resolution;
  if (given("--extent")) a.extent = flags.extent;
  if (given("--mode")) a.mode = flags.mode;
  if (given("--samples")) a.samples = flags.samples;
  if (given("--pgd-steps")) a.pgd_steps = flags.pgd_steps;
  if (given("--seed")) a.seed = flags.seed;
  if (given("--toy-n")) a.toy_n = flags.toy_n;
  if (given("--out")) a.out = flags.out;

  if (a.checkpoint.empty())
    throw ib::ConfigError("--checkpoint is required");

  const ib::LoadedCheckpoint lc =
      ib::load_checkpoint(checkpoint_base(a.checkpoint));
  const ib::LabeledDataset ds =
      load_eval_dataset(a.dataset, a.data_dir, a.toy_n, a.seed);
  if (a.index < 0 || a.index >= ds.n())
    throw ib::ConfigError("--index " + std::to_string(a.index) +
                          " outside dataset of size " +
                          std::to_string(ds.n()));

  const std::int64_t d = ds.dim();
  const std::span<const double> all = ds.x.f64();
  std::vector<double> row(all.begin() + a.index * d,
                          all.begin() + (a.index + 1) * d);
  const ib::Tensor x = ib::Tensor::from({1, d}, std::move(row));
  const std::int32_t y = ds.y[static_cast<std::size_t>(a.index)];

  ib::LandscapeConfig cfg;
  cfg.resolution = a.resolution;
  cfg.extent = a.extent;
  cfg.seed = a.seed;
  if (a.mode == "mean")
    cfg.mode = ib::GradMode::mean;
  else if (a.mode == "stochastic")
    cfg.mode = ib::GradMode::stochastic;
  else
    throw ib::ConfigError("mode must be mean or stochastic, got '" + a.mode +
                          "'");
  cfg.samples = a.samples;
  cfg.bounded = ds.bounded01;
  cfg.pgd_steps = static_cast<int>(a.pgd_steps);

  const ib::LandscapeGrid grid =
      ib::loss_landscape(lc.model, x, y, a.eps, cfg);

  RunDir run = make_run_dir(a.out, "landscape");
  run.add_dataset(ds.name, ds.fingerprint);
  ib::write_landscape_csv(run.file("landscape.csv"), grid);
  ib::write_landscape_json(run.file("landscape.json"), grid);

  finish_run(run, "landscape", resolved_config(a), {a.seed});
  std::printf("%s\n", run.path.c_str());
}

}  // namespace

void setup_cmd_landscape(CLI::App& app) {
  auto args = std::make_shared<LandscapeArgs>();
  CLI::App* sub = app.add_subcommand(
      "landscape", "Loss surface around one example (PGD x random plane)");
  sub->add_option("--config", args->config, "JSON config file");
  sub->add_option("--checkpoint", args->checkpoint, "Checkpoint base path");
  sub->add_option("--dataset", args->dataset,
                  "mnist | toy-ours | toy-tsipras");
  sub->add_option("--data-dir", args->data_dir, "Dataset directory");
  sub->add_option("--index", args->index, "Example index");
  sub->add_option("--eps", args->eps, "Ball radius");
  sub->add_option("--resolution", args->resolution, "Grid points per axis");
  sub->add_option("--extent", args->extent, "Grid half-width, in units of eps");
  sub->add_option("--mode", args->mode, "Surface loss: mean | stochastic");
  sub->add_option("--samples", args->samples, "S for stochastic surfaces");
  sub->add_option("--pgd-steps", args->pgd_steps, "PGD budget for direction 1");
  sub->add_option("--seed", args->seed, "Direction/noise seed");
  sub->add_option("--toy-n", args->toy_n, "Toy evaluation set size");
  sub->add_option("--out", args->out, "Output root directory");
  sub->callback([args, sub]() { run_landscape(*args, sub); });
}

}  // namespace ibcli
