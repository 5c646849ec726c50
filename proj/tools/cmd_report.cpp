#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"

#include "cli_common.hpp"
#include "ib/csv.hpp"
#include "ib/diagnostics.hpp"
#include "ib/errors.hpp"
#include "ib/report.hpp"

namespace ibcli {

namespace {

struct ReportArgs {
  std::vector<std::string> inputs;  // report.csv files or run directories
  bool collapse = false;            // drop chance-level rows first
  std::string out = "runs";
};

const std::vector<std::string> kHeader = {
    "model_id",     "seed",       "attack",     "epsilon",    "restarts",
    "eval_mode",    "standard_acc", "robust_acc", "n_examples", "num_classes"};

double parse_cell_double(const std::string& cell, const std::string& col,
                         const std::string& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw ib::DataError("bad " + col + " value '" + cell + "' in " + path);
  }
}

std::vector<ib::ReportRow> read_report(const std::string& input) {
  std::string path = input;
  if (std::filesystem::is_directory(path)) path += "/report.csv";
  const ib::CsvTable t = ib::read_csv(path);
  if (t.header != kHeader)
    throw ib::DataError("unexpected report header in " + path);
  std::vector<ib::ReportRow> rows;
  for (const auto& r : t.rows) {
    if (r.size() != kHeader.size())
      throw ib::DataError("short row in " + path);
    ib::ReportRow row;
    row.model_id = r[0];
    row.seed = static_cast<std::uint64_t>(
        parse_cell_double(r[1], "seed", path));
    row.attack = r[2];
    row.epsilon = parse_cell_double(r[3], "epsilon", path);
    row.restarts = static_cast<int>(
        parse_cell_double(r[4], "restarts", path));
    row.eval_mode = r[5];
    row.standard_acc = parse_cell_double(r[6], "standard_acc", path);
    row.robust_acc = parse_cell_double(r[7], "robust_acc", path);
    row.n_examples = static_cast<std::int64_t>(
        parse_cell_double(r[8], "n_examples", path));
    row.num_classes = static_cast<int>(
        parse_cell_double(r[9], "num_classes", path));
    rows.push_back(row);
  }
  return rows;
}

void run_report(const ReportArgs& a) {
  if (a.inputs.empty())
    throw ib::ConfigError("at least one input report is required");

  ib::RobustnessReport combined;
  for (const std::string& input : a.inputs)
    for (const ib::ReportRow& row : read_report(input))
      combined.rows.push_back(row);  // concatenation, no re-validation

  std::vector<ib::Exclusion> excluded;
  const ib::RobustnessReport kept =
      a.collapse ? ib::collapse_filter(combined, &excluded) : combined;

  // Aggregate across seeds: min/mean/max per configuration.
  using Key = std::tuple<std::string, std::string, std::string, int,
                         std::string>;  // model, attack, eps, restarts, mode
  struct Stats {
    std::vector<double> std_acc, rob_acc;
  };
  std::map<Key, Stats> groups;
  for (const ib::ReportRow& row : kept.rows) {
    Stats& s = groups[{row.model_id, row.attack, ib::format_double(row.epsilon),
                       row.restarts, row.eval_mode}];
    s.std_acc.push_back(row.standard_acc);
    s.rob_acc.push_back(row.robust_acc);
  }

  const auto mean = [](const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
  };

  ib::CsvTable agg;
  agg.header = {"model_id",     "attack",        "epsilon",
                "restarts",     "eval_mode",     "runs",
                "standard_min", "standard_mean", "standard_max",
                "robust_min",   "robust_mean",   "robust_max"};
  for (const auto& [key, s] : groups) {
    const auto& [model, attack, eps, restarts, mode] = key;
    const auto [std_lo, std_hi] =
        std::minmax_element(s.std_acc.begin(), s.std_acc.end());
    const auto [rob_lo, rob_hi] =
        std::minmax_element(s.rob_acc.begin(), s.rob_acc.end());
    agg.rows.push_back({model, attack, eps, ib::format_int(restarts), mode,
                        ib::format_int(static_cast<long long>(s.rob_acc.size())),
                        ib::format_double(*std_lo),
                        ib::format_double(mean(s.std_acc)),
                        ib::format_double(*std_hi),
                        ib::format_double(*rob_lo),
                        ib::format_double(mean(s.rob_acc)),
                        ib::format_double(*rob_hi)});
  }

  RunDir run = make_run_dir(a.out, "report");
  ib::write_report_csv(run.file("combined.csv"), kept);
  ib::write_csv(run.file("aggregate.csv"), agg);
  if (a.collapse) {
    ib::CsvTable ex;
    ex.header = {"model_id", "seed", "standard_acc", "threshold"};
    for (const ib::Exclusion& e : excluded)
      ex.rows.push_back({e.model_id,
                         ib::format_int(static_cast<long long>(e.seed)),
                         ib::format_double(e.standard_acc),
                         ib::format_double(e.threshold)});
    ib::write_csv(run.file("exclusions.csv"), ex);
  }

  json cfg;
  cfg["inputs"] = a.inputs;
  cfg["collapse"] = a.collapse;
  cfg["out"] = a.out;
  finish_run(run, "report", cfg, {});
  std::printf("%s\n", run.path.c_str());
}

}  // namespace

void setup_cmd_report(CLI::App& app) {
  auto args = std::make_shared<ReportArgs>();
  CLI::App* sub = app.add_subcommand(
      "report", "Concatenate and aggregate robustness reports");
  sub->add_option("inputs", args->inputs,
                  "report.csv files or run directories");
  sub->add_flag("--collapse-filter", args->collapse,
                "Exclude chance-level runs (standard acc <= 2x chance)");
  sub->add_option("--out", args->out, "Output root directory");
  sub->callback([args]() { run_report(*args); });
}

}  // namespace ibcli
