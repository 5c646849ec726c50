#include "ib/report.hpp"

#include <fstream>
#include "json.hpp"

#include "ib/csv.hpp"
#include "ib/errors.hpp"

namespace ib {

namespace {

using json = nlohmann::ordered_json;

CsvTable report_table(const RobustnessReport& report) {
  CsvTable t;
  t.header = {"model_id",   "seed",        "attack",     "epsilon",
              "restarts",   "eval_mode",   "standard_acc", "robust_acc",
              "n_examples", "num_classes"};
  for (const ReportRow& r : report.rows)
    t.rows.push_back({r.model_id, format_int(static_cast<long long>(r.seed)),
                      r.attack, format_double(r.epsilon), format_int(r.restarts),
                      r.eval_mode, format_double(r.standard_acc),
                      format_double(r.robust_acc), format_int(r.n_examples),
                      format_int(r.num_classes)});
  return t;
}

void dump(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path);
}

}  // namespace

void write_report_csv(const std::string& path, const RobustnessReport& report) {
  write_csv(path, report_table(report));
}

std::string report_csv_string(const RobustnessReport& report) {
  const CsvTable t = report_table(report);
  std::string s;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (i) s += ',';
    s += t.header[i];
  }
  s += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) s += ',';
      s += row[i];
    }
    s += '\n';
  }
  return s;
}

void write_report_json(const std::string& path, const RobustnessReport& report) {
  json j;
  j["rows"] = json::array();
  for (const ReportRow& r : report.rows) {
    json row;
    row["model_id"] = r.model_id;
    row["seed"] = r.seed;
    row["attack"] = r.attack;
    row["epsilon"] = r.epsilon;
    row["restarts"] = r.restarts;
    row["eval_mode"] = r.eval_mode;
    row["standard_acc"] = r.standard_acc;
    row["robust_acc"] = r.robust_acc;
    row["n_examples"] = r.n_examples;
    row["num_classes"] = r.num_classes;
    j["rows"].push_back(std::move(row));
  }
  j["findings"] = json::array();
  for (const Finding& f : report.findings) {
    json jf;
    jf["name"] = f.name;
    jf["flagged"] = f.flagged;
    jf["numbers"] = json::object();
    for (const auto& [k, v] : f.numbers) jf["numbers"][k] = v;
    j["findings"].push_back(std::move(jf));
  }
  j["warnings"] = report.warnings;
  dump(path, j);
}

void write_restart_curve_csv(const std::string& path, const RestartCurve& curve) {
  CsvTable t;
  t.header = {"restarts", "robust_acc", "standard_acc", "n_examples"};
  for (std::size_t i = 0; i < curve.restart_counts.size(); ++i)
    t.rows.push_back({format_int(curve.restart_counts[i]),
                      format_double(curve.robust_acc[i]),
                      format_double(curve.standard_acc), format_int(curve.n)});
  write_csv(path, t);
}

void write_landscape_csv(const std::string& path, const LandscapeGrid& grid) {
  CsvTable t;
  t.header = {"u", "v", "loss"};
  const int res = grid.resolution;
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j)
      t.rows.push_back(
          {format_double(grid.offsets[static_cast<std::size_t>(i)]),
           format_double(grid.offsets[static_cast<std::size_t>(j)]),
           format_double(grid.loss[static_cast<std::size_t>(i) *
                                       static_cast<std::size_t>(res) +
                                   static_cast<std::size_t>(j)])});
  write_csv(path, t);
}

void write_landscape_json(const std::string& path, const LandscapeGrid& grid) {
  json j;
  j["epsilon"] = grid.epsilon;
  j["extent"] = grid.extent;
  j["resolution"] = grid.resolution;
  j["fallback_random"] = grid.fallback_random;
  j["ball_vertices"] = json::array();
  for (const auto& [u, v] : grid.ball_vertices)
    j["ball_vertices"].push_back(json::array({u, v}));
  j["d1"] = grid.d1;
  j["d2"] = grid.d2;
  dump(path, j);
}

}  // namespace ib
