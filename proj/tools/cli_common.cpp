#include "cli_common.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <thread>

#include "ib/csv.hpp"
#include "ib/errors.hpp"
#include "ib/model.hpp"
#include "ib/rng.hpp"

namespace fs = std::filesystem;

namespace ibcli {

namespace {

double parse_plain_double(const std::string& s) {
  const char* b = s.data();
  const char* e = b + s.size();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e)
    throw ib::ConfigError("cannot parse number '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::uint64_t parse_u64(const std::string& s) {
  const char* b = s.data();
  const char* e = b + s.size();
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e)
    throw ib::ConfigError("cannot parse integer '" + s + "'");
  return v;
}

std::string utc_stamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

}  // namespace

double parse_epsilon(const std::string& s) {
  const auto slash = s.find('/');
  double v;
  if (slash == std::string::npos) {
    v = parse_plain_double(s);
  } else {
    const double num = parse_plain_double(s.substr(0, slash));
    const double den = parse_plain_double(s.substr(slash + 1));
    if (den == 0.0) throw ib::ConfigError("epsilon fraction '" + s + "' divides by zero");
    v = num / den;
  }
  if (!(v >= 0.0) || !std::isfinite(v))
    throw ib::ConfigError("epsilon '" + s + "' must be finite and >= 0");
  return v;
}

std::vector<double> parse_epsilon_list(const std::string& s) {
  std::vector<double> out;
  for (const std::string& part : split(s, ',')) out.push_back(parse_epsilon(part));
  if (out.empty()) throw ib::ConfigError("empty epsilon list");
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const std::string& part : split(s, ',')) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_u64(part));
      continue;
    }
    const std::uint64_t lo = parse_u64(part.substr(0, dots));
    const std::uint64_t hi = parse_u64(part.substr(dots + 2));
    if (hi < lo) throw ib::ConfigError("seed range '" + part + "' runs backwards");
    if (hi - lo > 10000) throw ib::ConfigError("seed range '" + part + "' is unreasonably large");
    for (std::uint64_t v = lo; v <= hi; ++v) out.push_back(v);
  }
  if (out.empty()) throw ib::ConfigError("empty seed list");
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const std::string& part : split(s, ',')) {
    const std::uint64_t v = parse_u64(part);
    if (v > 1000000) throw ib::ConfigError("count '" + part + "' is unreasonably large");
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) throw ib::ConfigError("empty integer list");
  return out;
}

std::string resolve_data_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv(kDataDirEnv); env && *env) return env;
  throw ib::ConfigError(std::string("no data directory: pass --data-dir or set $") +
                        kDataDirEnv);
}

json load_config_file(const std::string& path,
                      const std::vector<std::string>& allowed) {
  if (path.empty()) return json::object();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ib::DataError("cannot read config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ib::ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object())
    throw ib::ConfigError("config file " + path + " must hold a JSON object");
  for (const auto& [key, value] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ib::ConfigError("unknown config key '" + key + "' in " + path);
  return j;
}

ib::LabeledDataset load_eval_dataset(const std::string& task,
                                     const std::string& data_dir_flag,
                                     std::int64_t toy_n, std::uint64_t seed) {
  const ib::TaskKind kind = ib::task_from_name(task);
  if (kind == ib::TaskKind::mnist)
    return ib::load_mnist(resolve_data_dir(data_dir_flag), /*train=*/false);
  return ib::make_toy_dataset(kind, toy_n, seed);
}

std::string RunDir::file(const std::string& name) const {
  return (fs::path(path) / name).string();
}

void RunDir::add_dataset(const std::string& name, std::uint64_t fingerprint) {
  datasets[name] = std::to_string(fingerprint);
}

RunDir make_run_dir(const std::string& out_root, const std::string& command) {
  std::error_code ec;
  fs::create_directories(out_root, ec);
  if (ec) throw ib::DataError("cannot create output root " + out_root);
  const std::string stamp = utc_stamp();
  for (int k = 0; k < 10000; ++k) {
    fs::path dir = fs::path(out_root) /
                   (command + "-" + stamp + (k == 0 ? "" : "-" + std::to_string(k)));
    std::error_code mk;
    if (fs::create_directory(dir, mk) && !mk) {
      RunDir run;
      run.path = dir.string();
      run.started_at = stamp;
      return run;
    }
  }
  throw ib::DataError("cannot allocate a fresh run directory under " + out_root);
}

void finish_run(RunDir& run, const std::string& command, const json& resolved,
                const std::vector<std::uint64_t>& seeds) {
  json m;
  m["command"] = command;
  m["artifact_version"] = kArtifactVersion;
  {
    const std::string v = kArtifactVersion;
    m["artifact_hash"] = std::to_string(ib::fnv1a64(
        {reinterpret_cast<const unsigned char*>(v.data()), v.size()}));
  }
  m["started_at"] = run.started_at;
  m["finished_at"] = utc_stamp();
  m["config"] = resolved;
  m["seeds"] = seeds;
  m["datasets"] = run.datasets;
  json outputs = json::array();
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(run.path))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const fs::path& p : files) {
    json f;
    f["path"] = fs::relative(p, run.path).generic_string();
    f["bytes"] = static_cast<std::uint64_t>(fs::file_size(p));
    outputs.push_back(std::move(f));
  }
  m["outputs"] = std::move(outputs);
  std::ofstream out(run.file("manifest.json"), std::ios::binary);
  if (!out) throw ib::DataError("cannot write manifest in " + run.path);
  out << m.dump(2) << '\n';
}

int guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const ib::Error& e) {
    std::fprintf(stderr, "error: [%s] %s\n", e.kind_name(), e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: [internal] %s\n", e.what());
    return 4;
  }
}

std::string model_label(const ib::Model& m) {
  std::string s = ib::model_kind_name(m.arch.kind);
  if (m.arch.kind == ib::ModelKind::vib)
    s += "-beta" + ib::format_double(m.beta);
  else if (m.arch.kind == ib::ModelKind::ceb)
    s += "-rho" + ib::format_double(m.rho);
  return s;
}

std::string checkpoint_base(const std::string& path) {
  if (path.empty()) throw ib::ConfigError("missing checkpoint path");
  if (path.ends_with(".bin") || path.ends_with(".json"))
    return path.substr(0, path.rfind('.'));
  return path;
}

void parallel_for_jobs(int workers, std::int64_t count,
                       const std::function<void(std::int64_t)>& job) {
  if (workers < 1) throw ib::ConfigError("worker count must be >= 1");
  if (workers == 1 || count <= 1) {
    for (std::int64_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<std::int64_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::int64_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        job(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n = static_cast<int>(std::min<std::int64_t>(workers, count));
  pool.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace ibcli
