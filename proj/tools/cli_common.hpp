#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ib/checkpoint.hpp"
#include "ib/dataset.hpp"

namespace CLI {
class App;
}

namespace ibcli {

using json = nlohmann::ordered_json;

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr const char* kDataDirEnv = "IB_DATA_DIR";

// "0.2" or "8/255".
double parse_epsilon(const std::string& s);
std::vector<double> parse_epsilon_list(const std::string& s);

// "7", "1,2,5" or "0..9" (inclusive range).
std::vector<std::uint64_t> parse_seeds(const std::string& s);
std::vector<int> parse_int_list(const std::string& s);

// --data-dir flag if set, else $IB_DATA_DIR, else a config error.
std::string resolve_data_dir(const std::string& flag_value);

// Loads a JSON object from `path` ({} when path is empty) and rejects any
// key that is not in `allowed`, naming the offender.
json load_config_file(const std::string& path,
                      const std::vector<std::string>& allowed);

// Evaluation dataset for a task name: "mnist" reads the IDX test split from
// the data directory; synthetic tasks generate a fixed set of `toy_n` rows.
ib::LabeledDataset load_eval_dataset(const std::string& task,
                                     const std::string& data_dir_flag,
                                     std::int64_t toy_n, std::uint64_t seed);

// Append-only run directory: <out_root>/<command>-<utc stamp>[-k].
struct RunDir {
  std::string path;
  std::string started_at;
  json datasets = json::object();  // name -> fingerprint (decimal string)

  std::string file(const std::string& name) const;
  void add_dataset(const std::string& name, std::uint64_t fingerprint);
};

RunDir make_run_dir(const std::string& out_root, const std::string& command);

// Writes manifest.json: command, resolved config, seeds, artifact-version
// hash, timestamps, dataset fingerprints, and an inventory (path + size) of
// every file currently in the directory.
void finish_run(RunDir& run, const std::string& command, const json& resolved,
                const std::vector<std::uint64_t>& seeds);

// Runs `body`, mapping exceptions to the exit-code contract
// (config 2, data 3, numeric/contract 4) with a one-line stderr message.
int guarded(const std::function<void()>& body);

// Checkpoint base path: accepts "<base>", "<base>.bin" or "<base>.json".
std::string checkpoint_base(const std::string& path);

// Stable row label: "det", "vib-beta0.01", "ceb-rho3".
std::string model_label(const ib::Model& m);

// Runs jobs 0..count-1 on `workers` threads; exceptions rethrow in order.
void parallel_for_jobs(int workers, std::int64_t count,
                       const std::function<void(std::int64_t)>& job);

// Subcommand registration (one translation unit per command).
void setup_cmd_train(CLI::App& app);
void setup_cmd_attack(CLI::App& app);
void setup_cmd_diagnose(CLI::App& app);
void setup_cmd_landscape(CLI::App& app);
void setup_cmd_toy(CLI::App& app);
void setup_cmd_report(CLI::App& app);

}  // namespace ibcli
