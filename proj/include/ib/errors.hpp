#pragma once

#include <stdexcept>
#include <string>

namespace ib {

// Error taxonomy shared by the library and the CLI. The CLI maps each kind to
// a stable process exit code so scripted callers can branch on failures.
enum class ErrorKind {
  config,    // bad flags, bad config keys, invalid hyperparameters     -> exit 2
  data,      // missing/corrupt datasets or checkpoints                 -> exit 3
  numeric,   // NaN/Inf, divergence, domain violations                  -> exit 4
  contract,  // internal invariant broken (shape mismatch, bad usage)   -> exit 4
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  const char* kind_name() const noexcept {
    switch (kind_) {
      case ErrorKind::config: return "config";
      case ErrorKind::data: return "data";
      case ErrorKind::numeric: return "numeric";
      default: return "contract";
    }
  }
  int exit_code() const noexcept {
    switch (kind_) {
      case ErrorKind::config: return 2;
      case ErrorKind::data: return 3;
      default: return 4;
    }
  }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorKind::config, m) {}
};
struct DataError : Error {
  explicit DataError(const std::string& m) : Error(ErrorKind::data, m) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(ErrorKind::numeric, m) {}
};
struct ContractError : Error {
  explicit ContractError(const std::string& m) : Error(ErrorKind::contract, m) {}
};

}  // namespace ib
