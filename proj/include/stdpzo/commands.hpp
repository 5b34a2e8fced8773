#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

namespace stdpzo::cli {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CommandOptions {
  std::string config_text;  // JSON document; empty means all defaults
  std::optional<std::uint64_t> seed;  // overrides the config's seed
  std::optional<std::string> out;     // overrides the config's output path
  unsigned parallel = 1;
};

// Each command validates the whole config before computing, writes its output
// file(s) and returns an exit code. Diagnostics go to `err`, one-line
// summaries to `log`.
int cmd_verify(const CommandOptions& options, std::ostream& log, std::ostream& err);
int cmd_optimize(const CommandOptions& options, std::ostream& log, std::ostream& err);
int cmd_sweep(const CommandOptions& options, std::ostream& log, std::ostream& err);
int cmd_spike_demo(const CommandOptions& options, std::ostream& log, std::ostream& err);

int run_command(const std::string& name, const CommandOptions& options,
                std::ostream& log, std::ostream& err);

// Reads a whole file; throws ConfigError if it cannot be opened.
std::string read_file(const std::string& path);

}  // namespace stdpzo::cli
