#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "stdpzo/commands.hpp"

namespace cli = stdpzo::cli;

int main(int argc, char** argv) {
  CLI::App app{"stdpzo: spike-timing plasticity as zero-order optimization"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  unsigned parallel = 1;

  for (const char* name : {"verify", "optimize", "sweep", "spike-demo"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out, "override the output path");
    sub->add_option("--parallel", parallel, "worker threads")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitConfig;
  }

  cli::CommandOptions options;
  options.seed = seed;
  options.out = out;
  options.parallel = parallel;
  try {
    if (!config_path.empty()) options.config_text = cli::read_file(config_path);
  } catch (const cli::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return cli::kExitConfig;
  }
  return cli::run_command(app.get_subcommands().front()->get_name(), options, std::cout,
                          std::cerr);
}
