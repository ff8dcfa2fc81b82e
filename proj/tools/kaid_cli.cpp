// kaid: runs one pipeline stage per invocation.
//
//   kaid <stage> [--config FILE] [--workdir DIR] [--seed N] [--set key=value]...
//   kaid keys            list every config key with its current value
//
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <iostream>

#include <CLI11.hpp>

#include "kaid/error.hpp"
#include "kaid/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Knowledge acquisition, adapter infusion and distillation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // stage options may follow the stage name

  std::string config_file;
  std::string workdir;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--workdir", workdir, "working directory (overrides workdir)");
  app.add_option("--seed", seed, "global seed (overrides seed)");
  app.add_option("--set", overrides, "key=value override, repeatable")->take_all();

  std::vector<std::pair<CLI::App*, std::string>> commands;
  for (const auto& name : kaid::stage_names()) commands.emplace_back(app.add_subcommand(name), name);
  auto* keys = app.add_subcommand("keys", "print the resolved configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    kaid::PipelineConfig config;
    if (!config_file.empty()) config.load_file(config_file);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        config.set(kv, "");  // recorded as an invalid value or unknown key
        continue;
      }
      config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!workdir.empty()) config.workdir = workdir;
    if (seed) config.seed = *seed;

    if (keys->parsed()) {
      config.validate();
      std::cout << config.canonical();
      return 0;
    }
    for (const auto& [cmd, name] : commands) {
      if (!cmd->parsed()) continue;
      std::cout << kaid::run_stage(name, config) << std::endl;
    }
    return 0;
  } catch (const kaid::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
}
