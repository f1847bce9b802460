// mkvlab: command-line front end for the McKean-Vlasov experiments.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mkv/experiment/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"McKean-Vlasov simulation and verification lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;

  for (const char* name : {"solve-mkv", "simulate-particles", "chaos-metrics", "burgers-compare",
                           "sanov-check", "girsanov-check"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string experiment = app.get_subcommands().front()->get_name();

  nlohmann::json config;
  try {
    std::ifstream in(config_path);
    in >> config;
  } catch (const std::exception& e) {
    std::cerr << "ConfigError: cannot parse " << config_path << ": " << e.what() << '\n';
    return 2;
  }
  if (!config.is_object()) {
    std::cerr << "ConfigError: config must be a JSON object\n";
    return 2;
  }
  if (config.contains("experiment") && config["experiment"] != experiment) {
    std::cerr << "ConfigError: config is for " << config["experiment"] << ", not " << experiment << '\n';
    return 2;
  }
  config["experiment"] = experiment;
  if (seed) config["seed"] = *seed;
  if (threads) config["threads"] = *threads;

  std::string message;
  const int code = mkv::exp::run_and_report(config, out_dir, &message);
  if (code != 0) {
    std::cerr << message << '\n';
  } else {
    std::cout << "wrote " << out_dir << "/manifest.json\n";
  }
  return code;
}
