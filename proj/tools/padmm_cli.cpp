#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "padmm/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "Multi-block proximal ADMM for linearly constrained separable "
      "problems"};
  app.require_subcommand(1);

  std::string config_path, trace_path;
  std::optional<std::uint64_t> seed;

  CLI::App* run = app.add_subcommand("run", "solve the configured problem");
  run->add_option("config", config_path, "JSON run configuration")->required();
  run->add_option("--seed", seed, "override the config seed");

  CLI::App* verify = app.add_subcommand(
      "verify", "solve with full checking and report every certificate");
  verify->add_option("config", config_path, "JSON run configuration")
      ->required();
  verify->add_option("--seed", seed, "override the config seed");

  CLI::App* rate =
      app.add_subcommand("rate", "classify the decay rate of a trace file");
  rate->add_option("trace", trace_path, "trace CSV written by run")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return padmm::cmd_run(config_path, seed);
    if (verify->parsed()) return padmm::cmd_verify(config_path, seed);
    return padmm::cmd_rate(trace_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
