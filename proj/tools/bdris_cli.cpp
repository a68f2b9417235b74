#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "bdris/config.hpp"
#include "bdris/harness.hpp"

using namespace bdris;

int main(int argc, char** argv) {
  CLI::App app{"BD-RIS beamforming experiments"};
  app.require_subcommand(1);

  harness::RunOptions opt;
  std::uint64_t seed = 0;
  std::string out_dir;
  bool no_timing = false;
  auto* run = app.add_subcommand("run", "run an experiment and write its CSV outputs");
  run->add_option("--config", opt.config_path, "experiment config file")->required();
  auto* seed_opt = run->add_option("--seed", seed, "override the master seed");
  auto* dir_opt = run->add_option("--out-dir", out_dir, "override output_dir");
  run->add_option("--threads", opt.threads, "trial-level worker threads")->check(CLI::PositiveNumber);
  run->add_flag("--no-timing", no_timing, "write NA instead of wall times");
  run->add_flag("--strict", opt.strict, "exit 2 when an optimizer does not converge");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a config and print it fully resolved");
  validate->add_option("--config", validate_path, "experiment config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : harness::kConfigFault;
  }

  if (*run) {
    if (*seed_opt) opt.seed = seed;
    if (*dir_opt) opt.out_dir = out_dir;
    opt.timing = !no_timing;
    return harness::run(opt, std::cerr);
  }

  std::ifstream in(validate_path);
  if (!in) {
    std::cerr << config::format_error({0, "", "cannot open " + validate_path}) << '\n';
    return harness::kConfigFault;
  }
  const auto parsed = config::parse(in);
  if (!parsed.ok()) {
    for (const auto& e : parsed.errors) std::cerr << config::format_error(e) << '\n';
    return harness::kConfigFault;
  }
  config::write_resolved(std::cout, parsed.config);
  return harness::kOk;
}
