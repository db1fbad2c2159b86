#include <iostream>

#include <CLI11.hpp>

#include "nlv/cli/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Variable-order nonlocal diffusion laboratory"};
  app.require_subcommand(1);
  nlv::cli::RunArgs args;
  std::uint64_t seed = 0;
  for (const std::string& name : nlv::cli::kCommands) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", args.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "output directory");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_flag("--fast", args.fast, "relax the fixed reduction order");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  args.command = app.get_subcommands().front()->get_name();
  if (app.get_subcommands().front()->count("--seed")) args.seed = seed;

  nlv::cli::RunResult r;
  try {
    r = nlv::cli::run(args);
  } catch (const std::exception& e) {
    std::cerr << "nlv " << args.command << ": " << e.what() << "\n";
    return 1;
  }
  if (r.status == 2) {
    std::cerr << r.message << "\n";
    return 2;
  }
  std::cout << args.command << ": " << (r.status == 0 ? "all invariants passed" : r.message) << "\n";
  for (const auto& f : r.files) std::cout << "  " << (args.out / f).string() << "\n";
  return r.status;
}
