#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "nvreg/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"NV-centre nuclear register simulator"};
  app.require_subcommand(1);
  nvreg::cli::RunOptions opt;
  std::uint64_t seed = 0;
  std::string out;
  for (const auto& name : nvreg::cli::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config, "YAML run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out, "override the output directory");
  }
  CLI11_PARSE(app, argc, argv);
  const auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opt.seed = seed;
  if (sub->count("--out")) opt.output_dir = out;
  try {
    const auto res = nvreg::cli::run_subcommand(sub->get_name(), opt);
    std::cout << res.summary << '\n';
  } catch (const nvreg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
