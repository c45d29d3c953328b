#include <iostream>

#include "CLI11.hpp"
#include "greg/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Gradient-regularized OOD detection on small MLPs"};
  app.require_subcommand(1);

  greg::RunConfig run;
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;

  const std::pair<const char*, const char*> commands[] = {
      {"gen-data", "generate the toy scenario datasets"},
      {"train", "train a model (mode from [train] mode)"},
      {"eval", "score ID/OOD test sets, write metrics and histograms"},
      {"certify", "Lipschitz certificates for the test sets"},
      {"ablate-clusters", "GReg+ over a list of cluster counts"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--seed", seed, "override [run] seed");
    sub->callback([&run, sub, name] {
      run.subcommand = name;
      if (sub->count("--seed") > 0) run.seed.emplace();
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  run.config_path = config_path;
  run.out_dir = out_dir;
  if (run.seed) run.seed = seed;
  return greg::run_command(run, std::cout, std::cerr);
}
