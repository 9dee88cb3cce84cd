#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  mgn::cli::RunConfig rc;
  CLI::App app{"Monotone gradient networks: experiments, property checks and model tools"};
  app.require_subcommand(1);

  std::string config, out = "out";
  std::vector<std::string> overrides;
  std::uint64_t seed = 42;
  std::string model_file;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON config file (sections model, train, experiment)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed (default 42)");
    sub->add_option("--out", out, "output directory")->capture_default_str();
    sub->add_option("--set", overrides, "override a config value, e.g. --set train.epochs=5");
  };
  add_common(app.add_subcommand("gradfield", "fit the 2-d gradient field and report lattice MSE"));
  add_common(app.add_subcommand("coupling", "Gaussian optimal coupling flows and the whitening baseline"));
  add_common(app.add_subcommand("adapt", "colour adaptation between images"));
  add_common(app.add_subcommand("verify", "symmetry, PSD, monotonicity, finite-difference and loop checks"));
  auto* info = app.add_subcommand("info", "print model metadata");
  info->add_option("model", model_file, "model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mgn::cli::kConfigError;
  }

  CLI::App* sub = app.get_subcommands().front();
  rc.subcommand = sub->get_name();
  if (!config.empty()) rc.config = config;
  if (sub->get_option_no_throw("--seed") && sub->count("--seed") > 0) rc.seed = seed;
  rc.out = out;
  rc.overrides = overrides;
  rc.model_file = model_file;
  return mgn::cli::run(rc, std::cout, std::cerr);
}
