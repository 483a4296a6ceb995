#include <iostream>

#include "CLI11.hpp"
#include "balrd/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace balrd::cli;

  CLI::App app{"balrd: balanced rate-distortion optimization experiments"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string seed_text;
  auto add_common = [&](CLI::App* cmd, bool with_mode) {
    cmd->add_option("--config", opts.config, "Experiment config (JSON)")->required();
    cmd->add_option("--out", opts.out, "Output root directory");
    cmd->add_option("--seed", opts.seed, "Override train.seed");
    if (with_mode) {
      cmd->add_option("--mode", opts.mode, "Override train.mode")
          ->check(CLI::IsMember({"standard", "solution1", "solution2"}));
    }
    cmd->add_option("--set", opts.sets, "Override a config key: dotted.key=value");
  };

  auto* train = app.add_subcommand("train", "Train one configuration");
  add_common(train, true);
  auto* sweep = app.add_subcommand("sweep", "Run the cross-product in the sweep section");
  add_common(sweep, false);
  auto* validate = app.add_subcommand("validate-config", "Validate and print the resolved config");
  add_common(validate, true);

  std::string preset;
  auto* ablate = app.add_subcommand("ablate", "Run an ablation family");
  ablate->add_option("preset", preset, "renorm_off | gamma_sweep | cross_validation")->required();
  add_common(ablate, false);

  std::filesystem::path anchor, test;
  auto* bdrate = app.add_subcommand("bdrate", "BD-Rate of a test curve against an anchor");
  bdrate->add_option("anchor", anchor, "Anchor curve (CSV rate,quality or JSON)")->required();
  bdrate->add_option("test", test, "Test curve")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  }

  try {
    if (*train) return cmd_train(opts, std::cout, std::cerr);
    if (*sweep) return cmd_sweep(opts, std::cout, std::cerr);
    if (*validate) return cmd_validate_config(opts, std::cout, std::cerr);
    if (*ablate) return cmd_ablate(preset, opts, std::cout, std::cerr);
    if (*bdrate) return cmd_bdrate(anchor, test, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
