#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>

#include "confit/commands.hpp"
#include "confit/runconfig.hpp"

namespace {

struct SubArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

void add_run_subcommand(CLI::App& app, const std::string& name, const std::string& help) {
  auto args = std::make_shared<SubArgs>();
  CLI::App* sub = app.add_subcommand(name, help);
  sub->add_option("--config", args->config_path, "JSON run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--out", args->out_dir, "output directory for artifacts")->required();
  args->seed_opt = sub->add_option("--seed", args->seed, "override the config seed");
  sub->callback([name, args] {
    confit::RunConfig cfg = confit::load_run_config(args->config_path);
    if (args->seed_opt->count() > 0) {
      confit::apply_seed_override(cfg, args->seed);
    }
    confit::run_command(name, cfg, args->out_dir);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contrastive frame-encoder training and diagnostics"};
  app.require_subcommand(1);
  add_run_subcommand(app, "synth", "generate a synthetic frames dataset");
  add_run_subcommand(app, "pairtune", "contrastive encoder training");
  add_run_subcommand(app, "probe", "linear probe on a frozen encoder");
  add_run_subcommand(app, "finetune", "end-to-end cross-entropy baseline");
  add_run_subcommand(app, "diagnose", "representation diagnostics report");
  add_run_subcommand(app, "compare", "multi-seed pairtune vs finetune comparison");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
