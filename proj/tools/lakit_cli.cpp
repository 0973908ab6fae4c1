#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "lakit/runner.hpp"

namespace {

lakit::ProblemConfig load(const std::string& path, const std::string& outdir) {
  lakit::ProblemConfig cfg = lakit::parse_config(path);
  if (!outdir.empty()) cfg.output.directory = outdir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lakit: finite-element limit analysis via conic optimization"};
  app.require_subcommand(1);

  std::string config_path, outdir;
  int directions = 32, levels = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "problem config file")->required();
    sub->add_option("--output", outdir, "override output directory");
  };

  CLI::App* solve = app.add_subcommand("solve", "single solve of the configured problem");
  add_common(solve);

  CLI::App* sweep = app.add_subcommand("sweep", "homogenization sweep over load directions");
  add_common(sweep);
  sweep->add_option("--directions", directions, "number of directions")->check(CLI::Range(3, 4096));

  CLI::App* adapt = app.add_subcommand("adapt", "adaptive refinement loop");
  add_common(adapt);

  CLI::App* conv = app.add_subcommand("convergence", "uniform refinement study");
  add_common(conv);
  conv->add_option("--levels", levels, "number of uniform levels")->check(CLI::Range(1, 16));

  CLI::App* cbf = app.add_subcommand("export-cbf", "write the standard-form program, no solve");
  add_common(cbf);

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return lakit::run_solve(load(config_path, outdir));
    if (sweep->parsed()) return lakit::run_sweep(load(config_path, outdir), directions);
    if (adapt->parsed()) return lakit::run_adapt(load(config_path, outdir));
    if (conv->parsed()) return lakit::run_convergence(load(config_path, outdir), levels);
    if (cbf->parsed()) return lakit::run_export_cbf(load(config_path, outdir));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
