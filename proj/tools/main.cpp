#include <string>

#include "CLI11.hpp"
#include "pdball/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"persistence diagrams as learnable points on the Poincaré ball"};
  app.require_subcommand(1);

  pdball::CliOptions opt;
  std::string seed_str;
  auto add_common = [&](CLI::App* c, bool need_config) {
    auto* o = c->add_option("--config", opt.config_path, "run configuration (JSON)");
    if (need_config) o->required();
    c->add_option("--out", opt.out, "output directory (overrides config)");
    c->add_option("--seed", seed_str, "seed override");
    c->add_option("--jobs", opt.jobs, "max worker threads (default: all cores)");
  };

  auto* diagrams = app.add_subcommand("diagrams", "compute and store persistence diagrams");
  add_common(diagrams, true);
  diagrams->add_option("--dump-phi", opt.dump_phi, "write (point, phi(rho(point))) pairs as CSV");

  add_common(app.add_subcommand("train", "train the classifier (cross-validation or holdout)"),
             true);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  add_common(eval, true);
  eval->add_option("--checkpoint", opt.checkpoint, "model checkpoint (JSON)")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference audit of all gradients");
  add_common(gradcheck, false);
  gradcheck->add_flag("--corrupt", opt.corrupt,
                      "corrupt analytic gradients (negative control, must fail)");

  add_common(app.add_subcommand("stability", "Lipschitz audit of the representation"), false);
  add_common(app.add_subcommand("baseline", "persistence-histogram baselines"), true);

  CLI11_PARSE(app, argc, argv);
  opt.command = app.get_subcommands().front()->get_name();
  if (!seed_str.empty()) {
    try {
      opt.seed = std::stoull(seed_str);
      opt.seed_set = true;
    } catch (const std::exception&) {
      std::fprintf(stderr, "error: --seed must be an unsigned integer\n");
      return 1;
    }
  }
  return pdball::run_command(opt);
}
