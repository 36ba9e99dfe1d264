// phm: simulate, picard, verify and mollify subcommands.
//
// Exit codes: 0 ok, 1 unexpected failure, 2 config error, 3 numerical abort,
// 4 Picard non-convergence, 5 verification property failure.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "phm/commands.hpp"
#include "phm/verify.hpp"

int main(int argc, char** argv) {
  using namespace phm;
  CLI::App app{"Pseudo-spectral solver and certification suite for the 3D pseudo-Hasegawa-Mima transport model"};
  app.require_subcommand(1);
  app.footer("Set PHM_NUM_THREADS to the number of FFT threads (default 1).");

  std::string config_path;
  auto* sim = app.add_subcommand("simulate", "advance the configured initial state");
  sim->add_option("config", config_path, "INI run configuration")->required();

  auto* pic = app.add_subcommand("picard", "run the Picard iteration over [0, t_end]");
  pic->add_option("config", config_path, "INI run configuration")->required();

  verify::VerifyOptions vopt;
  auto* ver = app.add_subcommand("verify", "run the acceptance property suite");
  ver->add_option("config", config_path, "optional config overriding grid, model, dt, t_end, seed and picard settings");
  ver->add_option("--only", vopt.only, "criterion keys or ids to run")->delimiter(',');
  ver->add_option("--json", vopt.json_path, "write a machine-readable report");
  ver->add_flag("--all-checks", vopt.all_checks, "print passing checks too");
  ver->add_option("--mutate-dealias", vopt.mutate_dealias, "test hook: corrupt dealiasing by this factor")->group("");

  std::string in_path, out_path;
  double epsilon = 0.0;
  auto* mol = app.add_subcommand("mollify", "mollify a field snapshot");
  mol->add_option("in", in_path, "input snapshot")->required();
  mol->add_option("out", out_path, "output snapshot")->required();
  mol->add_option("--epsilon", epsilon, "smoothing length in (0, L/4]")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::exit_config;
  }

  try {
    if (*sim) return cli::run_simulate(load_config(config_path));
    if (*pic) return cli::run_picard(load_config(config_path));
    if (*ver) {
      verify::VerifySettings s;
      if (!config_path.empty()) {
        const auto c = load_config(config_path);
        c.validate();
        s = verify::settings_from_config(c);
      }
      return verify::run_verify(s, vopt, std::cout);
    }
    if (*mol) return cli::run_mollify(in_path, out_path, epsilon);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_code_for(e);
  }
  return cli::exit_failure;
}
