#pragma once

// Command drivers behind the CLI. Each returns a process exit code; config
// and numerical failures are reported through exceptions that the CLI maps
// with exit_code_for().

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>

#include "json.hpp"

#include "phm/config.hpp"
#include "phm/dynamics.hpp"
#include "phm/io.hpp"
#include "phm/picard.hpp"
#include "phm/snapshot.hpp"

namespace phm::cli {

enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,
  exit_config = 2,
  exit_numerical = 3,
  exit_nonconvergence = 4,
  exit_property = 5,
};

/// Exit code for an exception escaping a command.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const SnapshotError*>(&e) ||
      dynamic_cast<const GridMismatch*>(&e))
    return exit_config;
  if (dynamic_cast<const NumericalAbort*>(&e)) return exit_numerical;
  return exit_failure;
}

inline std::filesystem::path prepare_output_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec || !std::filesystem::is_directory(p))
    throw ConfigError("[output] directory: cannot create '" + dir + "'" + (ec ? ": " + ec.message() : ""));
  const auto probe = p / ".phm_write_probe";
  {
    std::ofstream t(probe);
    if (!t) throw ConfigError("[output] directory: '" + dir + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
  return p;
}

inline std::string snapshot_name(std::size_t step, const char* var) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "snap_%06zu_%s.bin", step, var);
  return buf;
}

inline void write_state_snapshots(const std::filesystem::path& dir, std::size_t step, double t, const ThetaEtaState& s,
                                  const ModelParams& p) {
  SnapshotHeader h;
  h.model = p;
  h.time = t;
  h.variable = "theta";
  write_snapshot(dir / snapshot_name(step, "theta"), s.theta, h);
  h.variable = "eta";
  write_snapshot(dir / snapshot_name(step, "eta"), s.eta, h);
}

inline nlohmann::ordered_json drift_json(const ConservationTracker& tr) {
  nlohmann::ordered_json d;
  const char* names[] = {"l1", "l2", "l4", "linf"};
  for (int i = 0; i < 4; ++i) d[std::string(names[i]) + "_theta"] = tr.max_drift_theta()[i];
  for (int i = 0; i < 4; ++i) d[std::string(names[i]) + "_eta"] = tr.max_drift_eta()[i];
  d["energy"] = tr.max_drift_energy();
  return d;
}

/// Advances the configured initial state, writing diagnostics.csv (rows every
/// output_stride steps plus the final step), snapshots every snapshot_stride
/// steps (0: initial and final only) and summary.json.
inline int run_simulate(const RunConfig& c, std::ostream& log = std::cerr) {
  c.validate();
  const auto dir = prepare_output_dir(c.output.directory);
  const auto init = c.initial_state();
  const auto tg = c.time_grid(init);
  const auto start = std::chrono::steady_clock::now();

  CsvWriter csv(dir / "diagnostics.csv");
  ConservationTracker tracker;
  double max_ratio = 0.0, max_grad_u = 0.0, max_div = 0.0, max_omega_mean = 0.0;
  const std::size_t out_stride = c.time.output_stride;
  const std::size_t snap_stride = c.output.snapshot_stride;
  StepHook hook = [&](std::size_t step, double t, const ThetaEtaState& s, const DiagnosticsRecord& rec) {
    DiagnosticsRecord r = rec;
    tracker.update(r);
    max_ratio = std::max(max_ratio, r.grad_u_log_ratio);
    max_grad_u = std::max(max_grad_u, r.linf_grad_u);
    max_div = std::max(max_div, r.div_max);
    max_omega_mean = std::max(max_omega_mean, r.omega_slice_mean_max);
    if (step % out_stride == 0 || step == tg.nsteps) csv.write(r);
    const bool snap = snap_stride == 0 ? (step == 0 || step == tg.nsteps) : (step % snap_stride == 0 || step == tg.nsteps);
    if (snap) write_state_snapshots(dir, step, t, s, c.model);
  };
  AdvanceOptions opt;
  opt.cfl = c.time.cfl_policy;
  opt.store_states = false;
  opt.hook_stride = snap_stride == 0 ? out_stride : std::gcd(out_stride, snap_stride);

  nlohmann::ordered_json summary;
  summary["command"] = "simulate";
  summary["config"] = to_ini(c);
  summary["dt"] = tg.dt;
  summary["steps"] = tg.nsteps;
  summary["t_end"] = tg.horizon();
  int code = exit_ok;
  try {
    advance(init, c.model, tg, std::span<const StepHook>(&hook, 1), opt);
    summary["status"] = "ok";
  } catch (const NumericalAbort& e) {
    summary["status"] = "numerical_abort";
    summary["error"] = e.what();
    summary["failed_step"] = e.step();
    log << "error: " << e.what() << '\n';
    code = exit_numerical;
  }
  csv.flush();
  summary["max_drift"] = drift_json(tracker);
  summary["max_linf_overshoot"] = tracker.max_linf_overshoot();
  summary["max_slice_mean"] = tracker.max_slice_mean();
  summary["max_omega_slice_mean"] = max_omega_mean;
  summary["max_div"] = max_div;
  summary["max_ratios"] = {{"grad_u_log_bound", max_ratio}};
  summary["max_linf_grad_u"] = max_grad_u;
  summary["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(dir / "summary.json", summary);
  return code;
}

inline nlohmann::ordered_json certificate_json(const GrowthCertificate& g) {
  nlohmann::ordered_json j;
  j["C0"] = g.C0;
  j["C1"] = g.C1;
  j["C2"] = g.C2;
  j["C3"] = g.C3;
  j["T"] = g.T;
  j["J0"] = json_number(g.J0);
  j["H0"] = json_number(g.H0);
  j["linf0"] = g.linf0;
  j["l2_0"] = g.l2_0;
  j["grad0"] = g.grad0;
  j["contraction_rate"] = json_number(g.contraction_rate);
  j["measured_grad_ratio"] = g.measured_grad_ratio ? json_number(*g.measured_grad_ratio) : nullptr;
  j["measured_dz_ratio"] = g.measured_dz_ratio ? json_number(*g.measured_dz_ratio) : nullptr;
  return j;
}

inline nlohmann::ordered_json picard_report_json(const PicardReport& r) {
  nlohmann::ordered_json j;
  j["residuals"] = r.residuals;
  j["final_residual"] = r.final_residual;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["tol"] = r.tol;
  j["T"] = r.T;
  j["interpolation"] = to_string(r.interpolation);
  j["max_l2_drift"] = r.max_l2_drift;
  j["distance_to_nonlinear"] = r.distance_to_nonlinear ? nlohmann::ordered_json(*r.distance_to_nonlinear) : nullptr;
  return j;
}

/// Picard iteration over [0, t_end]; writes picard_report.json and the final
/// iterate's snapshots. Returns exit_nonconvergence when tol is not reached.
inline int run_picard(const RunConfig& c, std::ostream& log = std::cerr) {
  c.validate();
  if (!c.picard) throw ConfigError("[picard]: section required for the picard command");
  const auto dir = prepare_output_dir(c.output.directory);
  const auto init = c.initial_state();
  const auto tg = c.time_grid(init);
  const auto start = std::chrono::steady_clock::now();

  PicardOptions opt;
  opt.interpolation = c.picard->interpolation;
  opt.cfl = c.time.cfl_policy;
  auto res = picard_solve(init, c.model, tg, c.picard->max_iters, c.picard->tol, opt);

  nlohmann::ordered_json j;
  j["command"] = "picard";
  j["config"] = to_ini(c);
  j["report"] = picard_report_json(res.report);
  if (res.report.residuals.size() >= 3) {
    std::optional<double> predicted;
    try {
      predicted = growth_certificate(init, c.model, res.report.T, c.constants).contraction_rate;
    } catch (const UndefinedQuantity&) {
    }
    const auto cp = contraction_profile(res.report.residuals, res.report.T, predicted);
    j["contraction"] = {{"ratios", cp.ratios},
                        {"truncated", cp.truncated},
                        {"decreasing_from", cp.decreasing_from},
                        {"eventually_decreasing", cp.eventually_decreasing},
                        {"fitted_c", cp.fitted_c},
                        {"predicted_c", cp.predicted_c ? json_number(*cp.predicted_c) : nullptr}};
  } else {
    j["contraction"] = nullptr;
  }
  try {
    j["certificate"] = certificate_json(growth_certificate(init, c.model, res.report.T, c.constants, res.iterate));
  } catch (const UndefinedQuantity& e) {
    j["certificate"] = nullptr;
    j["certificate_note"] = e.what();
  }
  j["notes"] = {"predicted contraction rate uses J0(T) in place of the undefined constant of the contraction bound",
                "J0(T) evaluates the inner growth exponent at t = T"};
  j["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(dir / "picard_report.json", j);
  write_state_snapshots(dir, tg.nsteps, tg.horizon(), res.iterate.state(tg.nsteps), c.model);

  log << "picard: " << res.report.iterations << " iterations, final residual " << res.report.final_residual
      << (res.report.converged ? " (converged)" : " (not converged)") << '\n';
  return res.report.converged ? exit_ok : exit_nonconvergence;
}

/// Mollifies a snapshot; the header is carried over unchanged.
inline int run_mollify(const std::string& in, const std::string& out, double epsilon) {
  auto snap = read_snapshot(in);
  Mollifier m(epsilon);
  m.validate(snap.header.grid.L);
  write_snapshot(out, mollify(snap.field, m), snap.header);
  return exit_ok;
}

}  // namespace phm::cli
