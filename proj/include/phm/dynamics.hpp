#pragma once

// Pseudo-spectral evaluation of the transport system
//   d_t theta + (u . grad_h) theta - U0 d_z theta = 0,
//   d_t eta   + (u . grad_h) eta   + U0 d_z eta   = 0,
// with u recovered slice-wise from omega = (theta - eta) / (2L), plus its
// linearization about a frozen velocity, classical RK4 stepping and exact
// reference propagators.
//
// The time integrator keeps the state as dealiased Fourier coefficients;
// products are formed in physical space from dealiased factors and the
// result is dealiased again.

#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "phm/biot_savart.hpp"
#include "phm/diagnostics.hpp"
#include "phm/spectral.hpp"
#include "phm/state.hpp"

namespace phm {

struct TimeGrid {
  double t0 = 0.0;
  double dt = 0.0;
  std::size_t nsteps = 0;

  double time(std::size_t k) const { return t0 + double(k) * dt; }
  double horizon() const { return time(nsteps); }

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time: dt must be positive");
  }
  bool operator==(const TimeGrid&) const = default;
};

struct Tendency {
  ScalarField dtheta_dt;
  ScalarField deta_dt;
};

inline void add_scaled(ThetaEtaState& s, double a, const Tendency& d) {
  s.theta.axpy(a, d.dtheta_dt);
  s.eta.axpy(a, d.deta_dt);
}

/// Classical fourth-order Runge-Kutta step for any state type S whose
/// derivative type D supports add_scaled(S&, double, const D&) (found by ADL).
/// `rhs(t, s)` returns the derivative.
template <class S, class Rhs>
S rk4_step(const S& s, Rhs&& rhs, double t, double dt) {
  const auto k1 = rhs(t, s);
  S stage = s;
  add_scaled(stage, 0.5 * dt, k1);
  const auto k2 = rhs(t + 0.5 * dt, stage);
  stage = s;
  add_scaled(stage, 0.5 * dt, k2);
  const auto k3 = rhs(t + 0.5 * dt, stage);
  stage = s;
  add_scaled(stage, dt, k3);
  const auto k4 = rhs(t + dt, stage);
  S out = s;
  add_scaled(out, dt / 6.0, k1);
  add_scaled(out, dt / 3.0, k2);
  add_scaled(out, dt / 3.0, k3);
  add_scaled(out, dt / 6.0, k4);
  return out;
}

namespace detail {

struct SpectralPair {
  SpectralField theta;
  SpectralField eta;

  const GridSpec& grid() const { return theta.grid(); }
  bool is_finite() const { return theta.is_finite() && eta.is_finite(); }
};

inline void add_scaled(SpectralPair& s, double a, const SpectralPair& d) {
  s.theta.axpy(a, d.theta);
  s.eta.axpy(a, d.eta);
}

inline SpectralPair to_spectral(const ThetaEtaState& s) {
  return {dealias_23(transform_forward(s.theta)), dealias_23(transform_forward(s.eta))};
}

inline ThetaEtaState to_physical(const SpectralPair& s) {
  return {transform_inverse(s.theta), transform_inverse(s.eta)};
}

/// omega_hat = (theta_hat - eta_hat) / (2L).
inline SpectralField spectral_vorticity(const SpectralPair& s, double L) {
  SpectralField w = s.theta - s.eta;
  w *= 1.0 / (2.0 * L);
  return w;
}

/// Right-hand-side evaluator owning its scratch buffers. Not thread-safe;
/// use one instance per driver.
class RhsEvaluator {
 public:
  RhsEvaluator(const GridSpec& g, const ModelParams& p)
      : g_(g), p_(p), u_(g), v_(g), fx_(g), fy_(g), prod_(g), u_hat_(g), v_hat_(g), tmp_(g), scratch_(g), omega_hat_(g) {}

  const GridSpec& grid() const { return g_; }
  const ModelParams& params() const { return p_; }

  /// Loads the frozen velocity from vorticity coefficients.
  void set_velocity_from_vorticity(const SpectralField& omega_hat) {
    velocity_spectral(omega_hat, u_hat_, v_hat_);
    transform_inverse(u_hat_, u_, scratch_);
    transform_inverse(v_hat_, v_, scratch_);
  }

  /// Loads the frozen velocity from dealiased velocity coefficients.
  void set_velocity(const SpectralField& u_hat, const SpectralField& v_hat) {
    transform_inverse(u_hat, u_, scratch_);
    transform_inverse(v_hat, v_, scratch_);
  }

  double max_speed() const { return std::max(u_.max_abs(), v_.max_abs()); }

  /// Tendency for the currently loaded velocity.
  void tendency(const SpectralPair& s, SpectralPair& out) {
    advect(s.theta, out.theta, +p_.U0);
    advect(s.eta, out.eta, -p_.U0);
  }
  SpectralPair tendency(const SpectralPair& s) {
    SpectralPair out{SpectralField(g_), SpectralField(g_)};
    tendency(s, out);
    return out;
  }

  /// Self-consistent tendency: velocity recomputed from the state.
  void nonlinear(const SpectralPair& s, SpectralPair& out) {
    load_vorticity(s);
    set_velocity_from_vorticity(omega_hat_);
    tendency(s, out);
  }
  SpectralPair nonlinear(const SpectralPair& s) {
    SpectralPair out{SpectralField(g_), SpectralField(g_)};
    nonlinear(s, out);
    return out;
  }

 private:
  void load_vorticity(const SpectralPair& s) {
    const double inv2L = 1.0 / (2.0 * p_.L);
    for (std::size_t n = 0; n < omega_hat_.size(); ++n) omega_hat_[n] = (s.theta[n] - s.eta[n]) * inv2L;
  }

  // out = -dealias(FFT(u f_x + v f_y)) + sign_u0 * i k_z f_hat
  void advect(const SpectralField& f, SpectralField& out, double vertical_speed) {
    spectral_derivative(f, Axis::x, tmp_);
    transform_inverse(tmp_, fx_, scratch_);
    spectral_derivative(f, Axis::y, tmp_);
    transform_inverse(tmp_, fy_, scratch_);
    for (std::size_t n = 0; n < prod_.size(); ++n) prod_[n] = u_[n] * fx_[n] + v_[n] * fy_[n];
    transform_forward(prod_, out);
    dealias_23_inplace(out);
    for (int kz = 0; kz < g_.nz; ++kz) {
      const complex ikz = 2 * kz == g_.nz ? complex{} : complex(0.0, wavenumber(mode_number(kz, g_.nz), g_.L));
      const complex c = vertical_speed * ikz;
      for (int ky = 0; ky < g_.ny; ++ky) {
        const std::size_t base = out.index(kz, ky, 0);
        for (int kx = 0; kx < g_.nx_half(); ++kx) out[base + kx] = -out[base + kx] + c * f[base + kx];
      }
    }
  }

  GridSpec g_;
  ModelParams p_;
  ScalarField u_, v_, fx_, fy_, prod_;
  SpectralField u_hat_, v_hat_, tmp_, scratch_, omega_hat_;
};

/// Allocation-free RK4 on spectral pairs. `rhs(t, s, out)` writes the
/// derivative of s into out. Same stage arithmetic as rk4_step.
class SpectralRk4 {
 public:
  explicit SpectralRk4(const GridSpec& g)
      : k1_(zeros(g)), k2_(zeros(g)), k3_(zeros(g)), k4_(zeros(g)), stage_(zeros(g)) {}

  template <class Rhs>
  void step(SpectralPair& s, Rhs&& rhs, double t, double dt) {
    rhs(t, s, k1_);
    set_stage(s, 0.5 * dt, k1_);
    rhs(t + 0.5 * dt, stage_, k2_);
    set_stage(s, 0.5 * dt, k2_);
    rhs(t + 0.5 * dt, stage_, k3_);
    set_stage(s, dt, k3_);
    rhs(t + dt, stage_, k4_);
    add_scaled(s, dt / 6.0, k1_);
    add_scaled(s, dt / 3.0, k2_);
    add_scaled(s, dt / 3.0, k3_);
    add_scaled(s, dt / 6.0, k4_);
  }

 private:
  static SpectralPair zeros(const GridSpec& g) { return {SpectralField(g), SpectralField(g)}; }
  void set_stage(const SpectralPair& s, double a, const SpectralPair& k) {
    for (std::size_t n = 0; n < s.theta.size(); ++n) {
      stage_.theta[n] = s.theta[n] + a * k.theta[n];
      stage_.eta[n] = s.eta[n] + a * k.eta[n];
    }
  }
  SpectralPair k1_, k2_, k3_, k4_, stage_;
};

inline Tendency to_tendency(const SpectralPair& d) { return {transform_inverse(d.theta), transform_inverse(d.eta)}; }

}  // namespace detail

inline void check_state(const ThetaEtaState& s, const ModelParams& p, const char* where) {
  require_same_grid(s.theta.grid(), s.eta.grid(), where);
  p.validate(&s.theta.grid());
}

/// Self-consistent tendency of the nonlinear system.
inline Tendency nonlinear_rhs(const ThetaEtaState& s, const ModelParams& p) {
  check_state(s, p, "nonlinear_rhs");
  detail::RhsEvaluator eval(s.grid(), p);
  return detail::to_tendency(eval.nonlinear(detail::to_spectral(s)));
}

/// Tendency of the linearized system transported by a supplied velocity.
inline Tendency linearized_rhs(const ThetaEtaState& s, const VelocityField& frozen, const ModelParams& p) {
  check_state(s, p, "linearized_rhs");
  require_same_grid(s.grid(), frozen.u.grid(), "linearized_rhs");
  require_same_grid(s.grid(), frozen.v.grid(), "linearized_rhs");
  detail::RhsEvaluator eval(s.grid(), p);
  eval.set_velocity(dealias_23(transform_forward(frozen.u)), dealias_23(transform_forward(frozen.v)));
  return detail::to_tendency(eval.tendency(detail::to_spectral(s)));
}

/// Exact z-translation f(z) -> f(z + delta) by a spectral phase shift. A
/// Nyquist mode in z only keeps its grid-visible cosine part.
inline ScalarField vertical_shift_exact(const ScalarField& f, double delta) {
  const auto& g = f.grid();
  auto c = transform_forward(f);
  for (int kz = 0; kz < g.nz; ++kz) {
    const double phase = wavenumber(mode_number(kz, g.nz), g.L) * delta;
    const complex factor = 2 * kz == g.nz ? complex(std::cos(phase), 0.0) : std::polar(1.0, phase);
    for (int ky = 0; ky < g.ny; ++ky)
      for (int kx = 0; kx < g.nx_half(); ++kx) c(kz, ky, kx) *= factor;
  }
  return transform_inverse(c);
}

/// Largest stable explicit step:
///   safety * min(min(dx,dy) / max(|u|,|v|), dz / U0),
/// or +infinity when both the horizontal flow and U0 vanish.
inline double cfl_dt(double max_speed, const GridSpec& g, const ModelParams& p, double safety) {
  if (!(safety > 0.0 && safety <= 1.0)) throw ConfigError("cfl_dt: safety must lie in (0, 1]");
  constexpr double tiny = 1e-30;
  if (max_speed <= tiny && p.U0 <= tiny) return std::numeric_limits<double>::infinity();
  const double h = std::min(g.dx(), g.dy()) / std::max(max_speed, tiny);
  const double v = g.dz() / std::max(p.U0, tiny);
  return safety * std::min(h, v);
}

inline double cfl_dt(const ThetaEtaState& s, const ModelParams& p, double safety) {
  const auto vel = velocity_from_vorticity(vorticity_of(s, p));
  return cfl_dt(std::max(vel.u.max_abs(), vel.v.max_abs()), s.grid(), p, safety);
}

enum class CflPolicy { warn, error };

namespace detail {

inline void enforce_cfl(double dt, double bound, CflPolicy policy, std::size_t step) {
  if (dt <= bound) return;
  const std::string msg = "CFL violated at step " + std::to_string(step) + ": dt = " + std::to_string(dt) +
                          " exceeds bound " + std::to_string(bound);
  if (policy == CflPolicy::error) throw NumericalAbort(msg, step);
  std::cerr << "warning: " << msg << '\n';
}

}  // namespace detail

using RhsProvider = std::function<Tendency(double, const ThetaEtaState&)>;

inline RhsProvider nonlinear_provider(const ModelParams& p) {
  return [p](double, const ThetaEtaState& s) { return nonlinear_rhs(s, p); };
}

/// One RK4 step of the physical-space state, checking the CFL bound of `s`
/// first.
inline ThetaEtaState rk4_step(const ThetaEtaState& s, const ModelParams& p, const RhsProvider& rhs, double t, double dt,
                              CflPolicy policy = CflPolicy::warn) {
  detail::enforce_cfl(dt, cfl_dt(s, p, 1.0), policy, 0);
  return rk4_step(s, rhs, t, dt);
}

/// States stored at a subset of the time-grid nodes.
struct Trajectory {
  TimeGrid grid;
  std::size_t stride = 1;
  std::vector<std::size_t> nodes;
  std::vector<ThetaEtaState> states;

  std::size_t size() const { return states.size(); }
  double time(std::size_t i) const { return grid.time(nodes[i]); }
};

/// Stored nodes for a stride: every stride-th node plus the final node.
inline std::vector<std::size_t> stored_nodes(std::size_t nsteps, std::size_t stride) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k <= nsteps; k += stride) out.push_back(k);
  if (out.back() != nsteps) out.push_back(nsteps);
  return out;
}

using StepHook = std::function<void(std::size_t step, double t, const ThetaEtaState&, const DiagnosticsRecord&)>;

struct AdvanceOptions {
  std::size_t stride = 1;  ///< 0 stores only the initial and final states
  CflPolicy cfl = CflPolicy::warn;
  bool store_states = true;
  std::size_t hook_stride = 1;  ///< hooks run at multiples of this and at the final node
};

/// nsteps RK4 steps of the nonlinear system. Hooks run sequentially at node 0,
/// every hook_stride-th node and the final node, with the diagnostics of that
/// node; drifts are measured against node 0. The initial state is projected onto the dealiased
/// modes before stepping; node 0 is stored as given.
inline Trajectory advance(const ThetaEtaState& s0, const ModelParams& p, const TimeGrid& tg,
                          std::span<const StepHook> hooks = {}, const AdvanceOptions& opt = {}) {
  check_state(s0, p, "advance");
  tg.validate();
  Trajectory traj{tg, opt.stride, {}, {}};
  const auto nodes = stored_nodes(tg.nsteps, opt.stride == 0 ? std::max<std::size_t>(tg.nsteps, 1) : opt.stride);
  std::size_t next_node = 0;
  ConservationTracker tracker;
  const std::size_t hook_stride = std::max<std::size_t>(opt.hook_stride, 1);

  auto visit = [&](std::size_t step, const ThetaEtaState& s) {
    if (opt.store_states && next_node < nodes.size() && nodes[next_node] == step) {
      traj.nodes.push_back(step);
      traj.states.push_back(s);
      ++next_node;
    }
    if (!hooks.empty() && (step % hook_stride == 0 || step == tg.nsteps)) {
      auto rec = compute_diagnostics(s, p, step, tg.time(step));
      tracker.update(rec);
      for (const auto& h : hooks) h(step, tg.time(step), s, rec);
    }
  };

  visit(0, s0);
  detail::RhsEvaluator eval(s0.grid(), p);
  detail::SpectralRk4 rk(s0.grid());
  double stage1_speed = 0.0;
  bool first_stage = false;
  auto rhs = [&](double, const detail::SpectralPair& s, detail::SpectralPair& out) {
    eval.nonlinear(s, out);
    if (first_stage) {
      stage1_speed = eval.max_speed();
      first_stage = false;
    }
  };
  auto state = detail::to_spectral(s0);
  const bool need_physical = opt.store_states || !hooks.empty();
  for (std::size_t step = 1; step <= tg.nsteps; ++step) {
    first_stage = true;
    rk.step(state, rhs, tg.time(step - 1), tg.dt);
    // the bound is evaluated on the velocity at the start of the step
    detail::enforce_cfl(tg.dt, cfl_dt(stage1_speed, s0.grid(), p, 1.0), opt.cfl, step);
    if (!state.is_finite())
      throw NumericalAbort("non-finite value produced at step " + std::to_string(step) + " (t = " +
                               std::to_string(tg.time(step)) + ")",
                           step);
    const bool stored = opt.store_states && next_node < nodes.size() && nodes[next_node] == step;
    const bool hooked = !hooks.empty() && (step % hook_stride == 0 || step == tg.nsteps);
    if (need_physical && (stored || hooked)) visit(step, detail::to_physical(state));
  }
  return traj;
}

}  // namespace phm
