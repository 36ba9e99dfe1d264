#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "phm/biot_savart.hpp"
#include "phm/norms.hpp"
#include "phm/state.hpp"

namespace phm {

/// Exponents tracked by the L^p columns, in column order.
inline constexpr std::array<double, 4> tracked_exponents{1.0, 2.0, 4.0, inf_norm};

/// One row of per-step diagnostics. Column order of the CSV writer follows
/// the declaration order here; see csv_header().
struct DiagnosticsRecord {
  std::size_t step = 0;
  double t = 0.0;
  std::array<double, 4> lp_theta{};  // p = 1, 2, 4, inf
  std::array<double, 4> lp_eta{};
  double lzinf_lh4_grad_theta = 0.0;
  double lzinf_lh4_grad_eta = 0.0;
  double dz_l2_theta = 0.0;
  double dz_l2_eta = 0.0;
  double linf_grad_u = 0.0;
  double div_max = 0.0;
  double slice_mean_max_theta = 0.0;
  double slice_mean_max_eta = 0.0;
  double omega_slice_mean_max = 0.0;  ///< vorticity profile discarded by the Biot-Savart projection
  double energy = 0.0;                ///< ||w||_2^2 + L^2 ||omega||_2^2
  double grad_u_log_ratio = 0.0;      ///< ||grad_h u||_inf over its logarithmic bound, constant 1
  std::array<double, 4> drift_theta{};
  std::array<double, 4> drift_eta{};
  double drift_energy = 0.0;
};

inline std::vector<std::string> csv_header() {
  std::vector<std::string> h{"step", "t"};
  for (const char* v : {"theta", "eta"})
    for (const char* p : {"l1", "l2", "l4", "linf"}) h.push_back(std::string(p) + "_" + v);
  for (const char* c : {"lzinf_lh4_grad_theta", "lzinf_lh4_grad_eta", "dz_l2_theta", "dz_l2_eta", "linf_grad_u",
                        "div_max", "slice_mean_max_theta", "slice_mean_max_eta", "omega_slice_mean_max", "energy",
                        "grad_u_log_ratio"})
    h.emplace_back(c);
  for (const char* v : {"theta", "eta"})
    for (const char* p : {"l1", "l2", "l4", "linf"}) h.push_back(std::string("drift_") + p + "_" + v);
  h.emplace_back("drift_energy");
  return h;
}

inline std::vector<double> csv_values(const DiagnosticsRecord& r) {
  std::vector<double> v{double(r.step), r.t};
  v.insert(v.end(), r.lp_theta.begin(), r.lp_theta.end());
  v.insert(v.end(), r.lp_eta.begin(), r.lp_eta.end());
  v.insert(v.end(), {r.lzinf_lh4_grad_theta, r.lzinf_lh4_grad_eta, r.dz_l2_theta, r.dz_l2_eta, r.linf_grad_u,
                     r.div_max, r.slice_mean_max_theta, r.slice_mean_max_eta, r.omega_slice_mean_max, r.energy,
                     r.grad_u_log_ratio});
  v.insert(v.end(), r.drift_theta.begin(), r.drift_theta.end());
  v.insert(v.end(), r.drift_eta.begin(), r.drift_eta.end());
  v.push_back(r.drift_energy);
  return v;
}

inline double max_abs_profile(const std::vector<double>& p) {
  double m = 0.0;
  for (double v : p) m = std::max(m, std::abs(v));
  return m;
}

/// Norms and identities of one state. Drift fields are left at zero; the
/// ConservationTracker fills them.
inline DiagnosticsRecord compute_diagnostics(const ThetaEtaState& s, const ModelParams& p, std::size_t step = 0,
                                             double t = 0.0) {
  DiagnosticsRecord r;
  r.step = step;
  r.t = t;
  for (std::size_t i = 0; i < tracked_exponents.size(); ++i) {
    r.lp_theta[i] = lp_norm(s.theta, tracked_exponents[i]);
    r.lp_eta[i] = lp_norm(s.eta, tracked_exponents[i]);
  }
  r.lzinf_lh4_grad_theta = lzinf_lh4_grad_norm(s.theta);
  r.lzinf_lh4_grad_eta = lzinf_lh4_grad_norm(s.eta);
  r.dz_l2_theta = lp_norm(z_derivative(s.theta), 2.0);
  r.dz_l2_eta = lp_norm(z_derivative(s.eta), 2.0);

  const auto omega = vorticity_of(s, p);
  const auto vel = velocity_from_vorticity(omega);
  const auto gr = velocity_gradient(vel);
  r.linf_grad_u = linf_velocity_gradient(gr);
  double div = 0.0;
  for (std::size_t n = 0; n < gr.ux.size(); ++n) div = std::max(div, std::abs(gr.ux[n] + gr.vy[n]));
  r.div_max = div;

  r.slice_mean_max_theta = max_abs_profile(horizontal_slice_mean(s.theta));
  r.slice_mean_max_eta = max_abs_profile(horizontal_slice_mean(s.eta));
  r.omega_slice_mean_max = max_abs_profile(horizontal_slice_mean(omega));

  const auto wo = to_w_omega(s, p);
  const double w2 = lp_norm(wo.w, 2.0);
  const double o2 = lp_norm(wo.omega, 2.0);
  r.energy = w2 * w2 + p.L * p.L * o2 * o2;

  const double l2 = r.lp_theta[1] + r.lp_eta[1];
  if (l2 > 0.0) {
    const double grad4 = r.lzinf_lh4_grad_theta + r.lzinf_lh4_grad_eta;
    const double rhs = (r.lp_theta[3] + r.lp_eta[3]) / p.L * std::log(std::exp(2.0) + p.L * p.L * grad4 / l2);
    r.grad_u_log_ratio = rhs > 0.0 ? r.linf_grad_u / rhs : 0.0;
  }
  return r;
}

/// Relative drift of every conserved quantity against the first record seen.
/// A zero reference value switches that entry to absolute drift.
class ConservationTracker {
 public:
  static double drift(double now, double ref) { return ref != 0.0 ? std::abs(now - ref) / ref : std::abs(now); }

  void update(DiagnosticsRecord& r) {
    if (!ref_) {
      ref_ = r;
      linf_theta0_ = r.lp_theta[3];
      linf_eta0_ = r.lp_eta[3];
    }
    for (std::size_t i = 0; i < 4; ++i) {
      r.drift_theta[i] = drift(r.lp_theta[i], ref_->lp_theta[i]);
      r.drift_eta[i] = drift(r.lp_eta[i], ref_->lp_eta[i]);
      max_theta_[i] = std::max(max_theta_[i], r.drift_theta[i]);
      max_eta_[i] = std::max(max_eta_[i], r.drift_eta[i]);
    }
    r.drift_energy = drift(r.energy, ref_->energy);
    max_energy_ = std::max(max_energy_, r.drift_energy);
    const double scale_t = linf_theta0_ > 0.0 ? linf_theta0_ : 1.0;
    const double scale_e = linf_eta0_ > 0.0 ? linf_eta0_ : 1.0;
    overshoot_ = std::max({overshoot_, (r.lp_theta[3] - linf_theta0_) / scale_t, (r.lp_eta[3] - linf_eta0_) / scale_e});
    max_slice_mean_ = std::max({max_slice_mean_, r.slice_mean_max_theta, r.slice_mean_max_eta});
    ++count_;
  }

  /// Drift series of a whole trajectory.
  template <class States>
  std::vector<DiagnosticsRecord> track(const States& states, const ModelParams& p) {
    std::vector<DiagnosticsRecord> out;
    for (std::size_t n = 0; n < states.size(); ++n) {
      auto r = compute_diagnostics(states[n], p, n);
      update(r);
      out.push_back(r);
    }
    return out;
  }

  const std::array<double, 4>& max_drift_theta() const { return max_theta_; }
  const std::array<double, 4>& max_drift_eta() const { return max_eta_; }
  double max_drift_energy() const { return max_energy_; }
  /// max over records of (max|theta(t)| - max|theta0|) / max|theta0|, same for eta.
  double max_linf_overshoot() const { return overshoot_; }
  double max_slice_mean() const { return max_slice_mean_; }
  std::size_t count() const { return count_; }

 private:
  std::optional<DiagnosticsRecord> ref_;
  double linf_theta0_ = 0.0, linf_eta0_ = 0.0;
  std::array<double, 4> max_theta_{}, max_eta_{};
  double max_energy_ = 0.0;
  double overshoot_ = 0.0;
  double max_slice_mean_ = 0.0;
  std::size_t count_ = 0;
};

}  // namespace phm
