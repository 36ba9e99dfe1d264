#pragma once

// Picard iteration for the transport system: iterate n solves the linear
// system transported by the velocity of iterate n-1. Iterates are kept as
// dealiased Fourier coefficients packed to the retained modes, one block per
// time node, so a full desk-scale trajectory costs a few hundred MB instead of
// several GB.

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "phm/dynamics.hpp"

namespace phm {

/// Positions of the modes kept by the two-thirds rule, in storage order.
class PackedLayout {
 public:
  explicit PackedLayout(const GridSpec& g) : grid_(g) {
    for (int kz = 0; kz < g.nz; ++kz)
      for (int ky = 0; ky < g.ny; ++ky)
        for (int kx = 0; kx < g.nx_half(); ++kx)
          if (dealias_keeps(g, kz, ky, kx)) {
            index_.push_back(std::size_t(kz) * g.ny * g.nx_half() + std::size_t(ky) * g.nx_half() + kx);
            weight_.push_back(kx == 0 ? 1.0 : 2.0);
          }
  }

  const GridSpec& grid() const { return grid_; }
  std::size_t size() const { return index_.size(); }

  void pack(const SpectralField& f, complex* out) const {
    for (std::size_t i = 0; i < index_.size(); ++i) out[i] = f[index_[i]];
  }
  void unpack(const complex* in, SpectralField& f) const {
    f.set_zero();
    for (std::size_t i = 0; i < index_.size(); ++i) f[index_[i]] = in[i];
  }

  /// L^2 norm of a - b by Parseval; agrees with grid quadrature for
  /// band-limited fields.
  double l2_distance(const complex* a, const complex* b) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < index_.size(); ++i) sum += weight_[i] * std::norm(a[i] - b[i]);
    const double L = grid_.L;
    return std::sqrt(sum * L * L * L);
  }
  double l2_norm(const complex* a) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < index_.size(); ++i) sum += weight_[i] * std::norm(a[i]);
    const double L = grid_.L;
    return std::sqrt(sum * L * L * L);
  }

 private:
  GridSpec grid_;
  std::vector<std::size_t> index_;
  std::vector<double> weight_;
};

/// (theta, eta) at every node of a time grid, packed.
class PackedTrajectory {
 public:
  PackedTrajectory(std::shared_ptr<const PackedLayout> layout, const TimeGrid& tg)
      : layout_(std::move(layout)), tg_(tg), m_(layout_->size()),
        theta_((tg.nsteps + 1) * m_), eta_((tg.nsteps + 1) * m_) {}

  const PackedLayout& layout() const { return *layout_; }
  std::shared_ptr<const PackedLayout> layout_ptr() const { return layout_; }
  const TimeGrid& time_grid() const { return tg_; }
  std::size_t nodes() const { return tg_.nsteps + 1; }

  complex* theta(std::size_t k) { return theta_.data() + k * m_; }
  complex* eta(std::size_t k) { return eta_.data() + k * m_; }
  const complex* theta(std::size_t k) const { return theta_.data() + k * m_; }
  const complex* eta(std::size_t k) const { return eta_.data() + k * m_; }

  void store(std::size_t k, const detail::SpectralPair& s) {
    layout_->pack(s.theta, theta(k));
    layout_->pack(s.eta, eta(k));
  }
  detail::SpectralPair load(std::size_t k) const {
    detail::SpectralPair s{SpectralField(layout_->grid()), SpectralField(layout_->grid())};
    layout_->unpack(theta(k), s.theta);
    layout_->unpack(eta(k), s.eta);
    return s;
  }
  ThetaEtaState state(std::size_t k) const { return detail::to_physical(load(k)); }

  /// Physical states at the stored nodes of a stride (0: first and last only).
  Trajectory to_trajectory(std::size_t stride) const {
    Trajectory t{tg_, stride, {}, {}};
    t.nodes = stored_nodes(tg_.nsteps, stride == 0 ? std::max<std::size_t>(tg_.nsteps, 1) : stride);
    for (std::size_t k : t.nodes) t.states.push_back(state(k));
    return t;
  }

 private:
  std::shared_ptr<const PackedLayout> layout_;
  TimeGrid tg_;
  std::size_t m_;
  std::vector<complex> theta_, eta_;
};

/// sup over stored nodes of ||theta_a - theta_b||_2 + ||eta_a - eta_b||_2.
inline double successive_residual(const Trajectory& a, const Trajectory& b) {
  if (!(a.grid == b.grid) || a.nodes != b.nodes) throw GridMismatch("successive_residual: time grids differ");
  double r = 0.0;
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    require_same_grid(a.states[i].grid(), b.states[i].grid(), "successive_residual");
    r = std::max(r, lp_norm(a.states[i].theta - b.states[i].theta, 2.0) + lp_norm(a.states[i].eta - b.states[i].eta, 2.0));
  }
  return r;
}

inline double successive_residual(const PackedTrajectory& a, const PackedTrajectory& b) {
  if (!(a.time_grid() == b.time_grid())) throw GridMismatch("successive_residual: time grids differ");
  require_same_grid(a.layout().grid(), b.layout().grid(), "successive_residual");
  const auto& lay = a.layout();
  double r = 0.0;
  for (std::size_t k = 0; k < a.nodes(); ++k)
    r = std::max(r, lay.l2_distance(a.theta(k), b.theta(k)) + lay.l2_distance(a.eta(k), b.eta(k)));
  return r;
}

enum class TimeInterpolation { linear, cubic };

inline const char* to_string(TimeInterpolation t) { return t == TimeInterpolation::linear ? "linear" : "cubic"; }

struct PicardOptions {
  TimeInterpolation interpolation = TimeInterpolation::linear;
  CflPolicy cfl = CflPolicy::warn;
  bool compare_nonlinear = true;  ///< also run the direct solver and record the distance
};

struct PicardReport {
  std::vector<double> residuals;  ///< d_1, d_2, ...
  double final_residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double tol = 0.0;
  double T = 0.0;
  TimeInterpolation interpolation = TimeInterpolation::linear;
  /// max over iterates and nodes of | ||f^n(t)||_2 / ||f^n(0)||_2 - 1 |, f in {theta, eta}
  double max_l2_drift = 0.0;
  std::optional<double> distance_to_nonlinear;
};

struct PicardResult {
  PackedTrajectory iterate;
  PicardReport report;
  std::optional<PackedTrajectory> nonlinear;
};

namespace detail {

/// Lagrange weights at `x` for the integer abscissae `nodes`.
inline std::vector<double> lagrange_weights(const std::vector<double>& nodes, double x) {
  std::vector<double> w(nodes.size(), 1.0);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = 0; j < nodes.size(); ++j)
      if (i != j) w[i] *= (x - nodes[j]) / (nodes[i] - nodes[j]);
  return w;
}

/// Stencil and weights for the midpoint of [k, k+1] among nodes 0..last.
inline std::pair<std::vector<std::size_t>, std::vector<double>> midpoint_stencil(std::size_t k, std::size_t last,
                                                                               TimeInterpolation mode) {
  std::vector<std::size_t> idx;
  if (mode == TimeInterpolation::linear || last < 3) {
    idx = {k, k + 1};
  } else {
    std::size_t lo = k == 0 ? 0 : k - 1;
    if (lo + 3 > last) lo = last - 3;
    idx = {lo, lo + 1, lo + 2, lo + 3};
  }
  std::vector<double> x(idx.begin(), idx.end());
  return {idx, lagrange_weights(x, double(k) + 0.5)};
}

/// Direct nonlinear solution at every node, packed.
inline PackedTrajectory nonlinear_packed(const ThetaEtaState& init, const ModelParams& p, const TimeGrid& tg,
                                         std::shared_ptr<const PackedLayout> layout, CflPolicy policy) {
  PackedTrajectory out(layout, tg);
  RhsEvaluator eval(init.grid(), p);
  SpectralRk4 rk(init.grid());
  auto state = to_spectral(init);
  out.store(0, state);
  double speed = 0.0;
  bool first = false;
  auto rhs = [&](double, const SpectralPair& s, SpectralPair& d) {
    eval.nonlinear(s, d);
    if (first) speed = eval.max_speed(), first = false;
  };
  for (std::size_t step = 1; step <= tg.nsteps; ++step) {
    first = true;
    rk.step(state, rhs, tg.time(step - 1), tg.dt);
    enforce_cfl(tg.dt, cfl_dt(speed, init.grid(), p, 1.0), policy, step);
    if (!state.is_finite()) throw NumericalAbort("non-finite value at step " + std::to_string(step), step);
    out.store(step, state);
  }
  return out;
}

/// One linear solve transported by the velocity of `prev`.
inline void linear_solve(const PackedTrajectory& prev, PackedTrajectory& next, const ModelParams& p,
                         const PicardOptions& opt) {
  const auto& lay = prev.layout();
  const auto& g = lay.grid();
  const auto& tg = prev.time_grid();
  const std::size_t m = lay.size();
  const double inv2L = 1.0 / (2.0 * p.L);
  RhsEvaluator eval(g, p);
  SpectralRk4 rk(g);
  SpectralField omega_hat(g);
  std::vector<complex> packed(m);

  // loads the frozen velocity from sum_i c_i omega(node_i)
  auto load = [&](const std::vector<std::size_t>& idx, const std::vector<double>& c) {
    std::fill(packed.begin(), packed.end(), complex{});
    for (std::size_t s = 0; s < idx.size(); ++s) {
      const complex* th = prev.theta(idx[s]);
      const complex* et = prev.eta(idx[s]);
      const double w = c[s] * inv2L;
      for (std::size_t i = 0; i < m; ++i) packed[i] += w * (th[i] - et[i]);
    }
    lay.unpack(packed.data(), omega_hat);
    eval.set_velocity_from_vorticity(omega_hat);
  };

  auto state = prev.load(0);
  next.store(0, state);
  const std::size_t last = tg.nsteps;
  for (std::size_t k = 0; k < tg.nsteps; ++k) {
    // stage velocities: node k, interpolated midpoint (shared by stages 2, 3), node k+1
    int stage = 0;
    const auto mid = midpoint_stencil(k, last, opt.interpolation);
    double speed = 0.0;
    auto rhs = [&](double, const SpectralPair& s, SpectralPair& d) {
      if (stage == 0) {
        if (k == 0) load({0}, {1.0});  // otherwise still loaded from the previous step
        speed = eval.max_speed();
      } else if (stage == 1) {
        load(mid.first, mid.second);
      } else if (stage == 3) {
        load({k + 1}, {1.0});
      }
      ++stage;
      eval.tendency(s, d);
    };
    rk.step(state, rhs, tg.time(k), tg.dt);
    enforce_cfl(tg.dt, cfl_dt(speed, g, p, 1.0), opt.cfl, k + 1);
    if (!state.is_finite()) throw NumericalAbort("non-finite value at step " + std::to_string(k + 1), k + 1);
    next.store(k + 1, state);
  }
}

inline double max_l2_drift(const PackedTrajectory& t) {
  const auto& lay = t.layout();
  const double th0 = lay.l2_norm(t.theta(0));
  const double et0 = lay.l2_norm(t.eta(0));
  double d = 0.0;
  for (std::size_t k = 0; k < t.nodes(); ++k) {
    if (th0 > 0.0) d = std::max(d, std::abs(lay.l2_norm(t.theta(k)) / th0 - 1.0));
    if (et0 > 0.0) d = std::max(d, std::abs(lay.l2_norm(t.eta(k)) / et0 - 1.0));
  }
  return d;
}

}  // namespace detail

/// Iterates the linearized solve from the constant-in-time extension of
/// `init` until d_n <= tol or max_iters iterations. Non-convergence is
/// reported, not thrown.
inline PicardResult picard_solve(const ThetaEtaState& init, const ModelParams& p, const TimeGrid& tg,
                                 std::size_t max_iters, double tol, const PicardOptions& opt = {}) {
  check_state(init, p, "picard_solve");
  tg.validate();
  if (max_iters < 1) throw ConfigError("picard: max_iters must be >= 1");
  if (!(tol >= 0.0)) throw ConfigError("picard: tol must be >= 0");
  auto layout = std::make_shared<const PackedLayout>(init.grid());

  PackedTrajectory prev(layout, tg);
  {
    const auto s0 = detail::to_spectral(init);
    for (std::size_t k = 0; k <= tg.nsteps; ++k) prev.store(k, s0);
  }
  PackedTrajectory next(layout, tg);
  PicardReport rep;
  rep.tol = tol;
  rep.T = tg.horizon() - tg.t0;
  rep.interpolation = opt.interpolation;
  for (std::size_t n = 1; n <= max_iters; ++n) {
    detail::linear_solve(prev, next, p, opt);
    const double d = successive_residual(prev, next);
    rep.residuals.push_back(d);
    rep.iterations = n;
    rep.final_residual = d;
    rep.max_l2_drift = std::max(rep.max_l2_drift, detail::max_l2_drift(next));
    std::swap(prev, next);
    if (d <= tol) {
      rep.converged = true;
      break;
    }
  }
  PicardResult out{std::move(prev), rep, std::nullopt};
  if (opt.compare_nonlinear) {
    out.nonlinear = detail::nonlinear_packed(init, p, tg, layout, opt.cfl);
    out.report.distance_to_nonlinear = successive_residual(out.iterate, *out.nonlinear);
  }
  return out;
}

// ----------------------------------------------------------------------------
// Certificates

struct CertificateConstants {
  double C1 = 1.0, C2 = 1.0, C3 = 1.0;
  std::optional<double> C0;  ///< overrides the derived C0 when set

  void validate() const {
    if (!(C1 > 0.0 && C2 > 0.0 && C3 > 0.0) || (C0 && !(*C0 > 0.0)))
      throw ConfigError("constants: C0..C3 must be positive");
  }
  bool operator==(const CertificateConstants&) const = default;
};

struct GrowthCertificate {
  double C0 = 0.0, C1 = 1.0, C2 = 1.0, C3 = 1.0;
  double J0 = 1.0;
  double H0 = 1.0;
  double T = 0.0;
  double linf0 = 0.0;       ///< ||(theta0, eta0)||_inf
  double l2_0 = 0.0;        ///< ||(theta0, eta0)||_2
  double grad0 = 0.0;       ///< ||(grad_h theta0, grad_h eta0)||_{Lz^inf Lh^4}
  /// predicted per-unit-time contraction rate (2 C3 / L^{1/2}) J0 grad0; J0
  /// stands in for the constant left undefined in the contraction bound
  double contraction_rate = 0.0;
  std::optional<double> measured_grad_ratio;  ///< sup_t grad(t) / grad0
  std::optional<double> measured_dz_ratio;    ///< sup_t ||d_z(theta,eta)(t)||_2 / ||d_z(theta0,eta0)||_2
};

inline double pair_grad_norm(const ThetaEtaState& s) { return lzinf_lh4_grad_norm(s.theta) + lzinf_lh4_grad_norm(s.eta); }

inline double pair_dz_norm(const ThetaEtaState& s) {
  return lp_norm(z_derivative(s.theta), 2.0) + lp_norm(z_derivative(s.eta), 2.0);
}

namespace detail {

template <class Next>
void record_growth(GrowthCertificate& g, const ThetaEtaState& init, std::size_t count, Next&& next) {
  const double dz0 = pair_dz_norm(init);
  double gmax = 0.0, dmax = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const ThetaEtaState s = next();
    gmax = std::max(gmax, pair_grad_norm(s));
    dmax = std::max(dmax, pair_dz_norm(s));
  }
  if (g.grad0 > 0.0) g.measured_grad_ratio = gmax / g.grad0;
  if (dz0 > 0.0) g.measured_dz_ratio = dmax / dz0;
}

}  // namespace detail

/// Evaluates C0, J0(T), H0(T) with grid norms; the growth exponent is taken
/// at t = T. When `traj` is given, records the measured growth ratios.
inline GrowthCertificate growth_certificate(const ThetaEtaState& init, const ModelParams& p, double T,
                                            const CertificateConstants& c = {}, const Trajectory* traj = nullptr) {
  check_state(init, p, "growth_certificate");
  c.validate();
  if (!(T >= 0.0) || !std::isfinite(T)) throw ConfigError("growth_certificate: T must be finite and >= 0");
  GrowthCertificate g;
  g.C1 = c.C1, g.C2 = c.C2, g.C3 = c.C3, g.T = T;
  g.linf0 = pair_norm(init, inf_norm);
  g.l2_0 = pair_norm(init, 2.0);
  if (g.l2_0 == 0.0) throw UndefinedQuantity("growth_certificate: zero initial data");
  g.grad0 = pair_grad_norm(init);
  const double L = p.L;
  g.C0 = c.C0 ? *c.C0 : (c.C1 / L) * g.linf0 * std::log(std::exp(2.0) + c.C1 * L * L * g.grad0 / g.l2_0);
  g.J0 = std::exp(g.C0 * T * std::exp((c.C1 / L) * T * g.linf0));
  g.H0 = std::exp((c.C2 / std::sqrt(L)) * g.J0 * T * g.grad0);
  g.contraction_rate = 2.0 * c.C3 / std::sqrt(L) * g.J0 * g.grad0;
  if (traj != nullptr && !traj->states.empty()) {
    std::size_t i = 0;
    detail::record_growth(g, init, traj->states.size(), [&] { return traj->states[i++]; });
  }
  return g;
}

/// Same, measuring the growth ratios on every node of a packed trajectory.
inline GrowthCertificate growth_certificate(const ThetaEtaState& init, const ModelParams& p, double T,
                                            const CertificateConstants& c, const PackedTrajectory& traj) {
  auto g = growth_certificate(init, p, T, c);
  std::size_t k = 0;
  detail::record_growth(g, init, traj.nodes(), [&] { return traj.state(k++); });
  return g;
}

struct ContractionProfile {
  std::vector<double> ratios;  ///< d_{n+1} / d_n, n = 1, 2, ...
  bool truncated = false;      ///< some d_n vanished; ratios stop before it
  std::size_t decreasing_from = 0;  ///< first index from which ratios strictly decrease
  bool eventually_decreasing = false;
  double fitted_c = 0.0;  ///< least-squares c in ratio_n ~ c T / (n + 1)
  std::optional<double> predicted_c;
};

inline ContractionProfile contraction_profile(const std::vector<double>& residuals, double T,
                                              std::optional<double> predicted = std::nullopt) {
  if (residuals.size() < 3) throw std::invalid_argument("contraction_profile: need at least 3 residuals");
  ContractionProfile cp;
  cp.predicted_c = predicted;
  for (std::size_t i = 0; i + 1 < residuals.size(); ++i) {
    if (residuals[i] == 0.0) {
      cp.truncated = true;
      break;
    }
    cp.ratios.push_back(residuals[i + 1] / residuals[i]);
  }
  if (cp.ratios.empty()) return cp;
  std::size_t from = cp.ratios.size() - 1;
  while (from > 0 && cp.ratios[from - 1] > cp.ratios[from]) --from;
  cp.decreasing_from = from;
  cp.eventually_decreasing = cp.ratios.size() >= 2 && from + 2 <= cp.ratios.size();
  if (T > 0.0) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < cp.ratios.size(); ++i) {
      const double x = T / double(i + 2);  // ratio index i is n = i + 1
      num += cp.ratios[i] * x;
      den += x * x;
    }
    cp.fitted_c = num / den;
  }
  return cp;
}

inline ContractionProfile contraction_profile(const PicardReport& r, const ModelParams& p, const ThetaEtaState& init,
                                              const CertificateConstants& c = {}) {
  std::optional<double> predicted;
  if (pair_norm(init, 2.0) > 0.0) predicted = growth_certificate(init, p, r.T, c).contraction_rate;
  return contraction_profile(r.residuals, r.T, predicted);
}

}  // namespace phm
