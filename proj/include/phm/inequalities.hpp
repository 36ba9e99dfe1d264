#pragma once

// Measured ratios for the functional inequalities of the model analysis.
// Every check is evaluated with the unknown absolute constant set to 1 and
// returns a ratio for recording; none of these assert a bound on its own.

#include <array>
#include <cmath>

#include "phm/biot_savart.hpp"
#include "phm/norms.hpp"
#include "phm/state.hpp"

namespace phm {

/// Finite ladder standing in for sup over q >= 2. Grid L^q norms beyond 64
/// are indistinguishable from the grid max at the resolutions used here.
inline constexpr std::array<double, 11> q_ladder{2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64};

/// ||f||_{H^1_h}^2 = ||f||_2^2 / L + ||grad f||_2^2 (length-weighted Sobolev norm).
inline double slice_h1_norm(const SliceField& f) {
  const auto fx = slice_derivative(f, Axis::x);
  const auto fy = slice_derivative(f, Axis::y);
  const SliceField* grad[] = {&fx, &fy};
  const double l2 = slice_lp_norm(f, 2.0);
  const double g2 = vector_slice_lp_norm(grad, 2.0);
  return std::sqrt(l2 * l2 / f.L() + g2 * g2);
}

/// ||f||_{W^{1,p}} = ||f||_p / L + ||grad f||_p on the periodic slice.
inline double slice_w1p_norm(const SliceField& f, double p) {
  const auto fx = slice_derivative(f, Axis::x);
  const auto fy = slice_derivative(f, Axis::y);
  const SliceField* grad[] = {&fx, &fy};
  return slice_lp_norm(f, p) / f.L() + vector_slice_lp_norm(grad, p);
}

/// ||f||_4 / (||f||_2^{1/2} ||f||_{H^1}^{1/2}); degree-0 homogeneous.
inline double ladyzhenskaya_ratio(const SliceField& f) {
  const double l2 = slice_lp_norm(f, 2.0);
  if (l2 == 0.0) throw UndefinedQuantity("ladyzhenskaya_ratio: zero slice");
  return slice_lp_norm(f, 4.0) / (std::sqrt(l2) * std::sqrt(slice_h1_norm(f)));
}

struct LogInequalitySides {
  double lhs = 0.0;  ///< ||F||_inf
  double rhs = 0.0;  ///< right-hand side with every constant set to 1
  double sup_q = 0.0;
  double ratio() const { return rhs > 0.0 ? lhs / rhs : 0.0; }
};

/// Periodic logarithmic inequality
///   ||F||_inf <= max{1, sup_q ||F||_q / (q^lambda L^{2/q})}
///                * log^lambda(e^2 + L^{delta/(2+delta)} ||F||_{W^{1,2+delta}}),
/// both sides evaluated on the grid.
inline LogInequalitySides log_inequality_ratio(const SliceField& F, double delta, double lambda) {
  if (!(delta > 0.0) || !(lambda > 0.0)) throw std::invalid_argument("log_inequality_ratio: delta and lambda must be positive");
  const double L = F.L();
  LogInequalitySides s;
  s.lhs = slice_lp_norm(F, inf_norm);
  for (double q : q_ladder) s.sup_q = std::max(s.sup_q, slice_lp_norm(F, q) / (std::pow(q, lambda) * std::pow(L, 2.0 / q)));
  const double w = slice_w1p_norm(F, 2.0 + delta);
  const double arg = std::exp(2.0) + std::pow(L, delta / (2.0 + delta)) * w;
  s.rhs = std::max(1.0, s.sup_q) * std::pow(std::log(arg), lambda);
  return s;
}

struct GradULogBound {
  double lhs = 0.0;  ///< ||grad_h u||_inf
  double rhs = 0.0;
  double ratio() const { return rhs > 0.0 ? lhs / rhs : 0.0; }
};

/// ||grad_h u||_inf against
///   (1/L) ||(theta,eta)||_inf log(e^2 + L^2 ||(grad_h theta, grad_h eta)||_{Lz^inf Lh^4} / ||(theta,eta)||_2).
inline GradULogBound grad_u_log_bound(const ThetaEtaState& s, const ModelParams& p) {
  const double l2 = pair_norm(s, 2.0);
  if (l2 == 0.0) throw UndefinedQuantity("grad_u_log_bound_ratio: zero state");
  const auto vel = velocity_from_vorticity(vorticity_of(s, p));
  GradULogBound b;
  b.lhs = linf_velocity_gradient(velocity_gradient(vel));
  const double grad4 = lzinf_lh4_grad_norm(s.theta) + lzinf_lh4_grad_norm(s.eta);
  b.rhs = pair_norm(s, inf_norm) / p.L * std::log(std::exp(2.0) + p.L * p.L * grad4 / l2);
  return b;
}

inline double grad_u_log_bound_ratio(const ThetaEtaState& s, const ModelParams& p) { return grad_u_log_bound(s, p).ratio(); }

}  // namespace phm
