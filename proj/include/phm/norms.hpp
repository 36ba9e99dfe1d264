#pragma once

// Grid-quadrature Lebesgue norms. Integrals are collocation sums times the
// cell volume (or cell area for slice norms); p = infinity is the grid max.
// Every reduction runs in a fixed sequential order so results are bitwise
// reproducible.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "phm/grid.hpp"
#include "phm/spectral.hpp"

namespace phm {

inline constexpr double inf_norm = std::numeric_limits<double>::infinity();

namespace detail {

inline void check_exponent(double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("Lp norm: exponent must be >= 1");
}

/// (sum |v|^p * weight)^(1/p) of a magnitude stream.
template <class Mag>
double quadrature_norm(std::size_t n, Mag&& mag, double weight, double p) {
  check_exponent(p);
  if (std::isinf(p)) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, mag(i));
    return m;
  }
  double sum = 0.0;
  if (p == 1.0)
    for (std::size_t i = 0; i < n; ++i) sum += mag(i);
  else if (p == 2.0)
    for (std::size_t i = 0; i < n; ++i) {
      const double a = mag(i);
      sum += a * a;
    }
  else if (p == 4.0)
    for (std::size_t i = 0; i < n; ++i) {
      const double a = mag(i);
      sum += (a * a) * (a * a);
    }
  else
    for (std::size_t i = 0; i < n; ++i) sum += std::pow(mag(i), p);
  sum *= weight;
  if (p == 1.0) return sum;
  if (p == 2.0) return std::sqrt(sum);
  return std::pow(sum, 1.0 / p);
}

}  // namespace detail

/// ||f||_{L^p(T^3)} by collocation quadrature.
inline double lp_norm(const ScalarField& f, double p) {
  const double* v = f.data();
  return detail::quadrature_norm(
      f.size(), [v](std::size_t i) { return std::abs(v[i]); }, f.grid().cell_volume(), p);
}

/// ||f(z_k)||_{L^p_h} of one slice of a 3D field.
inline double slice_lp_norm(const ScalarField& f, int k, double p) {
  const auto& g = f.grid();
  const double* v = f.data() + std::size_t(k) * g.slice_size();
  return detail::quadrature_norm(
      g.slice_size(), [v](std::size_t i) { return std::abs(v[i]); }, g.cell_area(), p);
}

inline double slice_lp_norm(const SliceField& f, double p) {
  const double* v = f.data();
  return detail::quadrature_norm(
      f.size(), [v](std::size_t i) { return std::abs(v[i]); }, f.cell_area(), p);
}

/// Norm of the pointwise Euclidean magnitude of a vector of components.
inline double vector_lp_norm(std::span<const ScalarField* const> comps, double p) {
  const auto& g = comps.front()->grid();
  for (auto* c : comps) require_same_grid(g, c->grid(), "vector_lp_norm");
  return detail::quadrature_norm(
      g.size(),
      [comps](std::size_t i) {
        double s = 0.0;
        for (auto* c : comps) s += (*c)[i] * (*c)[i];
        return std::sqrt(s);
      },
      g.cell_volume(), p);
}

inline double vector_slice_lp_norm(std::span<const ScalarField* const> comps, int k, double p) {
  const auto& g = comps.front()->grid();
  const std::size_t off = std::size_t(k) * g.slice_size();
  return detail::quadrature_norm(
      g.slice_size(),
      [comps, off](std::size_t i) {
        double s = 0.0;
        for (auto* c : comps) s += (*c)[off + i] * (*c)[off + i];
        return std::sqrt(s);
      },
      g.cell_area(), p);
}

inline double vector_slice_lp_norm(std::span<const SliceField* const> comps, double p) {
  const auto& f0 = *comps.front();
  return detail::quadrature_norm(
      f0.size(),
      [comps](std::size_t i) {
        double s = 0.0;
        for (auto* c : comps) s += c->values()[i] * c->values()[i];
        return std::sqrt(s);
      },
      f0.cell_area(), p);
}

/// ||f||_{L_z^inf(L_h^4)}: the largest slice L^4_h norm.
inline double lzinf_lh4_norm(const ScalarField& f) {
  double m = 0.0;
  for (int k = 0; k < f.grid().nz; ++k) m = std::max(m, slice_lp_norm(f, k, 4.0));
  return m;
}

/// L_z^inf(L_h^4) norm of the magnitude of a vector field (e.g. grad_h f).
inline double lzinf_lh4_norm(std::span<const ScalarField* const> comps) {
  double m = 0.0;
  for (int k = 0; k < comps.front()->grid().nz; ++k) m = std::max(m, vector_slice_lp_norm(comps, k, 4.0));
  return m;
}

struct HorizontalGradient {
  ScalarField dx;
  ScalarField dy;
};

inline HorizontalGradient horizontal_gradient(const ScalarField& f) {
  const auto c = transform_forward(f);
  return {transform_inverse(spectral_derivative(c, Axis::x)), transform_inverse(spectral_derivative(c, Axis::y))};
}

inline ScalarField z_derivative(const ScalarField& f) {
  return transform_inverse(spectral_derivative(transform_forward(f), Axis::z));
}

/// ||grad_h f||_{L_z^inf(L_h^4)} with the Euclidean gradient magnitude.
inline double lzinf_lh4_grad_norm(const ScalarField& f) {
  const auto grad = horizontal_gradient(f);
  const ScalarField* comps[] = {&grad.dx, &grad.dy};
  return lzinf_lh4_norm(comps);
}

}  // namespace phm
