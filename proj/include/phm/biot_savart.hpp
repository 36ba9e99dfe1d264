#pragma once

// Slice-wise periodic Biot-Savart inversion. For every z-slice the
// horizontal mean of the vorticity is projected out, the horizontal Poisson
// problem lap_h psi = omega' is solved in Fourier space with a zero-mean
// stream function, and (u, v) = (-d_y psi, d_x psi).

#include <cmath>
#include <vector>

#include "phm/norms.hpp"
#include "phm/spectral.hpp"

namespace phm {

struct VelocityField {
  ScalarField u;
  ScalarField v;

  const GridSpec& grid() const { return u.grid(); }
};

/// Spectral core of the inversion. Modes with kx = ky = 0 (the slice means)
/// are dropped. A Nyquist index on x or y carries no derivative, so those
/// modes of omega produce no velocity.
inline void velocity_spectral(const SpectralField& omega_hat, SpectralField& u_hat, SpectralField& v_hat) {
  const auto& g = omega_hat.grid();
  if (!(u_hat.grid() == g)) u_hat = SpectralField(g);
  if (!(v_hat.grid() == g)) v_hat = SpectralField(g);
  for (int kz = 0; kz < g.nz; ++kz)
    for (int ky = 0; ky < g.ny; ++ky) {
      const bool ny_nyq = 2 * ky == g.ny;
      const double ky_w = wavenumber(mode_number(ky, g.ny), g.L);
      for (int kx = 0; kx < g.nx_half(); ++kx) {
        const std::size_t n = omega_hat.index(kz, ky, kx);
        const bool nx_nyq = 2 * kx == g.nx;
        if ((kx == 0 && ky == 0) || ny_nyq || nx_nyq) {
          u_hat[n] = 0.0;
          v_hat[n] = 0.0;
          continue;
        }
        const double kx_w = wavenumber(kx, g.L);
        const complex psi = -omega_hat[n] / (kx_w * kx_w + ky_w * ky_w);
        u_hat[n] = -complex(0.0, ky_w) * psi;
        v_hat[n] = complex(0.0, kx_w) * psi;
      }
    }
}

inline VelocityField velocity_from_vorticity(const ScalarField& omega) {
  const auto omega_hat = transform_forward(omega);
  SpectralField u_hat, v_hat;
  velocity_spectral(omega_hat, u_hat, v_hat);
  return {transform_inverse(u_hat), transform_inverse(v_hat)};
}

/// d_x v - d_y u.
inline ScalarField curl_h(const VelocityField& vel) {
  require_same_grid(vel.u.grid(), vel.v.grid(), "curl_h");
  auto c = spectral_derivative(transform_forward(vel.v), Axis::x);
  c -= spectral_derivative(transform_forward(vel.u), Axis::y);
  return transform_inverse(c);
}

/// d_x u + d_y v.
inline ScalarField divergence_h(const VelocityField& vel) {
  require_same_grid(vel.u.grid(), vel.v.grid(), "divergence_h");
  auto c = spectral_derivative(transform_forward(vel.u), Axis::x);
  c += spectral_derivative(transform_forward(vel.v), Axis::y);
  return transform_inverse(c);
}

struct VelocityGradient {
  ScalarField ux, uy, vx, vy;
};

inline VelocityGradient velocity_gradient(const VelocityField& vel) {
  auto gu = horizontal_gradient(vel.u);
  auto gv = horizontal_gradient(vel.v);
  return {std::move(gu.dx), std::move(gu.dy), std::move(gv.dx), std::move(gv.dy)};
}

/// ||grad_h u||_{L^inf}: grid max over the four components of |d_j u_i|.
inline double linf_velocity_gradient(const VelocityGradient& gr) {
  return std::max({gr.ux.max_abs(), gr.uy.max_abs(), gr.vx.max_abs(), gr.vy.max_abs()});
}

/// max over slices of ||u(z)||_{W^{1,p}_h} / (p ||omega(z)||_{L^p_h}), with
/// ||u||_{W^{1,p}_h} = ||u||_p / L + ||grad_h u||_p (Euclidean magnitudes).
/// Slices on which omega vanishes are skipped.
inline double elliptic_ratio_report(const ScalarField& omega, double p) {
  if (!(p >= 2.0 && p <= 64.0)) throw std::invalid_argument("elliptic_ratio_report: p must lie in [2, 64]");
  const auto& g = omega.grid();
  const auto vel = velocity_from_vorticity(omega);
  const auto gr = velocity_gradient(vel);
  const ScalarField* u_comps[] = {&vel.u, &vel.v};
  const ScalarField* grad_comps[] = {&gr.ux, &gr.uy, &gr.vx, &gr.vy};
  double ratio = 0.0;
  bool any = false;
  for (int k = 0; k < g.nz; ++k) {
    const double w = slice_lp_norm(omega, k, p);
    if (w == 0.0) continue;
    any = true;
    const double sobolev = vector_slice_lp_norm(u_comps, k, p) / g.L + vector_slice_lp_norm(grad_comps, k, p);
    ratio = std::max(ratio, sobolev / (p * w));
  }
  if (!any) throw UndefinedQuantity("elliptic_ratio_report: vorticity vanishes on every slice");
  return ratio;
}

/// max over slices of | ||omega'(z)||_2 - ||grad_h u(z)||_2 | / ||omega'(z)||_2,
/// where omega' is the slice-mean-free vorticity; 0 when omega' vanishes.
inline double plancherel_identity_check(const ScalarField& omega) {
  const auto& g = omega.grid();
  const auto omega_free = remove_horizontal_slice_mean(omega);
  const auto vel = velocity_from_vorticity(omega);
  const auto gr = velocity_gradient(vel);
  const ScalarField* grad_comps[] = {&gr.ux, &gr.uy, &gr.vx, &gr.vy};
  const double scale = omega.max_abs();
  double dev = 0.0;
  for (int k = 0; k < g.nz; ++k) {
    const double w = slice_lp_norm(omega_free, k, 2.0);
    // slices whose fluctuation is pure roundoff carry no information
    if (w == 0.0 || w <= 1e-14 * scale * g.L) continue;
    const double gu = vector_slice_lp_norm(grad_comps, k, 2.0);
    dev = std::max(dev, std::abs(w - gu) / w);
  }
  return dev;
}

}  // namespace phm
