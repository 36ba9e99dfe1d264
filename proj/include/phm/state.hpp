#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "phm/norms.hpp"
#include "phm/spectral.hpp"

namespace phm {

struct ModelParams {
  double L = 1.0;   ///< box side
  double U0 = 1.0;  ///< vertical wave speed

  void validate(const GridSpec* g = nullptr) const {
    if (!(L > 0.0)) throw ConfigError("model: L must be positive");
    if (!(U0 >= 0.0) || !std::isfinite(U0)) throw ConfigError("model: U0 must be finite and >= 0");
    if (g != nullptr && g->L != L) throw ConfigError("model: L differs from the grid period");
  }
  bool operator==(const ModelParams&) const = default;
};

/// Riemann-variable representation theta = w + L omega, eta = w - L omega.
struct ThetaEtaState {
  ScalarField theta;
  ScalarField eta;

  const GridSpec& grid() const { return theta.grid(); }

  ThetaEtaState& axpy(double a, const ThetaEtaState& x) {
    theta.axpy(a, x.theta);
    eta.axpy(a, x.eta);
    return *this;
  }
  bool operator==(const ThetaEtaState&) const = default;
};

/// Physical representation: vertical velocity w and vertical vorticity omega.
struct WOmegaState {
  ScalarField w;
  ScalarField omega;

  const GridSpec& grid() const { return w.grid(); }
};

inline ThetaEtaState to_theta_eta(const WOmegaState& s, const ModelParams& p) {
  require_same_grid(s.w.grid(), s.omega.grid(), "to_theta_eta");
  ThetaEtaState out{s.w, s.w};
  out.theta.axpy(p.L, s.omega);
  out.eta.axpy(-p.L, s.omega);
  return out;
}

inline WOmegaState to_w_omega(const ThetaEtaState& s, const ModelParams& p) {
  require_same_grid(s.theta.grid(), s.eta.grid(), "to_w_omega");
  WOmegaState out{ScalarField(s.grid()), ScalarField(s.grid())};
  const double inv2L = 1.0 / (2.0 * p.L);
  for (std::size_t n = 0; n < s.theta.size(); ++n) {
    out.w[n] = 0.5 * (s.theta[n] + s.eta[n]);
    out.omega[n] = (s.theta[n] - s.eta[n]) * inv2L;
  }
  return out;
}

/// omega = (theta - eta) / (2L).
inline ScalarField vorticity_of(const ThetaEtaState& s, const ModelParams& p) {
  ScalarField omega = s.theta - s.eta;
  omega *= 1.0 / (2.0 * p.L);
  return omega;
}

/// Pair norm ||(a, b)|| = ||a||_p + ||b||_p.
inline double pair_norm(const ScalarField& a, const ScalarField& b, double p) { return lp_norm(a, p) + lp_norm(b, p); }

inline double pair_norm(const ThetaEtaState& s, double p) { return pair_norm(s.theta, s.eta, p); }

// ----------------------------------------------------------------------------
// Mollification

/// Product kernel rho(x,y,z) = zeta(x,y) xi(z) built from the bump
/// exp(-1/(1-r^2)), r = distance/epsilon, sampled on the grid with periodic
/// minimum-image offsets and renormalized to unit discrete mass per factor.
struct Mollifier {
  double epsilon = 0.0;

  explicit Mollifier(double eps) : epsilon(eps) {}

  void validate(double L) const {
    if (!(epsilon > 0.0 && epsilon <= L / 4.0))
      throw ConfigError("mollifier: epsilon must lie in (0, L/4]");
  }

  static double bump(double r) { return r < 1.0 ? std::exp(-1.0 / (1.0 - r * r)) : 0.0; }

  /// Horizontal factor zeta on the slice grid, [y][x] layout, unit sum.
  std::vector<double> horizontal_factor(const GridSpec& g) const {
    std::vector<double> z(g.slice_size());
    double sum = 0.0;
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const double x = mode_number(i, g.nx) * g.dx();
        const double y = mode_number(j, g.ny) * g.dy();
        const double v = bump(std::sqrt(x * x + y * y) / epsilon);
        z[std::size_t(j) * g.nx + i] = v;
        sum += v;
      }
    for (double& v : z) v /= sum;
    return z;
  }

  /// Vertical factor xi, unit sum.
  std::vector<double> vertical_factor(const GridSpec& g) const {
    std::vector<double> xi(g.nz);
    double sum = 0.0;
    for (int k = 0; k < g.nz; ++k) {
      xi[k] = bump(std::abs(mode_number(k, g.nz) * g.dz()) / epsilon);
      sum += xi[k];
    }
    for (double& v : xi) v /= sum;
    return xi;
  }

  ScalarField kernel(const GridSpec& g) const {
    const auto zeta = horizontal_factor(g);
    const auto xi = vertical_factor(g);
    ScalarField k(g);
    for (int kz = 0; kz < g.nz; ++kz)
      for (std::size_t n = 0; n < g.slice_size(); ++n) k[std::size_t(kz) * g.slice_size() + n] = xi[kz] * zeta[n];
    return k;
  }
};

/// Periodic discrete convolution f * rho^epsilon, evaluated through the FFT.
inline ScalarField mollify(const ScalarField& f, const Mollifier& m) {
  const auto& g = f.grid();
  m.validate(g.L);
  const auto kh = transform_forward(m.kernel(g));
  auto fh = transform_forward(f);
  const double n = double(g.size());
  for (std::size_t i = 0; i < fh.size(); ++i) fh[i] *= n * kh[i];
  return transform_inverse(fh);
}

// ----------------------------------------------------------------------------
// Initial conditions

enum class InitialKind { eigen_steady, vertical_wave, random_bandlimited, mean_profile };

inline InitialKind parse_initial_kind(std::string_view s) {
  if (s == "eigen_steady") return InitialKind::eigen_steady;
  if (s == "vertical_wave") return InitialKind::vertical_wave;
  if (s == "random_bandlimited") return InitialKind::random_bandlimited;
  if (s == "mean_profile") return InitialKind::mean_profile;
  throw ConfigError("initial: unknown kind '" + std::string(s) + "'");
}

inline const char* to_string(InitialKind k) {
  switch (k) {
    case InitialKind::eigen_steady: return "eigen_steady";
    case InitialKind::vertical_wave: return "vertical_wave";
    case InitialKind::random_bandlimited: return "random_bandlimited";
    case InitialKind::mean_profile: return "mean_profile";
  }
  return "?";
}

struct InitialParams {
  double amplitude = 0.1;       ///< A for the analytic kinds; RMS for random fields
  int mode = 1;                 ///< wavenumber index for eigen_steady / vertical_wave
  int cutoff = 4;               ///< max |mode index| per axis for random fields
  double mean_amplitude = 0.0;  ///< amplitude of the sin(2 pi z / L) slice-mean profile
  std::uint64_t seed = 0;

  bool operator==(const InitialParams&) const = default;
};

namespace detail {

/// Portable uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
inline double unit_uniform(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline complex gaussian_complex(std::mt19937_64& rng) {
  const double u1 = 1.0 - unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  const double r = std::sqrt(-2.0 * std::log(u1));
  return {r * std::cos(2.0 * M_PI * u2), r * std::sin(2.0 * M_PI * u2)};
}

/// Seeded random field with modes |index| <= cutoff on every axis, zero slice
/// means and RMS equal to `rms`.
inline ScalarField random_mean_free_field(const GridSpec& g, int cutoff, double rms, std::mt19937_64& rng) {
  if (cutoff < 1 || 3 * cutoff > std::min({g.nx, g.ny, g.nz}))
    throw ConfigError("initial: cutoff must lie in [1, min(n)/3]");
  SpectralField c(g);
  auto idx = [](int m, int n) { return m >= 0 ? m : m + n; };
  for (int mz = -cutoff; mz <= cutoff; ++mz)
    for (int my = -cutoff; my <= cutoff; ++my)
      for (int mx = 0; mx <= cutoff; ++mx) {
        const complex v = gaussian_complex(rng);
        if (mx == 0 && my == 0) continue;       // slice means
        if (mx == 0 && my < 0) continue;        // filled from the conjugate partner
        c(idx(mz, g.nz), idx(my, g.ny), mx) = v;
        if (mx == 0) c(idx(-mz, g.nz), idx(-my, g.ny), 0) = std::conj(v);
      }
  const double energy = spectral_energy(c) / (g.L * g.L * g.L);
  c *= rms / std::sqrt(energy);
  return transform_inverse(c);
}

}  // namespace detail

inline ThetaEtaState make_initial(InitialKind kind, const GridSpec& g, const ModelParams& p, const InitialParams& ip) {
  g.validate();
  p.validate(&g);
  const double L = p.L;
  const double A = ip.amplitude;
  switch (kind) {
    case InitialKind::eigen_steady: {
      // w = 0, omega = A cos(2 pi k x / L)
      auto omega = ScalarField::sample(g, [&](double x, double, double) { return A * std::cos(2.0 * M_PI * ip.mode * x / L); });
      return to_theta_eta({ScalarField(g), omega}, p);
    }
    case InitialKind::vertical_wave: {
      auto f = ScalarField::sample(g, [&](double, double, double z) { return A * std::sin(2.0 * M_PI * ip.mode * z / L); });
      return {f, f};
    }
    case InitialKind::random_bandlimited:
    case InitialKind::mean_profile: {
      std::mt19937_64 rng(ip.seed);
      ThetaEtaState s{detail::random_mean_free_field(g, ip.cutoff, A, rng),
                      detail::random_mean_free_field(g, ip.cutoff, A, rng)};
      if (ip.mean_amplitude != 0.0) {
        auto profile = ScalarField::sample(
            g, [&](double, double, double z) { return ip.mean_amplitude * std::sin(2.0 * M_PI * z / L); });
        s.theta += profile;
        if (kind == InitialKind::random_bandlimited) s.eta += profile;
      }
      return s;
    }
  }
  throw ConfigError("initial: unknown kind");
}

}  // namespace phm
