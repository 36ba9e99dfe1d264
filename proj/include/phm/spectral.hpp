#pragma once

// Spectral machinery on the periodic box: FFTW-backed transforms, exact
// spectral derivatives, two-thirds dealiasing and horizontal slice means.
//
// Normalization: transform_forward divides by the number of grid points, so
// the zero mode equals the grid mean and
//   sum_x f(x)^2 dV = L^3 * sum_{full spectrum} |c_k|^2      (Parseval).

#include <atomic>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <vector>

#include <fftw3.h>

#include "phm/grid.hpp"

namespace phm {

namespace detail {

inline int fft_thread_count() {
  static const int n = [] {
    const char* env = std::getenv("PHM_NUM_THREADS");
    if (env == nullptr) return 1;
    int v = std::atoi(env);
    return v > 0 ? v : 1;
  }();
  return n;
}

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

/// Owns an r2c/c2r plan pair for one transform shape. Plans are created with
/// FFTW_ESTIMATE so the chosen algorithm, and therefore every output bit, is
/// reproducible from run to run.
class PlanPair {
 public:
  explicit PlanPair(std::vector<int> dims) : dims_(std::move(dims)) {
    std::size_t n = 1;
    for (int d : dims_) n *= std::size_t(d);
    real_size_ = n;
    complex_size_ = n / std::size_t(dims_.back()) * std::size_t(dims_.back() / 2 + 1);
    aligned_vector<double> r(real_size_);
    aligned_vector<complex> c(complex_size_);
    std::lock_guard lock(planner_mutex());
    static const bool threads_ready = [] {
      if (fft_thread_count() > 1) {
        fftw_init_threads();
        fftw_plan_with_nthreads(fft_thread_count());
      }
      return true;
    }();
    (void)threads_ready;
    const int rank = int(dims_.size());
    forward_ = fftw_plan_dft_r2c(rank, dims_.data(), r.data(), reinterpret_cast<fftw_complex*>(c.data()),
                                 FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r(rank, dims_.data(), reinterpret_cast<fftw_complex*>(c.data()), r.data(),
                                 FFTW_ESTIMATE);
    if (forward_ == nullptr || inverse_ == nullptr) throw std::runtime_error("FFTW planning failed");
  }
  PlanPair(const PlanPair&) = delete;
  PlanPair& operator=(const PlanPair&) = delete;
  ~PlanPair() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }

  std::size_t real_size() const { return real_size_; }
  std::size_t complex_size() const { return complex_size_; }

  /// Unnormalized r2c.
  void forward(const double* in, complex* out) const {
    fftw_execute_dft_r2c(forward_, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
  }
  /// Unnormalized c2r; clobbers `in`.
  void inverse(complex* in, double* out) const {
    fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(in), out);
  }

 private:
  std::vector<int> dims_;
  std::size_t real_size_ = 0;
  std::size_t complex_size_ = 0;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

inline const PlanPair& plans_for_shape(std::vector<int> dims) {
  static std::mutex cache_mutex;
  static std::map<std::vector<int>, std::unique_ptr<PlanPair>> cache;
  std::lock_guard lock(cache_mutex);
  auto it = cache.find(dims);
  if (it == cache.end()) it = cache.emplace(dims, std::make_unique<PlanPair>(dims)).first;
  return *it->second;
}

inline const PlanPair& plans_for(const GridSpec& g) { return plans_for_shape({g.nz, g.ny, g.nx}); }

inline std::atomic<double>& dealias_corruption() {
  static std::atomic<double> factor{0.0};
  return factor;
}

}  // namespace detail

namespace testing {

/// Mutation hook for the verification suite: when nonzero, dealias_23 also
/// scales every retained mode by (1 - factor). Never set in production runs.
inline void set_dealias_corruption(double factor) { detail::dealias_corruption().store(factor); }

}  // namespace testing

inline void transform_forward(const ScalarField& f, SpectralField& out) {
  const auto& g = f.grid();
  if (!(out.grid() == g)) out = SpectralField(g);
  detail::plans_for(g).forward(f.data(), out.data());
  const double scale = 1.0 / double(g.size());
  for (auto& c : out.coeffs()) c *= scale;
}

inline SpectralField transform_forward(const ScalarField& f) {
  SpectralField out(f.grid());
  transform_forward(f, out);
  return out;
}

/// Inverse transform reusing caller-owned scratch (avoids reallocation in hot loops).
inline void transform_inverse(const SpectralField& c, ScalarField& out, SpectralField& scratch) {
  const auto& g = c.grid();
  if (!(out.grid() == g)) out = ScalarField(g);
  if (!(scratch.grid() == g)) scratch = SpectralField(g);
  std::copy(c.coeffs().begin(), c.coeffs().end(), scratch.coeffs().begin());
  detail::plans_for(g).inverse(scratch.data(), out.data());
}

inline ScalarField transform_inverse(const SpectralField& c) {
  ScalarField out(c.grid());
  SpectralField scratch(c.grid());
  transform_inverse(c, out, scratch);
  return out;
}

/// Multiply each coefficient by i*k_axis; the Nyquist index on that axis maps to zero.
inline void spectral_derivative(const SpectralField& f, Axis axis, SpectralField& out) {
  const auto& g = f.grid();
  if (!(out.grid() == g)) out = SpectralField(g);
  const int n = g.points(axis);
  std::vector<double> k(n);
  for (int i = 0; i < n; ++i) k[i] = 2 * i == n ? 0.0 : wavenumber(mode_number(i, n), g.L);
  const int nxh = g.nx_half();
  for (int kz = 0; kz < g.nz; ++kz)
    for (int ky = 0; ky < g.ny; ++ky) {
      const std::size_t base = f.index(kz, ky, 0);
      const complex* in = f.data() + base;
      complex* o = out.data() + base;
      if (axis == Axis::x) {
        for (int kx = 0; kx < nxh; ++kx) o[kx] = complex(-k[kx] * in[kx].imag(), k[kx] * in[kx].real());
      } else {
        const double kk = axis == Axis::y ? k[ky] : k[kz];
        for (int kx = 0; kx < nxh; ++kx) o[kx] = complex(-kk * in[kx].imag(), kk * in[kx].real());
      }
    }
}

inline SpectralField spectral_derivative(const SpectralField& f, Axis axis) {
  SpectralField out(f.grid());
  spectral_derivative(f, axis, out);
  return out;
}

/// True when the mode survives the two-thirds rule: |m| <= n/3 on its axis.
constexpr bool keeps_mode(int mode, int n) { return 3 * (mode < 0 ? -mode : mode) <= n; }

inline bool dealias_keeps(const GridSpec& g, int kz, int ky, int kx) {
  return keeps_mode(mode_number(kx, g.nx), g.nx) && keeps_mode(mode_number(ky, g.ny), g.ny) &&
         keeps_mode(mode_number(kz, g.nz), g.nz);
}

inline void dealias_23_inplace(SpectralField& f) {
  const auto& g = f.grid();
  const double corrupt = detail::dealias_corruption().load(std::memory_order_relaxed);
  for (int kz = 0; kz < g.nz; ++kz) {
    const bool kz_ok = keeps_mode(mode_number(kz, g.nz), g.nz);
    for (int ky = 0; ky < g.ny; ++ky) {
      const bool ky_ok = kz_ok && keeps_mode(mode_number(ky, g.ny), g.ny);
      complex* row = f.data() + f.index(kz, ky, 0);
      for (int kx = 0; kx < g.nx_half(); ++kx) {
        if (!(ky_ok && keeps_mode(kx, g.nx)))
          row[kx] = 0.0;
        else if (corrupt != 0.0)
          row[kx] *= (1.0 - corrupt);
      }
    }
  }
}

inline SpectralField dealias_23(SpectralField f) {
  dealias_23_inplace(f);
  return f;
}

/// Spectral energy L^3 * sum over the full spectrum of |c_k|^2; equals the
/// grid quadrature of f^2 by Parseval.
inline double spectral_energy(const SpectralField& f) {
  const auto& g = f.grid();
  double sum = 0.0;
  for (int kz = 0; kz < g.nz; ++kz)
    for (int ky = 0; ky < g.ny; ++ky)
      for (int kx = 0; kx < g.nx_half(); ++kx) {
        const double w = (kx == 0 || 2 * kx == g.nx) ? 1.0 : 2.0;
        sum += w * std::norm(f(kz, ky, kx));
      }
  return sum * g.L * g.L * g.L;
}

/// Profile over z of the horizontal (x,y) grid average.
inline std::vector<double> horizontal_slice_mean(const ScalarField& f) {
  const auto& g = f.grid();
  std::vector<double> profile(g.nz, 0.0);
  const std::size_t ns = g.slice_size();
  for (int k = 0; k < g.nz; ++k) {
    const double* s = f.data() + std::size_t(k) * ns;
    double sum = 0.0;
    for (std::size_t n = 0; n < ns; ++n) sum += s[n];
    profile[k] = sum / double(ns);
  }
  return profile;
}

inline ScalarField broadcast_profile(const GridSpec& g, std::span<const double> profile) {
  ScalarField out(g);
  const std::size_t ns = g.slice_size();
  for (int k = 0; k < g.nz; ++k) std::fill_n(out.data() + std::size_t(k) * ns, ns, profile[k]);
  return out;
}

inline ScalarField remove_horizontal_slice_mean(const ScalarField& f) {
  const auto& g = f.grid();
  ScalarField out = f;
  const auto profile = horizontal_slice_mean(f);
  const std::size_t ns = g.slice_size();
  for (int k = 0; k < g.nz; ++k) {
    double* s = out.data() + std::size_t(k) * ns;
    for (std::size_t n = 0; n < ns; ++n) s[n] -= profile[k];
  }
  return out;
}

/// Zero every kx = ky = 0 mode, i.e. the slice-mean profile, in spectral space.
inline void remove_slice_mean_modes(SpectralField& f) {
  const auto& g = f.grid();
  for (int kz = 0; kz < g.nz; ++kz) f(kz, 0, 0) = 0.0;
}

// ----------------------------------------------------------------------------
// Two-dimensional slice transforms, used by the slice-wise inequality checks.

inline aligned_vector<complex> slice_forward(const SliceField& f) {
  const auto& plan = detail::plans_for_shape({f.ny(), f.nx()});
  aligned_vector<complex> out(plan.complex_size());
  plan.forward(f.data(), out.data());
  const double scale = 1.0 / double(f.size());
  for (auto& c : out) c *= scale;
  return out;
}

inline SliceField slice_inverse(aligned_vector<complex> c, double L, int nx, int ny) {
  const auto& plan = detail::plans_for_shape({ny, nx});
  SliceField out(L, nx, ny);
  plan.inverse(c.data(), out.data());
  return out;
}

/// d/dx or d/dy of a horizontal slice (Nyquist derivative zeroed).
inline SliceField slice_derivative(const SliceField& f, Axis axis) {
  auto c = slice_forward(f);
  const int nxh = f.nx() / 2 + 1;
  for (int ky = 0; ky < f.ny(); ++ky)
    for (int kx = 0; kx < nxh; ++kx) {
      const int idx = axis == Axis::x ? kx : ky;
      const int n = axis == Axis::x ? f.nx() : f.ny();
      auto& v = c[std::size_t(ky) * nxh + kx];
      if (2 * idx == n)
        v = 0.0;
      else
        v *= complex(0.0, wavenumber(mode_number(idx, n), f.L()));
    }
  return slice_inverse(std::move(c), f.L(), f.nx(), f.ny());
}

}  // namespace phm
