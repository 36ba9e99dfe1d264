#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

#include "phm/errors.hpp"

namespace phm {

/// Allocator handing out SIMD-aligned storage from fftw_malloc, so every
/// field buffer can be passed to the same FFTW plan.
template <class T>
struct FftwAllocator {
  using value_type = T;

  FftwAllocator() noexcept = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    if (n == 0) return nullptr;
    void* p = fftw_malloc(n * sizeof(T));
    if (p == nullptr) throw std::bad_alloc{};
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }

  template <class U>
  bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

template <class T>
using aligned_vector = std::vector<T, FftwAllocator<T>>;

using complex = std::complex<double>;

enum class Axis { x, y, z };

/// Uniform periodic grid on the cube [0,L]^3 with nx, ny, nz collocation
/// points per axis. Point (i, j, k) sits at (i*dx, j*dy, k*dz).
struct GridSpec {
  double L = 1.0;
  int nx = 0;
  int ny = 0;
  int nz = 0;

  void validate() const {
    if (!(L > 0.0) || !std::isfinite(L))
      throw ConfigError("grid: L must be a positive finite length");
    auto check = [](int n, const char* name) {
      if (n < 4 || n % 2 != 0)
        throw ConfigError(std::string("grid: ") + name +
                          " must be an even integer >= 4 (got " +
                          std::to_string(n) + ")");
    };
    check(nx, "nx");
    check(ny, "ny");
    check(nz, "nz");
  }

  double dx() const { return L / nx; }
  double dy() const { return L / ny; }
  double dz() const { return L / nz; }
  double cell_volume() const { return dx() * dy() * dz(); }
  double cell_area() const { return dx() * dy(); }

  std::size_t size() const { return std::size_t(nx) * ny * nz; }
  std::size_t slice_size() const { return std::size_t(nx) * ny; }
  /// r2c half spectrum: x keeps indices 0..nx/2.
  int nx_half() const { return nx / 2 + 1; }
  std::size_t spectral_size() const { return std::size_t(nx_half()) * ny * nz; }

  int points(Axis a) const { return a == Axis::x ? nx : (a == Axis::y ? ny : nz); }

  bool operator==(const GridSpec&) const = default;
};

/// Signed mode number of FFT index i on an axis with n points, in
/// {-n/2+1, ..., n/2}.
constexpr int mode_number(int i, int n) { return 2 * i <= n ? i : i - n; }

inline double wavenumber(int mode, double L) { return 2.0 * M_PI * mode / L; }

inline void require_same_grid(const GridSpec& a, const GridSpec& b, const char* where) {
  if (!(a == b)) throw GridMismatch(std::string(where) + ": grid mismatch");
}

/// Real periodic field, values stored [z][y][x] with x fastest.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const GridSpec& g, double fill = 0.0) : grid_(g), values_(g.size(), fill) {}

  const GridSpec& grid() const { return grid_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::size_t size() const { return values_.size(); }

  double& operator()(int k, int j, int i) { return values_[index(k, j, i)]; }
  double operator()(int k, int j, int i) const { return values_[index(k, j, i)]; }
  double& operator[](std::size_t n) { return values_[n]; }
  double operator[](std::size_t n) const { return values_[n]; }

  std::size_t index(int k, int j, int i) const {
    return (std::size_t(k) * grid_.ny + j) * grid_.nx + i;
  }

  /// Fill from f(x, y, z) evaluated at the collocation points.
  template <class F>
  static ScalarField sample(const GridSpec& g, F&& f) {
    ScalarField out(g);
    for (int k = 0; k < g.nz; ++k)
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) out(k, j, i) = f(i * g.dx(), j * g.dy(), k * g.dz());
    return out;
  }

  bool is_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  ScalarField& operator+=(const ScalarField& o) {
    require_same_grid(grid_, o.grid_, "ScalarField +=");
    for (std::size_t n = 0; n < values_.size(); ++n) values_[n] += o.values_[n];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    require_same_grid(grid_, o.grid_, "ScalarField -=");
    for (std::size_t n = 0; n < values_.size(); ++n) values_[n] -= o.values_[n];
    return *this;
  }
  ScalarField& operator*=(double a) {
    for (double& v : values_) v *= a;
    return *this;
  }
  /// this += a * x
  ScalarField& axpy(double a, const ScalarField& x) {
    require_same_grid(grid_, x.grid_, "ScalarField axpy");
    for (std::size_t n = 0; n < values_.size(); ++n) values_[n] += a * x.values_[n];
    return *this;
  }

  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
  friend ScalarField operator*(double s, ScalarField a) { return a *= s; }
  friend ScalarField operator*(ScalarField a, double s) { return a *= s; }

  bool operator==(const ScalarField& o) const {
    return grid_ == o.grid_ && std::equal(values_.begin(), values_.end(), o.values_.begin(), o.values_.end());
  }

 private:
  GridSpec grid_;
  aligned_vector<double> values_;
};

/// Half-spectrum Fourier coefficients of a real field.
///
/// Layout is the FFTW r2c layout [kz][ky][kx] with kx in 0..nx/2; negative
/// kx are implied by conjugate symmetry. Index i on an axis with n points is
/// mode number mode_number(i, n) and wavenumber 2*pi*mode/L. Coefficients are
/// normalized so that f(x) = sum_k c_k exp(i k.x), hence c_0 is the mean.
class SpectralField {
 public:
  SpectralField() = default;
  explicit SpectralField(const GridSpec& g) : grid_(g), coeffs_(g.spectral_size(), complex{}) {}

  const GridSpec& grid() const { return grid_; }
  std::span<complex> coeffs() { return coeffs_; }
  std::span<const complex> coeffs() const { return coeffs_; }
  complex* data() { return coeffs_.data(); }
  const complex* data() const { return coeffs_.data(); }
  std::size_t size() const { return coeffs_.size(); }

  std::size_t index(int kz, int ky, int kx) const {
    return (std::size_t(kz) * grid_.ny + ky) * grid_.nx_half() + kx;
  }
  complex& operator()(int kz, int ky, int kx) { return coeffs_[index(kz, ky, kx)]; }
  complex operator()(int kz, int ky, int kx) const { return coeffs_[index(kz, ky, kx)]; }
  complex& operator[](std::size_t n) { return coeffs_[n]; }
  complex operator[](std::size_t n) const { return coeffs_[n]; }

  void set_zero() { std::fill(coeffs_.begin(), coeffs_.end(), complex{}); }

  bool is_finite() const {
    return std::all_of(coeffs_.begin(), coeffs_.end(),
                       [](const complex& c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); });
  }

  SpectralField& operator+=(const SpectralField& o) {
    require_same_grid(grid_, o.grid_, "SpectralField +=");
    for (std::size_t n = 0; n < coeffs_.size(); ++n) coeffs_[n] += o.coeffs_[n];
    return *this;
  }
  SpectralField& operator-=(const SpectralField& o) {
    require_same_grid(grid_, o.grid_, "SpectralField -=");
    for (std::size_t n = 0; n < coeffs_.size(); ++n) coeffs_[n] -= o.coeffs_[n];
    return *this;
  }
  SpectralField& operator*=(double a) {
    for (auto& c : coeffs_) c *= a;
    return *this;
  }
  SpectralField& axpy(double a, const SpectralField& x) {
    require_same_grid(grid_, x.grid_, "SpectralField axpy");
    for (std::size_t n = 0; n < coeffs_.size(); ++n) coeffs_[n] += a * x.coeffs_[n];
    return *this;
  }

  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(double s, SpectralField a) { return a *= s; }

 private:
  GridSpec grid_;
  aligned_vector<complex> coeffs_;
};

/// A single horizontal slice f(x, y) of a periodic field, [y][x] layout.
class SliceField {
 public:
  SliceField() = default;
  SliceField(double L, int nx, int ny, double fill = 0.0) : L_(L), nx_(nx), ny_(ny), values_(std::size_t(nx) * ny, fill) {}

  double L() const { return L_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double cell_area() const { return (L_ / nx_) * (L_ / ny_); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::size_t size() const { return values_.size(); }
  double& operator()(int j, int i) { return values_[std::size_t(j) * nx_ + i]; }
  double operator()(int j, int i) const { return values_[std::size_t(j) * nx_ + i]; }

  template <class F>
  static SliceField sample(double L, int nx, int ny, F&& f) {
    SliceField out(L, nx, ny);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) out(j, i) = f(i * L / nx, j * L / ny);
    return out;
  }

  SliceField& operator*=(double a) {
    for (double& v : values_) v *= a;
    return *this;
  }
  friend SliceField operator*(double a, SliceField f) { return f *= a; }

 private:
  double L_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
  aligned_vector<double> values_;
};

inline SliceField extract_slice(const ScalarField& f, int k) {
  const auto& g = f.grid();
  SliceField s(g.L, g.nx, g.ny);
  std::copy_n(f.data() + std::size_t(k) * g.slice_size(), g.slice_size(), s.data());
  return s;
}

}  // namespace phm
