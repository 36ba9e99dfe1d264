#include <gtest/gtest.h>

#include "phm/spectral.hpp"
#include "test_util.hpp"

using namespace phm;
using phm::test::max_abs_diff;
using phm::test::two_pi;

namespace {

const GridSpec g16{1.0, 16, 16, 16};
const GridSpec g_aniso{2.0, 16, 8, 12};

}  // namespace

TEST(GridSpec, RejectsSmallOddOrNonPositive) {
  EXPECT_NO_THROW((GridSpec{1.0, 4, 4, 4}.validate()));
  EXPECT_THROW((GridSpec{1.0, 2, 4, 4}.validate()), ConfigError);
  EXPECT_THROW((GridSpec{1.0, 4, 5, 4}.validate()), ConfigError);
  EXPECT_THROW((GridSpec{0.0, 4, 4, 4}.validate()), ConfigError);
  EXPECT_THROW((GridSpec{-1.0, 4, 4, 4}.validate()), ConfigError);
}

TEST(GridSpec, SpacingAndCoordinates) {
  const GridSpec g{2.0, 8, 4, 16};
  EXPECT_DOUBLE_EQ(g.dx(), 0.25);
  EXPECT_DOUBLE_EQ(g.dy(), 0.5);
  EXPECT_DOUBLE_EQ(g.dz(), 0.125);
  const auto f = ScalarField::sample(g, [](double x, double y, double z) { return x + 10 * y + 100 * z; });
  EXPECT_DOUBLE_EQ(f(3, 2, 1), 0.25 + 10 * 1.0 + 100 * 0.375);
}

TEST(ScalarField, CombiningDifferentGridsThrows) {
  ScalarField a(g16), b(g_aniso);
  EXPECT_THROW(a += b, GridMismatch);
}

TEST(TransformForward, ConstantHasOnlyZeroMode) {
  const ScalarField f(g_aniso, 3.5);
  const auto c = transform_forward(f);
  EXPECT_NEAR(c[0].real(), 3.5, 1e-15);
  EXPECT_NEAR(c[0].imag(), 0.0, 1e-15);
  for (std::size_t n = 1; n < c.size(); ++n) EXPECT_LT(std::abs(c[n]), 1e-15);
}

TEST(TransformForward, SingleHarmonicHasTwoModes) {
  // sin(2 pi x / L) = (e^{ikx} - e^{-ikx}) / 2i: coefficient -i/2 at kx = +1;
  // the kx = -1 partner is implied by conjugate symmetry of the half spectrum.
  const auto f = ScalarField::sample(g_aniso, [](double x, double, double) { return std::sin(two_pi * x / 2.0); });
  const auto c = transform_forward(f);
  int nonzero = 0;
  for (int kz = 0; kz < g_aniso.nz; ++kz)
    for (int ky = 0; ky < g_aniso.ny; ++ky)
      for (int kx = 0; kx < g_aniso.nx_half(); ++kx)
        if (std::abs(c(kz, ky, kx)) > 1e-14) {
          ++nonzero;
          EXPECT_EQ(kz, 0);
          EXPECT_EQ(ky, 0);
          EXPECT_EQ(kx, 1);
          EXPECT_NEAR(c(kz, ky, kx).real(), 0.0, 1e-15);
          EXPECT_NEAR(c(kz, ky, kx).imag(), -0.5, 1e-15);
        }
  EXPECT_EQ(nonzero, 1);
}

TEST(TransformForward, RoundTripRandom) {
  const auto f = test::random_field(g16, 3, 5);
  const auto back = transform_inverse(transform_forward(f));
  EXPECT_LE(max_abs_diff(back, f) / f.max_abs(), 1e-13);
  const auto n = test::noise_field(g_aniso, 4);
  EXPECT_LE(max_abs_diff(transform_inverse(transform_forward(n)), n) / n.max_abs(), 1e-13);
}

TEST(TransformForward, Parseval) {
  const auto f = test::noise_field(g_aniso, 11);
  double direct = 0.0;
  for (double v : f.values()) direct += v * v;
  direct *= g_aniso.dx() * g_aniso.dy() * g_aniso.dz();
  EXPECT_NEAR(spectral_energy(transform_forward(f)) / direct, 1.0, 1e-12);
}

TEST(TransformForward, Linearity) {
  const auto a = test::noise_field(g16, 1), b = test::noise_field(g16, 2);
  const auto lhs = transform_forward(2.0 * a + (-3.0) * b);
  auto rhs = transform_forward(a);
  rhs *= 2.0;
  rhs.axpy(-3.0, transform_forward(b));
  double m = 0.0;
  for (std::size_t n = 0; n < lhs.size(); ++n) m = std::max(m, std::abs(lhs[n] - rhs[n]));
  EXPECT_LE(m, 1e-14);
}

TEST(SpectralDerivative, SineToCosine) {
  for (auto axis : {Axis::x, Axis::y, Axis::z}) {
    const double L = g_aniso.L;
    auto coord = [axis](double x, double y, double z) { return axis == Axis::x ? x : axis == Axis::y ? y : z; };
    const auto f = ScalarField::sample(g_aniso, [&](double x, double y, double z) { return std::sin(two_pi * coord(x, y, z) / L); });
    const auto exact = ScalarField::sample(
        g_aniso, [&](double x, double y, double z) { return two_pi / L * std::cos(two_pi * coord(x, y, z) / L); });
    const auto d = transform_inverse(spectral_derivative(transform_forward(f), axis));
    EXPECT_LE(max_abs_diff(d, exact), 1e-12);
  }
}

TEST(SpectralDerivative, ConstantGivesZero) {
  const auto d = transform_inverse(spectral_derivative(transform_forward(ScalarField(g16, 2.0)), Axis::z));
  EXPECT_LE(d.max_abs(), 1e-15);
}

TEST(SpectralDerivative, NyquistModeIsZeroed) {
  // cos(pi x / dx) alternates sign on the grid: the Nyquist mode in x.
  const auto f = ScalarField::sample(g16, [](double x, double, double) { return std::cos(M_PI * x * 16); });
  EXPECT_LE(transform_inverse(spectral_derivative(transform_forward(f), Axis::x)).max_abs(), 1e-14);
}

TEST(SpectralDerivative, MixedPartialsCommute) {
  const auto c = transform_forward(test::noise_field(g_aniso, 5));
  const auto xy = transform_inverse(spectral_derivative(spectral_derivative(c, Axis::x), Axis::y));
  const auto yx = transform_inverse(spectral_derivative(spectral_derivative(c, Axis::y), Axis::x));
  EXPECT_LE(max_abs_diff(xy, yx), 1e-12);
}

TEST(Dealias, KeepsLowModesUnchanged) {
  // |index| <= n/3 on every axis: 5 of 16. Modes outside the band carry only
  // transform roundoff and are zeroed; the band passes through untouched.
  const auto f = test::random_field(g16, 8, 5);
  const auto c = transform_forward(f);
  const auto d = dealias_23(c);
  for (std::size_t n = 0; n < c.size(); ++n) {
    if (d[n] == c[n]) continue;
    EXPECT_EQ(d[n], complex(0.0));
    EXPECT_LE(std::abs(c[n]), 1e-16);
  }
}

TEST(Dealias, RemovesNyquistAdjacentMode) {
  // index 7 on a 16-point axis lies above 16/3
  const auto f = ScalarField::sample(g16, [](double, double y, double) { return std::cos(two_pi * 7 * y); });
  EXPECT_LE(transform_inverse(dealias_23(transform_forward(f))).max_abs(), 1e-14);
  const auto h = ScalarField::sample(g16, [](double, double, double z) { return std::sin(two_pi * 6 * z); });
  EXPECT_LE(transform_inverse(dealias_23(transform_forward(h))).max_abs(), 1e-15);
}

TEST(Dealias, ModeRuleBoundary) {
  EXPECT_TRUE(keeps_mode(5, 16));
  EXPECT_FALSE(keeps_mode(6, 16));
  EXPECT_TRUE(keeps_mode(-5, 16));
  EXPECT_TRUE(keeps_mode(4, 12));
  EXPECT_FALSE(keeps_mode(5, 12));
}

TEST(Dealias, Idempotent) {
  const auto once = dealias_23(transform_forward(test::noise_field(g_aniso, 9)));
  const auto twice = dealias_23(once);
  for (std::size_t n = 0; n < once.size(); ++n) EXPECT_EQ(once[n], twice[n]);
}

TEST(SliceMean, Constant) {
  for (double m : horizontal_slice_mean(ScalarField(g_aniso, -1.25))) EXPECT_DOUBLE_EQ(m, -1.25);
}

TEST(SliceMean, ZeroMeanHarmonic) {
  const auto f = ScalarField::sample(g16, [](double x, double, double z) { return std::sin(two_pi * x) * (1.0 + z * z); });
  for (double m : horizontal_slice_mean(f)) EXPECT_LE(std::abs(m), 1e-14);
}

TEST(SliceMean, BroadcastProfileIsRecovered) {
  std::vector<double> p(g_aniso.nz);
  for (int k = 0; k < g_aniso.nz; ++k) p[k] = std::exp(0.1 * k) - 2.0;
  const auto m = horizontal_slice_mean(broadcast_profile(g_aniso, p));
  for (int k = 0; k < g_aniso.nz; ++k) EXPECT_NEAR(m[k], p[k], 1e-14);
}

TEST(SliceMean, MatchesDirectSummation) {
  const auto f = test::noise_field(g_aniso, 21);
  const auto m = horizontal_slice_mean(f);
  for (int k = 0; k < g_aniso.nz; ++k) {
    long double s = 0;
    for (int j = 0; j < g_aniso.ny; ++j)
      for (int i = 0; i < g_aniso.nx; ++i) s += f(k, j, i);
    EXPECT_NEAR(m[k], double(s / (g_aniso.nx * g_aniso.ny)), 1e-15);
  }
}

TEST(RemoveSliceMean, MeanFreeFieldUnchanged) {
  const auto f = test::random_field(g16, 2);
  EXPECT_LE(max_abs_diff(remove_horizontal_slice_mean(f), f), 1e-15);
}

TEST(RemoveSliceMean, ConstantBecomesZero) {
  EXPECT_LE(remove_horizontal_slice_mean(ScalarField(g16, 4.0)).max_abs(), 1e-15);
}

TEST(RemoveSliceMean, RandomFieldHasZeroMeansAndReconstructs) {
  const auto f = test::noise_field(g_aniso, 31);
  const auto r = remove_horizontal_slice_mean(f);
  for (double m : horizontal_slice_mean(r)) EXPECT_LE(std::abs(m), 1e-14);
  const auto back = r + broadcast_profile(g_aniso, horizontal_slice_mean(f));
  EXPECT_LE(max_abs_diff(back, f), 1e-15);
}

TEST(RemoveSliceMean, Projection) {
  const auto once = remove_horizontal_slice_mean(test::noise_field(g16, 41));
  EXPECT_LE(max_abs_diff(remove_horizontal_slice_mean(once), once), 1e-16);
}
