#include <gtest/gtest.h>

#include "phm/dynamics.hpp"
#include "test_util.hpp"

using namespace phm;
using phm::test::max_abs_diff;
using phm::test::two_pi;

namespace {

const GridSpec g{1.0, 16, 16, 16};
const ModelParams p{1.0, 1.0};

ThetaEtaState random_state(std::uint64_t seed, double amp = 0.1) {
  InitialParams ip;
  ip.seed = seed;
  ip.amplitude = amp;
  return make_initial(InitialKind::random_bandlimited, g, p, ip);
}

double tendency_max(const Tendency& t) { return std::max(t.dtheta_dt.max_abs(), t.deta_dt.max_abs()); }

double state_distance(const ThetaEtaState& a, const ThetaEtaState& b) {
  return lp_norm(a.theta - b.theta, 2.0) + lp_norm(a.eta - b.eta, 2.0);
}

}  // namespace

TEST(NonlinearRhs, ZeroState) {
  EXPECT_EQ(tendency_max(nonlinear_rhs({ScalarField(g), ScalarField(g)}, p)), 0.0);
}

TEST(NonlinearRhs, VerticalProfileIsPureAdvection) {
  const ModelParams pu{1.0, 0.7};
  const auto f = ScalarField::sample(g, [](double, double, double z) { return std::sin(two_pi * 2 * z) + 0.3 * std::cos(two_pi * z); });
  const auto df = ScalarField::sample(g, [](double, double, double z) {
    return two_pi * 2 * std::cos(two_pi * 2 * z) - 0.3 * two_pi * std::sin(two_pi * z);
  });
  const auto t = nonlinear_rhs({f, f}, pu);
  EXPECT_LE(max_abs_diff(t.dtheta_dt, 0.7 * df), 1e-11);
  EXPECT_LE(max_abs_diff(t.deta_dt, (-0.7) * df), 1e-11);
}

TEST(NonlinearRhs, EigenSteadyTendencyVanishes) {
  // omega = A cos(2 pi k x): v = A/(2 pi k) sin(2 pi k x), u = 0, so
  // (u . grad) omega = u omega_x + v omega_y = 0 identically.
  InitialParams ip;
  ip.amplitude = 0.8;
  ip.mode = 2;
  const auto s = make_initial(InitialKind::eigen_steady, g, p, ip);
  const auto omega = vorticity_of(s, p);
  const auto v = ScalarField::sample(g, [](double x, double, double) { return 0.8 / (two_pi * 2) * std::sin(two_pi * 2 * x); });
  const auto vel = velocity_from_vorticity(omega);
  EXPECT_LE(max_abs_diff(vel.v, v), 1e-14);
  EXPECT_LE(tendency_max(nonlinear_rhs(s, p)), 1e-10 * s.theta.max_abs());
}

TEST(NonlinearRhs, GridMismatchThrows) {
  EXPECT_THROW(nonlinear_rhs({ScalarField(g), ScalarField(GridSpec{1.0, 8, 8, 8})}, p), GridMismatch);
}

TEST(NonlinearRhs, MatchesPhysicalSpaceOracle) {
  // independent evaluation: dealias the factors, differentiate term by term,
  // multiply on the grid, dealias the product
  const auto s = random_state(3, 0.5);
  auto D = [](const ScalarField& f) { return transform_inverse(dealias_23(transform_forward(f))); };
  const auto th = D(s.theta), et = D(s.eta);
  const auto omega = (1.0 / (2.0 * p.L)) * (th - et);
  const auto vel = velocity_from_vorticity(omega);
  auto deriv = [](const ScalarField& f, Axis a) { return transform_inverse(spectral_derivative(transform_forward(f), a)); };
  ScalarField adv_t(g), adv_e(g);
  const auto tx = deriv(th, Axis::x), ty = deriv(th, Axis::y), tz = deriv(th, Axis::z);
  const auto ex = deriv(et, Axis::x), ey = deriv(et, Axis::y), ez = deriv(et, Axis::z);
  for (std::size_t n = 0; n < g.size(); ++n) {
    adv_t[n] = -(vel.u[n] * tx[n] + vel.v[n] * ty[n]) + p.U0 * tz[n];
    adv_e[n] = -(vel.u[n] * ex[n] + vel.v[n] * ey[n]) - p.U0 * ez[n];
  }
  const auto t = nonlinear_rhs(s, p);
  EXPECT_LE(max_abs_diff(t.dtheta_dt, D(adv_t)), 1e-12);
  EXPECT_LE(max_abs_diff(t.deta_dt, D(adv_e)), 1e-12);
}

TEST(NonlinearRhs, AdvectionHasZeroSliceMean) {
  const ModelParams p0{1.0, 0.0};
  auto s = random_state(4, 0.5);
  s.theta += ScalarField::sample(g, [](double, double, double z) { return std::cos(two_pi * z); });
  const auto t = nonlinear_rhs(s, p0);
  EXPECT_LE(max_abs_profile(horizontal_slice_mean(t.dtheta_dt)), 1e-12);
  EXPECT_LE(max_abs_profile(horizontal_slice_mean(t.deta_dt)), 1e-12);
}

TEST(LinearizedRhs, ZeroVelocityIsVerticalAdvection) {
  const auto s = random_state(5);
  const auto t = linearized_rhs(s, {ScalarField(g), ScalarField(g)}, p);
  auto dz = [](const ScalarField& f) { return transform_inverse(spectral_derivative(transform_forward(f), Axis::z)); };
  EXPECT_LE(max_abs_diff(t.dtheta_dt, dz(s.theta)), 1e-13);
  EXPECT_LE(max_abs_diff(t.deta_dt, (-1.0) * dz(s.eta)), 1e-13);
}

TEST(LinearizedRhs, SelfConsistentVelocityEqualsNonlinear) {
  const auto s = random_state(6, 0.5);
  const auto vel = velocity_from_vorticity(vorticity_of(s, p));
  const auto a = linearized_rhs(s, vel, p), b = nonlinear_rhs(s, p);
  EXPECT_LE(max_abs_diff(a.dtheta_dt, b.dtheta_dt), 1e-13);
  EXPECT_LE(max_abs_diff(a.deta_dt, b.deta_dt), 1e-13);
}

TEST(LinearizedRhs, LinearInState) {
  const auto vel = velocity_from_vorticity(vorticity_of(random_state(7, 0.5), p));
  const auto s1 = random_state(8), s2 = random_state(9);
  const ThetaEtaState mix{2.0 * s1.theta + (-3.0) * s2.theta, 2.0 * s1.eta + (-3.0) * s2.eta};
  const auto t = linearized_rhs(mix, vel, p);
  const auto t1 = linearized_rhs(s1, vel, p), t2 = linearized_rhs(s2, vel, p);
  EXPECT_LE(max_abs_diff(t.dtheta_dt, 2.0 * t1.dtheta_dt + (-3.0) * t2.dtheta_dt), 1e-12);
  EXPECT_LE(max_abs_diff(t.deta_dt, 2.0 * t1.deta_dt + (-3.0) * t2.deta_dt), 1e-12);
}

TEST(Rk4Step, ZeroStateStaysZero) {
  const ThetaEtaState z{ScalarField(g), ScalarField(g)};
  const auto out = rk4_step(z, p, nonlinear_provider(p), 0.0, 1e-2);
  EXPECT_EQ(out.theta.max_abs(), 0.0);
  EXPECT_EQ(out.eta.max_abs(), 0.0);
}

TEST(Rk4Step, CflViolationPolicy) {
  const auto s = random_state(10);
  // dz / U0 = 1/16
  EXPECT_THROW(rk4_step(s, p, nonlinear_provider(p), 0.0, 0.1, CflPolicy::error), NumericalAbort);
  EXPECT_NO_THROW(rk4_step(s, p, nonlinear_provider(p), 0.0, 0.01, CflPolicy::error));
}

TEST(Rk4Step, FourthOrderOnVerticalWave) {
  // theta(t) = f(z + U0 t) exactly; single-step local error is O(dt^5)
  InitialParams ip;
  ip.amplitude = 1.0;
  ip.mode = 2;
  const auto s = make_initial(InitialKind::vertical_wave, g, p, ip);
  std::vector<double> err;
  for (double dt : {4e-3, 2e-3, 1e-3}) {
    ThetaEtaState st = s;
    const int n = int(std::lround(0.2 / dt));
    for (int i = 0; i < n; ++i) st = rk4_step(st, p, nonlinear_provider(p), i * dt, dt);
    err.push_back(lp_norm(st.theta - vertical_shift_exact(s.theta, 0.2), 2.0));
  }
  EXPECT_GE(std::log2(err[0] / err[1]), 3.7);
  EXPECT_GE(std::log2(err[1] / err[2]), 3.7);
}

TEST(VerticalShift, IdentityCases) {
  const auto f = test::random_field(g, 11, 5);
  EXPECT_LE(max_abs_diff(vertical_shift_exact(f, 0.0), f), 1e-14);
  EXPECT_LE(max_abs_diff(vertical_shift_exact(f, g.L), f), 1e-14);
}

TEST(VerticalShift, ShiftByOneCellOfHarmonic) {
  const auto f = ScalarField::sample(g, [](double, double, double z) { return std::sin(two_pi * z); });
  const auto exact = ScalarField::sample(g, [](double, double, double z) { return std::sin(two_pi * (z + 1.0 / 16)); });
  EXPECT_LE(max_abs_diff(vertical_shift_exact(f, g.dz()), exact), 1e-13);
  // a whole cell is an index roll of a noise field
  const auto n = test::noise_field(g, 12);
  const auto sh = vertical_shift_exact(n, 3 * g.dz());
  double d = 0.0;
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) d = std::max(d, std::abs(sh(k, j, i) - n((k + 3) % g.nz, j, i)));
  EXPECT_LE(d, 1e-13);
}

TEST(CflDt, Cases) {
  const ThetaEtaState z{ScalarField(GridSpec{1.0, 32, 32, 32}), ScalarField(GridSpec{1.0, 32, 32, 32})};
  EXPECT_TRUE(std::isinf(cfl_dt(z, ModelParams{1.0, 0.0}, 0.5)));
  EXPECT_DOUBLE_EQ(cfl_dt(z, ModelParams{1.0, 1.0}, 0.5), 0.5 / 32);
  EXPECT_DOUBLE_EQ(cfl_dt(z, ModelParams{1.0, 2.0}, 0.5), 0.25 / 32);
  EXPECT_THROW(cfl_dt(z, ModelParams{1.0, 1.0}, 0.0), ConfigError);
  EXPECT_THROW(cfl_dt(z, ModelParams{1.0, 1.0}, 1.5), ConfigError);
}

TEST(CflDt, HorizontalSpeedBound) {
  // eigen_steady: max |v| = A / (2 pi k), dx = 1/16
  InitialParams ip;
  ip.amplitude = 2.0;
  ip.mode = 1;
  const ModelParams p0{1.0, 0.0};
  const auto s = make_initial(InitialKind::eigen_steady, g, p0, ip);
  EXPECT_NEAR(cfl_dt(s, p0, 1.0), (1.0 / 16) / (2.0 / two_pi), 1e-12);
}

TEST(Advance, ZeroStepsReturnsInitial) {
  const auto s = random_state(13);
  const auto tr = advance(s, p, TimeGrid{0.0, 1e-3, 0});
  ASSERT_EQ(tr.size(), 1u);
  EXPECT_EQ(max_abs_diff(tr.states[0].theta, s.theta), 0.0);
}

TEST(Advance, StridedStorageAndHooks) {
  const auto s = random_state(14);
  std::vector<std::size_t> seen;
  StepHook h = [&](std::size_t step, double, const ThetaEtaState&, const DiagnosticsRecord& r) {
    EXPECT_EQ(r.step, step);
    seen.push_back(step);
  };
  AdvanceOptions opt;
  opt.stride = 3;
  opt.hook_stride = 4;
  const auto tr = advance(s, p, TimeGrid{0.0, 1e-3, 10}, std::span<const StepHook>(&h, 1), opt);
  EXPECT_EQ(tr.nodes, (std::vector<std::size_t>{0, 3, 6, 9, 10}));
  EXPECT_EQ(seen, (std::vector<std::size_t>{0, 4, 8, 10}));
}

TEST(Advance, EigenSteadyHundredSteps) {
  InitialParams ip;
  ip.amplitude = 1.0;
  ip.mode = 1;
  const auto s = make_initial(InitialKind::eigen_steady, g, p, ip);
  AdvanceOptions opt;
  opt.stride = 0;
  const auto tr = advance(s, p, TimeGrid{0.0, 1e-3, 100}, {}, opt);
  EXPECT_LE(state_distance(tr.states.back(), s), 1e-8 * (lp_norm(s.theta, 2.0) + lp_norm(s.eta, 2.0)));
}

TEST(Advance, DalembertVerticalWave) {
  InitialParams ip;
  ip.amplitude = 1.0;
  const auto s = make_initial(InitialKind::vertical_wave, g, p, ip);
  AdvanceOptions opt;
  opt.stride = 0;
  const auto fin = advance(s, p, TimeGrid{0.0, 1e-3, 1000}, {}, opt).states.back();
  const auto w = 0.5 * (fin.theta + fin.eta);
  const auto exact = ScalarField::sample(g, [](double, double, double z) { return 0.5 * (std::sin(two_pi * (z + 1)) + std::sin(two_pi * (z - 1))); });
  EXPECT_LE(lp_norm(w - exact, 2.0), 1e-8);
}

TEST(Advance, ConservesL2AndSliceMeans) {
  const auto s = random_state(15, 0.3);
  ConservationTracker tr;
  StepHook h = [&](std::size_t, double, const ThetaEtaState&, const DiagnosticsRecord& r) {
    auto rr = r;
    tr.update(rr);
  };
  AdvanceOptions opt;
  opt.store_states = false;
  advance(s, p, TimeGrid{0.0, 1e-3, 400}, std::span<const StepHook>(&h, 1), opt);
  EXPECT_LE(tr.max_drift_theta()[1], 1e-8);
  EXPECT_LE(tr.max_drift_eta()[1], 1e-8);
  EXPECT_LE(tr.max_drift_energy(), 1e-8);
  EXPECT_LE(tr.max_slice_mean(), 1e-11);
}

TEST(Advance, MeanProfileIsTransported) {
  InitialParams ip;
  ip.seed = 16;
  ip.amplitude = 0.3;
  ip.mean_amplitude = 0.25;
  const auto s = make_initial(InitialKind::mean_profile, g, p, ip);
  AdvanceOptions opt;
  opt.stride = 0;
  const auto fin = advance(s, p, TimeGrid{0.0, 1e-3, 300}, {}, opt).states.back();
  const auto m = horizontal_slice_mean(fin.theta);
  for (int k = 0; k < g.nz; ++k) EXPECT_NEAR(m[k], 0.25 * std::sin(two_pi * (k / 16.0 + 0.3)), 1e-10);
}

TEST(Advance, NanAbortNamesStep) {
  auto s = random_state(17);
  s.theta[5] = std::numeric_limits<double>::quiet_NaN();
  try {
    advance(s, p, TimeGrid{0.0, 1e-3, 3});
    FAIL() << "expected NumericalAbort";
  } catch (const NumericalAbort& e) {
    EXPECT_EQ(e.step(), 1u);
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos);
  }
}
