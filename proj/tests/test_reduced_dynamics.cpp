#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support.hpp"

using namespace shlab;
using shlab::testing::sample;

namespace {

ComplexField constant(const Grid& g, cplx a) {
  ComplexField A(g);
  for (auto& v : A.values) v = a;
  return A;
}

ModelParams reduced_params(Variant variant, double eps, double dt) {
  ModelParams p;
  p.variant = variant;
  p.eps = eps;
  p.dt = dt;
  return p;
}

/// Carrier-mode coefficient of the reduced drift at w = 2a cos(X/eps), as the
/// amplitude rate dA/dT.
double carrier_rate(ReducedStepper& r, const CarrierGrid& cg, double a) {
  const auto w = sample(cg.grid, [&](double X) { return 2.0 * a * std::cos(X / cg.eps); });
  std::vector<cplx> out;
  r.nonlinearity(forward(w).coeffs, out);
  return out[cg.carrier_index].real();
}

}  // namespace

TEST(GlCoefficients, CubicMultiplier) {
  EXPECT_DOUBLE_EQ(gl_coefficients(0.0).cubic, -3.0);
  EXPECT_NEAR(gl_coefficients(std::sqrt(27.0 / 38.0)).cubic, 0.0, 1e-14);
  EXPECT_NEAR(gl_coefficients(1.0).cubic, 11.0 / 9.0, 1e-14);
  EXPECT_DOUBLE_EQ(gl_coefficients(0.3).diffusion, 4.0);
}

TEST(GlCoefficients, QuinticMultipliers) {
  EXPECT_NEAR(gl5_coefficients(0.0, 1.0).cubic, 3.0, 1e-14);
  EXPECT_DOUBLE_EQ(gl5_coefficients(0.0, 1.0).quintic, -10.0);
  EXPECT_EQ(gl5_coefficients(0.0, 0.0).cubic, 0.0);
  EXPECT_NEAR(gl5_coefficients(3.0, -1.0).cubic, 35.0, 1e-12);
}

TEST(Gl, RiccatiDecayOfConstantMode) {
  const Grid g(16, 10.0);
  const cplx a0(0.6, 0.3);
  const double dt = 1e-4, T = 1.0;
  const auto run = simulate_gl(constant(g, a0), gl_coefficients(0.0), dt, T, NoiseConfig{1, 0.0, 0});
  ASSERT_EQ(run.status, RunStatus::completed);
  const double m0 = std::norm(a0);
  for (std::size_t i = 0; i < run.times.size(); i += 1000) {
    const double want = m0 / (1.0 + 6.0 * m0 * run.times[i]);
    EXPECT_NEAR(run.sup[i] * run.sup[i] / want, 1.0, 1e-4) << run.times[i];
  }
  EXPECT_NEAR(std::arg(run.final[3]), std::arg(a0), 1e-12);
}

TEST(Gl, ZeroStaysZero) {
  const Grid g(16, 10.0);
  const auto run = simulate_gl(ComplexField(g), gl_coefficients(0.5), 1e-3, 0.1, NoiseConfig{1, 0.0, 0});
  EXPECT_EQ(sup_norm(run.final), 0.0);
}

TEST(Gl, UnstableCubicBlowsUpOnTime) {
  const Grid g(16, 10.0);
  const double a0 = 0.5, dt = 1e-4;
  const auto c = gl_coefficients(1.0);
  const auto run = simulate_gl(constant(g, a0), c, dt, 5.0, NoiseConfig{1, 0.0, 0});
  ASSERT_EQ(run.status, RunStatus::blowup_stopped);
  const double t_star = 1.0 / (2.0 * c.cubic * a0 * a0);
  EXPECT_NEAR(run.stop_time / t_star, 1.0, 0.1);
  for (std::size_t i = 1; i < run.sup.size(); ++i) EXPECT_GE(run.sup[i], run.sup[i - 1]);
}

TEST(Gl, NoiseVarianceFollowsHeatSymbol) {
  const Grid g(32, 12.0);
  GLCoefficients c = gl_coefficients(0.0);
  c.noise_intensity = 2.0;
  GlStepper st(g, c, 0.01);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double K = g.signed_wavenumber(j);
    EXPECT_NEAR(st.noise_variance(j), ou_variance(-4.0 * K * K, 0.01, 4.0 / g.length()), 1e-15);
  }
}

TEST(Gl, StepValidatesGuard) {
  const Grid g(16, 10.0);
  NoiseStream rng(1, 0);
  EXPECT_THROW(step_gl(constant(g, 2.0), gl_coefficients(0.0), 1e-3, rng, 1.0), std::invalid_argument);
  const auto next = step_gl(constant(g, 0.5), GLCoefficients{4.0, -3.0, 0.0, 0.0}, 1e-3, rng);
  EXPECT_NEAR(std::abs(next[0]), 0.5 * (1.0 - 0.75e-3), 1e-12);
}

TEST(Reduced, CubicCarrierDriftOracle) {
  const auto cg = CarrierGrid::from_periods(1024, 64, 0.1);
  for (double nu : {0.0, 0.5, 0.9}) {
    auto p = reduced_params(Variant::cubic, cg.eps, 1e-3);
    p.nu = nu;
    ReducedStepper r(cg.grid, p);
    const double a = 0.3;
    const double want = (2.0 * nu * nu * (2.0 + 1.0 / 9.0) - 3.0) * a * a * a;
    EXPECT_NEAR(carrier_rate(r, cg, a), want, 1e-13) << nu;
  }
}

TEST(Reduced, QuinticCarrierDriftOracle) {
  const auto cg = CarrierGrid::from_periods(1024, 64, 0.1);
  for (auto [nu2, nu3] : {std::pair{0.0, 0.0}, std::pair{0.0, 0.2}, std::pair{1.0, 0.0}}) {
    auto p = reduced_params(Variant::quintic, cg.eps, 1e-3);
    p.nu2 = nu2;
    p.nu3 = nu3;
    ReducedStepper r(cg.grid, p);
    const double a = 0.4;
    const double want = (3.0 * nu3 + 38.0 / 9.0 * nu2 * nu2) * a * a * a - 10.0 * std::pow(a, 5);
    EXPECT_NEAR(carrier_rate(r, cg, a), want, 1e-13);
  }
}

TEST(Reduced, SingleModeDampingMatchesShOracle) {
  const auto cg = CarrierGrid::from_periods(256, 16, 0.1);
  const double a = 0.05, dt = 1e-3;
  const auto w = sample(cg.grid, [&](double X) { return 2.0 * a * std::cos(X / cg.eps); });
  NoiseStream rng(1, 0);
  const auto next = step_reduced(w, cg.eps, 0.0, dt, rng, nullptr, default_delta, 0.0);
  const double ratio = std::abs(forward(next).coeffs[cg.carrier_index]) / std::abs(forward(w).coeffs[cg.carrier_index]);
  EXPECT_NEAR(ratio, 1.0 - 3.0 * a * a * dt, 1e-13);
  const auto zero = step_reduced(RealField(cg.grid), cg.eps, 0.5, dt, rng, nullptr, default_delta, 0.0);
  EXPECT_EQ(sup_norm(zero), 0.0);
  const auto q0 = quintic_reduced_step(RealField(cg.grid), cg.eps, 0.0, 0.1, dt, rng, nullptr, default_delta, 0.0);
  EXPECT_EQ(sup_norm(q0), 0.0);
}

TEST(Reduced, SharedIncrementIsBandProjected) {
  const auto cg = CarrierGrid::from_periods(512, 32, 0.1);
  const auto p1 = make_kernel(Band::P1, default_delta, cg.eps, cg.grid);
  const OuIncrements inc(cg.grid, [&](double K) { return symbol_L_eps(K, cg.eps); }, 1e-3);
  NoiseStream rng(2, 0);
  std::vector<cplx> xi;
  inc.draw(rng, xi);
  const auto next = step_reduced(RealField(cg.grid), cg.eps, 0.5, 1e-3, rng, &xi);
  RealSpectrum want(cg.grid);
  for (std::size_t m = 0; m < xi.size(); ++m) want.coeffs[m] = p1.weights()[m] * xi[m];
  EXPECT_LT(sup_norm(next - inverse(want)), 1e-14);
  std::vector<cplx> short_xi(3);
  EXPECT_THROW(step_reduced(RealField(cg.grid), cg.eps, 0.5, 1e-3, rng, &short_xi), std::invalid_argument);
}

TEST(Reduced, RejectsOffBandState) {
  const auto cg = CarrierGrid::from_periods(256, 16, 0.1);
  ReducedStepper r(cg.grid, reduced_params(Variant::cubic, cg.eps, 1e-3));
  const auto off = sample(cg.grid, [&](double X) { return std::cos(2.0 * X / cg.eps); });
  EXPECT_THROW(r.set_state(off), std::invalid_argument);
}

TEST(Reduced, DemodulatedDriftApproachesGinzburgLandau) {
  // demodulate(P1 drift of a modulated carrier) -> cubic multiplier |A|^2 A as eps -> 0.
  const double nu = 0.5;
  const double mult = gl_coefficients(nu).cubic;
  std::vector<double> errors;
  for (double eps : {0.2, 0.1, 0.05}) {
    const auto cg = StudyGrid{}.make(eps);
    auto p = reduced_params(Variant::cubic, cg.eps, 1e-3);
    p.nu = nu;
    ReducedStepper r(cg.grid, p);
    NoiseStream rng(3, 0);
    const auto A = random_amplitude(cg.grid, 0.5, 0.5, rng);
    std::vector<cplx> drift;
    r.nonlinearity(forward(modulate(A, cg.eps)).coeffs, drift);
    RealSpectrum s(cg.grid);
    s.coeffs = drift;
    const auto got = demodulate(inverse(s), cg.eps);
    double err = 0.0, scale = 0.0;
    for (std::size_t j = 0; j < A.size(); ++j) {
      const cplx want = mult * std::norm(A[j]) * A[j];
      err = std::max(err, std::abs(got[j] - want));
      scale = std::max(scale, std::abs(want));
    }
    errors.push_back(err / scale);
  }
  EXPECT_LT(errors.back(), 0.05);
  EXPECT_LT(errors[2], errors[0]);
}

TEST(Reduced, LinearSymbolNearCarrierTendsToHeatSymbol) {
  for (double K : {0.25, 0.5, 1.0}) {
    const double e1 = std::abs(symbol_L_eps(1.0 / 0.1 + K, 0.1) + 4.0 * K * K);
    const double e2 = std::abs(symbol_L_eps(1.0 / 0.05 + K, 0.05) + 4.0 * K * K);
    EXPECT_NEAR(e1 / e2, 2.0, 0.1);
  }
}

TEST(GlNoise, CouplingReproducesGlIncrementLaw) {
  const auto cg = CarrierGrid::from_periods(256, 16, 0.1);
  ModelParams p = reduced_params(Variant::cubic, cg.eps, 1e-2);
  ShStepper sh(cg.grid, p);
  GlStepper gl(cg.grid, gl_coefficients(0.0), p.dt);
  const auto p1 = make_kernel(Band::P1, default_delta, cg.eps, cg.grid);
  const GlNoiseCoupling coupling(sh.increments(), gl, p1, cg.carrier_index);
  NoiseStream rng(4, 0), aux(4, 1);
  const std::size_t n = cg.grid.size();
  std::vector<double> var(n, 0.0);
  std::vector<cplx> xi, gxi;
  const int draws = 20000;
  for (int d = 0; d < draws; ++d) {
    sh.increments().draw(rng, xi);
    coupling.map(xi, aux, gxi);
    for (std::size_t j = 0; j < n; ++j) var[j] += std::norm(gxi[j]);
  }
  for (std::size_t j = 0; j < n; ++j) {
    const long m = cg.grid.signed_index(j) + static_cast<long>(cg.carrier_index);
    const double q = (m > 0 && m < static_cast<long>(n / 2)) ? p1.weights()[static_cast<std::size_t>(m)] : 0.0;
    const double want = q * q * gl.noise_variance(j);
    if (want == 0.0) {
      EXPECT_EQ(var[j], 0.0);
      continue;
    }
    EXPECT_NEAR(var[j] / draws / want, 1.0, 0.05) << j;
  }
}
