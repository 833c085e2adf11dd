#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace shlab;
using shlab::testing::random_field;
using shlab::testing::relative_l2;
using shlab::testing::sample;

TEST(Symbols, UnrescaledOperator) {
  EXPECT_EQ(symbol_L(1.0), 0.0);
  EXPECT_EQ(symbol_L(0.0), -1.0);
  EXPECT_EQ(symbol_L(2.0), -9.0);
  EXPECT_EQ(symbol_L(-2.0), -9.0);
}

TEST(Symbols, RescaledOperator) {
  EXPECT_NEAR(symbol_L_eps(1.0 / 0.1, 0.1), 0.0, 1e-12);
  EXPECT_NEAR(symbol_L_eps(0.0, 0.1), -100.0, 1e-12);
  EXPECT_NEAR(symbol_L_eps(2.0 / 0.1, 0.1), -900.0, 1e-9);
  EXPECT_NEAR(symbol_L_eps(2.0 / 0.1, 0.1), symbol_L(2.0) / (0.1 * 0.1), 1e-9);
}

TEST(Symbols, NonPositiveAndNeutralOnlyAtCarrier) {
  const auto cg = shlab::testing::default_grid(0.1);
  for (std::size_t m = 0; m < cg.grid.spectral_size(); ++m) {
    const double s = symbol_L_eps(cg.grid.wavenumber(m), cg.eps);
    EXPECT_LE(s, 0.0);
    if (m != cg.carrier_index) EXPECT_LT(s, 0.0) << m;
  }
  EXPECT_NEAR(symbol_L_eps(cg.carrier(), cg.eps), 0.0, 1e-12);
}

TEST(Symbols, SemigroupSymbolsInUnitInterval) {
  const auto op = DiagonalOperator::semigroup_L_eps(0.3, 0.1);
  for (double K : {0.0, 3.0, 10.0, 17.0, 40.0}) {
    EXPECT_GE(op(K), 0.0);
    EXPECT_LE(op(K), 1.0);
  }
  for (double K : {9.0, 10.0, 11.0}) EXPECT_GT(op(K), 0.0);
}

TEST(Grid, SnapsCarrierToExactMode) {
  const auto cg = CarrierGrid::snap(4096, two_pi * 25.6, 0.14);
  EXPECT_EQ(cg.carrier_index, 183u);
  EXPECT_NEAR(cg.eps, 25.6 / 183.0, 1e-15);
  EXPECT_NEAR(cg.carrier(), 1.0 / cg.eps, 1e-10);
  EXPECT_THROW(CarrierGrid::snap(64, two_pi * 25.6, 0.1), std::invalid_argument);
  EXPECT_THROW(Grid(63, 1.0), std::invalid_argument);
}

TEST(Grid, FromPeriodsKeepsCarrierIndex) {
  for (double eps : {0.2, 0.1, 0.05}) {
    const auto cg = shlab::testing::default_grid(eps);
    EXPECT_EQ(cg.carrier_index, 512u);
    EXPECT_DOUBLE_EQ(cg.eps, eps);
  }
}

TEST(Transforms, NormalisationAndRoundTrip) {
  const Grid g(64, 2.0 * two_pi);
  RealField c(g);
  for (auto& v : c.values) v = 3.0;
  EXPECT_NEAR(forward(c).coeffs[0].real(), 3.0, 1e-14);

  const auto cosine = sample(g, [](double x) { return 2.0 * std::cos(3.0 * x); });
  const auto s = forward(cosine);
  EXPECT_NEAR(std::abs(s.coeffs[6] - cplx(1.0, 0.0)), 0.0, 1e-14);

  NoiseStream rng(1, 2);
  const auto f = random_field(g, rng);
  EXPECT_LT(relative_l2(inverse(forward(f)), f), 1e-14);

  ComplexField z(g);
  for (auto& v : z.values) v = cplx(rng.normal(), rng.normal());
  const auto back = inverse(forward(z));
  double err = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) err = std::max(err, std::abs(back[j] - z[j]));
  EXPECT_LT(err, 1e-13);
}

TEST(Transforms, DealiasedCubeOfCosine) {
  // cos^3 x = 3/4 cos x + 1/4 cos 3x
  const Grid g(16, two_pi);
  const auto f = sample(g, [](double x) { return std::cos(7.0 * x); });
  RealDealiaser d(16, 2);
  std::vector<double> values;
  std::vector<cplx> coeffs;
  d.evaluate(forward(f).coeffs, values);
  for (auto& v : values) v = v * v * v;
  d.project(values, coeffs);
  // 3 * 7 = 21 lies beyond the 8-mode grid and is dropped; 0.75 cos 7x remains.
  for (std::size_t m = 0; m < coeffs.size(); ++m) {
    const double expect = m == 7 ? 0.375 : 0.0;
    EXPECT_NEAR(coeffs[m].real(), expect, 1e-14) << m;
    EXPECT_NEAR(coeffs[m].imag(), 0.0, 1e-14) << m;
  }
}

TEST(Operators, SemigroupAtZeroIsIdentity) {
  const Grid g(128, 8.0 * two_pi);
  NoiseStream rng(3, 0);
  const auto f = random_field(g, rng);
  EXPECT_LT(relative_l2(apply_diagonal(DiagonalOperator::semigroup_L(0.0), f), f), 1e-14);
}

TEST(Operators, SemigroupOnPureMode) {
  const Grid g(128, 8.0 * two_pi);
  const auto f = sample(g, [](double x) { return std::cos(2.0 * x); });
  for (double t : {0.01, 0.1, 0.5}) {
    const auto got = apply_diagonal(DiagonalOperator::semigroup_L(t), f);
    const auto want = std::exp(-9.0 * t) * f;
    EXPECT_LT(relative_l2(got, want), 1e-13);
  }
}

TEST(Operators, InverseCompositionOnBandLimitedField) {
  const Grid g(256, 16.0 * two_pi);
  NoiseStream rng(4, 0);
  const auto f = random_field(g, rng, [](double k) { return k > 0.0 && k < 4.0 && std::abs(k - 1.0) > 1e-9; });
  const auto L = DiagonalOperator::L();
  const auto back = apply_diagonal(L.inverse(), apply_diagonal(L, f));
  EXPECT_LT(relative_l2(back, f), 1e-12);
}

TEST(Operators, InverseRejectsCarrierContent) {
  const Grid g(64, 4.0 * two_pi);
  const auto f = sample(g, [](double x) { return std::cos(x); });
  EXPECT_THROW(apply_diagonal(DiagonalOperator::L().inverse(), f), std::domain_error);
  EXPECT_THROW(DiagonalOperator::L_eps(1.5), std::invalid_argument);
  EXPECT_THROW(DiagonalOperator::semigroup_L(-1.0), std::invalid_argument);
}

TEST(Operators, SemigroupProperty) {
  const auto cg = CarrierGrid::from_periods(1024, 64, 0.1);
  NoiseStream rng(5, 0);
  const auto f = random_field(cg.grid, rng, [&](double K) { return K < 30.0; });
  const double t1 = 0.013, t2 = 0.029;
  const auto a = apply_diagonal(DiagonalOperator::semigroup_L_eps(t1, cg.eps),
                                apply_diagonal(DiagonalOperator::semigroup_L_eps(t2, cg.eps), f));
  const auto b = apply_diagonal(DiagonalOperator::semigroup_L_eps(t1 + t2, cg.eps), f);
  EXPECT_LT(relative_l2(a, b), 1e-12);
}

TEST(Operators, DecayOffTheCarrierBand) {
  const double eps = 0.1, delta = default_delta, T = 0.02;
  const auto cg = CarrierGrid::from_periods(2048, 128, eps);
  const double edge = delta / eps + 1.0;
  const auto off = [&](double K) { return std::abs(K - 1.0 / eps) > edge; };
  NoiseStream rng(6, 0);
  const auto f = random_field(cg.grid, rng, off);
  double c = HUGE_VAL;
  for (std::size_t m = 0; m < cg.grid.spectral_size(); ++m) {
    const double K = cg.grid.wavenumber(m);
    if (!off(K)) continue;
    const double s = 1.0 - eps * eps * K * K;
    c = std::min(c, s * s);
  }
  const auto g = apply_diagonal(DiagonalOperator::semigroup_L_eps(T, eps), f);
  EXPECT_LE(l2_norm(g), std::exp(-c * T / (eps * eps)) * l2_norm(f) * (1.0 + 1e-12));
}

TEST(Operators, RealInputStaysReal) {
  const Grid g(128, 8.0 * two_pi);
  NoiseStream rng(7, 0);
  const auto f = random_field(g, rng);
  ComplexField z(g);
  for (std::size_t j = 0; j < g.size(); ++j) z[j] = f[j];
  const auto out = apply_diagonal(DiagonalOperator::semigroup_L(0.2), z);
  double imag = 0.0;
  for (const auto& v : out.values) imag = std::max(imag, std::abs(v.imag()));
  EXPECT_LE(imag, 1e-12 * l2_norm(f));
}

TEST(Operators, ScaledInverseOnMeanAndHarmonicBands) {
  const double eps = 0.1;
  const auto cg = shlab::testing::default_grid(eps);
  const auto p0 = make_kernel(Band::P0, default_delta, eps, cg.grid);
  const auto p1 = make_kernel(Band::P1, default_delta, eps, cg.grid);
  const auto p2 = make_kernel(Band::P2, default_delta, eps, cg.grid);

  RealField one(cg.grid);
  for (auto& v : one.values) v = 1.0;
  EXPECT_LT(relative_l2(inv_Leps_scaled_on_band(one, eps, p0), -1.0 * one), 1e-13);

  const auto c2 = sample(cg.grid, [&](double X) { return std::cos(2.0 * X / eps); });
  EXPECT_LT(relative_l2(inv_Leps_scaled_on_band(c2, eps, p2), (-1.0 / 9.0) * c2), 1e-12);

  const auto c1 = sample(cg.grid, [&](double X) { return std::cos(X / eps); });
  EXPECT_LT(l2_norm(inv_Leps_scaled_on_band(c1, eps, p0)), 1e-12);
  EXPECT_THROW(inv_Leps_scaled_on_band(c1, eps, p1), std::invalid_argument);
}
