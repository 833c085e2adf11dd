#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support.hpp"

using namespace shlab;

namespace {

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Rng, PhiloxKnownAnswers) {
  const auto zero = philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(zero, (std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  const auto ones = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(ones, (std::array<std::uint32_t, 4>{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  const auto pi = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(pi, (std::array<std::uint32_t, 4>{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Rng, ReproducibleAndSeekable) {
  NoiseStream a(42, 7), b(42, 7), c(42, 8);
  std::vector<double> xs;
  for (int i = 0; i < 100; ++i) {
    xs.push_back(a.normal());
    EXPECT_EQ(xs.back(), b.normal());
  }
  EXPECT_NE(xs[0], c.normal());
  NoiseStream e(42, 7);
  e.seek(5);
  EXPECT_EQ(e.normal(), xs[20]);
}

TEST(Rng, StandardNormalMoments) {
  NoiseStream rng(3, 3);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(WhiteIncrement, PointVarianceAndIndependence) {
  const Grid g(16, 3.0);
  const double dt = 1e-3;
  NoiseStream r1(1, 100), r2(1, 101);
  std::vector<double> a, b;
  double s2 = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto x = white_increment(g, dt, r1);
    const auto y = white_increment(g, dt, r2);
    for (double v : x.values) s2 += v * v;
    a.push_back(x[3]);
    b.push_back(y[3]);
  }
  const double var = s2 / (draws * 16.0);
  EXPECT_NEAR(var / (dt / g.dx()), 1.0, 0.05);
  EXPECT_LT(std::abs(correlation(a, b)), 0.05);
}

TEST(WhiteIncrement, ComplexVarianceAndPartsIndependent) {
  const Grid g(16, 3.0);
  const double dt = 1e-3;
  NoiseStream rng(2, 0);
  std::vector<double> re, im;
  double s2 = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto z = complex_white_increment(g, dt, rng);
    for (const auto& v : z.values) s2 += std::norm(v);
    re.push_back(z[5].real());
    im.push_back(z[5].imag());
  }
  EXPECT_NEAR(s2 / (draws * 16.0) / (dt / g.dx()), 1.0, 0.05);
  EXPECT_LT(std::abs(correlation(re, im)), 0.05);
}

TEST(OrnsteinUhlenbeck, ClosedForms) {
  EXPECT_NEAR(ou_variance(-1.0, 1e3, 2.0), 1.0, 1e-12);
  EXPECT_NEAR(ou_variance(0.0, 0.3, 2.0), 0.6, 1e-15);
  EXPECT_NEAR(ou_variance(-2.0, 0.5, 1.0), (1.0 - std::exp(-2.0)) / 4.0, 1e-15);
  EXPECT_NEAR(ou_covariance(-2.0, -2.0, 0.5, 1.0), ou_variance(-2.0, 0.5, 1.0), 1e-15);
  EXPECT_NEAR(ou_covariance(-1.0, -3.0, 0.5, 1.0), (1.0 - std::exp(-2.0)) / 4.0, 1e-15);
}

TEST(OrnsteinUhlenbeck, StationaryVarianceMonteCarlo) {
  const double lambda = -9.0, unit = 1.0, dt = 0.5;
  NoiseStream rng(4, 0);
  cplx z{};
  double s2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < 50; ++i) z = ou_mode_step(lambda, z, dt, unit, rng);
  for (int i = 0; i < n; ++i) {
    z = ou_mode_step(lambda, z, dt, unit, rng);
    s2 += std::norm(z);
  }
  EXPECT_NEAR(s2 / n / (unit / 18.0), 1.0, 0.05);
  EXPECT_THROW(ou_mode_step(1.0, z, dt, unit, rng), std::invalid_argument);
}

TEST(OrnsteinUhlenbeck, ModeVarianceAtFixedTime) {
  const double eps = 0.2, dt = 0.01, T = 0.05;
  const auto cg = CarrierGrid::from_periods(32, 4, eps);
  const OuIncrements inc(cg.grid, [&](double K) { return symbol_L_eps(K, eps); }, dt);
  const double unit = 1.0 / cg.grid.length();
  const std::size_t modes = cg.grid.spectral_size();
  std::vector<double> acc(modes, 0.0);
  const int samples = 10000;
  NoiseStream rng(5, 0);
  std::vector<cplx> scratch;
  for (int s = 0; s < samples; ++s) {
    OUState st(cg.grid);
    for (int k = 0; k < 5; ++k) st.advance(inc, rng, scratch);
    for (std::size_t m = 0; m < modes; ++m) acc[m] += std::norm(st.coeffs.coeffs[m]);
  }
  for (std::size_t m = 1; m + 1 < modes; ++m) {
    const double lambda = symbol_L_eps(cg.grid.wavenumber(m), eps);
    const double want = ou_variance(lambda, T, unit);
    EXPECT_NEAR(acc[m] / samples / want, 1.0, 0.05) << m;
  }
}

TEST(OrnsteinUhlenbeck, IncrementsRespectIntensity) {
  const auto cg = CarrierGrid::from_periods(32, 4, 0.2);
  const auto sym = [](double K) { return symbol_L_eps(K, 0.2); };
  const OuIncrements unit(cg.grid, sym, 0.01, 1.0), doubled(cg.grid, sym, 0.01, 2.0);
  for (std::size_t m = 0; m < cg.grid.spectral_size(); ++m)
    EXPECT_NEAR(doubled.variance(m), 4.0 * unit.variance(m), 1e-15);
}

TEST(StochasticConvolution, ReproducibleAndStartsAtZero) {
  const auto cg = CarrierGrid::from_periods(64, 8, 0.2);
  NoiseConfig cfg{9, 1.0, 3};
  const auto a = stochastic_convolution_path(cg.grid, cg.eps, 0.05, 0.01, cfg);
  const auto b = stochastic_convolution_path(cg.grid, cg.eps, 0.05, 0.01, cfg);
  ASSERT_EQ(a.size(), 6u);
  EXPECT_EQ(sup_norm(a.front()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].values, b[i].values);
  cfg.stream_id = 4;
  const auto c = stochastic_convolution_path(cg.grid, cg.eps, 0.05, 0.01, cfg);
  EXPECT_NE(a.back().values, c.back().values);
}

TEST(StochasticConvolution, CarrierBandMatchesComplexHeatNoise) {
  // Demodulated P1 band of W_{L_eps} against the OU law of the complex heat
  // equation dA = 4 A_XX dT + deta, binned in K.
  const double eps = 0.05, T = 1.0, dt = 0.1;
  const auto cg = CarrierGrid::from_periods(2048, 128, eps);
  const auto p1 = make_kernel(Band::P1, default_delta, eps, cg.grid);
  const OuIncrements inc(cg.grid, [&](double K) { return symbol_L_eps(K, eps); }, dt);
  const double unit = 1.0 / cg.grid.length();
  const std::size_t n = cg.grid.size();
  const double k_max = 1.0;
  std::vector<double> sum(n, 0.0);
  NoiseStream rng(6, 0);
  std::vector<cplx> scratch;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) {
    OUState st(cg.grid);
    for (int k = 0; k < 10; ++k) st.advance(inc, rng, scratch);
    project(st.coeffs, p1);
    const auto A = forward(demodulate(inverse(st.coeffs), eps));
    for (std::size_t j = 0; j < n; ++j) sum[j] += std::norm(A.coeffs[j]);
  }
  const int bins = 4;
  std::vector<double> got(bins, 0.0), want(bins, 0.0);
  for (std::size_t j = 1; j < n; ++j) {
    const double K = cg.grid.signed_wavenumber(j);
    if (std::abs(K) > k_max) continue;
    const int b = std::min(bins - 1, static_cast<int>(std::abs(K) / k_max * bins));
    got[b] += sum[j] / seeds;
    want[b] += ou_variance(-4.0 * K * K, T, unit);
  }
  for (int b = 0; b < bins; ++b) EXPECT_NEAR(got[b] / want[b], 1.0, 0.1) << b;
}
