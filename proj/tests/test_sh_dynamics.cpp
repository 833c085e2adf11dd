#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "support.hpp"

using namespace shlab;
using shlab::testing::random_field;
using shlab::testing::relative_l2;
using shlab::testing::sample;

namespace {

ModelParams cubic(double eps, double nu, double dt, double t_end = 1.0) {
  ModelParams p;
  p.eps = eps;
  p.nu = nu;
  p.dt = dt;
  p.t_end = t_end;
  return p;
}

cplx carrier_coefficient(const RealField& v, std::size_t mc) { return forward(v).coeffs[mc]; }

}  // namespace

TEST(ShStep, CarrierDampingOracle) {
  const auto cg = CarrierGrid::from_periods(256, 16, 0.1);
  const double a = 0.05, dt = 1e-3;
  const auto v = sample(cg.grid, [&](double X) { return 2.0 * a * std::cos(X / cg.eps); });
  NoiseStream rng(1, 0);
  const auto next = step_rescaled(v, cubic(cg.eps, 0.0, dt), rng, 0.0);
  const double ratio = std::abs(carrier_coefficient(next, cg.carrier_index)) /
                       std::abs(carrier_coefficient(v, cg.carrier_index));
  EXPECT_NEAR(ratio, 1.0 - 3.0 * a * a * dt, 1e-13);
  EXPECT_NEAR(l2_norm(next) / l2_norm(v), 1.0 - 3.0 * a * a * dt, 10.0 * dt * dt);
}

TEST(ShStep, ZeroIsFixedPoint) {
  const auto cg = CarrierGrid::from_periods(256, 16, 0.1);
  NoiseStream rng(1, 0);
  const auto next = step_rescaled(RealField(cg.grid), cubic(cg.eps, 0.5, 1e-3), rng, 0.0);
  EXPECT_EQ(sup_norm(next), 0.0);
}

TEST(ShStep, LinearFlowIsExact) {
  const auto cg = CarrierGrid::from_periods(512, 32, 0.1);
  NoiseStream rng(2, 0);
  const auto v = random_field(cg.grid, rng, [](double K) { return K < 25.0; });
  auto p = cubic(cg.eps, 0.0, 3e-3);
  p.nonlinear = false;
  const auto next = step_rescaled(v, p, rng, 0.0);
  const auto want = apply_diagonal(DiagonalOperator::semigroup_L_eps(p.dt, cg.eps), v);
  EXPECT_LT(relative_l2(next, want), 1e-14);
}

TEST(ShStep, GuardAndValidation) {
  const auto cg = CarrierGrid::from_periods(256, 16, 0.1);
  NoiseStream rng(3, 0);
  auto p = cubic(cg.eps, 0.0, 1e-3);
  p.blowup_threshold = 0.5;
  const auto v = sample(cg.grid, [&](double X) { return std::cos(X / cg.eps); });
  EXPECT_THROW(step_rescaled(v, p, rng), std::invalid_argument);
  p.blowup_threshold = 1.05;
  EXPECT_THROW(step_rescaled(v, p, rng, 1e3), BlowupStopped);
  ModelParams bad;
  bad.eps = 1.5;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Simulate, DeterministicZeroStaysZero) {
  const auto cg = CarrierGrid::from_periods(256, 16, 0.1);
  const auto traj = simulate(RealField(cg.grid), cubic(cg.eps, 0.5, 1e-2, 0.2), NoiseConfig{1, 0.0, 0});
  EXPECT_EQ(traj.status, RunStatus::completed);
  ASSERT_EQ(traj.snapshots.size(), 21u);
  for (const auto& s : traj.snapshots) EXPECT_EQ(sup_norm(s), 0.0);
}

TEST(Simulate, LinearSubsystemIsTheStochasticConvolution) {
  const auto cg = CarrierGrid::from_periods(256, 16, 0.1);
  auto p = cubic(cg.eps, 0.0, 1e-2, 0.1);
  p.nonlinear = false;
  const NoiseConfig cfg{11, 1.0, 5};
  const auto traj = simulate(RealField(cg.grid), p, cfg);
  const auto path = stochastic_convolution_path(cg.grid, cg.eps, p.t_end, p.dt, cfg);
  ASSERT_EQ(traj.snapshots.size(), path.size());
  for (std::size_t i = 0; i < path.size(); ++i) EXPECT_EQ(traj.snapshots[i].values, path[i].values);
}

TEST(Simulate, BitExactReplayAndSnapshotStride) {
  const auto cg = CarrierGrid::from_periods(512, 32, 0.1);
  NoiseStream init(4, 0);
  const auto v0 = modulate(random_amplitude(cg.grid, 0.5, 1.0, init), cg.eps);
  const auto p = cubic(cg.eps, 0.5, 1e-3, 0.05);
  SimulateOptions opts;
  opts.snapshot_stride = 10;
  std::size_t observed = 0;
  opts.observer = [&](double, const RealField&) { ++observed; };
  const auto a = simulate(v0, p, NoiseConfig{7, 1.0, 1}, opts);
  const auto b = simulate(v0, p, NoiseConfig{7, 1.0, 1});
  EXPECT_EQ(observed, 51u);
  ASSERT_EQ(a.snapshots.size(), 6u);
  EXPECT_EQ(a.snapshots.back().values, b.snapshots.back().values);
  const auto c = simulate(v0, p, NoiseConfig{8, 1.0, 1});
  EXPECT_NE(a.snapshots.back().values, c.snapshots.back().values);
}

TEST(Simulate, RealnessPreserved) {
  const auto cg = CarrierGrid::from_periods(512, 32, 0.1);
  NoiseStream init(5, 0);
  const auto v0 = modulate(random_amplitude(cg.grid, 0.5, 1.0, init), cg.eps);
  ShStepper st(cg.grid, cubic(cg.eps, 0.5, 1e-3));
  st.set_state(v0);
  NoiseStream rng(5, 1);
  for (int i = 0; i < 20; ++i) st.step(rng);
  const auto& c = st.spectrum().coeffs;
  EXPECT_LE(std::abs(c.front().imag()), 1e-10);
  EXPECT_LE(std::abs(c.back().imag()), 1e-10);
}

TEST(Simulate, BlowupIsReported) {
  const auto cg = CarrierGrid::from_periods(256, 16, 0.1);
  auto p = cubic(cg.eps, 0.0, 1e-3, 1.0);
  p.blowup_threshold = 3.0;
  const auto v0 = sample(cg.grid, [&](double X) { return 2.0 * std::cos(X / cg.eps); });
  const auto traj = simulate(v0, p, NoiseConfig{1, 30.0, 0});
  EXPECT_EQ(traj.status, RunStatus::blowup_stopped);
  EXPECT_LT(traj.stop_time, 1.0);
}

TEST(Simulate, TimeStepSelfConvergence) {
  // Coarse increments are the exact OU aggregation of the fine ones.
  const auto cg = CarrierGrid::from_periods(256, 16, 0.1);
  NoiseStream init(6, 0);
  const auto v0 = modulate(random_amplitude(cg.grid, 0.5, 1.0, init), cg.eps);
  const double t_end = 0.2, dt_fine = 1.25e-4;
  const int levels = 3;
  std::vector<std::unique_ptr<ShStepper>> steppers;
  for (int l = 0; l < levels; ++l) {
    steppers.push_back(std::make_unique<ShStepper>(cg.grid, cubic(cg.eps, 0.5, dt_fine * (1 << l))));
    steppers.back()->set_state(v0);
  }
  NoiseStream rng(6, 1);
  const auto& fine = steppers[0]->increments();
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt_fine));
  std::vector<std::vector<cplx>> pending(levels);
  std::vector<cplx> xi;
  for (std::size_t s = 1; s <= steps; ++s) {
    fine.draw(rng, xi);
    for (int l = 0; l < levels; ++l) {
      auto& acc = pending[l];
      if (acc.empty()) acc.assign(xi.size(), cplx{});
      const auto& d = fine.decay();
      for (std::size_t m = 0; m < xi.size(); ++m) acc[m] = d[m] * acc[m] + xi[m];
      if (s % (1u << l) == 0) {
        steppers[l]->step_with(acc);
        acc.clear();
      }
    }
  }
  const double e1 = sup_norm(steppers[2]->field() - steppers[1]->field());
  const double e2 = sup_norm(steppers[1]->field() - steppers[0]->field());
  EXPECT_GT(e1 / e2, 1.5);
  EXPECT_LT(e1 / e2, 2.7);
}

TEST(Simulate, QuinticEnergyDecreases) {
  const auto cg = CarrierGrid::from_periods(512, 32, 0.1);
  ModelParams p;
  p.variant = Variant::quintic;
  p.eps = cg.eps;
  p.dt = 1e-3;
  NoiseStream init(7, 0);
  auto pert = random_field(cg.grid, init, [](double K) { return K < 20.0; });
  pert = (0.2 / sup_norm(pert)) * pert;
  const auto v0 = modulate(random_amplitude(cg.grid, 0.5, 0.5, init), cg.eps) + pert;
  ShStepper st(cg.grid, p, 0.0);
  st.set_state(v0);
  double energy = l2_norm(v0);
  for (int i = 0; i < 200; ++i) {
    st.step_deterministic();
    const double e = l2_norm(st.field());
    EXPECT_LE(e, energy * (1.0 + 1e-13)) << i;
    energy = e;
  }
}

TEST(Rescaling, AmplitudeExponents) {
  const Grid g(64, 10.0);
  Trajectory slow;
  slow.times = {0.0, 0.5};
  RealField one(g);
  for (auto& v : one.values) v = 1.0;
  slow.snapshots = {one, one};
  const double eps = 0.1;
  const auto u3 = rescale_to_original(slow, eps, Variant::cubic);
  const auto u5 = rescale_to_original(slow, eps, Variant::quintic);
  EXPECT_NEAR(u3.snapshots[1][7], eps, 1e-15);
  EXPECT_NEAR(u5.snapshots[1][7], std::sqrt(eps), 1e-15);
  EXPECT_NEAR(u3.times[1], 50.0, 1e-12);
  EXPECT_NEAR(u3.snapshots[0].grid.length(), 100.0, 1e-12);
  const auto back = rescale_to_slow(u5, eps, Variant::quintic);
  EXPECT_NEAR(back.snapshots[1][3], 1.0, 1e-15);
  EXPECT_NEAR(back.times[1], 0.5, 1e-15);
}

TEST(InitialData, ModulatedCarrierWithOffBandPerturbation) {
  const auto cg = CarrierGrid::from_periods(2048, 128, 0.1);
  const auto p1 = make_kernel(Band::P1, default_delta, cg.eps, cg.grid);
  NoiseStream rng(8, 0);
  const auto A = random_amplitude(cg.grid, 0.5, 1.0, rng);
  double ms = 0.0;
  for (const auto& a : A.values) ms += std::norm(a);
  EXPECT_NEAR(std::sqrt(ms / static_cast<double>(A.size())), 1.0, 1e-12);

  const auto v = modulated_initial_data(cg, 0.5, 1.0, rng, &p1, 0.5, 40.0);
  auto off = forward(v);
  for (std::size_t m = 0; m < off.coeffs.size(); ++m) off.coeffs[m] *= 1.0 - p1.weights()[m];
  const auto pert = inverse(off);
  EXPECT_NEAR(l2_norm(pert) / std::sqrt(cg.grid.length()), 0.5, 1e-12);
  EXPECT_THROW(modulated_initial_data(cg, 0.5, 1.0, rng, nullptr, 0.5, 40.0), std::invalid_argument);
}
