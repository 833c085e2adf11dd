#ifndef SHLAB_STUDIES_HPP
#define SHLAB_STUDIES_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "shlab/analysis.hpp"
#include "shlab/band.hpp"
#include "shlab/noise.hpp"
#include "shlab/reduced.hpp"
#include "shlab/rng.hpp"
#include "shlab/sh.hpp"

namespace shlab {

inline bool is_7_smooth(std::size_t n) {
  if (n == 0) return false;
  for (std::size_t p : {2u, 3u, 5u, 7u})
    while (n % p == 0) n /= p;
  return n == 1;
}

/// Slow-frame grid shared by the ensemble studies: a fixed rescaled length
/// 2 pi * domain holding about domain / eps carrier periods, with
/// points_per_period samples per period. The period count is snapped to the
/// nearest 7-smooth integer so transform sizes stay fast; the effective eps
/// is domain / periods.
struct StudyGrid {
  double domain = 25.6;
  std::size_t points_per_period = 16;

  std::size_t periods(double eps) const {
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("StudyGrid: eps must lie in (0,1)");
    const double target = domain / eps;
    if (target < 1.0) throw std::invalid_argument("StudyGrid: domain too small for eps");
    const auto base = static_cast<std::size_t>(std::floor(target));
    for (std::size_t d = 0;; ++d) {
      const std::size_t up = base + 1 + d;
      const bool lo_ok = d < base && is_7_smooth(base - d);
      const bool hi_ok = is_7_smooth(up);
      if (lo_ok && hi_ok)
        return target - static_cast<double>(base - d) <= static_cast<double>(up) - target ? base - d : up;
      if (lo_ok) return base - d;
      if (hi_ok) return up;
    }
  }

  CarrierGrid make(double eps) const {
    const std::size_t m = periods(eps);
    return CarrierGrid::snap(points_per_period * m, two_pi * domain, domain / static_cast<double>(m));
  }
};

struct PairedConfig {
  double eps = 0.1;
  double nu = 0.5;
  double delta = default_delta;
  TaperProfile profile = TaperProfile::raised_cosine;
  double dt = 1e-3;
  double t_end = 1.0;
  StudyGrid grid;
  double amplitude = 1.0;  ///< rms of the initial amplitude A0
  double k_cut = 0.5;      ///< Fourier support of A0
  double intensity = 1.0;  ///< noise intensity (0 = deterministic)
  HolderNormConfig holder;
  std::size_t holder_every = 50;  ///< steps between Holder-norm evaluations
};

struct PairedResult {
  double eps_eff = 0.0;
  RunStatus status = RunStatus::completed;
  double stop_time = 0.0;
  double err_sup = 0.0;     ///< sup_T |P1 v - w|_inf
  double err_l2 = 0.0;      ///< sup_T |P1 v - w|_2
  double err_holder = 0.0;  ///< sup over sampled T of the weighted Holder norm
  double avg_p0 = 0.0;      ///< averaging residual, k = 0
  double avg_p2 = 0.0;      ///< averaging residual, k = 2
  double gl_err = 0.0;      ///< sup_T |demodulate(w) - A|_inf
};

/// Stream ids derived from one cell stream: 0 drives the SH noise, the rest
/// are auxiliary draws.
inline NoiseStream aux_stream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t k) {
  return NoiseStream(seed, mix64(stream_id + k));
}

/// Runs SH (v), the averaged equation (w) and GL (A) side by side with one
/// noise realisation and matched carrier-band initial data.
inline PairedResult run_paired(const PairedConfig& cfg, std::uint64_t seed, std::uint64_t stream_id) {
  const auto cg = cfg.grid.make(cfg.eps);
  const Grid& g = cg.grid;
  ModelParams p;
  p.variant = Variant::cubic;
  p.eps = cg.eps;
  p.nu = cfg.nu;
  p.dt = cfg.dt;
  p.t_end = cfg.t_end;
  p.validate();

  auto init_rng = aux_stream(seed, stream_id, 1);
  auto gl_rng = aux_stream(seed, stream_id, 2);
  NoiseStream rng(seed, stream_id);

  const auto A0 = random_amplitude(g, cfg.k_cut, cfg.amplitude, init_rng);
  const auto v0 = modulate(A0, cg.eps);

  auto glc = gl_coefficients(cfg.nu);
  glc.noise_intensity = cfg.intensity;
  ShStepper sh(g, p, cfg.intensity);
  ReducedStepper red(g, p, cfg.delta, cfg.profile, cfg.intensity);
  GlStepper gl(g, glc, p.dt, p.blowup_threshold);
  sh.set_state(v0);
  red.set_state(v0);
  gl.set_state(A0);
  const auto& p1 = red.carrier_kernel();
  const GlNoiseCoupling coupling(sh.increments(), gl, p1, cg.carrier_index);
  AveragingAccumulator avg(g, cg.eps, cfg.nu, cfg.delta, cfg.profile);
  avg.add(0.0, sh.spectrum());

  PairedResult r;
  r.eps_eff = cg.eps;
  std::vector<cplx> xi, xi_gl;
  RealSpectrum band(g);
  const std::size_t steps = p.steps();
  for (std::size_t s = 1; s <= steps; ++s) {
    sh.increments().draw(rng, xi);
    coupling.map(xi, gl_rng, xi_gl);
    const double sup_v = sh.step_with(xi);
    const double sup_w = red.step_with(xi);
    const double sup_a = gl.step_with(xi_gl);
    const double T = static_cast<double>(s) * p.dt;
    r.stop_time = T;
    if (!(sup_v < p.blowup_threshold) || !(sup_w < p.blowup_threshold) ||
        !(sup_a < p.blowup_threshold)) {
      r.status = RunStatus::blowup_stopped;
      break;
    }
    avg.add(T, sh.spectrum());

    const auto& vs = sh.spectrum().coeffs;
    const auto& ws = red.spectrum().coeffs;
    for (std::size_t m = 0; m < vs.size(); ++m) band.coeffs[m] = p1.weights()[m] * vs[m] - ws[m];
    const auto diff = inverse(band);
    r.err_sup = std::max(r.err_sup, sup_norm(diff));
    r.err_l2 = std::max(r.err_l2, l2_norm(diff));
    if (cfg.holder_every > 0 && (s % cfg.holder_every == 0 || s == steps))
      r.err_holder = std::max(r.err_holder, weighted_holder_norm(diff, cfg.holder));
    r.gl_err = std::max(r.gl_err, sup_norm(demodulate(red.field(), cg.eps) - gl.field()));
  }
  r.avg_p0 = avg.residual(Band::P0);
  r.avg_p2 = avg.residual(Band::P2);
  return r;
}

struct AttractivityConfig {
  double eps = 0.1;
  double delta = default_delta;
  TaperProfile profile = TaperProfile::raised_cosine;
  double dt = 1e-3;
  double t_end = 1.0;
  StudyGrid grid;
  double amplitude = 1.0;
  double k_cut = 0.5;
  double intensity = 1.0;
  double offband = 1.0;       ///< rms of the off-band perturbation
  double offband_kmax = 4.0;  ///< perturbation support in unrescaled wavenumbers
  double transient_factor = 5.0;  ///< alternative window start factor * eps^2 |ln eps|
};

struct AttractivityResult {
  double eps_eff = 0.0;
  RunStatus status = RunStatus::completed;
  double t_transient = 0.0;      ///< |ln eps| / (slowest perturbation decay rate)
  double off_sup = 0.0;          ///< sup_{T >= t_transient} |(I - P1) v|_inf
  double off_l2 = 0.0;           ///< sup_{T >= t_transient} |(I - P1) v|_2 / sqrt(length)
  double off_sup_knob = 0.0;     ///< same as off_sup with start transient_factor eps^2 |ln eps|
  double off_initial = 0.0;      ///< |(I - P1) v0|_inf
  double concentration = 0.0;    ///< mode_concentration at T_end
};

/// ν = 0 cubic SH from carrier-band data plus an O(1) perturbation living
/// where the carrier kernel vanishes.
inline AttractivityResult run_attractivity(const AttractivityConfig& cfg, std::uint64_t seed,
                                           std::uint64_t stream_id) {
  const auto cg = cfg.grid.make(cfg.eps);
  const Grid& g = cg.grid;
  ModelParams p;
  p.eps = cg.eps;
  p.dt = cfg.dt;
  p.t_end = cfg.t_end;
  p.validate();
  const auto p1 = make_kernel(Band::P1, cfg.delta, cg.eps, g, cfg.profile);
  auto init_rng = aux_stream(seed, stream_id, 1);
  const double kmax = cfg.offband_kmax / cg.eps;
  const auto v0 = modulated_initial_data(cg, cfg.k_cut, cfg.amplitude, init_rng, &p1, cfg.offband, kmax);

  AttractivityResult r;
  r.eps_eff = cg.eps;
  double rate = std::numeric_limits<double>::infinity();
  for (std::size_t m = 1; m < g.spectral_size() - 1; ++m) {
    if (p1.weights()[m] > 0.0 || g.wavenumber(m) > kmax) continue;
    rate = std::min(rate, -symbol_L_eps(g.wavenumber(m), cg.eps));
  }
  const double log_eps = std::abs(std::log(cg.eps));
  r.t_transient = log_eps / rate;
  const double t_knob = cfg.transient_factor * cg.eps * cg.eps * log_eps;
  if (r.t_transient > cfg.t_end) throw std::invalid_argument("attractivity: transient exceeds T_end");

  const auto off_field = [&](const RealSpectrum& s) {
    RealSpectrum o = s;
    for (std::size_t m = 0; m < o.coeffs.size(); ++m) o.coeffs[m] *= 1.0 - p1.weights()[m];
    return inverse(o);
  };
  r.off_initial = sup_norm(off_field(forward(v0)));

  ShStepper sh(g, p, cfg.intensity);
  sh.set_state(v0);
  NoiseStream rng(seed, stream_id);
  const double root_length = std::sqrt(g.length());
  for (std::size_t s = 1; s <= p.steps(); ++s) {
    const double sup = sh.step(rng);
    const double T = static_cast<double>(s) * p.dt;
    if (!(sup < p.blowup_threshold)) {
      r.status = RunStatus::blowup_stopped;
      break;
    }
    if (T + 1e-12 < std::min(r.t_transient, t_knob)) continue;
    const auto off = off_field(sh.spectrum());
    const double sup_off = sup_norm(off);
    if (T + 1e-12 >= t_knob) r.off_sup_knob = std::max(r.off_sup_knob, sup_off);
    if (T + 1e-12 >= r.t_transient) {
      r.off_sup = std::max(r.off_sup, sup_off);
      r.off_l2 = std::max(r.off_l2, l2_norm(off) / root_length);
    }
  }
  r.concentration = mode_concentration(sh.field(), cg.eps, cfg.delta, cfg.profile).value;
  return r;
}

}  // namespace shlab

#endif
