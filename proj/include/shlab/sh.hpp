#ifndef SHLAB_SH_HPP
#define SHLAB_SH_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shlab/band.hpp"
#include "shlab/fft.hpp"
#include "shlab/grid.hpp"
#include "shlab/noise.hpp"
#include "shlab/operators.hpp"

namespace shlab {

enum class Variant { cubic, quintic };

inline const char* variant_name(Variant v) { return v == Variant::cubic ? "cubic" : "quintic"; }

/// Parameters of the slow-frame Swift-Hohenberg equation
///   cubic:   dv = [L_eps v + nu/eps v^2 - v^3] dT + dW
///   quintic: dv = [L_eps v + nu2/eps v^2 + nu3 v^3 - v^5] dT + dW
struct ModelParams {
  Variant variant = Variant::cubic;
  double eps = 0.1;
  double nu = 0.0;
  double nu2 = 0.0;
  double nu3 = 0.0;
  double dt = 1e-3;
  double t_end = 1.0;
  double blowup_threshold = 1e4;
  bool nonlinear = true;  ///< false leaves the linear-plus-noise subsystem

  void validate() const {
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("ModelParams: eps must lie in (0,1)");
    if (!(dt > 0.0)) throw std::invalid_argument("ModelParams: dt must be positive");
    if (!(t_end >= 0.0)) throw std::invalid_argument("ModelParams: T_end must be >= 0");
    if (!(blowup_threshold > 0.0))
      throw std::invalid_argument("ModelParams: blowup_threshold must be positive");
  }

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_end / dt)); }
  std::size_t padding() const { return variant == Variant::cubic ? 2 : 3; }
};

class BlowupStopped : public std::runtime_error {
public:
  BlowupStopped(double time, double sup)
      : std::runtime_error("blow-up guard triggered at T=" + std::to_string(time)),
        time_(time), sup_(sup) {}
  double time() const { return time_; }
  double sup() const { return sup_; }

private:
  double time_;
  double sup_;
};

/// phi_1(z) = (e^z - 1)/z.
inline double phi1(double z) {
  if (std::abs(z) < 1e-5) return 1.0 + z * (0.5 + z / 6.0);
  return std::expm1(z) / z;
}

/// Exponential Euler for a diagonal linear part:
///   c <- e^{dt lambda} c + dt phi_1(dt lambda) N(c) + xi
/// with xi the exact OU increment of the linear-plus-noise flow.
struct EtdCoefficients {
  std::vector<double> decay;
  std::vector<double> forcing;

  template <class Symbol>
  EtdCoefficients(std::size_t count, Symbol&& lambda_at, double dt) : decay(count), forcing(count) {
    for (std::size_t m = 0; m < count; ++m) {
      const double lambda = lambda_at(m);
      decay[m] = std::exp(lambda * dt);
      forcing[m] = dt * phi1(lambda * dt);
    }
  }
};

/// Time stepper of the slow-frame equation held in spectral form.
class ShStepper {
public:
  ShStepper(const Grid& grid, const ModelParams& p, double intensity = 1.0)
      : grid_(grid), p_(p),
        noise_(grid, [eps = p.eps](double K) { return symbol_L_eps(K, eps); }, p.dt, intensity),
        etd_(grid.spectral_size(),
             [&](std::size_t m) { return symbol_L_eps(grid.wavenumber(m), p.eps); }, p.dt),
        dealias_(grid.size(), p.padding()), state_(grid), physical_(grid) {
    p.validate();
  }

  void set_state(const RealField& v) {
    require_same_grid(v.grid, grid_, "ShStepper::set_state");
    state_ = forward(v);
    physical_ = v;
  }

  const RealSpectrum& spectrum() const { return state_; }
  const RealField& field() const { return physical_; }
  const OuIncrements& increments() const { return noise_; }
  const ModelParams& params() const { return p_; }
  const Grid& grid() const { return grid_; }

  /// Nonlinear drift N(v) in spectral form.
  void nonlinearity(const std::vector<cplx>& coeffs, std::vector<cplx>& out) {
    dealias_.evaluate(coeffs, work_);
    const double inv_eps = 1.0 / p_.eps;
    if (p_.variant == Variant::cubic) {
      const double a = p_.nu * inv_eps;
      for (auto& u : work_) u = u * u * (a - u);
    } else {
      const double a = p_.nu2 * inv_eps;
      const double b = p_.nu3;
      for (auto& u : work_) {
        const double u2 = u * u;
        u = u2 * (a + u * (b - u2));
      }
    }
    dealias_.project(work_, out);
  }

  /// Advances one step with the given noise increment (n/2+1 coefficients,
  /// already OU-integrated over dt); returns the post-step sup norm.
  double step_with(const std::vector<cplx>& xi) {
    auto& c = state_.coeffs;
    if (p_.nonlinear) nonlinearity(c, drift_);
    for (std::size_t m = 0; m < c.size(); ++m) {
      cplx next = etd_.decay[m] * c[m] + xi[m];
      if (p_.nonlinear) next += etd_.forcing[m] * drift_[m];
      c[m] = next;
    }
    physical_ = inverse(state_);
    double sup = 0.0;
    for (double v : physical_.values) {
      if (!std::isfinite(v)) return HUGE_VAL;
      sup = std::max(sup, std::abs(v));
    }
    return sup;
  }

  double step(NoiseStream& rng) {
    noise_.draw(rng, xi_);
    return step_with(xi_);
  }

  double step_deterministic() {
    xi_.assign(grid_.spectral_size(), cplx{});
    return step_with(xi_);
  }

private:
  Grid grid_;
  ModelParams p_;
  OuIncrements noise_;
  EtdCoefficients etd_;
  RealDealiaser dealias_;
  RealSpectrum state_;
  RealField physical_;
  std::vector<double> work_;
  std::vector<cplx> drift_;
  std::vector<cplx> xi_;
};

/// One exponential-Euler step. Throws BlowupStopped when the post-step sup
/// norm reaches the guard.
inline RealField step_rescaled(const RealField& v, const ModelParams& p, NoiseStream& rng,
                               double intensity = 1.0) {
  if (!(sup_norm(v) < p.blowup_threshold))
    throw std::invalid_argument("step_rescaled: input already exceeds the blow-up guard");
  ShStepper stepper(v.grid, p, intensity);
  stepper.set_state(v);
  const double sup = intensity == 0.0 ? stepper.step_deterministic() : stepper.step(rng);
  if (!(sup < p.blowup_threshold)) throw BlowupStopped(p.dt, sup);
  return stepper.field();
}

enum class RunStatus { completed, blowup_stopped };

inline const char* status_name(RunStatus s) {
  return s == RunStatus::completed ? "completed" : "blowup_stopped";
}

struct Trajectory {
  std::vector<double> times;
  std::vector<RealField> snapshots;
  RunStatus status = RunStatus::completed;
  double stop_time = 0.0;  ///< last time reached
};

struct SimulateOptions {
  std::size_t snapshot_stride = 1;  ///< store every k-th step (0 stores only T=0)
  /// Called after every step (and at T=0) with the current field.
  std::function<void(double, const RealField&)> observer;
};

/// Iterates step_rescaled to T_end or until the blow-up guard triggers.
inline Trajectory simulate(const RealField& v0, const ModelParams& p, const NoiseConfig& cfg,
                           const SimulateOptions& opts = {}) {
  p.validate();
  for (double x : v0.values)
    if (!std::isfinite(x)) throw std::invalid_argument("simulate: initial data must be finite");
  ShStepper stepper(v0.grid, p, cfg.intensity);
  stepper.set_state(v0);
  auto rng = cfg.stream();
  Trajectory traj;
  traj.times.push_back(0.0);
  traj.snapshots.push_back(v0);
  if (opts.observer) opts.observer(0.0, v0);
  const std::size_t steps = p.steps();
  for (std::size_t s = 1; s <= steps; ++s) {
    const double sup = cfg.intensity == 0.0 ? stepper.step_deterministic() : stepper.step(rng);
    const double T = static_cast<double>(s) * p.dt;
    traj.stop_time = T;
    if (!(sup < p.blowup_threshold)) {
      traj.status = RunStatus::blowup_stopped;
      break;
    }
    if (opts.observer) opts.observer(T, stepper.field());
    if (opts.snapshot_stride > 0 && (s % opts.snapshot_stride == 0 || s == steps)) {
      traj.times.push_back(T);
      traj.snapshots.push_back(stepper.field());
    }
  }
  return traj;
}

/// u(t,x) = eps^a v(eps^2 t, eps x) with a = 1 (cubic) or 1/2 (quintic).
inline Trajectory rescale_to_original(const Trajectory& traj, double eps, Variant variant) {
  const double amp = variant == Variant::cubic ? eps : std::sqrt(eps);
  Trajectory out;
  out.status = traj.status;
  out.stop_time = traj.stop_time / (eps * eps);
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    out.times.push_back(traj.times[i] / (eps * eps));
    const auto& v = traj.snapshots[i];
    RealField u(Grid(v.grid.size(), v.grid.length() / eps));
    for (std::size_t j = 0; j < v.size(); ++j) u[j] = amp * v[j];
    out.snapshots.push_back(std::move(u));
  }
  return out;
}

/// Inverse of rescale_to_original.
inline Trajectory rescale_to_slow(const Trajectory& traj, double eps, Variant variant) {
  const double amp = variant == Variant::cubic ? eps : std::sqrt(eps);
  Trajectory out;
  out.status = traj.status;
  out.stop_time = traj.stop_time * eps * eps;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    out.times.push_back(traj.times[i] * eps * eps);
    const auto& u = traj.snapshots[i];
    RealField v(Grid(u.grid.size(), u.grid.length() * eps));
    for (std::size_t j = 0; j < u.size(); ++j) v[j] = u[j] / amp;
    out.snapshots.push_back(std::move(v));
  }
  return out;
}

/// Random complex amplitude with Fourier support |K| <= k_cut, normalised to
/// the given root-mean-square modulus.
inline ComplexField random_amplitude(const Grid& grid, double k_cut, double rms, NoiseStream& rng) {
  ComplexSpectrum s(grid);
  for (std::size_t m = 0; m < s.coeffs.size(); ++m) {
    const double K = std::abs(grid.signed_wavenumber(m));
    if (K > k_cut) continue;
    const double envelope = std::exp(-0.5 * (K / (0.5 * k_cut)) * (K / (0.5 * k_cut)));
    const double re = rng.normal();
    s.coeffs[m] = envelope * cplx(re, rng.normal());
  }
  auto A = inverse(s);
  double ms = 0.0;
  for (const auto& a : A.values) ms += std::norm(a);
  ms /= static_cast<double>(A.size());
  if (ms > 0.0) {
    const double scale = rms / std::sqrt(ms);
    for (auto& a : A.values) a *= scale;
  }
  return A;
}

/// Modulated-carrier initial data A0 e^{iX/eps} + c.c. with A0 band-limited
/// to |K| <= k_cut, plus an optional off-band perturbation: white in
/// |K| <= k_max_offband, restricted to where the carrier kernel vanishes,
/// with root-mean-square offband_rms.
inline RealField modulated_initial_data(const CarrierGrid& cg, double k_cut, double amplitude_rms,
                                        NoiseStream& rng, const BandKernel* carrier_band = nullptr,
                                        double offband_rms = 0.0, double k_max_offband = 0.0) {
  auto v = modulate(random_amplitude(cg.grid, k_cut, amplitude_rms, rng), cg.eps);
  if (offband_rms > 0.0) {
    if (carrier_band == nullptr)
      throw std::invalid_argument("modulated_initial_data: off-band perturbation needs the P1 kernel");
    RealSpectrum s(cg.grid);
    const auto& q = carrier_band->weights();
    for (std::size_t m = 1; m < s.coeffs.size() - 1; ++m) {
      if (q[m] > 0.0 || cg.grid.wavenumber(m) > k_max_offband) continue;
      const double re = rng.normal();
      s.coeffs[m] = cplx(re, rng.normal());
    }
    auto pert = inverse(s);
    const double rms = l2_norm(pert) / std::sqrt(cg.grid.length());
    if (rms > 0.0)
      for (std::size_t j = 0; j < v.size(); ++j) v[j] += offband_rms / rms * pert[j];
  }
  return v;
}

}  // namespace shlab

#endif
