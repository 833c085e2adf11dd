#ifndef SHLAB_REDUCED_HPP
#define SHLAB_REDUCED_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "shlab/band.hpp"
#include "shlab/fft.hpp"
#include "shlab/grid.hpp"
#include "shlab/noise.hpp"
#include "shlab/operators.hpp"
#include "shlab/sh.hpp"

namespace shlab {

inline constexpr double default_delta = 0.125;

/// dA = [diffusion A_XX + cubic |A|^2 A + quintic |A|^4 A] dT + noise_intensity dη
struct GLCoefficients {
  double diffusion = 4.0;
  double cubic = 0.0;
  double quintic = 0.0;
  double noise_intensity = 1.0;
};

inline GLCoefficients gl_coefficients(double nu) {
  return GLCoefficients{4.0, -(3.0 - 38.0 / 9.0 * nu * nu), 0.0, 1.0};
}

inline GLCoefficients gl5_coefficients(double nu2, double nu3) {
  return GLCoefficients{4.0, 3.0 * nu3 + 38.0 / 9.0 * nu2 * nu2, -10.0, 1.0};
}

/// Exponential Euler for the Ginzburg-Landau equation on a periodic complex
/// grid. Noise coefficients are circular Gaussians with E|xi_j|^2 given by the
/// OU variance of symbol -diffusion K^2 at unit intensity^2/length.
class GlStepper {
public:
  GlStepper(const Grid& grid, const GLCoefficients& c, double dt, double blowup_threshold = 1e4)
      : grid_(grid), c_(c), dt_(dt), guard_(blowup_threshold),
        etd_(grid.size(), [&](std::size_t j) { return lambda_at(j); }, dt), sd_(grid.size()),
        dealias_(grid.size(), c.quintic != 0.0 ? 3 : 2), state_(grid), physical_(grid) {
    if (!(dt > 0.0)) throw std::invalid_argument("GlStepper: dt must be positive");
    if (!(c.diffusion >= 0.0)) throw std::invalid_argument("GlStepper: diffusion must be >= 0");
    const double unit = c.noise_intensity * c.noise_intensity / grid.length();
    for (std::size_t j = 0; j < sd_.size(); ++j)
      sd_[j] = std::sqrt(ou_variance(lambda_at(j), dt, unit));
  }

  void set_state(const ComplexField& A) {
    require_same_grid(A.grid, grid_, "GlStepper::set_state");
    state_ = forward(A);
    physical_ = A;
  }

  const ComplexField& field() const { return physical_; }
  const ComplexSpectrum& spectrum() const { return state_; }
  const Grid& grid() const { return grid_; }
  const GLCoefficients& coefficients() const { return c_; }
  double dt() const { return dt_; }
  double lambda_at(std::size_t j) const {
    const double K = grid_.signed_wavenumber(j);
    return -c_.diffusion * K * K;
  }
  double noise_variance(std::size_t j) const { return sd_[j] * sd_[j]; }

  void draw(NoiseStream& rng, std::vector<cplx>& xi) const {
    xi.resize(sd_.size());
    for (std::size_t j = 0; j < sd_.size(); ++j) {
      const double s = sd_[j] * std::numbers::sqrt2 * 0.5;
      const double re = rng.normal();
      xi[j] = cplx(s * re, s * rng.normal());
    }
  }

  double step_with(const std::vector<cplx>& xi) {
    auto& a = state_.coeffs;
    dealias_.evaluate(a, work_);
    for (auto& u : work_) {
      const double m2 = std::norm(u);
      u *= m2 * (c_.cubic + c_.quintic * m2);
    }
    dealias_.project(work_, drift_);
    for (std::size_t j = 0; j < a.size(); ++j)
      a[j] = etd_.decay[j] * a[j] + etd_.forcing[j] * drift_[j] + xi[j];
    physical_ = inverse(state_);
    double sup = 0.0;
    for (const auto& u : physical_.values) {
      const double m = std::abs(u);
      if (!std::isfinite(m)) return HUGE_VAL;
      sup = std::max(sup, m);
    }
    return sup;
  }

  double step(NoiseStream& rng) {
    draw(rng, xi_);
    return step_with(xi_);
  }

  double step_deterministic() {
    xi_.assign(grid_.size(), cplx{});
    return step_with(xi_);
  }

  double blowup_threshold() const { return guard_; }

private:
  Grid grid_;
  GLCoefficients c_;
  double dt_;
  double guard_;
  EtdCoefficients etd_;
  std::vector<double> sd_;
  ComplexDealiaser dealias_;
  ComplexSpectrum state_;
  ComplexField physical_;
  std::vector<cplx> work_;
  std::vector<cplx> drift_;
  std::vector<cplx> xi_;
};

inline ComplexField step_gl(const ComplexField& A, const GLCoefficients& c, double dt,
                            NoiseStream& rng, double blowup_threshold = 1e4) {
  if (!(sup_norm(A) < blowup_threshold))
    throw std::invalid_argument("step_gl: input already exceeds the blow-up guard");
  GlStepper stepper(A.grid, c, dt, blowup_threshold);
  stepper.set_state(A);
  const double sup = c.noise_intensity == 0.0 ? stepper.step_deterministic() : stepper.step(rng);
  if (!(sup < blowup_threshold)) throw BlowupStopped(dt, sup);
  return stepper.field();
}

struct GlRun {
  std::vector<double> times;
  std::vector<double> sup;  ///< |A|_inf at each time
  ComplexField final;
  RunStatus status = RunStatus::completed;
  double stop_time = 0.0;
};

/// Integrates the GL equation to t_end, recording the sup norm every step.
inline GlRun simulate_gl(const ComplexField& A0, const GLCoefficients& c, double dt, double t_end,
                         const NoiseConfig& cfg, double blowup_threshold = 1e4) {
  GLCoefficients scaled = c;
  scaled.noise_intensity = c.noise_intensity * cfg.intensity;
  GlStepper stepper(A0.grid, scaled, dt, blowup_threshold);
  stepper.set_state(A0);
  auto rng = cfg.stream();
  GlRun run;
  run.times.push_back(0.0);
  run.sup.push_back(sup_norm(A0));
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  for (std::size_t s = 1; s <= steps; ++s) {
    const double sup =
        scaled.noise_intensity == 0.0 ? stepper.step_deterministic() : stepper.step(rng);
    run.stop_time = static_cast<double>(s) * dt;
    if (!(sup < blowup_threshold)) {
      run.status = RunStatus::blowup_stopped;
      break;
    }
    run.times.push_back(run.stop_time);
    run.sup.push_back(sup);
  }
  run.final = stepper.field();
  return run;
}

/// Exponential Euler for the averaged equation on the carrier band
///   cubic:   dw = [L_eps w - 2 nu^2 P1(w G(w)) - P1 w^3] dT + P1 dW
///   quintic: dw = [L_eps w - 2 nu2^2 P1(w G(w)) + nu3 P1 w^3 - P1 w^5] dT + P1 dW
/// with G(w) = eps^-2 L_eps^-1 (P0 + P2) w^2.
class ReducedStepper {
public:
  ReducedStepper(const Grid& grid, const ModelParams& p, double delta = default_delta,
                 TaperProfile profile = TaperProfile::raised_cosine, double intensity = 1.0)
      : grid_(grid), p_(p), p1_(make_kernel(Band::P1, delta, p.eps, grid, profile)),
        noise_(grid, [eps = p.eps](double K) { return symbol_L_eps(K, eps); }, p.dt, intensity),
        etd_(grid.spectral_size(),
             [&](std::size_t m) { return symbol_L_eps(grid.wavenumber(m), p.eps); }, p.dt),
        mean_mult_(grid.spectral_size()), dealias_(grid.size(), p.padding()), state_(grid),
        physical_(grid) {
    p.validate();
    const auto p0 = make_kernel(Band::P0, delta, p.eps, grid, profile);
    const auto p2 = make_kernel(Band::P2, delta, p.eps, grid, profile);
    for (std::size_t m = 0; m < mean_mult_.size(); ++m) {
      const double q = p0.weights()[m] + p2.weights()[m];
      if (q == 0.0) continue;
      const double K = grid.wavenumber(m);
      const double d = 1.0 - p.eps * p.eps * K * K;
      if (std::abs(d) < near_singular_threshold)
        throw std::domain_error("ReducedStepper: near-singular symbol on the P0/P2 support");
      mean_mult_[m] = -q / (d * d);
    }
  }

  /// w must be supported on the carrier band.
  void set_state(const RealField& w) {
    require_same_grid(w.grid, grid_, "ReducedStepper::set_state");
    state_ = forward(w);
    const auto& q = p1_.weights();
    double total = 0.0, outside = 0.0;
    for (std::size_t m = 0; m < q.size(); ++m) {
      total += std::norm(state_.coeffs[m]);
      if (q[m] == 0.0) {
        outside += std::norm(state_.coeffs[m]);
        state_.coeffs[m] = 0.0;
      }
    }
    if (total > 0.0 && outside > 1e-20 * total)
      throw std::invalid_argument("ReducedStepper: initial data not supported on the P1 band");
    physical_ = inverse(state_);
  }

  const RealField& field() const { return physical_; }
  const RealSpectrum& spectrum() const { return state_; }
  const BandKernel& carrier_kernel() const { return p1_; }
  const OuIncrements& increments() const { return noise_; }

  /// Reduced drift (without L_eps) of the given spectrum.
  void nonlinearity(const std::vector<cplx>& coeffs, std::vector<cplx>& out) {
    dealias_.evaluate(coeffs, w_);
    sq_.resize(w_.size());
    for (std::size_t j = 0; j < w_.size(); ++j) sq_[j] = w_[j] * w_[j];
    dealias_.project(sq_, mean_);
    for (std::size_t m = 0; m < mean_.size(); ++m) mean_[m] *= mean_mult_[m];
    dealias_.evaluate(mean_, g_);
    const bool cubic = p_.variant == Variant::cubic;
    const double a = cubic ? -2.0 * p_.nu * p_.nu : -2.0 * p_.nu2 * p_.nu2;
    for (std::size_t j = 0; j < w_.size(); ++j) {
      const double u = w_[j];
      const double u3 = u * u * u;
      sq_[j] = cubic ? a * u * g_[j] - u3 : a * u * g_[j] + p_.nu3 * u3 - u3 * u * u;
    }
    dealias_.project(sq_, out);
    const auto& q = p1_.weights();
    for (std::size_t m = 0; m < out.size(); ++m) out[m] *= q[m];
  }

  /// xi is the full (unprojected) OU increment; the band projection is applied here.
  double step_with(const std::vector<cplx>& xi) {
    auto& c = state_.coeffs;
    nonlinearity(c, drift_);
    const auto& q = p1_.weights();
    for (std::size_t m = 0; m < c.size(); ++m) {
      if (q[m] == 0.0) {
        c[m] = 0.0;
        continue;
      }
      c[m] = etd_.decay[m] * c[m] + etd_.forcing[m] * drift_[m] + q[m] * xi[m];
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
  BandKernel p1_;
  OuIncrements noise_;
  EtdCoefficients etd_;
  std::vector<double> mean_mult_;
  RealDealiaser dealias_;
  RealSpectrum state_;
  RealField physical_;
  std::vector<double> w_, sq_, g_;
  std::vector<cplx> mean_, drift_, xi_;
};

namespace detail {

inline RealField reduced_single_step(const RealField& w, const ModelParams& p, NoiseStream& rng,
                                     const std::vector<cplx>* shared_increment, double delta,
                                     double intensity) {
  if (!(sup_norm(w) < p.blowup_threshold))
    throw std::invalid_argument("step_reduced: input already exceeds the blow-up guard");
  ReducedStepper stepper(w.grid, p, delta, TaperProfile::raised_cosine, intensity);
  stepper.set_state(w);
  double sup = 0.0;
  if (shared_increment != nullptr) {
    if (shared_increment->size() != w.grid.spectral_size())
      throw std::invalid_argument("step_reduced: shared increment has the wrong size");
    sup = stepper.step_with(*shared_increment);
  } else {
    sup = intensity == 0.0 ? stepper.step_deterministic() : stepper.step(rng);
  }
  if (!(sup < p.blowup_threshold)) throw BlowupStopped(p.dt, sup);
  return stepper.field();
}

}  // namespace detail

/// One step of the cubic averaged equation. With shared_increment the noise
/// is the band projection of that SH increment; otherwise it is drawn from rng.
inline RealField step_reduced(const RealField& w, double eps, double nu, double dt,
                              NoiseStream& rng, const std::vector<cplx>* shared_increment = nullptr,
                              double delta = default_delta, double intensity = 1.0) {
  ModelParams p;
  p.variant = Variant::cubic;
  p.eps = eps;
  p.nu = nu;
  p.dt = dt;
  return detail::reduced_single_step(w, p, rng, shared_increment, delta, intensity);
}

inline RealField quintic_reduced_step(const RealField& w, double eps, double nu2, double nu3,
                                      double dt, NoiseStream& rng,
                                      const std::vector<cplx>* shared_increment = nullptr,
                                      double delta = default_delta, double intensity = 1.0) {
  ModelParams p;
  p.variant = Variant::quintic;
  p.eps = eps;
  p.nu2 = nu2;
  p.nu3 = nu3;
  p.dt = dt;
  return detail::reduced_single_step(w, p, rng, shared_increment, delta, intensity);
}

/// Maps the SH noise increment of carrier-band mode m = j + m_c onto the GL
/// mode j. Both are OU integrals of one Brownian path with different decay
/// rates, so the GL increment is the conditional mean given the SH increment
/// plus independent residual noise, filtered by the carrier kernel.
class GlNoiseCoupling {
public:
  GlNoiseCoupling(const OuIncrements& sh, const GlStepper& gl, const BandKernel& p1,
                  std::size_t carrier_index)
      : gain_(gl.grid().size(), 0.0), residual_sd_(gl.grid().size(), 0.0),
        partner_(gl.grid().size(), 0), weight_(gl.grid().size(), 0.0) {
    const auto& g = gl.grid();
    const double unit = gl.coefficients().noise_intensity * gl.coefficients().noise_intensity /
                        g.length();
    const long n = static_cast<long>(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
      const long m = g.signed_index(j) + static_cast<long>(carrier_index);
      if (m <= 0 || m >= n / 2) continue;
      const auto mi = static_cast<std::size_t>(m);
      const double q = p1.weights()[mi];
      if (q == 0.0) continue;
      const double l1 = sh.lambda()[mi];
      const double l2 = gl.lambda_at(j);
      const double v1 = ou_variance(l1, sh.dt(), unit);
      const double v2 = ou_variance(l2, sh.dt(), unit);
      const double cov = ou_covariance(l1, l2, sh.dt(), unit);
      partner_[j] = mi;
      weight_[j] = q;
      if (v1 == 0.0) continue;
      gain_[j] = cov / v1;
      residual_sd_[j] = std::sqrt(std::max(0.0, v2 - cov * cov / v1));
    }
  }

  void map(const std::vector<cplx>& sh_xi, NoiseStream& rng, std::vector<cplx>& gl_xi) const {
    gl_xi.assign(gain_.size(), cplx{});
    for (std::size_t j = 0; j < gain_.size(); ++j) {
      if (weight_[j] == 0.0) continue;
      const double s = residual_sd_[j] * std::numbers::sqrt2 * 0.5;
      const double re = rng.normal();
      const cplx zeta(s * re, s * rng.normal());
      gl_xi[j] = weight_[j] * (gain_[j] * sh_xi[partner_[j]] + zeta);
    }
  }

private:
  std::vector<double> gain_;
  std::vector<double> residual_sd_;
  std::vector<std::size_t> partner_;
  std::vector<double> weight_;
};

}  // namespace shlab

#endif
