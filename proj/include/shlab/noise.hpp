#ifndef SHLAB_NOISE_HPP
#define SHLAB_NOISE_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "shlab/fft.hpp"
#include "shlab/grid.hpp"
#include "shlab/operators.hpp"
#include "shlab/rng.hpp"

namespace shlab {

struct NoiseConfig {
  std::uint64_t seed = 0;
  double intensity = 1.0;  ///< multiplier on the cylindrical Wiener process
  std::uint64_t stream_id = 0;

  NoiseStream stream() const {
    if (!(intensity >= 0.0)) throw std::invalid_argument("NoiseConfig: intensity must be >= 0");
    return NoiseStream(seed, stream_id);
  }
};

// Normalisation. Spectral coefficients are c_m = DFT(f)_m / n. A white
// increment has i.i.d. point values of variance dt/dx, which makes every
// coefficient with 0 < m < n/2 a circular complex Gaussian with
// E|c_m|^2 = dt/length, and c_0, c_{n/2} real with the same variance. The
// per-mode "unit" variance rate is therefore intensity^2 / length.

/// Variance accumulated over dt by dz = lambda z dt + sqrt(unit) dbeta.
inline double ou_variance(double lambda, double dt, double unit) {
  const double z = lambda * dt;
  if (std::abs(z) < 1e-8) return unit * dt * (1.0 + z);
  return unit * std::expm1(2.0 * z) / (2.0 * lambda);
}

/// Covariance of the increments of two OU modes driven by one Brownian path.
inline double ou_covariance(double lambda1, double lambda2, double dt, double unit) {
  const double s = lambda1 + lambda2;
  const double z = s * dt;
  if (std::abs(z) < 1e-8) return unit * dt * (1.0 + 0.5 * z);
  return unit * std::expm1(z) / s;
}

/// Exact update of one complex Fourier mode: e^{lambda dt} z + xi with xi a
/// circular complex Gaussian of variance ou_variance(lambda, dt, unit).
inline cplx ou_mode_step(double lambda, cplx current, double dt, double unit, NoiseStream& rng) {
  if (lambda > 0.0) throw std::invalid_argument("ou_mode_step: lambda must be <= 0");
  if (!(dt > 0.0)) throw std::invalid_argument("ou_mode_step: dt must be positive");
  const double sd = std::sqrt(0.5 * ou_variance(lambda, dt, unit));
  const double re = rng.normal();
  const double im = rng.normal();
  return std::exp(lambda * dt) * current + cplx(sd * re, sd * im);
}

/// Real white increment: point values N(0, dt/dx).
inline RealField white_increment(const Grid& grid, double dt, NoiseStream& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("white_increment: dt must be positive");
  RealField f(grid);
  const double sd = std::sqrt(dt / grid.dx());
  for (auto& v : f.values) v = sd * rng.normal();
  return f;
}

/// Complex white increment: independent real and imaginary parts, each
/// N(0, dt/(2 dx)), so E|increment|^2 = dt/dx per point.
inline ComplexField complex_white_increment(const Grid& grid, double dt, NoiseStream& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("complex_white_increment: dt must be positive");
  ComplexField f(grid);
  const double sd = std::sqrt(0.5 * dt / grid.dx());
  for (auto& v : f.values) {
    const double re = rng.normal();
    v = cplx(sd * re, sd * rng.normal());
  }
  return f;
}

/// Exact OU increments for every r2c mode of a real field whose linear part
/// is the even symbol lambda(K) <= 0.
class OuIncrements {
public:
  OuIncrements(const Grid& grid, const std::function<double(double)>& symbol, double dt,
               double intensity = 1.0)
      : grid_(grid), dt_(dt), decay_(grid.spectral_size()), sd_(grid.spectral_size()),
        lambda_(grid.spectral_size()) {
    if (!(dt > 0.0)) throw std::invalid_argument("OuIncrements: dt must be positive");
    const double unit = intensity * intensity / grid.length();
    for (std::size_t m = 0; m < sd_.size(); ++m) {
      const double lambda = symbol(grid.wavenumber(m));
      if (lambda > 0.0) throw std::invalid_argument("OuIncrements: symbol must be <= 0");
      lambda_[m] = lambda;
      decay_[m] = std::exp(lambda * dt);
      sd_[m] = std::sqrt(ou_variance(lambda, dt, unit));
    }
  }

  /// Fills xi (n/2+1 coefficients); complex modes split variance over re/im.
  void draw(NoiseStream& rng, std::vector<cplx>& xi) const {
    xi.resize(sd_.size());
    const std::size_t last = sd_.size() - 1;
    xi[0] = sd_[0] * rng.normal();
    for (std::size_t m = 1; m < last; ++m) {
      const double s = sd_[m] * std::numbers::sqrt2 * 0.5;
      const double re = rng.normal();
      xi[m] = cplx(s * re, s * rng.normal());
    }
    xi[last] = sd_[last] * rng.normal();
  }

  const Grid& grid() const { return grid_; }
  double dt() const { return dt_; }
  const std::vector<double>& decay() const { return decay_; }
  const std::vector<double>& lambda() const { return lambda_; }
  double variance(std::size_t m) const { return sd_[m] * sd_[m]; }

private:
  Grid grid_;
  double dt_;
  std::vector<double> decay_;
  std::vector<double> sd_;
  std::vector<double> lambda_;
};

/// Running stochastic convolution W_L(T) = int_0^T e^{(T-S)L} dW(S) held in
/// spectral form.
struct OUState {
  RealSpectrum coeffs;
  double time = 0.0;

  explicit OUState(const Grid& grid) : coeffs(grid) {}

  void advance(const OuIncrements& inc, NoiseStream& rng, std::vector<cplx>& scratch) {
    inc.draw(rng, scratch);
    const auto& d = inc.decay();
    for (std::size_t m = 0; m < coeffs.coeffs.size(); ++m)
      coeffs.coeffs[m] = d[m] * coeffs.coeffs[m] + scratch[m];
    time += inc.dt();
  }
};

/// Samples W_{L_eps} at every `stride`-th step boundary, starting with the
/// zero field at T = 0.
inline std::vector<RealField> stochastic_convolution_path(const Grid& grid, double eps,
                                                          double t_end, double dt,
                                                          const NoiseConfig& cfg,
                                                          std::size_t stride = 1) {
  if (!(t_end > 0.0)) throw std::invalid_argument("stochastic_convolution_path: T_end must be > 0");
  const OuIncrements inc(grid, [eps](double K) { return symbol_L_eps(K, eps); }, dt,
                         cfg.intensity);
  auto rng = cfg.stream();
  OUState state(grid);
  std::vector<cplx> scratch;
  std::vector<RealField> path{RealField(grid)};
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  for (std::size_t s = 1; s <= steps; ++s) {
    state.advance(inc, rng, scratch);
    if (s % stride == 0 || s == steps) path.push_back(inverse(state.coeffs));
  }
  return path;
}

}  // namespace shlab

#endif
