#ifndef SHLAB_BAND_HPP
#define SHLAB_BAND_HPP

#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "shlab/fft.hpp"
#include "shlab/grid.hpp"
#include "shlab/operators.hpp"

namespace shlab {

/// Which Fourier band a projector selects: the mean (K ~ 0), the carrier
/// (K ~ +-1/eps) or the second harmonic (K ~ +-2/eps).
enum class Band { P0, P1, P2 };

enum class TaperProfile {
  raised_cosine,  ///< 1/2 (1 + cos(pi s)), C^1
  smooth_step,    ///< exp-based C-infinity step
};

inline const char* band_name(Band b) {
  switch (b) {
    case Band::P0: return "P0";
    case Band::P1: return "P1";
    case Band::P2: return "P2";
  }
  return "?";
}

inline double taper_value(TaperProfile profile, double s) {
  if (s <= 0.0) return 1.0;
  if (s >= 1.0) return 0.0;
  if (profile == TaperProfile::raised_cosine) return 0.5 * (1.0 + std::cos(std::numbers::pi * s));
  const auto bump = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
  const double a = bump(1.0 - s);
  return a / (a + bump(s));
}

/// Smooth even Fourier multiplier q(K) in [0,1]: 1 within plateau_radius of a
/// center, 0 beyond plateau_radius + taper_width.
class BandKernel {
public:
  BandKernel(Band which, double eps, double delta, const Grid& grid, std::vector<double> centers,
             double plateau_radius, double taper_width, TaperProfile profile)
      : which_(which), eps_(eps), delta_(delta), grid_(grid), centers_(std::move(centers)),
        plateau_(plateau_radius), taper_(taper_width), profile_(profile),
        weights_(grid.spectral_size()) {
    for (std::size_t m = 0; m < weights_.size(); ++m) weights_[m] = (*this)(grid_.wavenumber(m));
  }

  double operator()(double K) const {
    double q = 0.0;
    for (double c : centers_)
      q = std::max(q, taper_value(profile_, (std::abs(K - c) - plateau_) / taper_));
    return q;
  }

  /// q at each r2c index of the grid.
  const std::vector<double>& weights() const { return weights_; }

  Band which() const { return which_; }
  double eps() const { return eps_; }
  double delta() const { return delta_; }
  const Grid& grid() const { return grid_; }
  const std::vector<double>& centers() const { return centers_; }
  double plateau_radius() const { return plateau_; }
  double taper_width() const { return taper_; }
  double support_radius() const { return plateau_ + taper_; }
  TaperProfile profile() const { return profile_; }

private:
  Band which_;
  double eps_;
  double delta_;
  Grid grid_;
  std::vector<double> centers_;
  double plateau_;
  double taper_;
  TaperProfile profile_;
  std::vector<double> weights_;
};

/// Carrier band P1 has plateau delta/eps around +-1/eps; P0 and P2 use the
/// doubled radius 2 delta/eps around 0 and +-2/eps. Taper width is 1.
inline BandKernel make_kernel(Band which, double delta, double eps, const Grid& grid,
                              TaperProfile profile = TaperProfile::raised_cosine) {
  if (!(delta > 0.0 && delta <= 0.5))
    throw std::invalid_argument("make_kernel: delta must lie in (0, 1/2]");
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("make_kernel: eps must lie in (0,1)");
  constexpr double taper = 1.0;
  const double p1_outer = (1.0 + delta) / eps + taper;
  const double p2_inner = (2.0 - 2.0 * delta) / eps - taper;
  if (p1_outer >= p2_inner)
    throw std::invalid_argument("make_kernel: P1 and P2 supports overlap (delta too large for eps)");

  std::vector<double> centers;
  double plateau = 0.0;
  switch (which) {
    case Band::P0: centers = {0.0}; plateau = 2.0 * delta / eps; break;
    case Band::P1: centers = {-1.0 / eps, 1.0 / eps}; plateau = delta / eps; break;
    case Band::P2: centers = {-2.0 / eps, 2.0 / eps}; plateau = 2.0 * delta / eps; break;
  }
  const double reach = std::abs(centers.back()) + plateau + taper;
  if (reach >= grid.nyquist())
    throw std::invalid_argument(std::string("make_kernel: ") + band_name(which) +
                                " support reaches the grid Nyquist wavenumber");
  return BandKernel(which, eps, delta, grid, std::move(centers), plateau, taper, profile);
}

inline void project(RealSpectrum& s, const BandKernel& kernel) {
  require_same_grid(s.grid, kernel.grid(), "project");
  const auto& w = kernel.weights();
  for (std::size_t m = 0; m < s.coeffs.size(); ++m) s.coeffs[m] *= w[m];
}

inline RealField project(const RealField& f, const BandKernel& kernel) {
  auto s = forward(f);
  project(s, kernel);
  return inverse(s);
}

/// eps^-2 L_eps^-1 P_k f for the P0 or P2 band (symbol -(1 - eps^2 K^2)^-2 on
/// the band support, zero elsewhere).
inline RealSpectrum inv_Leps_scaled_on_band(RealSpectrum s, double eps, const BandKernel& band) {
  if (band.which() == Band::P1)
    throw std::invalid_argument("inv_Leps_scaled_on_band: band must be P0 or P2");
  require_same_grid(s.grid, band.grid(), "inv_Leps_scaled_on_band");
  const auto& w = band.weights();
  for (std::size_t m = 0; m < s.coeffs.size(); ++m) {
    if (w[m] == 0.0) {
      s.coeffs[m] = 0.0;
      continue;
    }
    const double K = s.grid.wavenumber(m);
    const double d = 1.0 - eps * eps * K * K;
    if (std::abs(d) < near_singular_threshold)
      throw std::domain_error("inv_Leps_scaled_on_band: near-singular symbol on band support");
    s.coeffs[m] *= -w[m] / (d * d);
  }
  return s;
}

inline RealField inv_Leps_scaled_on_band(const RealField& f, double eps, const BandKernel& band) {
  return inverse(inv_Leps_scaled_on_band(forward(f), eps, band));
}

/// v = v1 + eps (v0 + v2 + R) with v1 = P1 v, v0 = P0 v / eps, v2 = P2 v / eps
/// and R the rest over eps.
struct AnsatzDecomposition {
  RealField v1;
  RealField v0;
  RealField v2;
  RealField remainder;
  double eps = 0.0;

  RealField reconstruct() const {
    RealField out = v1;
    for (std::size_t j = 0; j < out.size(); ++j)
      out[j] += eps * (v0[j] + v2[j] + remainder[j]);
    return out;
  }
};

inline AnsatzDecomposition decompose(const RealField& v, double eps, double delta,
                                     TaperProfile profile = TaperProfile::raised_cosine) {
  const auto p0 = make_kernel(Band::P0, delta, eps, v.grid, profile);
  const auto p1 = make_kernel(Band::P1, delta, eps, v.grid, profile);
  const auto p2 = make_kernel(Band::P2, delta, eps, v.grid, profile);
  const auto spec = forward(v);
  RealSpectrum s0 = spec, s1 = spec, s2 = spec, sr = spec;
  const double inv_eps = 1.0 / eps;
  for (std::size_t m = 0; m < spec.coeffs.size(); ++m) {
    const double q0 = p0.weights()[m], q1 = p1.weights()[m], q2 = p2.weights()[m];
    s0.coeffs[m] *= q0 * inv_eps;
    s1.coeffs[m] *= q1;
    s2.coeffs[m] *= q2 * inv_eps;
    sr.coeffs[m] *= (1.0 - q0 - q1 - q2) * inv_eps;
  }
  return AnsatzDecomposition{inverse(s1), inverse(s0), inverse(s2), inverse(sr), eps};
}

namespace detail {

inline std::size_t carrier_index(const Grid& grid, double eps) {
  const double carrier = 1.0 / eps;
  const std::size_t m = grid.nearest_index(carrier);
  if (m == 0 || m >= grid.size() / 2 ||
      std::abs(grid.wavenumber(m) - carrier) > 1e-9 * carrier)
    throw std::invalid_argument("carrier 1/eps is not an exact grid wavenumber");
  return m;
}

}  // namespace detail

/// Amplitude A with v1 = A e^{iX/eps} + c.c.: the positive-frequency half of
/// the spectrum shifted down by the carrier index.
inline ComplexField demodulate(const RealField& v1, double eps) {
  const Grid& g = v1.grid;
  const std::size_t mc = detail::carrier_index(g, eps);
  const auto s = forward(v1);
  double total = 0.0, outside = 0.0;
  for (std::size_t m = 0; m < s.coeffs.size(); ++m) {
    const double weight = (m == 0 || m == g.size() / 2) ? 1.0 : 2.0;
    const double e = weight * std::norm(s.coeffs[m]);
    total += e;
    if (std::abs(g.wavenumber(m) - 1.0 / eps) > 0.5 / eps) outside += e;
  }
  if (total > 0.0 && outside > 0.01 * total)
    throw std::invalid_argument("demodulate: more than 1% of the energy lies outside the carrier band");

  ComplexSpectrum a(g);
  const long n = static_cast<long>(g.size());
  for (std::size_t m = 1; m < g.size() / 2; ++m) {
    long j = static_cast<long>(m) - static_cast<long>(mc);
    if (j < 0) j += n;
    a.coeffs[static_cast<std::size_t>(j)] = s.coeffs[m];
  }
  return inverse(a);
}

/// A e^{iX/eps} + c.c. on the same grid.
inline RealField modulate(const ComplexField& A, double eps) {
  const Grid& g = A.grid;
  const std::size_t mc = detail::carrier_index(g, eps);
  const auto a = forward(A);
  const long n = static_cast<long>(g.size());
  const long half = n / 2;
  double amax = 0.0;
  for (const auto& c : a.coeffs) amax = std::max(amax, std::abs(c));
  RealSpectrum s(g);
  for (std::size_t i = 0; i < a.coeffs.size(); ++i) {
    if (a.coeffs[i] == cplx{}) continue;
    const long j = g.signed_index(i);
    const long shifted = j + static_cast<long>(mc);
    if (std::abs(shifted) >= half) {
      if (std::abs(a.coeffs[i]) > 1e-12 * amax)
        throw std::invalid_argument("modulate: carrier shift aliases past the Nyquist wavenumber");
      continue;
    }
    // A e^{iX/eps} contributes at +shifted; conj(A) e^{-iX/eps} at -shifted.
    if (shifted >= 0) s.coeffs[static_cast<std::size_t>(shifted)] += a.coeffs[i];
    if (shifted <= 0) s.coeffs[static_cast<std::size_t>(-shifted)] += std::conj(a.coeffs[i]);
  }
  return inverse(s);
}

inline void write_kernel_csv(std::ostream& os, const BandKernel& kernel) {
  os << "k,q\n";
  const auto& w = kernel.weights();
  for (std::size_t m = 0; m < w.size(); ++m)
    os << kernel.grid().wavenumber(m) << ',' << w[m] << '\n';
}

}  // namespace shlab

#endif
