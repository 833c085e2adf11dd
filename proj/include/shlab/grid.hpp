#ifndef SHLAB_GRID_HPP
#define SHLAB_GRID_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace shlab {

using cplx = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Periodic 1-D grid on [0, length) with n equispaced points.
///
/// Spectral index m of a real field runs over 0..n/2 (r2c layout); for a
/// complex field it runs over 0..n-1 and maps to the signed index
/// m <= n/2 ? m : m - n. The wavenumber of signed index j is 2*pi*j/length.
class Grid {
public:
  Grid() = default;

  Grid(std::size_t n_points, double length) : n_(n_points), length_(length) {
    if (n_points < 2 || n_points % 2 != 0)
      throw std::invalid_argument("Grid: n_points must be even and >= 2");
    if (!(length > 0.0) || !std::isfinite(length))
      throw std::invalid_argument("Grid: length must be positive and finite");
  }

  std::size_t size() const { return n_; }
  std::size_t spectral_size() const { return n_ / 2 + 1; }
  double length() const { return length_; }
  double dx() const { return length_ / static_cast<double>(n_); }
  double dk() const { return two_pi / length_; }
  double nyquist() const { return dk() * static_cast<double>(n_ / 2); }
  double x(std::size_t j) const { return dx() * static_cast<double>(j); }

  /// Signed Fourier index for position m of a length-n complex spectrum.
  long signed_index(std::size_t m) const {
    return m <= n_ / 2 ? static_cast<long>(m) : static_cast<long>(m) - static_cast<long>(n_);
  }

  /// Wavenumber of r2c index m (non-negative).
  double wavenumber(std::size_t m) const { return dk() * static_cast<double>(m); }

  /// Wavenumber of c2c index m (signed).
  double signed_wavenumber(std::size_t m) const {
    return dk() * static_cast<double>(signed_index(m));
  }

  /// Nearest non-negative spectral index of |k|.
  std::size_t nearest_index(double k) const {
    return static_cast<std::size_t>(std::llround(std::abs(k) / dk()));
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.n_ == b.n_ && a.length_ == b.length_;
  }

private:
  std::size_t n_ = 0;
  double length_ = 0.0;
};

/// A grid in the slow (rescaled) frame whose carrier wavenumber 1/eps is an
/// exact grid mode.
struct CarrierGrid {
  Grid grid;
  double eps = 0.0;                ///< effective epsilon after snapping
  std::size_t carrier_index = 0;   ///< r2c index of K = 1/eps

  /// Snap 1/eps to the nearest grid wavenumber of a rescaled domain of the
  /// given length; the reported eps is length / (2*pi*carrier_index).
  static CarrierGrid snap(std::size_t n_points, double rescaled_length, double eps) {
    if (!(eps > 0.0 && eps < 1.0))
      throw std::invalid_argument("CarrierGrid: eps must lie in (0,1)");
    const Grid g(n_points, rescaled_length);
    const auto m = static_cast<std::size_t>(std::llround(rescaled_length / (two_pi * eps)));
    if (m == 0 || m >= n_points / 2)
      throw std::invalid_argument("CarrierGrid: carrier 1/eps is not resolvable on this grid");
    return CarrierGrid{g, rescaled_length / (two_pi * static_cast<double>(m)), m};
  }

  /// Rescaled frame X = eps*x of an unrescaled domain holding `periods`
  /// wavelengths of e^{ix}; the carrier sits at index `periods` for every eps.
  static CarrierGrid from_periods(std::size_t n_points, std::size_t periods, double eps) {
    return snap(n_points, eps * two_pi * static_cast<double>(periods), eps);
  }

  double carrier() const { return grid.wavenumber(carrier_index); }
};

struct RealField {
  Grid grid;
  std::vector<double> values;

  RealField() = default;
  explicit RealField(const Grid& g) : grid(g), values(g.size(), 0.0) {}
  RealField(const Grid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size())
      throw std::invalid_argument("RealField: value count does not match grid");
  }

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t j) { return values[j]; }
  double operator[](std::size_t j) const { return values[j]; }
};

struct ComplexField {
  Grid grid;
  std::vector<cplx> values;

  ComplexField() = default;
  explicit ComplexField(const Grid& g) : grid(g), values(g.size(), cplx{}) {}
  ComplexField(const Grid& g, std::vector<cplx> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size())
      throw std::invalid_argument("ComplexField: value count does not match grid");
  }

  std::size_t size() const { return values.size(); }
  cplx& operator[](std::size_t j) { return values[j]; }
  const cplx& operator[](std::size_t j) const { return values[j]; }
};

/// Spectral coefficients c_m with f(x_j) = sum_m c_m exp(i k_m x_j), i.e. the
/// forward DFT divided by n. Real fields keep the n/2+1 non-negative modes.
struct RealSpectrum {
  Grid grid;
  std::vector<cplx> coeffs;

  RealSpectrum() = default;
  explicit RealSpectrum(const Grid& g) : grid(g), coeffs(g.spectral_size(), cplx{}) {}
};

struct ComplexSpectrum {
  Grid grid;
  std::vector<cplx> coeffs;

  ComplexSpectrum() = default;
  explicit ComplexSpectrum(const Grid& g) : grid(g), coeffs(g.size(), cplx{}) {}
};

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b))
    throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

template <class Field>
double sup_norm(const Field& f) {
  double m = 0.0;
  for (const auto& v : f.values) m = std::max(m, std::abs(v));
  return m;
}

/// Continuum L2 norm, sqrt(dx * sum |f_j|^2).
template <class Field>
double l2_norm(const Field& f) {
  double s = 0.0;
  for (const auto& v : f.values) s += std::norm(v);
  return std::sqrt(s * f.grid.dx());
}

inline RealField operator+(RealField a, const RealField& b) {
  require_same_grid(a.grid, b.grid, "RealField +");
  for (std::size_t j = 0; j < a.size(); ++j) a.values[j] += b.values[j];
  return a;
}

inline RealField operator-(RealField a, const RealField& b) {
  require_same_grid(a.grid, b.grid, "RealField -");
  for (std::size_t j = 0; j < a.size(); ++j) a.values[j] -= b.values[j];
  return a;
}

inline RealField operator*(double s, RealField a) {
  for (auto& v : a.values) v *= s;
  return a;
}

inline ComplexField operator-(ComplexField a, const ComplexField& b) {
  require_same_grid(a.grid, b.grid, "ComplexField -");
  for (std::size_t j = 0; j < a.size(); ++j) a.values[j] -= b.values[j];
  return a;
}

inline ComplexField operator*(cplx s, ComplexField a) {
  for (auto& v : a.values) v *= s;
  return a;
}

}  // namespace shlab

#endif
