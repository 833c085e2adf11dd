#ifndef SHLAB_OPERATORS_HPP
#define SHLAB_OPERATORS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "shlab/fft.hpp"
#include "shlab/grid.hpp"

namespace shlab {

/// Symbol of L = -(1 + d_xx)^2 at wavenumber k.
inline double symbol_L(double k) {
  const double s = 1.0 - k * k;
  return -s * s;
}

/// Symbol of the slow-frame operator L_eps = -eps^-2 (1 + eps^2 d_XX)^2.
inline double symbol_L_eps(double K, double eps) {
  const double s = 1.0 - eps * eps * K * K;
  return -s * s / (eps * eps);
}

/// Below this |1 - eps^2 K^2| the scaled inverse of L_eps is treated as singular.
inline constexpr double near_singular_threshold = 1e-6;

/// Diagonal Fourier multiplier with an even real symbol.
class DiagonalOperator {
public:
  enum class Kind { L, L_eps, semigroup_L, semigroup_L_eps, inv_Leps_scaled };

  static DiagonalOperator L() {
    return DiagonalOperator(Kind::L, 0.0, 0.0, [](double k) { return symbol_L(k); });
  }

  static DiagonalOperator L_eps(double eps) {
    check_eps(eps);
    return DiagonalOperator(Kind::L_eps, 0.0, eps,
                            [eps](double K) { return symbol_L_eps(K, eps); });
  }

  static DiagonalOperator semigroup_L(double t) {
    check_time(t);
    return DiagonalOperator(Kind::semigroup_L, t, 0.0,
                            [t](double k) { return std::exp(symbol_L(k) * t); });
  }

  static DiagonalOperator semigroup_L_eps(double T, double eps) {
    check_time(T);
    check_eps(eps);
    return DiagonalOperator(Kind::semigroup_L_eps, T, eps,
                            [T, eps](double K) { return std::exp(symbol_L_eps(K, eps) * T); });
  }

  /// eps^-2 L_eps^-1, symbol -(1 - eps^2 K^2)^-2. Infinite at the carrier.
  static DiagonalOperator inv_Leps_scaled(double eps) {
    check_eps(eps);
    return DiagonalOperator(Kind::inv_Leps_scaled, 0.0, eps, [eps](double K) {
      const double s = 1.0 - eps * eps * K * K;
      if (std::abs(s) < near_singular_threshold) return -HUGE_VAL;
      return -1.0 / (s * s);
    });
  }

  /// Reciprocal multiplier; singular wherever this symbol vanishes.
  DiagonalOperator inverse() const {
    auto base = symbol_;
    return DiagonalOperator(kind_, time_, eps_, [base](double k) {
      const double s = base(k);
      if (std::abs(s) < near_singular_threshold) return HUGE_VAL;
      return 1.0 / s;
    });
  }

  double operator()(double k) const { return symbol_(k); }
  Kind kind() const { return kind_; }
  double time() const { return time_; }
  double eps() const { return eps_; }

private:
  DiagonalOperator(Kind kind, double time, double eps, std::function<double(double)> symbol)
      : kind_(kind), time_(time), eps_(eps), symbol_(std::move(symbol)) {}

  static void check_time(double t) {
    if (!(t >= 0.0)) throw std::invalid_argument("semigroup: time must be non-negative");
  }
  static void check_eps(double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("operator: eps must lie in (0,1)");
  }

  Kind kind_;
  double time_;
  double eps_;
  std::function<double(double)> symbol_;
};

namespace detail {

/// Relative size below which content at a singular mode counts as round-off.
inline constexpr double singular_content_tolerance = 1e-12;

template <class Spectrum, class Wavenumber>
void apply_checked(const DiagonalOperator& op, Spectrum& s, Wavenumber k) {
  double peak = 0.0;
  for (const auto& c : s.coeffs) peak = std::max(peak, std::abs(c));
  for (std::size_t m = 0; m < s.coeffs.size(); ++m) {
    const double symbol = op(k(m));
    if (std::isfinite(symbol)) {
      s.coeffs[m] *= symbol;
    } else if (std::abs(s.coeffs[m]) <= singular_content_tolerance * peak) {
      s.coeffs[m] = cplx{};
    } else {
      throw std::domain_error("apply_diagonal: field has content where the symbol is singular");
    }
  }
}

}  // namespace detail

/// Multiplies the spectrum in place. Modes with a singular symbol must be
/// empty up to round-off; they are set to zero.
inline void apply_diagonal(const DiagonalOperator& op, RealSpectrum& s) {
  detail::apply_checked(op, s, [&](std::size_t m) { return s.grid.wavenumber(m); });
}

inline void apply_diagonal(const DiagonalOperator& op, ComplexSpectrum& s) {
  detail::apply_checked(op, s, [&](std::size_t m) { return s.grid.signed_wavenumber(m); });
}

inline RealField apply_diagonal(const DiagonalOperator& op, const RealField& f) {
  auto s = forward(f);
  apply_diagonal(op, s);
  return inverse(s);
}

inline ComplexField apply_diagonal(const DiagonalOperator& op, const ComplexField& f) {
  auto s = forward(f);
  apply_diagonal(op, s);
  return inverse(s);
}

}  // namespace shlab

#endif
