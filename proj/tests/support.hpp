#ifndef SHLAB_TESTS_SUPPORT_HPP
#define SHLAB_TESTS_SUPPORT_HPP

#include <cmath>
#include <functional>

#include "shlab/shlab.hpp"

namespace shlab::testing {

/// Real field with i.i.d. Gaussian coefficients on the modes accepted by keep(K).
inline RealField random_field(const Grid& g, NoiseStream& rng, const std::function<bool(double)>& keep) {
  RealSpectrum s(g);
  for (std::size_t m = 1; m + 1 < s.coeffs.size(); ++m) {
    if (!keep(g.wavenumber(m))) continue;
    const double re = rng.normal();
    s.coeffs[m] = cplx(re, rng.normal());
  }
  if (keep(0.0)) s.coeffs[0] = rng.normal();
  return inverse(s);
}

inline RealField random_field(const Grid& g, NoiseStream& rng) {
  return random_field(g, rng, [](double) { return true; });
}

template <class F>
RealField sample(const Grid& g, F f) {
  RealField out(g);
  for (std::size_t j = 0; j < g.size(); ++j) out[j] = f(g.x(j));
  return out;
}

inline double relative_l2(const RealField& a, const RealField& b) {
  return l2_norm(a - b) / std::max(l2_norm(b), 1e-300);
}

/// Default grid: 512 carrier periods, 8192 points.
inline CarrierGrid default_grid(double eps) { return CarrierGrid::from_periods(8192, 512, eps); }

}  // namespace shlab::testing

#endif
