#ifndef SHLAB_ANALYSIS_HPP
#define SHLAB_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "shlab/band.hpp"
#include "shlab/fft.hpp"
#include "shlab/grid.hpp"
#include "shlab/reduced.hpp"
#include "shlab/sh.hpp"

namespace shlab {

struct HolderNormConfig {
  double alpha = 0.4;
  double kappa = 0.1;
  std::vector<double> window_radii;  ///< empty: dyadic 1, 2, 4, ... up to half the domain
  std::size_t pair_stride = 16;

  std::vector<double> radii_for(const Grid& grid) const {
    if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("HolderNormConfig: alpha must lie in (0, 1/2)");
    if (!(kappa > 0.0)) throw std::invalid_argument("HolderNormConfig: kappa must be positive");
    if (pair_stride == 0) throw std::invalid_argument("HolderNormConfig: pair_stride must be >= 1");
    const double half = 0.5 * grid.length();
    if (window_radii.empty()) {
      std::vector<double> r;
      for (double L = 1.0; L <= half; L *= 2.0) r.push_back(L);
      if (r.empty()) r.push_back(half);
      return r;
    }
    for (std::size_t i = 0; i < window_radii.size(); ++i) {
      if (!(window_radii[i] >= 1.0) || window_radii[i] > half)
        throw std::invalid_argument("HolderNormConfig: radii must lie in [1, length/2]");
      if (i > 0 && !(window_radii[i] > window_radii[i - 1]))
        throw std::invalid_argument("HolderNormConfig: radii must be increasing");
    }
    return window_radii;
  }
};

/// max_L L^-kappa (sup_{|x|<=L} |f| + max over pairs i<j<=i+stride in [-L,L]
/// of |f_i - f_j| / |x_i - x_j|^alpha), with x = 0 at grid index n/2.
template <class Field>
double weighted_holder_norm(const Field& f, const HolderNormConfig& cfg) {
  const auto radii = cfg.radii_for(f.grid);
  const std::size_t n = f.size();
  const std::size_t mid = n / 2;
  const double dx = f.grid.dx();
  std::vector<double> lag_weight(cfg.pair_stride + 1);
  for (std::size_t s = 1; s <= cfg.pair_stride; ++s)
    lag_weight[s] = std::pow(static_cast<double>(s) * dx, -cfg.alpha);

  double best = 0.0;
  double sup = 0.0, semi = 0.0;
  std::size_t lo = mid, hi = mid;  // current window [lo, hi]
  sup = std::abs(f.values[mid]);
  // Pairs (i, i+s) inside [lo, hi]; extending the window adds pairs touching new points.
  const auto add_point = [&](std::size_t j, bool left) {
    sup = std::max(sup, std::abs(f.values[j]));
    for (std::size_t s = 1; s <= cfg.pair_stride; ++s) {
      std::size_t other;
      if (left) {
        other = j + s;
        if (other > hi) break;
      } else {
        if (s > j || j - s < lo) break;
        other = j - s;
      }
      semi = std::max(semi, std::abs(f.values[j] - f.values[other]) * lag_weight[s]);
    }
  };
  for (double L : radii) {
    const auto reach = static_cast<std::size_t>(std::floor(L / dx + 1e-9));
    const std::size_t new_lo = reach >= mid ? 0 : mid - reach;
    const std::size_t new_hi = std::min(n - 1, mid + reach);
    while (hi < new_hi) {
      ++hi;
      add_point(hi, false);
    }
    while (lo > new_lo) {
      --lo;
      add_point(lo, true);
    }
    best = std::max(best, std::pow(L, -cfg.kappa) * (sup + semi));
  }
  return best;
}

inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q must lie in [0,1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= values.size()) return values.back();
  const double frac = pos - static_cast<double>(i);
  return values[i] + frac * (values[i + 1] - values[i]);
}

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

struct ConcentrationResult {
  double value = 0.0;
  bool zero_field = false;
};

/// |(I - P1) f|_2 / |f|_2.
inline ConcentrationResult mode_concentration(const RealField& f, double eps, double delta,
                                              TaperProfile profile = TaperProfile::raised_cosine) {
  const auto p1 = make_kernel(Band::P1, delta, eps, f.grid, profile);
  const auto s = forward(f);
  double total = 0.0, off = 0.0;
  const std::size_t last = s.coeffs.size() - 1;
  for (std::size_t m = 0; m < s.coeffs.size(); ++m) {
    const double w = (m == 0 || m == last) ? 1.0 : 2.0;
    const double e = w * std::norm(s.coeffs[m]);
    const double r = 1.0 - p1.weights()[m];
    total += e;
    off += e * r * r;
  }
  if (total == 0.0) return {0.0, true};
  return {std::sqrt(off / total), false};
}

enum class NormKind { sup, l2, holder };

inline const char* norm_name(NormKind k) {
  switch (k) {
    case NormKind::sup: return "sup";
    case NormKind::l2: return "l2";
    case NormKind::holder: return "holder";
  }
  return "?";
}

template <class Field>
double field_norm(const Field& f, NormKind kind, const HolderNormConfig& cfg = {}) {
  switch (kind) {
    case NormKind::sup: return sup_norm(f);
    case NormKind::l2: return l2_norm(f);
    case NormKind::holder: return weighted_holder_norm(f, cfg);
  }
  return 0.0;
}

/// sup over shared times of |a(T) - b(T)|.
inline double approximation_error(const Trajectory& a, const Trajectory& b, NormKind kind,
                                  const HolderNormConfig& cfg = {}) {
  if (a.times.size() != b.times.size())
    throw std::invalid_argument("approximation_error: trajectories have different time stamps");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    if (std::abs(a.times[i] - b.times[i]) > 1e-12 * std::max(1.0, std::abs(a.times[i])))
      throw std::invalid_argument("approximation_error: trajectories have different time stamps");
    worst = std::max(worst, field_norm(a.snapshots[i] - b.snapshots[i], kind, cfg));
  }
  return worst;
}

struct ScalingStudy {
  std::vector<double> eps;
  std::vector<double> values;
  double slope = 0.0;
  double intercept = 0.0;  ///< log-space intercept
  std::vector<double> residuals;
};

/// Least-squares fit of log(value) = intercept + slope log(eps).
inline ScalingStudy fit_scaling_exponent(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 3) throw std::invalid_argument("fit_scaling_exponent: need at least 3 points");
  ScalingStudy st;
  double sx = 0.0, sy = 0.0;
  for (const auto& [e, y] : pairs) {
    if (!(e > 0.0) || !(y > 0.0) || !std::isfinite(y))
      throw std::invalid_argument("fit_scaling_exponent: eps and diagnostics must be positive");
    st.eps.push_back(e);
    st.values.push_back(y);
    sx += std::log(e);
    sy += std::log(y);
  }
  const double k = static_cast<double>(pairs.size());
  const double mx = sx / k, my = sy / k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < st.eps.size(); ++i) {
    const double dx = std::log(st.eps[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(st.values[i]) - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_scaling_exponent: eps values must differ");
  st.slope = sxy / sxx;
  st.intercept = my - st.slope * mx;
  for (std::size_t i = 0; i < st.eps.size(); ++i)
    st.residuals.push_back(std::log(st.values[i]) - st.intercept - st.slope * std::log(st.eps[i]));
  return st;
}

/// Running trapezoid integrals of
///   I_k(T) = int v1 v_k dt + nu int v1 eps^-2 L_eps^-1 P_k v1^2 dt,  k = 0, 2
/// with v1 = P1 v and v_k = P_k v / eps.
class AveragingAccumulator {
public:
  AveragingAccumulator(const Grid& grid, double eps, double nu, double delta = default_delta,
                       TaperProfile profile = TaperProfile::raised_cosine)
      : eps_(eps), nu_(nu), p0_(make_kernel(Band::P0, delta, eps, grid, profile)),
        p1_(make_kernel(Band::P1, delta, eps, grid, profile)),
        p2_(make_kernel(Band::P2, delta, eps, grid, profile)), sum0_(grid), sum2_(grid),
        prev0_(grid), prev2_(grid) {}

  void add(double T, const RealSpectrum& v) {
    integrand(v, cur0_, cur2_);
    if (count_ > 0) {
      const double h = 0.5 * (T - last_time_);
      for (std::size_t j = 0; j < sum0_.size(); ++j) {
        sum0_[j] += h * (prev0_[j] + cur0_[j]);
        sum2_[j] += h * (prev2_[j] + cur2_[j]);
      }
    }
    std::swap(prev0_, cur0_);
    std::swap(prev2_, cur2_);
    last_time_ = T;
    ++count_;
  }

  void add(double T, const RealField& v) { add(T, forward(v)); }

  const RealField& integral(Band k) const {
    if (k == Band::P1) throw std::invalid_argument("AveragingAccumulator: band must be P0 or P2");
    return k == Band::P0 ? sum0_ : sum2_;
  }
  double residual(Band k) const { return sup_norm(integral(k)); }
  std::size_t samples() const { return count_; }

private:
  void integrand(const RealSpectrum& v, RealField& out0, RealField& out2) const {
    RealSpectrum s1 = v, s0 = v, s2 = v;
    const double inv_eps = 1.0 / eps_;
    for (std::size_t m = 0; m < v.coeffs.size(); ++m) {
      s1.coeffs[m] *= p1_.weights()[m];
      s0.coeffs[m] *= p0_.weights()[m] * inv_eps;
      s2.coeffs[m] *= p2_.weights()[m] * inv_eps;
    }
    const auto v1 = inverse(s1);
    const auto v0 = inverse(s0);
    const auto v2 = inverse(s2);
    RealField sq(v.grid);
    for (std::size_t j = 0; j < sq.size(); ++j) sq[j] = v1[j] * v1[j];
    const auto sq_hat = forward(sq);
    const auto g0 = inverse(inv_Leps_scaled_on_band(sq_hat, eps_, p0_));
    const auto g2 = inverse(inv_Leps_scaled_on_band(sq_hat, eps_, p2_));
    out0 = RealField(v.grid);
    out2 = RealField(v.grid);
    for (std::size_t j = 0; j < sq.size(); ++j) {
      out0[j] = v1[j] * (v0[j] + nu_ * g0[j]);
      out2[j] = v1[j] * (v2[j] + nu_ * g2[j]);
    }
  }

  double eps_;
  double nu_;
  BandKernel p0_, p1_, p2_;
  RealField sum0_, sum2_;
  RealField prev0_, prev2_;
  RealField cur0_, cur2_;
  double last_time_ = 0.0;
  std::size_t count_ = 0;
};

struct AveragingResult {
  double value = 0.0;
  double coarse_value = 0.0;  ///< same integral from every other snapshot
  bool stride_warning = false;
};

/// Sup norm of the averaging integral at the last snapshot. Flags a warning
/// when halving the snapshot density changes the result by more than 10%.
inline AveragingResult averaging_residual(const Trajectory& traj, double eps, double nu, Band k,
                                          double delta = default_delta,
                                          TaperProfile profile = TaperProfile::raised_cosine) {
  if (traj.snapshots.empty()) throw std::invalid_argument("averaging_residual: empty trajectory");
  const Grid& g = traj.snapshots.front().grid;
  AveragingAccumulator fine(g, eps, nu, delta, profile), coarse(g, eps, nu, delta, profile);
  const std::size_t last = traj.snapshots.size() - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    const auto s = forward(traj.snapshots[i]);
    fine.add(traj.times[i], s);
    if (i % 2 == 0 || i == last) coarse.add(traj.times[i], s);
  }
  AveragingResult r;
  r.value = fine.residual(k);
  r.coarse_value = coarse.residual(k);
  r.stride_warning = std::abs(r.coarse_value - r.value) > 0.1 * std::max(r.value, 1e-300);
  return r;
}

struct LandauConfig {
  Variant variant = Variant::cubic;
  double eps = 0.1;
  double nu = 0.0;
  double nu2 = 0.0;
  double nu3 = 0.0;
  double a0 = 0.5;
  double dt = 1e-3;
  std::size_t periods = 512;
  std::size_t points_per_period = 16;
  double delta = default_delta;
  double skip = 10.0;      ///< fit starts at skip * eps^2 (slaving of the harmonics)
  double window = 0.1;     ///< fit window ends at window / a0^2
  double max_change = 0.2; ///< or when |A|/a0 leaves [1 - max_change, 1 + max_change]
  double min_r2 = 0.99;
};

struct LandauFit {
  double c3 = 0.0;
  double c5 = 0.0;
  double r2 = 0.0;
  double eps_eff = 0.0;
  double t_start = 0.0;
  double t_stop = 0.0;
  std::size_t points = 0;
  bool accepted = false;
  std::string reason;
};

/// Runs deterministic SH from 2 a0 cos(X/eps), demodulates the carrier band
/// and fits d|A|/dT = c3 |A|^3 (+ c5 |A|^5 for the quintic variant).
inline LandauFit estimate_landau_coefficient(const LandauConfig& cfg) {
  if (!(cfg.a0 > 0.0)) throw std::invalid_argument("estimate_landau_coefficient: a0 must be positive");
  const auto cg = CarrierGrid::from_periods(cfg.points_per_period * cfg.periods, cfg.periods, cfg.eps);
  ModelParams p;
  p.variant = cfg.variant;
  p.eps = cg.eps;
  p.nu = cfg.nu;
  p.nu2 = cfg.nu2;
  p.nu3 = cfg.nu3;
  p.dt = cfg.dt;
  const double t_stop = cfg.window / (cfg.a0 * cfg.a0);
  p.t_end = t_stop;
  const auto p1 = make_kernel(Band::P1, cfg.delta, cg.eps, cg.grid);

  RealField v(cg.grid);
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = 2.0 * cfg.a0 * std::cos(cg.carrier() * cg.grid.x(j));
  ShStepper stepper(cg.grid, p, 0.0);
  stepper.set_state(v);

  std::vector<double> times{0.0}, amps{cfg.a0};
  const std::size_t steps = p.steps();
  for (std::size_t s = 1; s <= steps; ++s) {
    const double sup = stepper.step_deterministic();
    if (!(sup < p.blowup_threshold)) break;
    auto band = stepper.spectrum();
    project(band, p1);
    const auto A = demodulate(inverse(band), cg.eps);
    cplx mean{};
    for (const auto& a : A.values) mean += a;
    const double amp = std::abs(mean) / static_cast<double>(A.size());
    times.push_back(static_cast<double>(s) * p.dt);
    amps.push_back(amp);
    if (std::abs(amp / cfg.a0 - 1.0) > cfg.max_change) break;
  }

  LandauFit fit;
  fit.eps_eff = cg.eps;
  fit.t_start = cfg.skip * cg.eps * cg.eps;
  fit.t_stop = times.back();
  // Central differences on interior points of the window.
  std::vector<double> d, a;
  for (std::size_t i = 1; i + 1 < times.size(); ++i) {
    if (times[i] < fit.t_start) continue;
    d.push_back((amps[i + 1] - amps[i - 1]) / (times[i + 1] - times[i - 1]));
    a.push_back(amps[i]);
  }
  fit.points = d.size();
  const bool quintic = cfg.variant == Variant::quintic;
  if (d.size() < (quintic ? 3u : 2u)) {
    fit.reason = "window too short";
    return fit;
  }
  if (!quintic) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double x = a[i] * a[i] * a[i];
      num += x * d[i];
      den += x * x;
    }
    fit.c3 = num / den;
  } else {
    double s33 = 0.0, s35 = 0.0, s55 = 0.0, b3 = 0.0, b5 = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double x3 = a[i] * a[i] * a[i];
      const double x5 = x3 * a[i] * a[i];
      s33 += x3 * x3;
      s35 += x3 * x5;
      s55 += x5 * x5;
      b3 += x3 * d[i];
      b5 += x5 * d[i];
    }
    const double det = s33 * s55 - s35 * s35;
    if (!(std::abs(det) > 0.0)) {
      fit.reason = "singular normal equations";
      return fit;
    }
    fit.c3 = (b3 * s55 - b5 * s35) / det;
    fit.c5 = (s33 * b5 - s35 * b3) / det;
  }
  double mean_d = 0.0;
  for (double x : d) mean_d += x;
  mean_d /= static_cast<double>(d.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double a3 = a[i] * a[i] * a[i];
    const double model = fit.c3 * a3 + fit.c5 * a3 * a[i] * a[i];
    ss_res += (d[i] - model) * (d[i] - model);
    ss_tot += (d[i] - mean_d) * (d[i] - mean_d);
  }
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
  fit.accepted = fit.r2 >= cfg.min_r2;
  if (!fit.accepted) fit.reason = "R^2 below threshold";
  return fit;
}

/// (k, |c_k|) of a real field, non-negative wavenumbers.
inline std::vector<std::pair<double, double>> amplitude_spectrum(const RealField& f) {
  const auto s = forward(f);
  std::vector<std::pair<double, double>> out;
  out.reserve(s.coeffs.size());
  for (std::size_t m = 0; m < s.coeffs.size(); ++m)
    out.emplace_back(f.grid.wavenumber(m), std::abs(s.coeffs[m]));
  return out;
}

}  // namespace shlab

#endif
