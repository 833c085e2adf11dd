#ifndef SHLAB_FFT_HPP
#define SHLAB_FFT_HPP

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "shlab/grid.hpp"

namespace shlab {

namespace detail {

// The FFTW planner is not thread-safe; execution of distinct plans is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <class T>
struct FftwDeleter {
  void operator()(T* p) const { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter<T>>;

template <class T>
FftwBuffer<T> fftw_alloc(std::size_t count) {
  return FftwBuffer<T>(static_cast<T*>(fftw_malloc(sizeof(T) * count)));
}

}  // namespace detail

/// Real <-> half-complex transform of fixed size with owned, aligned buffers.
/// Plans use FFTW_ESTIMATE so the arithmetic is identical from run to run.
class RealTransform {
public:
  explicit RealTransform(std::size_t n)
      : n_(n), real_(detail::fftw_alloc<double>(n)),
        spec_(detail::fftw_alloc<fftw_complex>(n / 2 + 1)) {
    std::lock_guard lock(detail::planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real_.get(), spec_.get(), FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec_.get(), real_.get(), FFTW_ESTIMATE);
  }
  RealTransform(const RealTransform&) = delete;
  RealTransform& operator=(const RealTransform&) = delete;
  ~RealTransform() {
    std::lock_guard lock(detail::planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }

  std::size_t size() const { return n_; }
  double* real() { return real_.get(); }
  cplx* spectrum() { return reinterpret_cast<cplx*>(spec_.get()); }

  /// real() -> spectrum(), unnormalised.
  void forward() { fftw_execute(forward_); }
  /// spectrum() -> real(); destroys spectrum().
  void backward() { fftw_execute(backward_); }

private:
  std::size_t n_;
  detail::FftwBuffer<double> real_;
  detail::FftwBuffer<fftw_complex> spec_;
  fftw_plan forward_{};
  fftw_plan backward_{};
};

class ComplexTransform {
public:
  explicit ComplexTransform(std::size_t n)
      : n_(n), data_(detail::fftw_alloc<fftw_complex>(n)) {
    std::lock_guard lock(detail::planner_mutex());
    forward_ = fftw_plan_dft_1d(static_cast<int>(n), data_.get(), data_.get(), FFTW_FORWARD,
                                FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_1d(static_cast<int>(n), data_.get(), data_.get(), FFTW_BACKWARD,
                                 FFTW_ESTIMATE);
  }
  ComplexTransform(const ComplexTransform&) = delete;
  ComplexTransform& operator=(const ComplexTransform&) = delete;
  ~ComplexTransform() {
    std::lock_guard lock(detail::planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }

  std::size_t size() const { return n_; }
  cplx* data() { return reinterpret_cast<cplx*>(data_.get()); }
  void forward() { fftw_execute(forward_); }
  void backward() { fftw_execute(backward_); }

private:
  std::size_t n_;
  detail::FftwBuffer<fftw_complex> data_;
  fftw_plan forward_{};
  fftw_plan backward_{};
};

namespace detail {

template <class Transform>
Transform& cached_transform(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<Transform>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Transform>(n);
  return *slot;
}

inline std::size_t padded_size(std::size_t n, std::size_t factor) {
  if (factor < 2) throw std::invalid_argument("dealiaser: padding factor must be >= 2");
  return n * factor;
}

}  // namespace detail

inline RealSpectrum forward(const RealField& f) {
  auto& t = detail::cached_transform<RealTransform>(f.size());
  std::copy(f.values.begin(), f.values.end(), t.real());
  t.forward();
  RealSpectrum s(f.grid);
  const double scale = 1.0 / static_cast<double>(f.size());
  for (std::size_t m = 0; m < s.coeffs.size(); ++m) s.coeffs[m] = t.spectrum()[m] * scale;
  return s;
}

inline RealField inverse(const RealSpectrum& s) {
  auto& t = detail::cached_transform<RealTransform>(s.grid.size());
  std::copy(s.coeffs.begin(), s.coeffs.end(), t.spectrum());
  t.backward();
  RealField f(s.grid);
  std::copy(t.real(), t.real() + f.size(), f.values.begin());
  return f;
}

inline ComplexSpectrum forward(const ComplexField& f) {
  auto& t = detail::cached_transform<ComplexTransform>(f.size());
  std::copy(f.values.begin(), f.values.end(), t.data());
  t.forward();
  ComplexSpectrum s(f.grid);
  const double scale = 1.0 / static_cast<double>(f.size());
  for (std::size_t m = 0; m < s.coeffs.size(); ++m) s.coeffs[m] = t.data()[m] * scale;
  return s;
}

inline ComplexField inverse(const ComplexSpectrum& s) {
  auto& t = detail::cached_transform<ComplexTransform>(s.grid.size());
  std::copy(s.coeffs.begin(), s.coeffs.end(), t.data());
  t.backward();
  ComplexField f(s.grid);
  std::copy(t.data(), t.data() + f.size(), f.values.begin());
  return f;
}

/// Evaluates n-mode real spectra on a grid refined by an integer factor and
/// projects pointwise products back, so polynomial nonlinearities up to
/// degree 2*factor-1 are alias-free.
class RealDealiaser {
public:
  RealDealiaser(std::size_t n, std::size_t factor) : n_(n), padded_(detail::padded_size(n, factor)) {}

  std::size_t padded_size() const { return padded_.size(); }
  std::size_t stride() const { return padded_.size() / n_; }

  /// coeffs (n/2+1 entries) -> values on the refined grid.
  void evaluate(const std::vector<cplx>& coeffs, std::vector<double>& values) {
    cplx* s = padded_.spectrum();
    const std::size_t half = n_ / 2;
    const std::size_t phalf = padded_.size() / 2;
    for (std::size_t m = 0; m < half; ++m) s[m] = coeffs[m];
    s[half] = 0.5 * coeffs[half].real();
    for (std::size_t m = half + 1; m <= phalf; ++m) s[m] = 0.0;
    padded_.backward();
    values.assign(padded_.real(), padded_.real() + padded_.size());
  }

  /// values on the refined grid -> truncated n-mode coefficients.
  void project(const std::vector<double>& values, std::vector<cplx>& coeffs) {
    std::copy(values.begin(), values.end(), padded_.real());
    padded_.forward();
    const cplx* s = padded_.spectrum();
    const std::size_t half = n_ / 2;
    const double scale = 1.0 / static_cast<double>(padded_.size());
    coeffs.resize(half + 1);
    for (std::size_t m = 0; m < half; ++m) coeffs[m] = s[m] * scale;
    coeffs[half] = 2.0 * s[half].real() * scale;
  }

private:
  std::size_t n_;
  RealTransform padded_;
};

class ComplexDealiaser {
public:
  ComplexDealiaser(std::size_t n, std::size_t factor)
      : n_(n), padded_(detail::padded_size(n, factor)) {}

  std::size_t padded_size() const { return padded_.size(); }

  void evaluate(const std::vector<cplx>& coeffs, std::vector<cplx>& values) {
    cplx* s = padded_.data();
    const std::size_t big = padded_.size();
    const std::size_t half = n_ / 2;
    std::fill(s, s + big, cplx{});
    for (std::size_t m = 0; m < half; ++m) s[m] = coeffs[m];
    for (std::size_t m = half + 1; m < n_; ++m) s[big - (n_ - m)] = coeffs[m];
    s[half] = 0.5 * coeffs[half];
    s[big - half] = 0.5 * coeffs[half];
    padded_.backward();
    values.assign(s, s + big);
  }

  void project(const std::vector<cplx>& values, std::vector<cplx>& coeffs) {
    cplx* s = padded_.data();
    const std::size_t big = padded_.size();
    const std::size_t half = n_ / 2;
    std::copy(values.begin(), values.end(), s);
    padded_.forward();
    const double scale = 1.0 / static_cast<double>(big);
    coeffs.resize(n_);
    for (std::size_t m = 0; m < half; ++m) coeffs[m] = s[m] * scale;
    for (std::size_t m = half + 1; m < n_; ++m) coeffs[m] = s[big - (n_ - m)] * scale;
    coeffs[half] = (s[half] + s[big - half]) * scale;
  }

private:
  std::size_t n_;
  ComplexTransform padded_;
};

}  // namespace shlab

#endif
