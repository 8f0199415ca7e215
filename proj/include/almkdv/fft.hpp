#ifndef ALMKDV_FFT_HPP
#define ALMKDV_FFT_HPP

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>

#include "almkdv/core.hpp"

namespace almkdv::fft {

namespace detail {

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per size under a lock and never freed
// while the process runs.
struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  PlanPair get(std::size_t n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    auto* scratch = fftw_alloc_complex(n);
    const int len = static_cast<int>(n);
    PlanPair p;
    // FFTW_ESTIMATE keeps plans deterministic; FFTW_UNALIGNED lets us execute
    // on std::vector storage.
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    p.forward = fftw_plan_dft_1d(len, scratch, scratch, FFTW_FORWARD, flags);
    p.backward = fftw_plan_dft_1d(len, scratch, scratch, FFTW_BACKWARD, flags);
    fftw_free(scratch);
    plans_.emplace(n, p);
    return p;
  }

  ~PlanCache() {
    for (auto& [n, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.backward);
    }
  }

 private:
  PlanCache() = default;
  std::mutex mutex_;
  std::map<std::size_t, PlanPair> plans_;
};

inline fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace detail

/// In place: a_k <- sum_n a_n e^{-2 pi i k n / N}.
inline void forward_inplace(std::span<Complex> a) {
  if (a.empty()) return;
  auto p = detail::PlanCache::instance().get(a.size());
  fftw_execute_dft(p.forward, detail::as_fftw(a.data()), detail::as_fftw(a.data()));
}

/// In place: a_n <- (1/N) sum_k a_k e^{+2 pi i k n / N}.
inline void inverse_inplace(std::span<Complex> a) {
  if (a.empty()) return;
  auto p = detail::PlanCache::instance().get(a.size());
  fftw_execute_dft(p.backward, detail::as_fftw(a.data()), detail::as_fftw(a.data()));
  const double scale = 1.0 / static_cast<double>(a.size());
  for (auto& z : a) z *= scale;
}

inline ComplexVector forward(std::span<const Complex> a) {
  ComplexVector out(a.begin(), a.end());
  forward_inplace(out);
  return out;
}

inline ComplexVector inverse(std::span<const Complex> a) {
  ComplexVector out(a.begin(), a.end());
  inverse_inplace(out);
  return out;
}

/// Apply a diagonal Fourier multiplier m_k to a periodic sequence.
template <class Symbol>
ComplexVector apply_multiplier(std::span<const Complex> a, Symbol&& symbol) {
  ComplexVector spec = forward(a);
  for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= symbol(k);
  inverse_inplace(spec);
  return spec;
}

}  // namespace almkdv::fft

#endif  // ALMKDV_FFT_HPP
