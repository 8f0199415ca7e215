#ifndef ALMKDV_CORE_HPP
#define ALMKDV_CORE_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace almkdv {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

inline constexpr double pi = std::numbers::pi;
inline constexpr Complex I{0.0, 1.0};

/// Sign of the cubic term. Defocusing lattices use beta = +conj(alpha) and
/// correspond to the +6|phi|^2 phi' continuum nonlinearity; focusing is the
/// opposite choice on both sides.
enum class Sign : int { focusing = -1, defocusing = +1 };

inline constexpr double sign_value(Sign s) { return static_cast<int>(s); }
inline constexpr Sign flipped(Sign s) {
  return s == Sign::focusing ? Sign::defocusing : Sign::focusing;
}
inline const char* to_string(Sign s) { return s == Sign::focusing ? "-" : "+"; }

enum class Gauge { al, mal };
inline const char* to_string(Gauge g) { return g == Gauge::al ? "AL" : "mAL"; }

// Error taxonomy. Everything derives from Error so callers that only care
// about "the run failed" can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// State left the model's admissible set (defocusing sup|alpha| guard).
class DomainError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class UnsupportedModeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Adaptive stepping collapsed below the minimum step; carries the last
/// accepted state for post-mortem.
class StiffnessError : public Error {
 public:
  StiffnessError(const std::string& what, double time, ComplexVector state)
      : Error(what), time_(time), state_(std::move(state)) {}
  double time() const { return time_; }
  const ComplexVector& state() const { return state_; }

 private:
  double time_;
  ComplexVector state_;
};

inline double norm2_sq(std::span<const Complex> v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return s;
}

inline double norm2(std::span<const Complex> v) { return std::sqrt(norm2_sq(v)); }

inline double norm_inf(std::span<const Complex> v) {
  double m = 0.0;
  for (const auto& z : v) m = std::max(m, std::abs(z));
  return m;
}

inline double max_abs_diff(std::span<const Complex> a, std::span<const Complex> b) {
  if (a.size() != b.size()) throw PreconditionError("max_abs_diff: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double diff_norm2(std::span<const Complex> a, std::span<const Complex> b) {
  if (a.size() != b.size()) throw PreconditionError("diff_norm2: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
  return std::sqrt(s);
}

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Periodic index n mod N into [0, N).
inline std::size_t wrap(long long n, std::size_t N) {
  const auto m = static_cast<long long>(N);
  long long r = n % m;
  return static_cast<std::size_t>(r < 0 ? r + m : r);
}

/// FFT bin k in [0, N) to its signed frequency index in [-N/2, N/2).
inline long long signed_bin(std::size_t k, std::size_t N) {
  const auto kk = static_cast<long long>(k);
  const auto n = static_cast<long long>(N);
  return kk < (n + 1) / 2 ? kk : kk - n;
}

/// Wrap a real coordinate into [-period/2, period/2).
inline double wrap_centered(double x, double period) {
  double r = std::fmod(x + 0.5 * period, period);
  if (r < 0) r += period;
  return r - 0.5 * period;
}

}  // namespace almkdv

#endif  // ALMKDV_CORE_HPP
