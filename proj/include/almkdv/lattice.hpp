#ifndef ALMKDV_LATTICE_HPP
#define ALMKDV_LATTICE_HPP

#include <algorithm>
#include <fmt/format.h>

#include "almkdv/core.hpp"
#include "almkdv/fft.hpp"

namespace almkdv {

/// Defocusing states must keep sup|alpha_n| below this value. The mass
/// logarithm is singular at 1; the guard sits well inside.
inline constexpr double defocusing_guard = 0.9;

/// A periodic lattice field on Z/NZ with mesh h. beta is never stored: it is
/// sign * conj(alpha).
struct LatticeState {
  double h = 1.0;
  Sign sign = Sign::defocusing;
  Gauge gauge = Gauge::mal;
  double time = 0.0;
  ComplexVector alpha;

  std::size_t size() const { return alpha.size(); }
  double period() const { return h * static_cast<double>(alpha.size()); }
};

inline void validate_shape(const LatticeState& s) {
  const auto n = s.size();
  if (n < 8 || n % 2 != 0)
    throw PreconditionError(fmt::format("lattice needs N >= 8 and even, got N = {}", n));
  if (!(s.h > 0.0 && s.h <= 1.0))
    throw PreconditionError(fmt::format("lattice mesh must satisfy 0 < h <= 1, got {}", s.h));
}

/// Throws DomainError if a defocusing state reaches the guard or any entry is
/// not finite.
inline void check_domain(std::span<const Complex> alpha, Sign sign) {
  for (std::size_t n = 0; n < alpha.size(); ++n) {
    const double a = std::abs(alpha[n]);
    if (!std::isfinite(a))
      throw DomainError(fmt::format("non-finite lattice value at site {}", n));
    if (sign == Sign::defocusing && a >= defocusing_guard)
      throw DomainError(fmt::format(
          "defocusing state left the admissible set: |alpha_{}| = {} >= {}", n, a,
          defocusing_guard));
  }
}

inline void check_domain(const LatticeState& s) { check_domain(s.alpha, s.sign); }

/// Lattice frequency theta_k = 2 pi k / N for FFT bin k, signed into [-pi, pi).
inline double lattice_theta(std::size_t k, std::size_t N) {
  return 2.0 * pi * static_cast<double>(signed_bin(k, N)) / static_cast<double>(N);
}

/// Diagonal generator i*Lambda_d of the linear mAL flow, Lambda_d = -2 sin(theta).
inline ComplexVector mal_symbol(std::size_t N) {
  ComplexVector s(N);
  for (std::size_t k = 0; k < N; ++k) s[k] = Complex(0.0, -2.0 * std::sin(lattice_theta(k, N)));
  return s;
}

/// Diagonal generator of the linear AL flow, -i * omega_AL with omega_AL = 2 - 2 cos(theta).
inline ComplexVector al_symbol(std::size_t N) {
  ComplexVector s(N);
  for (std::size_t k = 0; k < N; ++k)
    s[k] = Complex(0.0, -(2.0 - 2.0 * std::cos(lattice_theta(k, N))));
  return s;
}

/// F_n = alpha_n beta_n (alpha_{n+1} - alpha_{n-1}).
inline void mal_nonlinear(std::span<const Complex> a, Sign sign, std::span<Complex> out) {
  const std::size_t N = a.size();
  const double sg = sign_value(sign);
  for (std::size_t n = 0; n < N; ++n) {
    const Complex& ap = a[n + 1 == N ? 0 : n + 1];
    const Complex& am = a[n == 0 ? N - 1 : n - 1];
    out[n] = sg * std::norm(a[n]) * (ap - am);
  }
}

/// Nonlinear part of du/dt for AL: -i u_n v_n (u_{n-1} + u_{n+1}).
inline void al_nonlinear(std::span<const Complex> u, Sign sign, std::span<Complex> out) {
  const std::size_t N = u.size();
  const double sg = sign_value(sign);
  for (std::size_t n = 0; n < N; ++n) {
    const Complex& up = u[n + 1 == N ? 0 : n + 1];
    const Complex& um = u[n == 0 ? N - 1 : n - 1];
    out[n] = -I * (sg * std::norm(u[n])) * (um + up);
  }
}

/// d(alpha)/d(tau) = -(1 - alpha_n beta_n)(alpha_{n+1} - alpha_{n-1}).
/// With nonlinear = false beta is forced to zero.
inline ComplexVector mal_rhs(const LatticeState& s, bool nonlinear = true) {
  if (s.gauge != Gauge::mal) throw PreconditionError("mal_rhs: state is not in the mAL gauge");
  validate_shape(s);
  check_domain(s);
  const std::size_t N = s.size();
  const double sg = nonlinear ? sign_value(s.sign) : 0.0;
  ComplexVector out(N);
  for (std::size_t n = 0; n < N; ++n) {
    const Complex diff = s.alpha[n + 1 == N ? 0 : n + 1] - s.alpha[n == 0 ? N - 1 : n - 1];
    out[n] = -(1.0 - sg * std::norm(s.alpha[n])) * diff;
  }
  return out;
}

/// du/dt from i du/dt = -(u_{n-1} - 2u_n + u_{n+1}) + u_n v_n (u_{n-1} + u_{n+1}).
inline ComplexVector al_rhs(const LatticeState& s, bool nonlinear = true) {
  if (s.gauge != Gauge::al) throw PreconditionError("al_rhs: state is not in the AL gauge");
  validate_shape(s);
  check_domain(s);
  const std::size_t N = s.size();
  const double sg = nonlinear ? sign_value(s.sign) : 0.0;
  ComplexVector out(N);
  for (std::size_t n = 0; n < N; ++n) {
    const Complex& up = s.alpha[n + 1 == N ? 0 : n + 1];
    const Complex& um = s.alpha[n == 0 ? N - 1 : n - 1];
    const Complex rhs = -(um - 2.0 * s.alpha[n] + up) + sg * std::norm(s.alpha[n]) * (um + up);
    out[n] = -I * rhs;
  }
  return out;
}

enum class GaugeDirection { al_to_mal, mal_to_al };

/// (-i)^n for n mod 4.
inline Complex quarter_phase(std::size_t n) {
  switch (n % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, -1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, 1.0};
  }
}

/// alpha_n = (-i)^n e^{2it} u_n and its inverse. On Z/NZ the factor (-i)^n is
/// only single-valued when 4 | N.
inline LatticeState gauge_transform(const LatticeState& s, GaugeDirection dir) {
  const Gauge expected = dir == GaugeDirection::al_to_mal ? Gauge::al : Gauge::mal;
  if (s.gauge != expected)
    throw PreconditionError(fmt::format("gauge_transform: expected a {} state, got {}",
                                        to_string(expected), to_string(s.gauge)));
  if (s.size() % 4 != 0)
    throw PreconditionError(
        fmt::format("gauge_transform: (-i)^n is not periodic unless 4 | N (N = {})", s.size()));
  LatticeState out = s;
  const Complex time_phase = std::polar(1.0, 2.0 * s.time);
  for (std::size_t n = 0; n < s.size(); ++n) {
    const Complex g = quarter_phase(n) * time_phase;
    out.alpha[n] = dir == GaugeDirection::al_to_mal ? g * s.alpha[n] : std::conj(g) * s.alpha[n];
  }
  out.gauge = dir == GaugeDirection::al_to_mal ? Gauge::mal : Gauge::al;
  return out;
}

struct ConservedSet {
  double M = 0.0;
  double E = 0.0;
  double E2 = 0.0;
  double P = 0.0;
};

namespace detail {
/// ln(1 - x) + x, accurate for small x.
inline double log1m_plus(double x) {
  if (std::abs(x) < 0.05) {
    // -sum_{k>=2} x^k / k; log1p(-x) + x cancels badly here
    double term = x * x;
    double sum = 0.0;
    for (int k = 2; k < 60; ++k) {
      sum -= term / k;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
      term *= x;
    }
    return sum;
  }
  return std::log1p(-x) + x;
}
}  // namespace detail

/// sign * sum |alpha_{n+1} - alpha_n|^2.
inline double quadratic_energy_sum(std::span<const Complex> a, Sign sign) {
  const std::size_t N = a.size();
  double s = 0.0;
  for (std::size_t n = 0; n < N; ++n) s += std::norm(a[n + 1 == N ? 0 : n + 1] - a[n]);
  return sign_value(sign) * s;
}

/// sign * (1/N) sum_k 4 sin^2(theta_k/2) |a_hat(theta_k)|^2, the discrete form
/// of the frequency-side integral.
inline double quadratic_energy_fourier(std::span<const Complex> a, Sign sign) {
  const std::size_t N = a.size();
  const ComplexVector ah = fft::forward(a);
  double s = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    const double sn = std::sin(0.5 * lattice_theta(k, N));
    s += 4.0 * sn * sn * std::norm(ah[k]);
  }
  return sign_value(sign) * s / static_cast<double>(N);
}

/// Mass, energy, quadratic energy and momentum of an mAL state.
inline ConservedSet conserved_quantities(const LatticeState& s) {
  if (s.gauge != Gauge::mal)
    throw PreconditionError("conserved_quantities: state is not in the mAL gauge");
  check_domain(s);
  const auto& a = s.alpha;
  const std::size_t N = a.size();
  const double sg = sign_value(s.sign);
  ConservedSet c;
  double mass_l2 = 0.0;
  double higher = 0.0;
  double p = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const double x = sg * std::norm(a[n]);  // alpha_n beta_n
    mass_l2 += x;
    higher += detail::log1m_plus(x);
    const Complex diff = a[n + 1 == N ? 0 : n + 1] - a[n == 0 ? N - 1 : n - 1];
    p += (std::conj(a[n]) * diff).imag();
  }
  // M = -sum ln(1 - x) = sum x - sum [ln(1 - x) + x]
  c.M = mass_l2 - higher;
  c.E2 = quadratic_energy_sum(a, s.sign);
  // E = E2 - 2 sum [ln(1 - x) + x]; the quadratic terms regroup into E2.
  c.E = c.E2 - 2.0 * higher;
  c.P = sg * p;
  return c;
}

/// Half|M| <= ||alpha||^2 <= 2|M|; only meaningful while ||alpha||^2 <= 1/20.
inline bool mass_equivalence_holds(const LatticeState& s) {
  const double l2 = norm2_sq(s.alpha);
  const double m = std::abs(conserved_quantities(s).M);
  return 0.5 * m <= l2 && l2 <= 2.0 * m;
}

}  // namespace almkdv

#endif  // ALMKDV_LATTICE_HPP
