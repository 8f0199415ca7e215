#ifndef ALMKDV_DUHAMEL_HPP
#define ALMKDV_DUHAMEL_HPP

#include <algorithm>
#include <fmt/format.h>

#include "almkdv/core.hpp"
#include "almkdv/fft.hpp"
#include "almkdv/integrator.hpp"

namespace almkdv {

/// Composite quadrature weights for n uniformly spaced samples: Simpson on an
/// even number of intervals, Simpson plus a closing 3/8 panel on an odd number
/// (n >= 4), trapezoid for n = 2.
inline std::vector<double> quadrature_weights(std::size_t n, double dt) {
  std::vector<double> w(n, 0.0);
  if (n <= 1) return w;
  if (n == 2) {
    w[0] = w[1] = 0.5 * dt;
    return w;
  }
  const std::size_t intervals = n - 1;
  const std::size_t simpson_end = intervals % 2 == 0 ? intervals : intervals - 3;
  for (std::size_t i = 0; i + 2 <= simpson_end; i += 2) {
    w[i] += dt / 3.0;
    w[i + 1] += 4.0 * dt / 3.0;
    w[i + 2] += dt / 3.0;
  }
  if (simpson_end != intervals) {
    const std::size_t i = simpson_end;
    w[i] += 3.0 * dt / 8.0;
    w[i + 1] += 9.0 * dt / 8.0;
    w[i + 2] += 9.0 * dt / 8.0;
    w[i + 3] += 3.0 * dt / 8.0;
  }
  return w;
}

inline double uniform_spacing(std::span<const double> times) {
  if (times.size() < 2) return 0.0;
  const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  for (std::size_t i = 1; i < times.size(); ++i)
    if (std::abs(times[i] - times[i - 1] - dt) > 1e-9 * std::max(dt, 1e-300))
      throw PreconditionError("stored output times are not uniformly spaced");
  return dt;
}

/// max_j || u_j - e^{(t_j - t_0) L} u_0 - int_{t_0}^{t_j} e^{(t_j - s) L} N(u(s)) ds ||
/// over the stored outputs, skipping j = 1 where no rule of order 4 applies.
/// `cell` is the quadrature weight of one grid point in the norm (1 for l2
/// sequences, dx for L2 fields).
template <class Nonlinear>
double duhamel_residual(std::span<const double> times, const std::vector<ComplexVector>& states,
                        std::span<const Complex> symbol, Nonlinear&& nonlinear, double cell) {
  const std::size_t J = times.size();
  if (J < 3 || states.size() != J)
    throw InsufficientDataError(
        fmt::format("Duhamel residual needs at least 3 stored times, got {}", J));
  const double dt = uniform_spacing(times);
  const std::size_t M = symbol.size();

  // G_i = e^{-(t_i - t_0) L} FFT[N(u_i)], the integrand in the rotating frame.
  std::vector<ComplexVector> G(J, ComplexVector(M));
  ComplexVector buf(M);
  for (std::size_t i = 0; i < J; ++i) {
    nonlinear(std::span<const Complex>(states[i]), std::span<Complex>(buf));
    fft::forward_inplace(buf);
    const double s = times[i] - times[0];
    for (std::size_t k = 0; k < M; ++k) G[i][k] = std::exp(-symbol[k] * s) * buf[k];
  }

  const ComplexVector u0 = fft::forward(states[0]);
  std::vector<ComplexVector> even(J);  // cumulative Simpson integrals at even j
  even[0] = ComplexVector(M);
  double worst = 0.0;
  ComplexVector integral(M);
  for (std::size_t j = 2; j < J; ++j) {
    if (j % 2 == 0) {
      even[j] = even[j - 2];
      for (std::size_t k = 0; k < M; ++k)
        even[j][k] += dt / 3.0 * (G[j - 2][k] + 4.0 * G[j - 1][k] + G[j][k]);
      integral = even[j];
    } else {
      if (j < 3) continue;
      integral = even[j - 3];
      for (std::size_t k = 0; k < M; ++k)
        integral[k] += 3.0 * dt / 8.0 *
                       (G[j - 3][k] + 3.0 * G[j - 2][k] + 3.0 * G[j - 1][k] + G[j][k]);
    }
    const ComplexVector uj = fft::forward(states[j]);
    const double s = times[j] - times[0];
    double acc = 0.0;
    for (std::size_t k = 0; k < M; ++k)
      acc += std::norm(uj[k] - std::exp(symbol[k] * s) * (u0[k] + integral[k]));
    worst = std::max(worst, std::sqrt(cell * acc / static_cast<double>(M)));
  }
  return worst;
}

template <EvolutionModel Model>
double duhamel_residual(const Model& model, const Trajectory& tr, double cell) {
  return duhamel_residual(tr.times, tr.states, model.symbol(),
                          [&](std::span<const Complex> in, std::span<Complex> out) {
                            model.nonlinear(in, out);
                          },
                          cell);
}

}  // namespace almkdv

#endif  // ALMKDV_DUHAMEL_HPP
