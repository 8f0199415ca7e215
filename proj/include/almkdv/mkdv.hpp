#ifndef ALMKDV_MKDV_HPP
#define ALMKDV_MKDV_HPP

#include <fmt/format.h>

#include "almkdv/core.hpp"
#include "almkdv/duhamel.hpp"
#include "almkdv/fft.hpp"
#include "almkdv/integrator.hpp"
#include "almkdv/spectral.hpp"

namespace almkdv {

/// Spectral derivative of the given order. Odd orders drop the Nyquist bin,
/// which has no well-defined real derivative.
inline ContinuumField spectral_derivative(const ContinuumField& f, int order = 1) {
  const std::size_t M = f.size();
  ContinuumField out{f.period, fft::forward(f.values), {}};
  for (std::size_t k = 0; k < M; ++k) {
    const bool nyquist = M % 2 == 0 && k == M / 2;
    if (nyquist && order % 2 != 0) {
      out.values[k] = 0.0;
      continue;
    }
    out.values[k] *= std::pow(I * continuum_xi(k, M, f.period), order);
  }
  fft::inverse_inplace(out.values);
  return out;
}

namespace detail {
inline void mkdv_nonlinear_into(std::span<const Complex> phi, double period, Sign sign,
                                std::span<Complex> out) {
  const std::size_t M = phi.size();
  std::copy(phi.begin(), phi.end(), out.begin());
  fft::forward_inplace(out);
  for (std::size_t k = 0; k < M; ++k)
    out[k] = (M % 2 == 0 && k == M / 2) ? Complex{} : out[k] * (I * continuum_xi(k, M, period));
  fft::inverse_inplace(out);
  const double c = 6.0 * sign_value(sign);
  for (std::size_t j = 0; j < M; ++j) out[j] *= c * std::norm(phi[j]);
  fft::forward_inplace(out);
  dealias(out);
  fft::inverse_inplace(out);
}
}  // namespace detail

/// sign * 6 |phi|^2 phi', derivative taken spectrally, product formed on the
/// grid and the result truncated by the 2/3 rule.
inline ContinuumField mkdv_nonlinear(const ContinuumField& phi, Sign sign) {
  ContinuumField out = zero_field(phi.period, phi.size());
  detail::mkdv_nonlinear_into(phi.values, phi.period, sign, out.values);
  return out;
}

struct MkdvInvariants {
  double mass = 0.0;
  double energy = 0.0;
};

/// int |phi|^2 and int |phi'|^2 + sign |phi|^4.
inline MkdvInvariants mkdv_invariants(const ContinuumField& phi, Sign sign) {
  const auto d = spectral_derivative(phi, 1);
  const double dx = phi.dx();
  MkdvInvariants r;
  double quartic = 0.0;
  for (std::size_t j = 0; j < phi.size(); ++j) {
    const double a = std::norm(phi.values[j]);
    r.mass += a;
    quartic += a * a;
  }
  r.mass *= dx;
  r.energy = dx * (norm2_sq(d.values) + sign_value(sign) * quartic);
  return r;
}

/// phi_t = -phi''' + sign 6 |phi|^2 phi' on the torus.
class MkdvModel {
 public:
  MkdvModel(double period, std::size_t M, Sign sign, bool nonlinear = true)
      : period_(period), sign_(sign), nonlinear_(nonlinear), symbol_(M) {
    for (std::size_t k = 0; k < M; ++k) {
      const double xi = continuum_xi(k, M, period);
      symbol_[k] = Complex(0.0, xi * xi * xi);
    }
  }

  ModelKind kind() const { return ModelKind::mkdv; }
  const ComplexVector& symbol() const { return symbol_; }
  double period() const { return period_; }
  Sign sign() const { return sign_; }
  void nonlinear(std::span<const Complex> u, std::span<Complex> out) const {
    if (nonlinear_)
      detail::mkdv_nonlinear_into(u, period_, sign_, out);
    else
      std::fill(out.begin(), out.end(), Complex{});
  }
  void check(std::span<const Complex> u) const { check_domain(u, Sign::focusing); }
  std::vector<double> invariants(std::span<const Complex> u) const {
    const auto r = mkdv_invariants(ContinuumField{period_, ComplexVector(u.begin(), u.end()), {}},
                                   sign_);
    return {r.mass, r.energy};
  }
  std::vector<std::string> invariant_names() const { return {"mass", "energy"}; }

 private:
  double period_;
  Sign sign_;
  bool nonlinear_;
  ComplexVector symbol_;
};

struct MkdvSolution {
  Trajectory trajectory;
  Sign sign = Sign::focusing;

  double period() const { return trajectory.period; }
  std::size_t size() const { return trajectory.initial.size(); }
  ContinuumField field(std::size_t i) const {
    return {trajectory.period, trajectory.states.at(i), {}};
  }
  ContinuumField final_field() const { return field(trajectory.states.size() - 1); }
};

inline MkdvSolution solve_mkdv(const ContinuumField& phi0, double T, Sign sign,
                               const EvolveOptions& opt, bool nonlinear = true) {
  if (!(T >= 0.0)) throw PreconditionError("solve_mkdv: T must be nonnegative");
  const MkdvModel model(phi0.period, phi0.size(), sign, nonlinear);
  MkdvSolution sol{evolve(model, phi0.values, 0.0, T, opt), sign};
  sol.trajectory.sign = sign;
  sol.trajectory.period = phi0.period;
  return sol;
}

inline MkdvSolution solve_mkdv(const ContinuumField& phi0, double T, Sign sign, double tol = 1e-10,
                               std::size_t outputs = 16) {
  EvolveOptions opt;
  opt.tol = tol;
  opt.outputs = outputs;
  return solve_mkdv(phi0, T, sign, opt);
}

// ---------------------------------------------------------------------------
// One-soliton oracle
//
// Substituting phi = k sech(k y), y = x - x0 - c t, into
// phi_t = -phi''' + 6 sign |phi|^2 phi' gives, with s = sech, t = tanh,
//   phi_t = c k^3 s t,   -phi''' = -k^4 s t (6 s^2 - 1),   6 sign phi^2 phi' = -6 sign k^4 s^3 t,
// so the s^3 t terms cancel only for sign = -1, and then c = k^2.

inline double soliton_speed(double kappa) { return kappa * kappa; }

namespace detail {
struct SechJet {
  double phi, d1, d3;
};
inline SechJet sech_jet(double kappa, double y) {
  const double s = 1.0 / std::cosh(kappa * y);
  const double t = std::tanh(kappa * y);
  const double k2 = kappa * kappa;
  return {kappa * s, -k2 * s * t, k2 * k2 * s * t * (6.0 * s * s - 1.0)};
}
}  // namespace detail

struct SolitonCalibration {
  double speed = 0.0;     ///< least-squares c from the substitution
  double residual = 0.0;  ///< max pointwise |phi_t - rhs| at that c
};

/// Fit c in -c phi' = -phi''' + 6 sign phi^2 phi' on an M-point grid over
/// [-period/2, period/2) using closed-form derivatives, and report the
/// pointwise residual.
inline SolitonCalibration calibrate_soliton(double kappa, Sign sign, double period = 64.0,
                                            std::size_t M = 4096) {
  if (!(kappa > 0.0)) throw PreconditionError("soliton: kappa must be positive");
  const double sg = sign_value(sign);
  std::vector<detail::SechJet> jets(M);
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < M; ++j) {
    const double y = -0.5 * period + period * static_cast<double>(j) / static_cast<double>(M);
    jets[j] = detail::sech_jet(kappa, y);
    const auto& q = jets[j];
    const double rhs = -q.d3 + 6.0 * sg * q.phi * q.phi * q.d1;
    num += -rhs * q.d1;
    den += q.d1 * q.d1;
  }
  SolitonCalibration r{num / den, 0.0};
  for (const auto& q : jets) {
    const double rhs = -q.d3 + 6.0 * sg * q.phi * q.phi * q.d1;
    r.residual = std::max(r.residual, std::abs(-r.speed * q.d1 - rhs));
  }
  return r;
}

/// kappa sech(kappa (x - x0 - kappa^2 t)) on the M-point grid over a period,
/// with the argument wrapped periodically.
inline ContinuumField soliton_exact(double kappa, double x0, double t, double period, std::size_t M,
                                    Sign sign = Sign::focusing) {
  if (sign != Sign::focusing)
    throw UnsupportedModeError("the sech one-soliton exists only for the focusing sign");
  if (!(kappa > 0.0)) throw PreconditionError("soliton: kappa must be positive");
  const double shift = x0 + soliton_speed(kappa) * t;
  return make_field(period, M, [&](double x) {
    return Complex(kappa / std::cosh(kappa * wrap_centered(x - shift, period)), 0.0);
  });
}

// ---------------------------------------------------------------------------
// Residual and local smoothing diagnostics

inline double duhamel_residual_mkdv(const MkdvSolution& sol) {
  const auto& tr = sol.trajectory;
  const MkdvModel model(tr.period, sol.size(), sol.sign);
  return duhamel_residual(model, tr, tr.period / static_cast<double>(sol.size()));
}

struct LocalSmoothing {
  double S4 = 0.0;  ///< sum_j ||chi_j phi||^4 in L^inf_{t,x}
  double K = 0.0;   ///< sup_j ||chi_j phi''||^2 in L^2_{t,x}
  long long argmax_j = 0;
};

/// Evaluated on the stored outputs with 0 <= t <= T, windows chi_j for every
/// integer j whose center lies within 10 of the domain.
inline LocalSmoothing local_smoothing_diagnostics(const MkdvSolution& sol, double T) {
  const auto& tr = sol.trajectory;
  std::size_t n = 0;
  while (n < tr.times.size() && tr.times[n] <= T + 1e-12 * std::max(1.0, T)) ++n;
  if (n == 0) throw InsufficientDataError("local smoothing: no stored times in [0, T]");
  const double dt = uniform_spacing(std::span<const double>(tr.times.data(), n));
  const auto wt = quadrature_weights(n, dt);

  const ContinuumField grid{tr.period, tr.initial, {}};
  const std::size_t M = grid.size();
  const double dx = grid.dx();
  std::vector<double> xs(M);
  for (std::size_t j = 0; j < M; ++j) xs[j] = grid.x_centered(j);
  const auto j_lo = static_cast<long long>(std::floor(-0.5 * tr.period)) - 10;
  const auto j_hi = static_cast<long long>(std::ceil(0.5 * tr.period)) + 10;

  std::vector<std::vector<double>> second(n);  // |phi''|^2 per stored time
  for (std::size_t i = 0; i < n; ++i) {
    const auto d2 = spectral_derivative(sol.field(i), 2);
    second[i].resize(M);
    for (std::size_t j = 0; j < M; ++j) second[i][j] = std::norm(d2.values[j]);
  }

  LocalSmoothing r;
  for (long long jw = j_lo; jw <= j_hi; ++jw) {
    const auto chi = chi_window(jw, xs);
    double sup = 0.0;
    double k = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double space = 0.0;
      for (std::size_t j = 0; j < M; ++j) {
        sup = std::max(sup, chi[j] * std::abs(tr.states[i][j]));
        space += chi[j] * chi[j] * second[i][j];
      }
      k += wt[i] * space * dx;
    }
    r.S4 += sup * sup * sup * sup;
    if (k > r.K) {
      r.K = k;
      r.argmax_j = jw;
    }
  }
  return r;
}

}  // namespace almkdv

#endif  // ALMKDV_MKDV_HPP
