#ifndef ALMKDV_SPECTRAL_HPP
#define ALMKDV_SPECTRAL_HPP

#include <algorithm>
#include <fmt/format.h>
#include <optional>

#include "almkdv/core.hpp"
#include "almkdv/fft.hpp"
#include "almkdv/lattice.hpp"

namespace almkdv {

struct SobolevRecord {
  double s;
  double value;
};

/// A complex function on the torus [0, period), sampled at x_j = j * period / M.
/// Spectral coefficients follow f_hat(xi) = int f e^{-i x xi} dx, so that
/// f(x) = (1/period) sum_k f_hat(xi_k) e^{i x xi_k}.
struct ContinuumField {
  double period = 1.0;
  ComplexVector values;
  /// Norms recorded by record_sobolev_norm; purely informational.
  std::vector<SobolevRecord> norms;

  std::size_t size() const { return values.size(); }
  double dx() const { return period / static_cast<double>(values.size()); }
  double x(std::size_t j) const { return static_cast<double>(j) * dx(); }
  /// Grid coordinate wrapped into [-period/2, period/2).
  double x_centered(std::size_t j) const { return wrap_centered(x(j), period); }
};

inline ContinuumField zero_field(double period, std::size_t M) {
  return ContinuumField{period, ComplexVector(M), {}};
}

template <class Fn>
ContinuumField make_field(double period, std::size_t M, Fn&& f) {
  ContinuumField out = zero_field(period, M);
  for (std::size_t j = 0; j < M; ++j) out.values[j] = f(out.x_centered(j));
  return out;
}

inline double continuum_xi(std::size_t k, std::size_t M, double period) {
  return 2.0 * pi * static_cast<double>(signed_bin(k, M)) / period;
}

// ---------------------------------------------------------------------------
// Fourier conventions

enum class FourierConvention { lattice, continuum };

/// Lattice: coeffs[k] = a_hat(theta_k), scale = N.
/// Continuum: coeffs[k] = f_hat(xi_k), scale = period.
struct SpectralCoefficients {
  FourierConvention convention = FourierConvention::lattice;
  double scale = 1.0;
  ComplexVector coeffs;
};

inline SpectralCoefficients lattice_fourier(std::span<const Complex> a) {
  return {FourierConvention::lattice, static_cast<double>(a.size()), fft::forward(a)};
}

inline ComplexVector lattice_inverse(const SpectralCoefficients& c) {
  if (c.convention != FourierConvention::lattice)
    throw PreconditionError("lattice_inverse: coefficients use the continuum convention");
  return fft::inverse(c.coeffs);
}

inline SpectralCoefficients continuum_fourier(const ContinuumField& f) {
  SpectralCoefficients c{FourierConvention::continuum, f.period, fft::forward(f.values)};
  const double dx = f.dx();
  for (auto& z : c.coeffs) z *= dx;
  return c;
}

inline ContinuumField continuum_inverse(const SpectralCoefficients& c) {
  if (c.convention != FourierConvention::continuum)
    throw PreconditionError("continuum_inverse: coefficients use the lattice convention");
  ContinuumField f{c.scale, fft::inverse(c.coeffs), {}};
  const double factor = static_cast<double>(c.coeffs.size()) / c.scale;
  for (auto& z : f.values) z *= factor;
  return f;
}

/// sum |a_n|^2 or int |f|^2 dx, evaluated on the frequency side.
inline double spectral_energy(const SpectralCoefficients& c) {
  return norm2_sq(c.coeffs) / c.scale;
}

inline double l2_norm_sq(const ContinuumField& f) { return f.dx() * norm2_sq(f.values); }
inline double l2_norm(const ContinuumField& f) { return std::sqrt(l2_norm_sq(f)); }

/// Apply a multiplier m(xi) to a continuum field.
template <class Symbol>
ContinuumField apply_continuum_multiplier(const ContinuumField& f, Symbol&& m) {
  const std::size_t M = f.size();
  ContinuumField out{f.period, fft::apply_multiplier(f.values,
                                                     [&](std::size_t k) {
                                                       return Complex(m(continuum_xi(k, M, f.period)));
                                                     }),
                     {}};
  return out;
}

/// Exact periodic translation: out(x) = f(x + shift).
inline ContinuumField translate(const ContinuumField& f, double shift) {
  return apply_continuum_multiplier(f, [&](double xi) { return std::polar(1.0, xi * shift); });
}

/// Spectral resampling onto an M-point grid (zero padding or truncation).
inline ContinuumField resample(const ContinuumField& f, std::size_t M) {
  const std::size_t src = f.size();
  if (M == src) return f;
  const ComplexVector spec = fft::forward(f.values);
  ComplexVector dst(M);
  for (std::size_t k = 0; k < src; ++k) {
    const long long b = signed_bin(k, src);
    if (b >= -static_cast<long long>(M / 2) && b < static_cast<long long>((M + 1) / 2))
      dst[wrap(b, M)] = spec[k];
  }
  fft::inverse_inplace(dst);
  const double factor = static_cast<double>(M) / static_cast<double>(src);
  for (auto& z : dst) z *= factor;
  return {f.period, std::move(dst), {}};
}

/// Values f(x0 + n * period / N), n = 0..N-1, by exact trigonometric evaluation.
inline ComplexVector sample_on_lattice(const ContinuumField& f, std::size_t N, double x0 = 0.0) {
  const std::size_t M = f.size();
  if (x0 == 0.0 && M % N == 0) {
    ComplexVector out(N);
    const std::size_t stride = M / N;
    for (std::size_t n = 0; n < N; ++n) out[n] = f.values[n * stride];
    return out;
  }
  const ComplexVector spec = fft::forward(f.values);
  ComplexVector folded(N);
  for (std::size_t k = 0; k < M; ++k) {
    const long long b = signed_bin(k, M);
    folded[wrap(b, N)] += spec[k] * std::polar(1.0, continuum_xi(k, M, f.period) * x0);
  }
  // f(x) = (1/M) sum_k FFT_k e^{i xi_k x}; folding onto N bins leaves an
  // N-point inverse DFT with a factor N/M.
  fft::inverse_inplace(folded);
  const double factor = static_cast<double>(N) / static_cast<double>(M);
  for (auto& z : folded) z *= factor;
  return folded;
}

// ---------------------------------------------------------------------------
// Smooth cutoffs

enum class Taper { smooth, raised_cosine };

inline const char* to_string(Taper t) { return t == Taper::smooth ? "smooth" : "raised_cosine"; }

namespace detail {
inline double g_exp(double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; }

/// C-infinity step: 0 for u <= 0, 1 for u >= 1.
inline double smooth_step(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double a = g_exp(u);
  const double b = g_exp(1.0 - u);
  return a / (a + b);
}
}  // namespace detail

/// Bump equal to 1 on |xi| <= 1 and 0 on |xi| >= 2.
inline double cutoff(double xi, Taper taper = Taper::smooth) {
  const double a = std::abs(xi);
  if (a <= 1.0) return 1.0;
  if (a >= 2.0) return 0.0;
  if (taper == Taper::raised_cosine) return 0.5 * (1.0 + std::cos(pi * (a - 1.0)));
  return detail::smooth_step(2.0 - a);
}

/// P_{<= n_cut}: multiply the spectrum by cutoff(xi / n_cut).
inline ContinuumField smooth_lowpass(const ContinuumField& f, double n_cut,
                                     Taper taper = Taper::smooth) {
  return apply_continuum_multiplier(f, [&](double xi) { return cutoff(xi / n_cut, taper); });
}

// ---------------------------------------------------------------------------
// Sampling and reconstruction

/// Largest admissible mesh for data of the given L^2 mass.
inline double mesh_bound(double l2_mass_sq) {
  return l2_mass_sq > 0.0 ? std::min(1.0, 1.0 / (100.0 * l2_mass_sq)) : 1.0;
}

inline std::string mesh_bound_message(double h, double l2_mass_sq) {
  return fmt::format("mesh h = {} exceeds h0 = min{{1, 1/(100 ||phi0||^2)}} = {:.6g} (||phi0||^2 = {:.6g})",
                     h, mesh_bound(l2_mass_sq), l2_mass_sq);
}

/// Number of lattice sites N = period / h; throws unless it is an integer.
inline std::size_t sites_for(double period, double h) {
  const double n = period / h;
  const double r = std::round(n);
  if (r < 1.0 || std::abs(n - r) > 1e-9 * std::max(1.0, n))
    throw PreconditionError(
        fmt::format("period {} is not an integer multiple of h = {}", period, h));
  return static_cast<std::size_t>(r);
}

/// alpha_n(0) = h [P_{<= pi/(2h)} phi0](h n).
inline LatticeState sample_initial_data(const ContinuumField& phi0, double h, Sign sign,
                                        Taper taper = Taper::smooth) {
  const double mass = l2_norm_sq(phi0);
  if (h > mesh_bound(mass)) throw PreconditionError(mesh_bound_message(h, mass));
  const std::size_t N = sites_for(phi0.period, h);
  const ContinuumField filtered = smooth_lowpass(phi0, pi / (2.0 * h), taper);
  LatticeState s{h, sign, Gauge::mal, 0.0, sample_on_lattice(filtered, N)};
  for (auto& z : s.alpha) z *= h;
  validate_shape(s);
  return s;
}

/// Band-limited interpolant of a lattice sequence: out(x) = [R c](x + shift),
/// on an M-point grid over the period N h.
inline ContinuumField reconstruct_shifted(std::span<const Complex> c, double h, std::size_t M,
                                          double shift) {
  const std::size_t N = c.size();
  if (M < N) throw PreconditionError(fmt::format("reconstruct: grid M = {} below N = {}", M, N));
  const double period = h * static_cast<double>(N);
  const ComplexVector ch = fft::forward(c);
  ComplexVector spec(M);
  for (std::size_t k = 0; k < N; ++k) {
    const long long b = signed_bin(k, N);
    const double xi = 2.0 * pi * static_cast<double>(b) / period;
    spec[wrap(b, M)] = shift == 0.0 ? ch[k] : ch[k] * std::polar(1.0, xi * shift);
  }
  // [R c](x) = (1/period) sum c_hat(theta_k) e^{i x theta_k / h}
  fft::inverse_inplace(spec);
  const double factor = static_cast<double>(M) / period;
  for (auto& z : spec) z *= factor;
  return {period, std::move(spec), {}};
}

inline ContinuumField reconstruct(const LatticeState& s, std::size_t M = 0) {
  if (s.gauge != Gauge::mal) throw PreconditionError("reconstruct: state is not in the mAL gauge");
  return reconstruct_shifted(s.alpha, s.h, M == 0 ? s.size() : M, 0.0);
}

/// Lattice time that corresponds to continuum time t.
inline double lattice_time(double t_cont, double h) { return 3.0 * t_cont / (h * h * h); }

inline void check_time_consistency(double lattice_t, double t_cont, double h) {
  const double expected = lattice_time(t_cont, h);
  if (std::abs(lattice_t - expected) > 1e-9 * std::max(1.0, std::abs(expected)))
    throw PreconditionError(fmt::format(
        "state time {} is inconsistent with continuum time {} (expected 3 t / h^3 = {})",
        lattice_t, t_cont, expected));
}

/// phi^h(t) = T_t R alpha(3 h^{-3} t), with T_t the exact translation by 6 h^{-2} t.
inline ContinuumField moving_frame_profile(const LatticeState& s, double t_cont,
                                           std::size_t M = 0) {
  if (s.gauge != Gauge::mal)
    throw PreconditionError("moving_frame_profile: state is not in the mAL gauge");
  check_time_consistency(s.time, t_cont, s.h);
  return reconstruct_shifted(s.alpha, s.h, M == 0 ? s.size() : M, 6.0 * t_cont / (s.h * s.h));
}

/// Inverse of moving_frame_profile: alpha_n = h phi^h(t, h n - 2 h tau), tau = 3 h^{-3} t.
inline ComplexVector profile_to_lattice(const ContinuumField& phih, double h, double t_cont) {
  const std::size_t N = sites_for(phih.period, h);
  ComplexVector a = sample_on_lattice(phih, N, -2.0 * h * lattice_time(t_cont, h));
  for (auto& z : a) z *= h;
  return a;
}

// ---------------------------------------------------------------------------
// Band-limited products

/// Sharp projection onto lattice frequencies |theta| <= radius.
inline ComplexVector project_to_arc(std::span<const Complex> a, double radius) {
  const std::size_t N = a.size();
  return fft::apply_multiplier(a, [&](std::size_t k) {
    return Complex(std::abs(lattice_theta(k, N)) <= radius ? 1.0 : 0.0);
  });
}

inline bool supported_in_arc(std::span<const Complex> a, double radius, double rel_tol = 1e-12) {
  const std::size_t N = a.size();
  const ComplexVector ah = fft::forward(a);
  const double scale = norm_inf(ah);
  for (std::size_t k = 0; k < N; ++k)
    if (std::abs(lattice_theta(k, N)) > radius && std::abs(ah[k]) > rel_tol * scale) return false;
  return true;
}

/// Pointwise product abc of sequences whose Fourier support lies in |theta| <= 1.
inline ComplexVector bandlimited_product(std::span<const Complex> a, std::span<const Complex> b,
                                         std::span<const Complex> c) {
  if (a.size() != b.size() || a.size() != c.size())
    throw PreconditionError("bandlimited_product: size mismatch");
  for (auto seq : {a, b, c})
    if (!supported_in_arc(seq, 1.0))
      throw PreconditionError("bandlimited_product: input has Fourier support outside |theta| <= 1");
  ComplexVector out(a.size());
  for (std::size_t n = 0; n < a.size(); ++n) out[n] = a[n] * b[n] * c[n];
  return out;
}

/// max_x | R[abc](x) - h^2 R[a](x) R[b](x) R[c](x) | on an M-point grid. No
/// support check, so off-class inputs can be probed.
inline double product_identity_deviation(std::span<const Complex> a, std::span<const Complex> b,
                                         std::span<const Complex> c, double h, std::size_t M) {
  ComplexVector abc(a.size());
  for (std::size_t n = 0; n < a.size(); ++n) abc[n] = a[n] * b[n] * c[n];
  const auto lhs = reconstruct_shifted(abc, h, M, 0.0);
  const auto ra = reconstruct_shifted(a, h, M, 0.0);
  const auto rb = reconstruct_shifted(b, h, M, 0.0);
  const auto rc = reconstruct_shifted(c, h, M, 0.0);
  double dev = 0.0;
  for (std::size_t j = 0; j < M; ++j)
    dev = std::max(dev, std::abs(lhs.values[j] - h * h * ra.values[j] * rb.values[j] * rc.values[j]));
  return dev;
}

// ---------------------------------------------------------------------------
// Littlewood-Paley projections

enum class LpKind { continuum_low, continuum_band, lattice_plus, lattice_minus };

inline void check_dyadic(double n) {
  if (!(n > 0.0) || !std::isfinite(n))
    throw PreconditionError(fmt::format("dyadic scale must be positive, got {}", n));
  const double l = std::log2(n);
  if (std::abs(l - std::round(l)) > 1e-12)
    throw PreconditionError(fmt::format("dyadic scale {} is not a power of two", n));
}

/// Even bump supported in (-3pi/4, 3pi/4) with sum_n bump(theta + pi n) = 1.
inline double lattice_bump(double theta) {
  return detail::smooth_step((0.75 * pi - std::abs(theta)) / (0.5 * pi));
}

/// Symbol of P^sigma_{<= n} at lattice frequency theta in [-pi, pi).
inline double lattice_low_symbol(double theta, double n, bool plus) {
  const double t = plus ? theta : wrap_centered(theta - pi, 2.0 * pi);
  return lattice_bump(t / n);
}

inline double lattice_band_symbol(double theta, double n, bool plus) {
  return lattice_low_symbol(theta, n, plus) - lattice_low_symbol(theta, 0.5 * n, plus);
}

inline ContinuumField lp_project(const ContinuumField& f, double n, LpKind kind,
                                 Taper taper = Taper::smooth) {
  check_dyadic(n);
  switch (kind) {
    case LpKind::continuum_low:
      return apply_continuum_multiplier(f, [&](double xi) { return cutoff(xi / n, taper); });
    case LpKind::continuum_band:
      return apply_continuum_multiplier(
          f, [&](double xi) { return cutoff(xi / n, taper) - cutoff(2.0 * xi / n, taper); });
    default:
      throw PreconditionError("lp_project: lattice kinds act on sequences");
  }
}

/// P^sigma_n on a periodic sequence; n must be a dyadic number <= 1.
inline ComplexVector lp_project(std::span<const Complex> a, double n, LpKind kind) {
  check_dyadic(n);
  if (kind != LpKind::lattice_plus && kind != LpKind::lattice_minus)
    throw PreconditionError("lp_project: continuum kinds act on fields");
  if (n > 1.0) throw PreconditionError(fmt::format("lattice dyadic scale must be <= 1, got {}", n));
  const bool plus = kind == LpKind::lattice_plus;
  const std::size_t N = a.size();
  return fft::apply_multiplier(
      a, [&](std::size_t k) { return Complex(lattice_band_symbol(lattice_theta(k, N), n, plus)); });
}

inline ComplexVector lp_project_low(std::span<const Complex> a, double n, bool plus) {
  check_dyadic(n);
  const std::size_t N = a.size();
  return fft::apply_multiplier(
      a, [&](std::size_t k) { return Complex(lattice_low_symbol(lattice_theta(k, N), n, plus)); });
}

/// Dyadic pieces P^sigma_n for n = 1, 1/2, ..., n_min plus the two residual
/// low pieces P^sigma_{<= n_min/2}. On Z/NZ the frequencies theta = 0 and
/// theta = pi never enter a band piece, so the residuals are required for the
/// pieces to sum back to the input.
struct LatticeLpDecomposition {
  std::vector<double> scales;
  std::vector<ComplexVector> plus;
  std::vector<ComplexVector> minus;
  ComplexVector plus_rest;
  ComplexVector minus_rest;

  ComplexVector sum() const {
    ComplexVector out = plus_rest;
    for (std::size_t n = 0; n < out.size(); ++n) out[n] += minus_rest[n];
    for (std::size_t i = 0; i < scales.size(); ++i)
      for (std::size_t n = 0; n < out.size(); ++n) out[n] += plus[i][n] + minus[i][n];
    return out;
  }
};

inline LatticeLpDecomposition lattice_lp_decompose(std::span<const Complex> a, double n_min) {
  check_dyadic(n_min);
  if (n_min > 1.0) throw PreconditionError("lattice_lp_decompose: n_min must be <= 1");
  LatticeLpDecomposition d;
  for (double n = 1.0; n >= n_min * (1.0 - 1e-12); n *= 0.5) {
    d.scales.push_back(n);
    d.plus.push_back(lp_project(a, n, LpKind::lattice_plus));
    d.minus.push_back(lp_project(a, n, LpKind::lattice_minus));
  }
  d.plus_rest = lp_project_low(a, 0.5 * n_min, true);
  d.minus_rest = lp_project_low(a, 0.5 * n_min, false);
  return d;
}

// ---------------------------------------------------------------------------
// Fractional multipliers and Sobolev norms

enum class MultiplierKind { lattice_abs_sin, continuum_abs, continuum_bracket };

/// |D_d|^s with symbol |sin theta|^s. For s < 0 the sequence must have no
/// weight on the zeros theta = 0 and theta = pi of the symbol.
inline ComplexVector fractional_multiplier(std::span<const Complex> a, double s) {
  const std::size_t N = a.size();
  ComplexVector ah = fft::forward(a);
  if (s < 0.0) {
    const double scale = std::max(norm_inf(ah), 1e-300);
    for (std::size_t k = 0; k < N; ++k) {
      const double sn = std::abs(std::sin(lattice_theta(k, N)));
      if (sn < 1e-14 && std::abs(ah[k]) > 1e-12 * scale)
        throw PreconditionError(fmt::format(
            "|D_d|^{} needs vanishing weight at theta = 0 and pi; bin {} carries {}", s, k,
            std::abs(ah[k])));
    }
  }
  for (std::size_t k = 0; k < N; ++k) {
    const double sn = std::abs(std::sin(lattice_theta(k, N)));
    if (s == 0.0) continue;
    ah[k] = sn < 1e-14 ? Complex{} : ah[k] * std::pow(sn, s);
  }
  fft::inverse_inplace(ah);
  return ah;
}

inline ContinuumField fractional_multiplier(const ContinuumField& f, double s, MultiplierKind kind) {
  if (kind == MultiplierKind::lattice_abs_sin)
    throw PreconditionError("fractional_multiplier: lattice kind acts on sequences");
  if (kind == MultiplierKind::continuum_abs && s < 0.0) {
    const ComplexVector spec = fft::forward(f.values);
    if (std::abs(spec[0]) > 1e-12 * std::max(norm_inf(spec), 1e-300))
      throw PreconditionError(
          fmt::format("|nabla|^{} needs a field with zero mean", s));
  }
  if (kind == MultiplierKind::continuum_bracket)
    return apply_continuum_multiplier(f, [&](double xi) { return std::pow(1.0 + xi * xi, 0.5 * s); });
  return apply_continuum_multiplier(f, [&](double xi) {
    if (s == 0.0) return 1.0;
    return xi == 0.0 ? 0.0 : std::pow(std::abs(xi), s);
  });
}

/// (sum_k <xi_k>^{2s} |f_hat(xi_k)|^2 dxi / 2pi)^{1/2}.
inline double sobolev_norm(const ContinuumField& f, double s) {
  const auto c = continuum_fourier(f);
  const std::size_t M = f.size();
  double acc = 0.0;
  for (std::size_t k = 0; k < M; ++k) {
    const double xi = continuum_xi(k, M, f.period);
    acc += std::pow(1.0 + xi * xi, s) * std::norm(c.coeffs[k]);
  }
  return std::sqrt(acc / f.period);
}

inline double record_sobolev_norm(ContinuumField& f, double s) {
  const double v = sobolev_norm(f, s);
  f.norms.push_back({s, v});
  return v;
}

// ---------------------------------------------------------------------------
// Localizing windows and locality diagnostics

/// chi_j(x) = sech(x - j) / [sum_k sech^6(x - k)]^{1/6}.
inline double chi_window(long long j, double x) {
  const auto lo = static_cast<long long>(std::floor(x)) - 10;
  const auto hi = static_cast<long long>(std::ceil(x)) + 10;
  double denom = 0.0;
  for (long long k = lo; k <= hi; ++k) {
    const double s = 1.0 / std::cosh(x - static_cast<double>(k));
    const double s6 = s * s * s * s * s * s;
    if (s6 >= 1e-18) denom += s6;
  }
  return (1.0 / std::cosh(x - static_cast<double>(j))) / std::pow(denom, 1.0 / 6.0);
}

inline std::vector<double> chi_window(long long j, std::span<const double> grid) {
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = chi_window(j, grid[i]);
  return out;
}

/// Grid surrogate of the maximal function: the largest centered periodic
/// window average of |f| over half-widths 0, 1, 2, 4, ..., M/4 grid points.
inline std::vector<double> grid_maximal_function(std::span<const Complex> f) {
  const std::size_t M = f.size();
  std::vector<double> prefix(3 * M + 1, 0.0);
  for (std::size_t i = 0; i < 3 * M; ++i) prefix[i + 1] = prefix[i] + std::abs(f[i % M]);
  std::vector<double> out(M);
  for (std::size_t j = 0; j < M; ++j) out[j] = std::abs(f[j]);
  for (std::size_t w = 1; w <= std::max<std::size_t>(1, M / 4); w *= 2) {
    for (std::size_t j = 0; j < M; ++j) {
      // window [j - w, j + w] shifted by M so indices stay nonnegative
      const std::size_t a = j + M - w;
      const std::size_t b = j + M + w + 1;
      const double avg = (prefix[b] - prefix[a]) / static_cast<double>(2 * w + 1);
      out[j] = std::max(out[j], avg);
    }
  }
  return out;
}

struct ReconstructionTail {
  double tail_mass = 0.0;  ///< int over |x - tau h| >= L + L' of |R c|^2
  double bound = 0.0;      ///< (L / (h L')) ||c||^2
};

struct InitialDataLocality {
  double lattice_tail = 0.0;  ///< ||alpha(0)||^2 over |n| >= m
  double maximal_tail = 0.0;  ///< h ||M phi0||^2 over |x| >= (m - 1/2) h
};

struct LocalityReport {
  ReconstructionTail reconstruction;
  std::optional<InitialDataLocality> initial;
};

inline ReconstructionTail reconstruction_tail(const LatticeState& s, double tau_center, double L,
                                              double L_prime, std::size_t oversample = 8) {
  const std::size_t M = oversample * s.size();
  const auto f = reconstruct_shifted(s.alpha, s.h, M, 0.0);
  const double center = tau_center * s.h;
  const double radius = L + L_prime;
  ReconstructionTail r;
  for (std::size_t j = 0; j < M; ++j)
    if (std::abs(wrap_centered(f.x(j) - center, f.period)) >= radius)
      r.tail_mass += std::norm(f.values[j]);
  r.tail_mass *= f.dx();
  r.bound = L / (s.h * L_prime) * norm2_sq(s.alpha);
  return r;
}

inline InitialDataLocality initial_data_locality(const LatticeState& alpha0,
                                                 const ContinuumField& phi0, std::size_t m) {
  InitialDataLocality r;
  const std::size_t N = alpha0.size();
  for (std::size_t n = 0; n < N; ++n)
    if (std::llabs(signed_bin(n, N)) >= static_cast<long long>(m)) r.lattice_tail += std::norm(alpha0.alpha[n]);
  const auto maximal = grid_maximal_function(phi0.values);
  const double edge = (static_cast<double>(m) - 0.5) * alpha0.h;
  for (std::size_t j = 0; j < phi0.size(); ++j)
    if (std::abs(phi0.x_centered(j)) >= edge) r.maximal_tail += maximal[j] * maximal[j];
  r.maximal_tail *= alpha0.h * phi0.dx();
  return r;
}

inline LocalityReport locality_diagnostics(const LatticeState& s, double tau_center, double L,
                                           double L_prime, const ContinuumField* phi0 = nullptr,
                                           std::size_t m = 0) {
  LocalityReport r{reconstruction_tail(s, tau_center, L, L_prime), std::nullopt};
  if (phi0 != nullptr) r.initial = initial_data_locality(s, *phi0, m);
  return r;
}

}  // namespace almkdv

#endif  // ALMKDV_SPECTRAL_HPP
