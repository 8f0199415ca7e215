#ifndef ALMKDV_INTEGRATOR_HPP
#define ALMKDV_INTEGRATOR_HPP

#include <algorithm>
#include <concepts>
#include <fmt/format.h>
#include <limits>
#include <optional>
#include <string>

#include "almkdv/core.hpp"
#include "almkdv/fft.hpp"
#include "almkdv/lattice.hpp"

namespace almkdv {

enum class ModelKind { mal, al, mkdv };

inline const char* to_string(ModelKind m) {
  switch (m) {
    case ModelKind::mal: return "mal";
    case ModelKind::al: return "al";
    default: return "mkdv";
  }
}

struct StepRecord {
  double time = 0.0;  ///< start of the attempted step
  double dt = 0.0;
  double error = 0.0;  ///< step-doubling estimate per unit time, relative
  bool accepted = false;
};

/// Stored flow of one model. Output times are uniform; invariants[i] holds the
/// model's conserved quantities at times[i].
struct Trajectory {
  ModelKind model = ModelKind::mal;
  Sign sign = Sign::defocusing;
  double h = 0.0;       ///< lattice mesh (0 for continuum models)
  double period = 0.0;  ///< spatial period of the underlying domain
  ComplexVector initial;
  double dt_initial = 0.0;
  std::vector<double> times;
  std::vector<ComplexVector> states;
  std::vector<StepRecord> steps;
  std::vector<std::string> invariant_names;
  std::vector<std::vector<double>> invariants;

  std::size_t accepted_steps() const {
    return static_cast<std::size_t>(
        std::count_if(steps.begin(), steps.end(), [](const StepRecord& r) { return r.accepted; }));
  }

  /// max_i |Q(t_i) - Q(t_0)| / max(|Q(t_0)|, floor) for each invariant Q.
  std::vector<double> max_relative_drift(double floor = 1e-14) const {
    std::vector<double> drift(invariant_names.size(), 0.0);
    if (invariants.empty()) return drift;
    for (std::size_t q = 0; q < drift.size(); ++q) {
      const double q0 = invariants.front()[q];
      for (const auto& row : invariants)
        drift[q] = std::max(drift[q], std::abs(row[q] - q0) / std::max(std::abs(q0), floor));
    }
    return drift;
  }

  /// Index of the stored time closest to t; throws if none is within tol.
  std::size_t index_of(double t, double tol = 1e-9) const {
    for (std::size_t i = 0; i < times.size(); ++i)
      if (std::abs(times[i] - t) <= tol * std::max(1.0, std::abs(t))) return i;
    throw PreconditionError(fmt::format("trajectory has no stored state at t = {}", t));
  }
};

/// Models advanced by the integrating-factor scheme: du/dt = L u + N(u) with L
/// diagonal in the FFT basis.
template <class M>
concept EvolutionModel = requires(const M& m, std::span<const Complex> u, std::span<Complex> out) {
  { m.kind() } -> std::same_as<ModelKind>;
  { m.symbol() } -> std::convertible_to<const ComplexVector&>;
  m.nonlinear(u, out);
  m.check(u);
  { m.invariants(u) } -> std::convertible_to<std::vector<double>>;
  { m.invariant_names() } -> std::convertible_to<std::vector<std::string>>;
};

namespace detail {

inline void apply_exponential(std::span<Complex> u, std::span<const Complex> factors) {
  fft::forward_inplace(u);
  for (std::size_t k = 0; k < u.size(); ++k) u[k] *= factors[k];
  fft::inverse_inplace(u);
}

inline bool all_finite(std::span<const Complex> u) {
  return std::all_of(u.begin(), u.end(),
                     [](const Complex& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

}  // namespace detail

/// One classical Lawson (integrating-factor) RK4 step. `symbol` is the
/// diagonal generator L_k of the linear flow; the linear part is propagated
/// exactly by e^{L dt}. Returns nullopt if any stage is not finite.
template <class Nonlinear>
std::optional<ComplexVector> lawson_rk4_step(std::span<const Complex> u, double dt,
                                             std::span<const Complex> symbol, Nonlinear&& nonlinear) {
  const std::size_t n = u.size();
  ComplexVector half(n);
  for (std::size_t k = 0; k < n; ++k) half[k] = std::exp(symbol[k] * (0.5 * dt));

  ComplexVector k1(n), k2(n), k3(n), k4(n), a(n), b(n), c(n);
  nonlinear(u, std::span<Complex>(k1));
  if (!detail::all_finite(k1)) return std::nullopt;

  for (std::size_t i = 0; i < n; ++i) a[i] = u[i] + (0.5 * dt) * k1[i];
  detail::apply_exponential(a, half);
  nonlinear(std::span<const Complex>(a), std::span<Complex>(k2));
  if (!detail::all_finite(k2)) return std::nullopt;

  ComplexVector u_half(u.begin(), u.end());
  detail::apply_exponential(u_half, half);
  for (std::size_t i = 0; i < n; ++i) b[i] = u_half[i] + (0.5 * dt) * k2[i];
  nonlinear(std::span<const Complex>(b), std::span<Complex>(k3));
  if (!detail::all_finite(k3)) return std::nullopt;

  for (std::size_t i = 0; i < n; ++i) c[i] = u_half[i] + dt * k3[i];
  detail::apply_exponential(c, half);
  nonlinear(std::span<const Complex>(c), std::span<Complex>(k4));
  if (!detail::all_finite(k4)) return std::nullopt;

  // E_h [ E_h (u + dt/6 k1) + dt/3 (k2 + k3) ] + dt/6 k4
  ComplexVector out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = u[i] + (dt / 6.0) * k1[i];
  detail::apply_exponential(out, half);
  for (std::size_t i = 0; i < n; ++i) out[i] += (dt / 3.0) * (k2[i] + k3[i]);
  detail::apply_exponential(out, half);
  for (std::size_t i = 0; i < n; ++i) out[i] += (dt / 6.0) * k4[i];
  if (!detail::all_finite(out)) return std::nullopt;
  return out;
}

template <EvolutionModel Model>
std::optional<ComplexVector> lawson_rk4_step(const Model& model, std::span<const Complex> u,
                                             double dt) {
  return lawson_rk4_step(u, dt, model.symbol(),
                         [&](std::span<const Complex> in, std::span<Complex> out) {
                           model.nonlinear(in, out);
                         });
}

struct EvolveOptions {
  /// Allowed step-doubling error per unit time, relative to ||u||.
  double tol = 1e-10;
  /// Number of uniform output intervals over [t0, t_final].
  std::size_t outputs = 1;
  /// When set, take fixed steps no longer than this instead of adapting.
  std::optional<double> fixed_dt;
  /// First trial step; 0 picks one from the output spacing.
  double dt_initial = 0.0;
  double dt_min = 1e-12;
  /// Relative one-step differences below this are treated as zero error.
  double roundoff_floor = 64.0 * std::numeric_limits<double>::epsilon();
  double safety = 0.9;
  double min_factor = 0.2;
  double max_factor = 5.0;
};

/// Zero the top third of the spectrum (keep 3|k| < M).
inline void dealias(std::span<Complex> spectrum) {
  const std::size_t M = spectrum.size();
  for (std::size_t k = 0; k < M; ++k)
    if (3 * std::llabs(signed_bin(k, M)) >= static_cast<long long>(M)) spectrum[k] = 0.0;
}

/// Integrate from t0 to t_final, storing outputs+1 uniformly spaced states.
/// Adaptive mode compares one step of size dt with two of size dt/2 and
/// keeps the two-step result.
template <EvolutionModel Model>
Trajectory evolve(const Model& model, const ComplexVector& u0, double t0, double t_final,
                  const EvolveOptions& opt) {
  if (!(t_final >= t0)) throw PreconditionError("evolve: t_final precedes the start time");
  if (!(opt.tol > 0.0)) throw PreconditionError("evolve: tol must be positive");
  if (opt.outputs == 0) throw PreconditionError("evolve: need at least one output interval");
  model.check(u0);

  Trajectory tr;
  tr.model = model.kind();
  tr.initial = u0;
  tr.invariant_names = model.invariant_names();
  tr.times.push_back(t0);
  tr.states.push_back(u0);
  tr.invariants.push_back(model.invariants(u0));
  if (t_final == t0) return tr;

  const double interval = (t_final - t0) / static_cast<double>(opt.outputs);
  ComplexVector u = u0;
  double t = t0;

  if (opt.fixed_dt) {
    if (!(*opt.fixed_dt > 0.0)) throw PreconditionError("evolve: fixed_dt must be positive");
    const auto substeps = static_cast<std::size_t>(std::ceil(interval / *opt.fixed_dt - 1e-9));
    const double dt = interval / static_cast<double>(substeps);
    tr.dt_initial = dt;
    for (std::size_t i = 1; i <= opt.outputs; ++i) {
      for (std::size_t s = 0; s < substeps; ++s) {
        auto next = lawson_rk4_step(model, u, dt);
        if (!next) throw StiffnessError(fmt::format("fixed step failed at t = {}", t), t, u);
        model.check(*next);
        tr.steps.push_back({t, dt, 0.0, true});
        u = std::move(*next);
        t += dt;
      }
      t = t0 + static_cast<double>(i) * interval;
      tr.times.push_back(t);
      tr.states.push_back(u);
      tr.invariants.push_back(model.invariants(u));
    }
    return tr;
  }

  double dt = opt.dt_initial > 0.0 ? opt.dt_initial : std::min(interval, 0.1);
  tr.dt_initial = dt;
  for (std::size_t i = 1; i <= opt.outputs; ++i) {
    const double target = t0 + static_cast<double>(i) * interval;
    while (target - t > 1e-14 * std::max(1.0, std::abs(target))) {
      const double remaining = target - t;
      const bool truncated = dt >= remaining;
      const double step = truncated ? remaining : dt;

      double err = std::numeric_limits<double>::infinity();
      std::optional<ComplexVector> two;
      if (auto one = lawson_rk4_step(model, u, step)) {
        if (auto mid = lawson_rk4_step(model, u, 0.5 * step)) {
          two = lawson_rk4_step(model, *mid, 0.5 * step);
          if (two) {
            const double scale = std::max(norm2(*two), std::numeric_limits<double>::min());
            // differences at roundoff level carry no information; without the
            // floor a short truncated step can never be accepted
            const double local = diff_norm2(*two, *one) / (15.0 * scale);
            err = std::max(local - opt.roundoff_floor, 0.0) / step;
          }
        }
      }

      if (err <= opt.tol) {
        model.check(*two);
        tr.steps.push_back({t, step, err, true});
        u = std::move(*two);
        t = truncated ? target : t + step;
        const double factor =
            err == 0.0 ? opt.max_factor
                       : std::clamp(opt.safety * std::pow(opt.tol / err, 0.25), opt.min_factor,
                                    opt.max_factor);
        dt = truncated ? std::max(dt, step * factor) : step * factor;
      } else {
        tr.steps.push_back({t, step, err, false});
        const double factor = std::isfinite(err)
                                  ? std::clamp(opt.safety * std::pow(opt.tol / err, 0.25),
                                               opt.min_factor, 1.0)
                                  : opt.min_factor;
        dt = step * factor;
        if (dt < opt.dt_min)
          throw StiffnessError(
              fmt::format("step size underflow (dt = {:.3e}) at t = {}", dt, t), t, u);
      }
    }
    t = target;
    tr.times.push_back(t);
    tr.states.push_back(u);
    tr.invariants.push_back(model.invariants(u));
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Lattice models

class MalModel {
 public:
  MalModel(std::size_t n, Sign sign, bool nonlinear = true)
      : sign_(sign), nonlinear_(nonlinear), symbol_(mal_symbol(n)) {}

  ModelKind kind() const { return ModelKind::mal; }
  const ComplexVector& symbol() const { return symbol_; }
  void nonlinear(std::span<const Complex> u, std::span<Complex> out) const {
    if (nonlinear_)
      mal_nonlinear(u, sign_, out);
    else
      std::fill(out.begin(), out.end(), Complex{});
  }
  void check(std::span<const Complex> u) const { check_domain(u, sign_); }
  std::vector<double> invariants(std::span<const Complex> u) const {
    LatticeState s{1.0, sign_, Gauge::mal, 0.0, ComplexVector(u.begin(), u.end())};
    const auto c = conserved_quantities(s);
    return {c.M, c.E, c.P};
  }
  std::vector<std::string> invariant_names() const { return {"M", "E", "P"}; }

 private:
  Sign sign_;
  bool nonlinear_;
  ComplexVector symbol_;
};

class AlModel {
 public:
  AlModel(std::size_t n, Sign sign, bool nonlinear = true)
      : sign_(sign), nonlinear_(nonlinear), symbol_(al_symbol(n)) {}

  ModelKind kind() const { return ModelKind::al; }
  const ComplexVector& symbol() const { return symbol_; }
  void nonlinear(std::span<const Complex> u, std::span<Complex> out) const {
    if (nonlinear_)
      al_nonlinear(u, sign_, out);
    else
      std::fill(out.begin(), out.end(), Complex{});
  }
  void check(std::span<const Complex> u) const { check_domain(u, sign_); }
  /// M, E, P of the gauge-equivalent mAL state; the time phase e^{2it} drops out.
  std::vector<double> invariants(std::span<const Complex> u) const {
    LatticeState s{1.0, sign_, Gauge::mal, 0.0, ComplexVector(u.size())};
    for (std::size_t n = 0; n < u.size(); ++n) s.alpha[n] = quarter_phase(n) * u[n];
    const auto c = conserved_quantities(s);
    return {c.M, c.E, c.P};
  }
  std::vector<std::string> invariant_names() const { return {"M", "E", "P"}; }

 private:
  Sign sign_;
  bool nonlinear_;
  ComplexVector symbol_;
};

/// Evolve a lattice state (either gauge) to lattice time t_final.
inline Trajectory evolve_lattice(const LatticeState& s, double t_final, const EvolveOptions& opt,
                                 bool nonlinear = true) {
  validate_shape(s);
  Trajectory tr = s.gauge == Gauge::mal
                      ? evolve(MalModel(s.size(), s.sign, nonlinear), s.alpha, s.time, t_final, opt)
                      : evolve(AlModel(s.size(), s.sign, nonlinear), s.alpha, s.time, t_final, opt);
  tr.sign = s.sign;
  tr.h = s.h;
  tr.period = s.period();
  return tr;
}

/// Lattice state stored at output i of a lattice trajectory.
inline LatticeState lattice_state_at(const Trajectory& tr, std::size_t i) {
  if (tr.model == ModelKind::mkdv) throw PreconditionError("lattice_state_at: continuum trajectory");
  return {tr.h, tr.sign, tr.model == ModelKind::mal ? Gauge::mal : Gauge::al, tr.times.at(i),
          tr.states.at(i)};
}

}  // namespace almkdv

#endif  // ALMKDV_INTEGRATOR_HPP
