#ifndef ALMKDV_CONVERGENCE_HPP
#define ALMKDV_CONVERGENCE_HPP

#include <fmt/format.h>

#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <ostream>

#include "almkdv/core.hpp"
#include "almkdv/integrator.hpp"
#include "almkdv/lattice.hpp"
#include "almkdv/mkdv.hpp"
#include "almkdv/spectral.hpp"

namespace almkdv {

inline constexpr const char* csv_header =
    "h,t,s,err_hs,err_lattice,weak_g1,weak_g2,weak_g3,tightness_sup,mass_drift,energy_drift,"
    "runtime_s";
inline constexpr const char* summary_header = "t,s,slope,r_squared,monotone";

struct ConvergenceRow {
  double h = 0.0;
  double t = 0.0;
  double s = 0.0;
  double err_hs = 0.0;
  double err_lattice = 0.0;
  std::array<double, 3> weak{};
  double tightness_sup = 0.0;
  double mass_drift = 0.0;
  double energy_drift = 0.0;
  double runtime_s = 0.0;
};

// ---------------------------------------------------------------------------
// Error functionals

namespace detail {
inline void check_same_period(double a, double b, const char* what) {
  if (std::abs(a - b) > 1e-12 * std::max(std::abs(a), std::abs(b)))
    throw PreconditionError(fmt::format("{}: periods differ ({} vs {})", what, a, b));
}
}  // namespace detail

/// ||phih - phi||_{H^s}, after spectral resampling onto the finer grid.
inline double hs_error(const ContinuumField& phih, const ContinuumField& phi, double s) {
  detail::check_same_period(phih.period, phi.period, "hs_error");
  const std::size_t M = std::max(phih.size(), phi.size());
  const auto a = resample(phih, M);
  const auto b = resample(phi, M);
  ContinuumField d{a.period, a.values, {}};
  for (std::size_t j = 0; j < M; ++j) d.values[j] -= b.values[j];
  return sobolev_norm(d, s);
}

/// h^{1/2} || h^{-1} alpha_n - phi(t, n h - 2 h tau) ||_{l2}, tau = 3 h^{-3} t.
inline double lattice_comparison(const LatticeState& state, const ContinuumField& phi,
                                 double t_cont) {
  if (state.gauge != Gauge::mal)
    throw PreconditionError("lattice_comparison: state is not in the mAL gauge");
  check_time_consistency(state.time, t_cont, state.h);
  detail::check_same_period(state.period(), phi.period, "lattice_comparison");
  const std::size_t N = state.size();
  const auto samples = sample_on_lattice(phi, N, -2.0 * state.h * state.time);
  double acc = 0.0;
  for (std::size_t n = 0; n < N; ++n) acc += std::norm(state.alpha[n] / state.h - samples[n]);
  return std::sqrt(state.h * acc);
}

/// |<psi, f>_{H^1}| with <a, b>_{H^1} = (1/period) sum <xi>^2 conj(a_hat) b_hat.
inline double h1_pairing(const ContinuumField& psi, const ContinuumField& f) {
  detail::check_same_period(psi.period, f.period, "h1_pairing");
  const std::size_t M = std::max(psi.size(), f.size());
  const auto a = continuum_fourier(resample(psi, M));
  const auto b = continuum_fourier(resample(f, M));
  Complex acc{};
  for (std::size_t k = 0; k < M; ++k) {
    const double xi = continuum_xi(k, M, f.period);
    acc += (1.0 + xi * xi) * std::conj(a.coeffs[k]) * b.coeffs[k];
  }
  return std::abs(acc) / f.period;
}

/// Gaussian, x * Gaussian and a modulated Gaussian, all centered at 0.
inline std::array<ContinuumField, 3> weak_test_profiles(double period, std::size_t M) {
  return {make_field(period, M, [](double x) { return Complex(std::exp(-0.5 * x * x)); }),
          make_field(period, M, [](double x) { return Complex(x * std::exp(-0.5 * x * x)); }),
          make_field(period, M,
                     [](double x) { return std::polar(std::exp(-0.5 * x * x), 2.0 * x); })};
}

/// h^{-1} sum_n [1 - chi(2 (n - 2 tau) h / L)] |alpha_n|^2 for one state, with
/// n - 2 tau wrapped periodically.
inline double tightness_value(const LatticeState& s, double L, Taper taper = Taper::smooth) {
  const std::size_t N = s.size();
  const double center = 2.0 * s.time;
  double acc = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const double d = wrap_centered(static_cast<double>(n) - center, static_cast<double>(N));
    const double w = 1.0 - cutoff(2.0 * d * s.h / L, taper);
    acc += w * std::norm(s.alpha[n]);
  }
  return acc / s.h;
}

/// Supremum of tightness_value over the stored states (the first `count`
/// of them if given).
inline double tightness_profile(const Trajectory& tr, double L, std::size_t count = 0) {
  if (tr.model != ModelKind::mal) throw PreconditionError("tightness_profile: needs an mAL trajectory");
  if (!(L > 0.0)) throw PreconditionError("tightness_profile: L must be positive");
  const std::size_t n = count == 0 ? tr.states.size() : std::min(count, tr.states.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < n; ++i) sup = std::max(sup, tightness_value(lattice_state_at(tr, i), L));
  return sup;
}

/// phi^h built from an AL-gauge state by shifting its Fourier transform by a
/// quarter turn: c_hat(theta) = e^{2 i tau} u_hat(theta + pi/2).
inline ContinuumField al_moving_frame_profile(const LatticeState& u, double t_cont,
                                              std::size_t M = 0) {
  if (u.gauge != Gauge::al) throw PreconditionError("al_moving_frame_profile: needs an AL state");
  const std::size_t N = u.size();
  if (N % 4 != 0)
    throw PreconditionError(fmt::format("quarter-turn frequency shift needs 4 | N (N = {})", N));
  check_time_consistency(u.time, t_cont, u.h);
  const ComplexVector uh = fft::forward(u.alpha);
  ComplexVector ch(N);
  const Complex phase = std::polar(1.0, 2.0 * u.time);
  for (std::size_t k = 0; k < N; ++k) ch[k] = phase * uh[(k + N / 4) % N];
  fft::inverse_inplace(ch);
  return reconstruct_shifted(ch, u.h, M == 0 ? N : M, 6.0 * t_cont / (u.h * u.h));
}

/// AL data u_n(0) = i^n alpha_n(0) for the gauge-equivalent AL run.
inline LatticeState al_initial_data(const LatticeState& alpha0) {
  LatticeState u = alpha0;
  u.gauge = Gauge::al;
  for (std::size_t n = 0; n < u.size(); ++n) u.alpha[n] = std::conj(quarter_phase(n)) * alpha0.alpha[n];
  return u;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepConfig {
  ContinuumField phi0;
  Sign sign = Sign::defocusing;
  /// Sign used for the continuum reference; differs from `sign` only in the
  /// mismatch control.
  Sign reference_sign = Sign::defocusing;
  std::vector<double> h_list;
  double T = 0.25;
  std::vector<double> t_list;  ///< empty: {T/4, T/2, T}
  std::vector<double> s_list{0.0};
  double tol = 1e-10;
  double L = 8.0;
  Taper taper = Taper::smooth;
  std::size_t outputs = 16;  ///< stored states per run over [0, T]
  std::size_t reference_points = 0;  ///< 0: max(phi0 grid, finest N)
  bool gauge_check = true;
  bool parallel = true;

  std::vector<double> comparison_times() const {
    if (!t_list.empty()) return t_list;
    if (T == 0.0) return {0.0};
    return {0.25 * T, 0.5 * T, T};
  }
};

/// Per-h diagnostics that do not fit the CSV rows.
struct SweepLevel {
  double h = 0.0;
  std::size_t N = 0;
  double runtime_s = 0.0;
  double gauge_deviation = 0.0;   ///< max |phi^h_AL - phi^h_mAL| over compared times
  double l2_initial = 0.0;        ///< ||alpha(0)||^2
  double l2_bound = 0.0;          ///< h ||phi0||^2
  double l2_ratio_max = 0.0;      ///< max_tau ||alpha(tau)||^2 / ||alpha(0)||^2
  double linf_over_h_max = 0.0;   ///< max_tau ||alpha(tau)||_inf / h
  std::size_t accepted_steps = 0;
  std::optional<std::string> failure;
};

struct SweepResult {
  std::vector<ConvergenceRow> rows;
  std::vector<SweepLevel> levels;
  double reference_runtime_s = 0.0;

  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& l : levels)
      if (l.failure) out.push_back(fmt::format("h = {}: {}", l.h, *l.failure));
    return out;
  }
};

namespace detail {

inline std::size_t output_index(double t, double T, std::size_t outputs) {
  if (T == 0.0) return 0;
  const double r = t / T * static_cast<double>(outputs);
  const double k = std::round(r);
  if (std::abs(r - k) > 1e-9 || k < 0.0 || k > static_cast<double>(outputs))
    throw PreconditionError(fmt::format(
        "comparison time {} is not on the output grid T * k / {} (T = {})", t, outputs, T));
  return static_cast<std::size_t>(k);
}

inline double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct LevelOutcome {
  SweepLevel level;
  std::vector<ConvergenceRow> rows;
};

inline LevelOutcome run_level(const SweepConfig& cfg, const ContinuumField& phi0,
                              const MkdvSolution& reference, double h) {
  const auto start = std::chrono::steady_clock::now();
  LevelOutcome out;
  out.level.h = h;
  try {
    const auto alpha0 = sample_initial_data(phi0, h, cfg.sign, cfg.taper);
    const std::size_t N = alpha0.size();
    out.level.N = N;
    out.level.l2_initial = norm2_sq(alpha0.alpha);
    out.level.l2_bound = h * l2_norm_sq(phi0);
    const std::size_t M = phi0.size();

    EvolveOptions opt;
    opt.tol = cfg.tol;
    opt.outputs = cfg.T == 0.0 ? 1 : cfg.outputs;
    const double tau_final = lattice_time(cfg.T, h);
    const Trajectory tr = evolve_lattice(alpha0, tau_final, opt);
    out.level.accepted_steps = tr.accepted_steps();
    for (const auto& a : tr.states) {
      out.level.l2_ratio_max = std::max(out.level.l2_ratio_max, norm2_sq(a) / out.level.l2_initial);
      out.level.linf_over_h_max = std::max(out.level.linf_over_h_max, norm_inf(a) / h);
    }

    std::optional<Trajectory> al;
    if (cfg.gauge_check) al = evolve_lattice(al_initial_data(alpha0), tau_final, opt);

    const auto probes = weak_test_profiles(phi0.period, M);
    for (const double t : cfg.comparison_times()) {
      const std::size_t i = output_index(t, cfg.T, cfg.outputs);
      const LatticeState state = lattice_state_at(tr, i);
      const ContinuumField phih = moving_frame_profile(state, t, M);
      const ContinuumField phi = reference.field(i);
      ContinuumField diff = phih;
      for (std::size_t j = 0; j < M; ++j) diff.values[j] -= phi.values[j];

      if (al) {
        const auto phih_al = al_moving_frame_profile(lattice_state_at(*al, i), t, M);
        out.level.gauge_deviation =
            std::max(out.level.gauge_deviation, max_abs_diff(phih_al.values, phih.values));
      }

      ConvergenceRow base;
      base.h = h;
      base.t = t;
      base.err_lattice = lattice_comparison(state, phi, t);
      for (std::size_t k = 0; k < 3; ++k) base.weak[k] = h1_pairing(probes[k], diff);
      base.tightness_sup = tightness_profile(tr, cfg.L, i + 1);
      const auto first = tr.invariants.front();
      for (std::size_t q = 0; q <= i; ++q) {
        const auto& row = tr.invariants[q];
        base.mass_drift = std::max(base.mass_drift, std::abs(row[0] - first[0]) / std::abs(first[0]));
        base.energy_drift =
            std::max(base.energy_drift, std::abs(row[1] - first[1]) / std::abs(first[1]));
      }
      for (const double s : cfg.s_list) {
        ConvergenceRow r = base;
        r.s = s;
        r.err_hs = sobolev_norm(diff, s);
        out.rows.push_back(r);
      }
    }
  } catch (const Error& e) {
    out.level.failure = e.what();
    out.rows.clear();
  }
  out.level.runtime_s = elapsed(start);
  for (auto& r : out.rows) r.runtime_s = out.level.runtime_s;
  return out;
}

}  // namespace detail

/// One mKdV reference solve, then one task per h: mAL evolution, comparison
/// against the reference at each comparison time, and the AL gauge path.
inline SweepResult run_convergence_sweep(const SweepConfig& cfg) {
  if (cfg.h_list.empty()) throw ConfigError("h_list required");
  std::size_t finest = 0;
  for (const double h : cfg.h_list) finest = std::max(finest, sites_for(cfg.phi0.period, h));
  const std::size_t M = cfg.reference_points != 0 ? cfg.reference_points
                                                   : std::max(cfg.phi0.size(), finest);
  const ContinuumField phi0 = resample(cfg.phi0, M);

  SweepResult result;
  const auto start = std::chrono::steady_clock::now();
  EvolveOptions ref_opt;
  ref_opt.tol = cfg.tol;
  ref_opt.outputs = cfg.T == 0.0 ? 1 : cfg.outputs;
  const MkdvSolution reference = solve_mkdv(phi0, cfg.T, cfg.reference_sign, ref_opt);
  result.reference_runtime_s = detail::elapsed(start);

  std::vector<detail::LevelOutcome> outcomes;
  if (cfg.parallel) {
    std::vector<std::future<detail::LevelOutcome>> tasks;
    for (const double h : cfg.h_list)
      tasks.push_back(std::async(std::launch::async, detail::run_level, std::cref(cfg),
                                 std::cref(phi0), std::cref(reference), h));
    for (auto& f : tasks) outcomes.push_back(f.get());
  } else {
    for (const double h : cfg.h_list) outcomes.push_back(detail::run_level(cfg, phi0, reference, h));
  }
  for (auto& o : outcomes) {
    result.levels.push_back(o.level);
    result.rows.insert(result.rows.end(), o.rows.begin(), o.rows.end());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Rates and reports

struct RateSummary {
  double t = 0.0;
  double s = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  bool monotone = false;   ///< strictly decreasing as h decreases
  double min_ratio = 0.0;  ///< smallest err(h_i) / err(h_{i+1}) over consecutive h
  std::size_t points = 0;
};

struct RateReport {
  std::vector<RateSummary> groups;
  std::vector<std::string> warnings;
};

/// Least-squares fit of log(value) against log(h). Returns {slope, r^2};
/// r^2 is 0 when the values carry no variation to explain.
inline std::pair<double, double> log_log_fit(std::span<const double> h, std::span<const double> v) {
  const std::size_t n = h.size();
  double mx = 0.0, my = 0.0;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::log(h[i]);
    y[i] = std::log(std::max(v[i], 1e-300));
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  const double r2 = (sxx > 0.0 && syy > 1e-30) ? (sxy * sxy) / (sxx * syy) : 0.0;
  return {slope, r2};
}

/// Group rows by (t, s) and fit the chosen error column against h.
inline RateReport estimate_rates(const std::vector<ConvergenceRow>& rows,
                                 const std::function<double(const ConvergenceRow&)>& column =
                                     [](const ConvergenceRow& r) { return r.err_hs; }) {
  std::map<std::pair<double, double>, std::vector<std::pair<double, double>>> groups;
  for (const auto& r : rows) groups[{r.t, r.s}].push_back({r.h, column(r)});
  RateReport report;
  for (auto& [key, pts] : groups) {
    std::sort(pts.begin(), pts.end(), [](auto a, auto b) { return a.first > b.first; });
    pts.erase(std::unique(pts.begin(), pts.end(), [](auto a, auto b) { return a.first == b.first; }),
              pts.end());
    if (pts.size() < 3) {
      report.warnings.push_back(fmt::format(
          "skipping t = {}, s = {}: {} distinct h values (need 3)", key.first, key.second, pts.size()));
      continue;
    }
    std::vector<double> hs, vs;
    for (auto [h, v] : pts) {
      hs.push_back(h);
      vs.push_back(v);
    }
    RateSummary g;
    g.t = key.first;
    g.s = key.second;
    g.points = pts.size();
    std::tie(g.slope, g.r_squared) = log_log_fit(hs, vs);
    g.monotone = true;
    g.min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < vs.size(); ++i) {
      if (!(vs[i + 1] < vs[i])) g.monotone = false;
      g.min_ratio = std::min(g.min_ratio, vs[i + 1] > 0.0 ? vs[i] / vs[i + 1]
                                                          : std::numeric_limits<double>::infinity());
    }
    report.groups.push_back(g);
  }
  return report;
}

/// Every (t, s = s_target) group decreases with at least `ratio` per refinement.
inline bool converges(const RateReport& report, double s_target = 0.0, double ratio = 1.5) {
  bool any = false;
  for (const auto& g : report.groups) {
    if (g.s != s_target) continue;
    any = true;
    if (!g.monotone || g.min_ratio < ratio) return false;
  }
  return any;
}

inline void write_rows_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  os << csv_header << '\n';
  for (const auto& r : rows)
    os << fmt::format("{},{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.6e},{:.6e},{:.3f}\n",
                      r.h, r.t, r.s, r.err_hs, r.err_lattice, r.weak[0], r.weak[1], r.weak[2],
                      r.tightness_sup, r.mass_drift, r.energy_drift, r.runtime_s);
}

inline void write_summary_csv(std::ostream& os, const RateReport& report) {
  os << summary_header << '\n';
  for (const auto& g : report.groups)
    os << fmt::format("{},{},{:.6f},{:.6f},{}\n", g.t, g.s, g.slope, g.r_squared,
                      g.monotone ? "true" : "false");
}

/// Whitespace-separated columns for gnuplot, one block per (t, s) group.
inline void write_errors_dat(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  os << "# h t s err_hs err_lattice weak_g1 weak_g2 weak_g3 tightness_sup\n";
  std::map<std::pair<double, double>, std::vector<const ConvergenceRow*>> groups;
  for (const auto& r : rows) groups[{r.t, r.s}].push_back(&r);
  bool first = true;
  for (auto& [key, list] : groups) {
    if (!first) os << "\n\n";
    first = false;
    os << fmt::format("# t = {} s = {}\n", key.first, key.second);
    std::sort(list.begin(), list.end(), [](auto a, auto b) { return a->h > b->h; });
    for (const auto* r : list)
      os << fmt::format("{} {} {} {:.10e} {:.10e} {:.10e} {:.10e} {:.10e} {:.10e}\n", r->h, r->t,
                        r->s, r->err_hs, r->err_lattice, r->weak[0], r->weak[1], r->weak[2],
                        r->tightness_sup);
  }
}

/// Fit rates and write sweep.csv, summary.csv and errors.dat into `dir`.
inline RateReport estimate_rate_and_report(const std::vector<ConvergenceRow>& rows,
                                           const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  RateReport report = estimate_rates(rows);
  std::ofstream csv(dir / "sweep.csv");
  write_rows_csv(csv, rows);
  std::ofstream summary(dir / "summary.csv");
  write_summary_csv(summary, report);
  std::ofstream dat(dir / "errors.dat");
  write_errors_dat(dat, rows);
  if (!csv || !summary || !dat)
    throw Error(fmt::format("could not write reports into {}", dir.string()));
  return report;
}

}  // namespace almkdv

#endif  // ALMKDV_CONVERGENCE_HPP
