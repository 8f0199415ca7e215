// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <fmt/format.h>

#include <chrono>
#include <cstdio>
#include <functional>

#include "almkdv/convergence.hpp"
#include "almkdv/identities.hpp"

using namespace almkdv;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, std::string note) {
    pass = pass && ok;
    notes.push_back(fmt::format("{} {}", ok ? "ok  " : "FAIL", note));
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ContinuumField gaussian(double period, std::size_t M, double mass, double width = 1.0, double k0 = 0.0) {
  const double amp = std::sqrt(mass / (width * std::sqrt(pi)));
  return make_field(period, M, [&](double x) {
    return std::polar(amp * std::exp(-0.5 * x * x / (width * width)), k0 * x);
  });
}

double fit_slope(const std::vector<double>& dt, const std::vector<double>& v) {
  return log_log_fit(dt, v).first;
}

// ---------------------------------------------------------------------------

Outcome criterion_identities() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& c : exact_identity_suite())
    o.require(c.pass(), fmt::format("{}: {:.2e} ({} {:.0e})", c.name, c.value,
                                    c.upper_bound ? "<=" : ">", c.threshold));
  const double rt = seconds_since(t0);
  o.require(rt < 10.0, fmt::format("runtime {:.2f} s < 10 s", rt));
  return o;
}

Outcome criterion_conservation() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const double h = 0.2, P = 102.4;  // N = 512
  // narrow modulated packet: admissible (h <= h0) yet nonlinear enough for the
  // fixed-step drift to stand clear of roundoff, and P(0) far from zero
  const auto phi0 = gaussian(P, 2048, 0.048, 0.5, 5.0);
  const auto a0 = sample_initial_data(phi0, h, Sign::defocusing);
  o.require(a0.size() == 512, fmt::format("N = {}", a0.size()));
  const double tau = lattice_time(0.5, h);

  EvolveOptions opt;
  opt.outputs = 20;
  const auto tr = evolve_lattice(a0, tau, opt);
  const auto drift = tr.max_relative_drift();
  o.require(std::abs(tr.times.back() - 187.5) < 1e-9, fmt::format("tau horizon {}", tr.times.back()));
  for (std::size_t q = 0; q < 3; ++q)
    o.require(drift[q] <= 1e-8, fmt::format("adaptive tol 1e-10: drift {} = {:.2e} <= 1e-8",
                                            tr.invariant_names[q], drift[q]));

  const std::vector<double> dts{1.0, 0.5, 0.25};
  std::vector<std::vector<double>> per(3);
  for (const double dt : dts) {
    EvolveOptions f;
    f.fixed_dt = dt;
    f.outputs = 20;
    const auto d = evolve_lattice(a0, tau, f).max_relative_drift();
    for (std::size_t q = 0; q < 3; ++q) per[q].push_back(d[q]);
  }
  for (std::size_t q = 0; q < 3; ++q) {
    const double slope = fit_slope(dts, per[q]);
    const auto name = tr.invariant_names[q];
    const auto values = fmt::format("{:.2e} {:.2e} {:.2e}", per[q][0], per[q][1], per[q][2]);
    if (q < 2)
      o.require(std::abs(slope - 4.0) <= 0.3,
                fmt::format("drift {} vs dt {{1, 0.5, 0.25}}: {} slope {:.2f} (4 +- 0.3)", name, values, slope));
    else
      o.require(slope >= 3.7,
                fmt::format("drift {} vs dt {{1, 0.5, 0.25}}: {} slope {:.2f} (at least 4th order)", name,
                            values, slope));
  }
  const double rt = seconds_since(t0);
  o.require(rt < 120.0, fmt::format("runtime {:.2f} s < 120 s", rt));
  return o;
}

struct SweepPair {
  SweepConfig config;
  SweepResult matched;
  SweepResult control;
  double runtime = 0.0;
};

SweepPair continuum_sweeps() {
  SweepPair p;
  const auto t0 = std::chrono::steady_clock::now();
  auto& c = p.config;
  c.phi0 = gaussian(51.2, 1024, 0.024);  // h0 = 1 / 2.4 > 0.4
  c.h_list = {0.4, 0.2, 0.1};
  c.T = 0.25;
  c.s_list = {0.0, 0.5};
  c.outputs = 16;
  p.matched = run_convergence_sweep(c);
  auto control = c;
  control.reference_sign = Sign::focusing;
  p.control = run_convergence_sweep(control);
  p.runtime = seconds_since(t0);
  return p;
}

Outcome criterion_a_priori(const SweepPair& sw) {
  Outcome o;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& l : sw.matched.levels) {
    o.require(!l.failure, fmt::format("h = {} ran", l.h));
    o.require(l.l2_initial <= l.l2_bound * (1.0 + 1e-13),
              fmt::format("h = {}: ||alpha(0)||^2 = {:.6e} <= h ||phi0||^2 = {:.6e}", l.h, l.l2_initial,
                          l.l2_bound));
    o.require(l.l2_ratio_max <= 2.2,
              fmt::format("h = {}: max ||alpha(tau)||^2 / ||alpha(0)||^2 = {:.6f} <= 2.2", l.h, l.l2_ratio_max));
    lo = std::min(lo, l.linf_over_h_max);
    hi = std::max(hi, l.linf_over_h_max);
  }
  const double sup_phi = norm_inf(sw.config.phi0.values);
  o.require(hi <= 2.0 * sup_phi,
            fmt::format("sup ||alpha||_inf / h across sweep = {:.4f} (min {:.4f}) <= 2 sup|phi0| = {:.4f}",
                        hi, lo, 2.0 * sup_phi));
  return o;
}

Outcome criterion_gauge() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  SweepConfig c;
  c.phi0 = gaussian(64.0, 1024, 0.024, 1.0, 0.5);
  c.h_list = {0.25};
  c.T = 0.25;
  c.outputs = 16;
  const auto r = run_convergence_sweep(c);
  o.require(r.failures().empty(), "run completed");
  if (!r.levels.empty())
    o.require(r.levels[0].gauge_deviation <= 1e-10,
              fmt::format("h = 0.25, N = {}: max |phi^h_AL - phi^h_mAL| = {:.2e} <= 1e-10",
                          r.levels[0].N, r.levels[0].gauge_deviation));
  const double rt = seconds_since(t0);
  o.require(rt < 60.0, fmt::format("runtime {:.2f} s < 60 s", rt));
  return o;
}

MkdvSolution subsample(const MkdvSolution& sol, std::size_t stride) {
  MkdvSolution s{sol.trajectory, sol.sign};
  s.trajectory.times.clear();
  s.trajectory.states.clear();
  for (std::size_t i = 0; i < sol.trajectory.times.size(); i += stride) {
    s.trajectory.times.push_back(sol.trajectory.times[i]);
    s.trajectory.states.push_back(sol.trajectory.states[i]);
  }
  return s;
}

Outcome criterion_mkdv(std::vector<std::pair<std::string, LocalSmoothing>>& smoothing) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const double kappa = 1.0, P = 64.0;
  const std::size_t M = 1024;
  const auto cal = calibrate_soliton(kappa, Sign::focusing, P, 4096);
  o.require(cal.residual <= 1e-10,
            fmt::format("calibration on 4096 points: c = {:.15f}, residual {:.2e} <= 1e-10", cal.speed,
                        cal.residual));

  EvolveOptions opt;
  opt.outputs = 16;
  const auto sol = solve_mkdv(soliton_exact(kappa, 0.0, 0.0, P, M), 1.0, Sign::focusing, opt);
  const auto exact = soliton_exact(kappa, 0.0, 1.0, P, M);
  const double err = std::sqrt(exact.dx()) * diff_norm2(exact.values, sol.final_field().values);
  o.require(err <= 1e-6, fmt::format("L2 error vs exact soliton at T = 1: {:.2e} <= 1e-6", err));
  const auto drift = sol.trajectory.max_relative_drift();
  o.require(drift[0] <= 1e-8 && drift[1] <= 1e-8,
            fmt::format("invariant drift mass {:.2e}, energy {:.2e} <= 1e-8", drift[0], drift[1]));
  smoothing.push_back({"soliton T = 1", local_smoothing_diagnostics(sol, 1.0)});

  EvolveOptions fine;
  fine.outputs = 2048;
  const auto dense = solve_mkdv(soliton_exact(kappa, 0.0, 0.0, P, M), 0.25, Sign::focusing, fine);
  std::vector<double> spacing, residual;
  for (const std::size_t stride : {8u, 4u, 2u, 1u}) {
    spacing.push_back(0.25 * static_cast<double>(stride) / 2048.0);
    residual.push_back(duhamel_residual_mkdv(subsample(dense, stride)));
  }
  const double slope = fit_slope(spacing, residual);
  const double last = std::log2(residual[2] / residual[3]);
  o.require(std::abs(last - 4.0) <= 0.4 && slope >= 3.6,
            fmt::format("Duhamel residual {:.2e} {:.2e} {:.2e} {:.2e} for output dt {:.2e}..{:.2e}: "
                        "fitted order {:.2f}, finest halving {:.2f}",
                        residual[0], residual[1], residual[2], residual[3], spacing[0], spacing[3], slope,
                        last));
  const double rt = seconds_since(t0);
  o.require(rt < 120.0, fmt::format("runtime {:.2f} s < 120 s", rt));
  return o;
}

std::vector<double> column(const std::vector<ConvergenceRow>& rows, double t, double s,
                           const std::function<double(const ConvergenceRow&)>& f) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rows)
    if (r.t == t && r.s == s) pts.push_back({r.h, f(r)});
  std::sort(pts.begin(), pts.end(), [](auto a, auto b) { return a.first > b.first; });
  std::vector<double> v;
  for (auto [h, x] : pts) v.push_back(x);
  return v;
}

bool decreasing_by(const std::vector<double>& v, double ratio) {
  if (v.size() < 3) return false;
  for (std::size_t i = 0; i + 1 < v.size(); ++i)
    if (!(v[i] >= ratio * v[i + 1])) return false;
  return true;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (const double x : v) s += fmt::format("{}{:.3e}", s.empty() ? "" : " ", x);
  return s;
}

Outcome criterion_continuum_limit(const SweepPair& sw) {
  Outcome o;
  o.require(sw.matched.failures().empty() && sw.control.failures().empty(), "all levels ran");
  for (const double t : sw.config.comparison_times()) {
    for (const double s : {0.0, 0.5}) {
      const auto e = column(sw.matched.rows, t, s, [](const ConvergenceRow& r) { return r.err_hs; });
      o.require(decreasing_by(e, 1.5),
                fmt::format("t = {:<7} s = {}: err_hs {} (ratio >= 1.5)", t, s, fmt_list(e)));
    }
    const auto lat = column(sw.matched.rows, t, 0.0, [](const ConvergenceRow& r) { return r.err_lattice; });
    o.require(decreasing_by(lat, 1.5), fmt::format("t = {:<7} lattice functional {} (ratio >= 1.5)", t, fmt_list(lat)));
    for (std::size_t k = 0; k < 3; ++k) {
      const auto w = column(sw.matched.rows, t, 0.0, [k](const ConvergenceRow& r) { return r.weak[k]; });
      bool ok = w.size() == 3;
      for (std::size_t i = 0; ok && i + 1 < w.size(); ++i) ok = w[i + 1] < w[i] || w[i] < 1e-9;
      o.require(ok, fmt::format("t = {:<7} weak pairing g{} {}", t, k + 1, fmt_list(w)));
    }
  }
  const auto matched = estimate_rates(sw.matched.rows);
  const auto control = estimate_rates(sw.control.rows);
  o.require(converges(matched, 0.0, 1.5), "matched signs: every s = 0 group converges");
  const auto ctrl = column(sw.control.rows, sw.config.T, 0.0, [](const ConvergenceRow& r) { return r.err_hs; });
  o.require(!converges(control, 0.0, 1.5),
            fmt::format("sign-mismatch control does not converge (t = T: err_hs {})", fmt_list(ctrl)));
  o.require(sw.runtime < 1800.0, fmt::format("runtime {:.2f} s < 1800 s", sw.runtime));
  return o;
}

Outcome criterion_tightness(const SweepPair& sw) {
  Outcome o;
  const double mass = l2_norm_sq(sw.config.phi0);
  for (const double h : sw.config.h_list) {
    const auto a0 = sample_initial_data(sw.config.phi0, h, Sign::defocusing);
    EvolveOptions opt;
    opt.outputs = sw.config.outputs;
    const auto tr = evolve_lattice(a0, lattice_time(sw.config.T, h), opt);
    // (h ||phi0||^2) / h
    const double bound = 0.05 * (h * mass) / h;
    const double t8 = tightness_profile(tr, 8.0);
    const double t16 = tightness_profile(tr, 16.0);
    const double t32 = tightness_profile(tr, 32.0);
    o.require(t8 <= bound, fmt::format("h = {}: sup at L = 8 {:.3e} <= {:.3e}", h, t8, bound));
    o.require(t16 < t8 && t32 <= t16,
              fmt::format("h = {}: L = 8, 16, 32 -> {:.3e} {:.3e} {:.3e} decreasing", h, t8, t16, t32));
  }
  return o;
}

Outcome criterion_smoothing(const SweepPair& sw, std::vector<std::pair<std::string, LocalSmoothing>>& smoothing) {
  Outcome o;
  EvolveOptions opt;
  opt.outputs = sw.config.outputs;
  const std::size_t M = std::max<std::size_t>(sw.config.phi0.size(), 512);
  const auto phi0 = resample(sw.config.phi0, M);
  smoothing.push_back({"sweep reference (defocusing)",
                       local_smoothing_diagnostics(solve_mkdv(phi0, sw.config.T, Sign::defocusing, opt), sw.config.T)});
  smoothing.push_back({"control reference (focusing)",
                       local_smoothing_diagnostics(solve_mkdv(phi0, sw.config.T, Sign::focusing, opt), sw.config.T)});
  for (const auto& [name, ls] : smoothing)
    o.require(std::isfinite(ls.S4) && std::isfinite(ls.K) && ls.S4 > 0.0 && ls.K > 0.0,
              fmt::format("{}: S4 = {:.6e}, K = {:.6e} (window j = {})", name, ls.S4, ls.K, ls.argmax_j));

  // integer translation on a grid with dx = 1/16
  EvolveOptions o8;
  o8.outputs = 8;
  const auto a = solve_mkdv(soliton_exact(1.0, -2.0, 0.0, 32.0, 512), 0.5, Sign::focusing, o8);
  const auto b = solve_mkdv(soliton_exact(1.0, 1.0, 0.0, 32.0, 512), 0.5, Sign::focusing, o8);
  const double da = local_smoothing_diagnostics(a, 0.5).S4;
  const double db = local_smoothing_diagnostics(b, 0.5).S4;
  o.require(std::abs(da - db) <= 1e-10,
            fmt::format("S4 under translation by 3: {:.15f} vs {:.15f}, |diff| = {:.2e} <= 1e-10", da, db,
                        std::abs(da - db)));
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* title, const Outcome& o) {
    std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", id, title);
    for (const auto& n : o.notes) std::printf("       %s\n", n.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };

  report(1, "exact identity suite", criterion_identities());
  report(2, "conservation on defocusing mAL, h = 0.2, N = 512, T = 0.5", criterion_conservation());
  const SweepPair sweeps = continuum_sweeps();
  report(3, "a priori bounds along the sweep", criterion_a_priori(sweeps));
  report(4, "AL / mAL gauge identity at h = 0.25", criterion_gauge());
  std::vector<std::pair<std::string, LocalSmoothing>> smoothing;
  report(5, "mKdV solver validation (soliton, invariants, Duhamel)", criterion_mkdv(smoothing));
  report(6, "continuum limit h = 0.4, 0.2, 0.1 with sign-mismatch control", criterion_continuum_limit(sweeps));
  report(7, "tightness at L = 8 and under doubling", criterion_tightness(sweeps));
  report(8, "local smoothing norms S4 and K", criterion_smoothing(sweeps, smoothing));

  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
