#ifndef ALMKDV_CLI_HPP
#define ALMKDV_CLI_HPP

#include <fmt/format.h>

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "almkdv/convergence.hpp"
#include "almkdv/core.hpp"
#include "almkdv/identities.hpp"
#include "almkdv/integrator.hpp"
#include "almkdv/mkdv.hpp"
#include "almkdv/spectral.hpp"

namespace almkdv::cli {

namespace fs = std::filesystem;

enum ExitCode : int { exit_ok = 0, exit_numerical = 1, exit_config = 2 };

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"simulate", "converge", "soliton", "diagnose",
                                              "selftest"};
  return names;
}

/// Flat key=value settings; the config file and the flags both land here.
using Settings = std::map<std::string, std::string>;

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "profile", "sign",  "reference_sign", "h_list", "N",     "period", "T",   "s_list",
      "tol",     "L",     "taper",          "outputs", "grid_points", "model", "out", "seed"};
  return keys;
}

struct ProfileSpec {
  std::string kind;  ///< gaussian | soliton | file
  std::map<std::string, double> params;
  std::string path;
};

struct RunConfig {
  std::string subcommand;
  std::string profile_text = "gaussian";
  ProfileSpec profile;
  Sign sign = Sign::defocusing;
  Sign reference_sign = Sign::defocusing;
  std::vector<double> h_list;
  std::size_t N = 0;  ///< sites at the coarsest h
  double period = 0.0;
  double T = 0.25;
  std::vector<double> s_list{0.0};
  double tol = 1e-10;
  double L = 8.0;
  Taper taper = Taper::smooth;
  std::size_t outputs = 16;
  std::size_t grid_points = 1024;
  std::string model = "mal";
  fs::path out = "almkdv_out";
  std::uint64_t seed = 20240611;
};

// ---------------------------------------------------------------------------
// Parsing helpers

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  s = s.substr(b, e - b + 1);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
    s = s.substr(1, s.size() - 2);
  return s;
}

inline double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (trim(v.substr(pos)).empty() && std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(fmt::format("{}: '{}' is not a finite real number", key, v));
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const auto n = std::stoull(v, &pos);
    if (trim(v.substr(pos)).empty() && v.find('-') == std::string::npos) return n;
  } catch (const std::exception&) {
  }
  throw ConfigError(fmt::format("{}: '{}' is not a nonnegative integer", key, v));
}

inline std::vector<double> to_list(const std::string& key, std::string v) {
  if (!v.empty() && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  for (auto& c : v)
    if (c == ',' || c == ';') c = ' ';
  std::istringstream is(v);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) out.push_back(to_real(key, tok));
  return out;
}

inline Sign to_sign(const std::string& key, const std::string& v) {
  if (v == "+" || v == "defocusing") return Sign::defocusing;
  if (v == "-" || v == "focusing") return Sign::focusing;
  throw ConfigError(fmt::format("{} must be '+' or '-', got '{}'", key, v));
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt::format("{}", v[i]);
  return s;
}

}  // namespace detail

/// gaussian[:mass=..,amp=..,width=..,center=..,k0=..] | soliton[:kappa=..,x0=..] | file:PATH
inline ProfileSpec parse_profile(const std::string& text) {
  ProfileSpec p;
  const auto colon = text.find(':');
  p.kind = detail::trim(text.substr(0, colon));
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (p.kind == "file") {
    p.path = detail::trim(rest);
    if (p.path.empty()) throw ConfigError("profile file: needs a path");
    return p;
  }
  static const std::map<std::string, std::vector<std::string>> allowed{
      {"gaussian", {"mass", "amp", "width", "center", "k0"}}, {"soliton", {"kappa", "x0"}}};
  const auto it = allowed.find(p.kind);
  if (it == allowed.end())
    throw ConfigError(fmt::format("unknown profile kind '{}' (gaussian, soliton, file)", p.kind));
  std::istringstream is(rest);
  std::string item;
  while (std::getline(is, item, ',')) {
    if (detail::trim(item).empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ConfigError(fmt::format("profile parameter '{}' is not key=value", item));
    const std::string k = detail::trim(item.substr(0, eq));
    if (std::find(it->second.begin(), it->second.end(), k) == it->second.end())
      throw ConfigError(fmt::format("profile {} has no parameter '{}'", p.kind, k));
    p.params[k] = detail::to_real("profile " + k, detail::trim(item.substr(eq + 1)));
  }
  return p;
}

/// Two- or three-column text (x, Re[, Im]) on a uniform grid covering one
/// period; the samples are projected spectrally onto the M-point grid.
inline ContinuumField load_profile_file(const fs::path& path, double period, std::size_t M) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("profile file '{}' cannot be read", path.string()));
  std::vector<double> xs;
  ComplexVector vs;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream is(t);
    double x = 0.0, re = 0.0, im = 0.0;
    if (!(is >> x >> re)) throw ConfigError(fmt::format("profile file: bad line '{}'", t));
    if (!(is >> im)) im = 0.0;
    xs.push_back(x);
    vs.emplace_back(re, im);
  }
  if (xs.size() < 8) throw ConfigError("profile file: need at least 8 samples");
  const double dx = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (std::abs(xs[i] - xs[i - 1] - dx) > 1e-9 * std::abs(dx))
      throw ConfigError("profile file: x samples must be uniformly spaced");
  const double file_period = dx * static_cast<double>(xs.size());
  if (std::abs(file_period - period) > 1e-9 * period)
    throw ConfigError(fmt::format(
        "profile file covers a period of {} but the run uses period {}", file_period, period));
  // values[i] = f(x0 + i dx), so f(x) = g(x - x0)
  const ContinuumField g{period, vs, {}};
  return resample(translate(g, -xs.front()), M);
}

inline ContinuumField build_profile(const RunConfig& cfg) {
  const auto& p = cfg.profile;
  const double P = cfg.period;
  const std::size_t M = cfg.grid_points;
  auto get = [&](const std::string& k, double d) {
    const auto it = p.params.find(k);
    return it == p.params.end() ? d : it->second;
  };
  if (p.kind == "gaussian") {
    const double width = get("width", 1.0);
    if (!(width > 0.0)) throw ConfigError("gaussian width must be positive");
    // int |A e^{-x^2 / 2 w^2}|^2 = A^2 w sqrt(pi)
    const double amp = p.params.count("amp") ? get("amp", 0.0)
                                             : std::sqrt(get("mass", 0.024) / (width * std::sqrt(pi)));
    const double c = get("center", 0.0);
    const double k0 = get("k0", 0.0);
    return make_field(P, M, [&](double x) {
      const double y = wrap_centered(x - c, P);
      return std::polar(amp * std::exp(-0.5 * y * y / (width * width)), k0 * y);
    });
  }
  if (p.kind == "soliton") {
    const double kappa = get("kappa", 1.0);
    if (!(kappa > 0.0)) throw ConfigError("soliton kappa must be positive");
    return soliton_exact(kappa, get("x0", 0.0), 0.0, P, M);
  }
  return load_profile_file(p.path, P, M);
}

/// key = value lines; '#' starts a comment; optional quotes around values.
inline Settings read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("config file '{}' cannot be read", path.string()));
  Settings s;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string t = detail::trim(line.substr(0, hash));
    if (t.empty() || t.front() == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(fmt::format("{}:{}: expected key = value", path.string(), lineno));
    const std::string key = detail::trim(t.substr(0, eq));
    if (std::find(known_keys().begin(), known_keys().end(), key) == known_keys().end())
      throw ConfigError(fmt::format("{}:{}: unknown key '{}'", path.string(), lineno, key));
    s[key] = detail::trim(t.substr(eq + 1));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Validation

inline bool needs_mesh(const RunConfig& c) {
  return c.subcommand == "converge" || c.subcommand == "diagnose" ||
         (c.subcommand == "simulate" && c.model != "mkdv");
}

/// Convert settings to a RunConfig and check every invariant. Throws
/// ConfigError naming the violated condition, or UnsupportedModeError.
inline RunConfig parse_config(const std::string& subcommand, const Settings& s) {
  using namespace detail;
  RunConfig c;
  c.subcommand = subcommand;
  if (std::find(subcommands().begin(), subcommands().end(), subcommand) == subcommands().end())
    throw ConfigError(fmt::format("unknown subcommand '{}'", subcommand));
  auto has = [&](const char* k) { return s.count(k) > 0; };

  if (has("profile")) c.profile_text = s.at("profile");
  if (!has("profile") && subcommand == "soliton") c.profile_text = "soliton";
  c.profile = parse_profile(c.profile_text);

  if (has("sign"))
    c.sign = to_sign("sign", s.at("sign"));
  else
    c.sign = subcommand == "soliton" ? Sign::focusing : Sign::defocusing;
  c.reference_sign = has("reference_sign") ? to_sign("reference_sign", s.at("reference_sign")) : c.sign;
  if (has("h_list")) c.h_list = to_list("h_list", s.at("h_list"));
  if (has("N")) c.N = static_cast<std::size_t>(to_uint("N", s.at("N")));
  if (has("period")) c.period = to_real("period", s.at("period"));
  if (has("T")) c.T = to_real("T", s.at("T"));
  if (has("s_list")) c.s_list = to_list("s_list", s.at("s_list"));
  if (has("tol")) c.tol = to_real("tol", s.at("tol"));
  if (has("L")) c.L = to_real("L", s.at("L"));
  if (has("taper")) {
    const auto& t = s.at("taper");
    if (t == "smooth")
      c.taper = Taper::smooth;
    else if (t == "raised_cosine")
      c.taper = Taper::raised_cosine;
    else
      throw ConfigError(fmt::format("taper must be smooth or raised_cosine, got '{}'", t));
  }
  if (has("outputs")) c.outputs = static_cast<std::size_t>(to_uint("outputs", s.at("outputs")));
  if (has("grid_points"))
    c.grid_points = static_cast<std::size_t>(to_uint("grid_points", s.at("grid_points")));
  if (has("model")) c.model = s.at("model");
  if (has("out")) c.out = s.at("out");
  if (has("seed")) c.seed = to_uint("seed", s.at("seed"));

  if (c.model != "mal" && c.model != "al" && c.model != "mkdv")
    throw ConfigError(fmt::format("model must be mal, al or mkdv, got '{}'", c.model));
  if (!(c.T >= 0.0)) throw ConfigError(fmt::format("T must be >= 0, got {}", c.T));
  if (!(c.tol > 0.0)) throw ConfigError(fmt::format("tol must be > 0, got {}", c.tol));
  if (!(c.L > 0.0)) throw ConfigError(fmt::format("L must be > 0, got {}", c.L));
  if (c.outputs == 0) throw ConfigError("outputs must be >= 1");
  if (c.s_list.empty()) throw ConfigError("s_list must not be empty");
  if (c.grid_points < 16) throw ConfigError("grid_points must be >= 16");

  if (subcommand == "soliton" && c.sign != Sign::focusing)
    throw UnsupportedModeError("soliton: the sech one-soliton needs the focusing sign '-'");
  if (subcommand == "converge" && c.T > 0.0 && c.outputs % 4 != 0)
    throw ConfigError(fmt::format(
        "converge compares at T/4, T/2, T, so outputs must be a multiple of 4 (got {})", c.outputs));

  if (needs_mesh(c)) {
    if (c.h_list.empty()) throw ConfigError("h_list required");
    for (std::size_t i = 0; i < c.h_list.size(); ++i) {
      if (!(c.h_list[i] > 0.0 && c.h_list[i] <= 1.0))
        throw ConfigError(fmt::format("every h must satisfy 0 < h <= 1, got {}", c.h_list[i]));
      if (i > 0 && !(c.h_list[i] < c.h_list[i - 1]))
        throw ConfigError(fmt::format("h_list must be strictly decreasing ({})", join(c.h_list)));
    }
    const double from_n = c.N > 0 ? static_cast<double>(c.N) * c.h_list.front() : 0.0;
    if (c.period > 0.0 && from_n > 0.0 && std::abs(c.period - from_n) > 1e-9 * c.period)
      throw ConfigError(fmt::format("period {} disagrees with N h = {} * {}", c.period, c.N,
                                    c.h_list.front()));
    if (c.period <= 0.0) c.period = from_n > 0.0 ? from_n : 51.2;

    // the mesh bound comes first: it is the condition the data must meet
    const auto phi0 = build_profile(c);
    const double mass = l2_norm_sq(phi0);
    for (const double h : c.h_list)
      if (h > mesh_bound(mass)) throw ConfigError(mesh_bound_message(h, mass));
    if (c.sign == Sign::defocusing)
      for (const double h : c.h_list)
        if (h * norm_inf(phi0.values) >= defocusing_guard)
          throw ConfigError(fmt::format("h sup|phi0| = {} reaches the defocusing guard {}",
                                        h * norm_inf(phi0.values), defocusing_guard));

    std::size_t finest = 0;
    for (const double h : c.h_list) {
      const double n = c.period / h;
      const double r = std::round(n);
      if (std::abs(n - r) > 1e-9 * n)
        throw ConfigError(fmt::format(
            "N h must be constant across the sweep: period {} is not a multiple of h = {}", c.period, h));
      const auto sites = static_cast<std::size_t>(r);
      if (sites < 8 || sites % 2 != 0)
        throw ConfigError(fmt::format("h = {} gives N = {}; need N >= 8 and even", h, sites));
      if (subcommand == "converge" && sites % 4 != 0)
        throw ConfigError(fmt::format("h = {} gives N = {}; the gauge path needs 4 | N", h, sites));
      finest = std::max(finest, sites);
    }
    c.N = static_cast<std::size_t>(std::round(c.period / c.h_list.front()));
    c.grid_points = std::max(c.grid_points, finest);
  } else if (c.period <= 0.0) {
    c.period = subcommand == "soliton" ? 64.0 : 51.2;
  }

  return c;
}

/// Normalized key = value manifest; feeding it back through --config
/// reproduces the run.
inline std::string manifest_text(const RunConfig& c) {
  std::string m;
  m += fmt::format("# almkdv run manifest\n# subcommand = {}\n", c.subcommand);
  m += fmt::format("profile = {}\n", c.profile_text);
  m += fmt::format("sign = {}\n", to_string(c.sign));
  m += fmt::format("reference_sign = {}\n", to_string(c.reference_sign));
  if (!c.h_list.empty()) m += fmt::format("h_list = {}\n", detail::join(c.h_list));
  if (c.N > 0) m += fmt::format("N = {}\n", c.N);
  m += fmt::format("period = {}\n", c.period);
  m += fmt::format("T = {}\n", c.T);
  m += fmt::format("s_list = {}\n", detail::join(c.s_list));
  m += fmt::format("tol = {}\n", c.tol);
  m += fmt::format("L = {}\n", c.L);
  m += fmt::format("taper = {}\n", to_string(c.taper));
  m += fmt::format("outputs = {}\n", c.outputs);
  m += fmt::format("grid_points = {}\n", c.grid_points);
  m += fmt::format("model = {}\n", c.model);
  m += fmt::format("out = {}\n", c.out.string());
  m += fmt::format("seed = {}\n", c.seed);
  return m;
}

inline void write_manifest(const RunConfig& c) {
  fs::create_directories(c.out);
  std::ofstream f(c.out / "run.toml");
  f << manifest_text(c);
  if (!f) throw Error(fmt::format("cannot write {}", (c.out / "run.toml").string()));
}

// ---------------------------------------------------------------------------
// Subcommands

namespace detail {

inline void write_trajectory(const fs::path& dir, const Trajectory& tr) {
  std::ofstream inv(dir / "invariants.csv");
  inv << "t";
  for (const auto& n : tr.invariant_names) inv << ',' << n;
  inv << '\n';
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    inv << fmt::format("{:.17g}", tr.times[i]);
    for (const double q : tr.invariants[i]) inv << fmt::format(",{:.17g}", q);
    inv << '\n';
  }
  std::ofstream st(dir / "states.dat");
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    st << fmt::format("# t = {:.17g}\n", tr.times[i]);
    for (std::size_t n = 0; n < tr.states[i].size(); ++n)
      st << fmt::format("{} {:.17g} {:.17g}\n", n, tr.states[i][n].real(), tr.states[i][n].imag());
    st << "\n\n";
  }
  std::ofstream steps(dir / "steps.csv");
  steps << "time,dt,error,accepted\n";
  for (const auto& r : tr.steps)
    steps << fmt::format("{:.17g},{:.17g},{:.6e},{}\n", r.time, r.dt, r.error, r.accepted ? 1 : 0);
}

inline EvolveOptions evolve_options(const RunConfig& c) {
  EvolveOptions opt;
  opt.tol = c.tol;
  opt.outputs = c.outputs;
  return opt;
}

inline int run_simulate(const RunConfig& c, std::ostream& out) {
  const auto phi0 = build_profile(c);
  Trajectory tr;
  if (c.model == "mkdv") {
    tr = solve_mkdv(phi0, c.T, c.sign, evolve_options(c)).trajectory;
  } else {
    const double h = c.h_list.front();
    auto state = sample_initial_data(phi0, h, c.sign, c.taper);
    if (c.model == "al") state = al_initial_data(state);
    tr = evolve_lattice(state, lattice_time(c.T, h), evolve_options(c));
  }
  write_trajectory(c.out, tr);
  const auto drift = tr.max_relative_drift();
  out << fmt::format("simulate {}: {} outputs, {} accepted steps\n", to_string(tr.model),
                     tr.times.size(), tr.accepted_steps());
  for (std::size_t q = 0; q < drift.size(); ++q)
    out << fmt::format("  drift {} = {:.3e}\n", tr.invariant_names[q], drift[q]);
  return exit_ok;
}

inline int run_converge(const RunConfig& c, std::ostream& out) {
  SweepConfig sc;
  sc.phi0 = build_profile(c);
  sc.sign = c.sign;
  sc.reference_sign = c.reference_sign;
  sc.h_list = c.h_list;
  sc.T = c.T;
  sc.s_list = c.s_list;
  sc.tol = c.tol;
  sc.L = c.L;
  sc.taper = c.taper;
  sc.outputs = c.T == 0.0 ? 1 : c.outputs;
  sc.reference_points = c.grid_points;
  const auto res = run_convergence_sweep(sc);
  const auto report = estimate_rate_and_report(res.rows, c.out);

  std::ofstream lv(c.out / "levels.csv");
  lv << "h,N,runtime_s,gauge_deviation,l2_initial,l2_bound,l2_ratio_max,linf_over_h_max,"
        "accepted_steps,failure\n";
  for (const auto& l : res.levels)
    lv << fmt::format("{},{},{:.3f},{:.3e},{:.10e},{:.10e},{:.10e},{:.10e},{},{}\n", l.h, l.N,
                      l.runtime_s, l.gauge_deviation, l.l2_initial, l.l2_bound, l.l2_ratio_max,
                      l.linf_over_h_max, l.accepted_steps, l.failure ? *l.failure : "");

  for (const auto& w : report.warnings) out << "warning: " << w << '\n';
  out << fmt::format("reference mKdV solve: {:.2f} s\n", res.reference_runtime_s);
  for (const auto& g : report.groups)
    out << fmt::format("t = {:<8} s = {:<4} slope = {:7.3f} r2 = {:.4f} min ratio = {:.3f} {}\n", g.t,
                       g.s, g.slope, g.r_squared, g.min_ratio, g.monotone ? "monotone" : "NOT monotone");

  int status = exit_ok;
  for (const auto& f : res.failures()) {
    out << "row failed: " << f << '\n';
    status = exit_numerical;
  }
  for (const auto& l : res.levels)
    if (!l.failure && l.gauge_deviation > 1e-10) {
      out << fmt::format("gauge identity violated at h = {}: {:.3e}\n", l.h, l.gauge_deviation);
      status = exit_numerical;
    }
  const double s_check = std::count(c.s_list.begin(), c.s_list.end(), 0.0)
                             ? 0.0
                             : *std::min_element(c.s_list.begin(), c.s_list.end());
  if (c.T > 0.0 && c.h_list.size() >= 3 && !converges(report, s_check, 1.5)) {
    out << fmt::format("non-convergence: err_hs (s = {}) does not decrease by 1.5 per refinement\n",
                       s_check);
    status = exit_numerical;
  }
  return status;
}

inline int run_soliton(const RunConfig& c, std::ostream& out) {
  const double kappa = c.profile.kind == "soliton" && c.profile.params.count("kappa")
                           ? c.profile.params.at("kappa")
                           : 1.0;
  const double x0 = c.profile.params.count("x0") ? c.profile.params.at("x0") : 0.0;
  const auto cal = calibrate_soliton(kappa, c.sign, c.period, 4096);
  out << fmt::format("calibrated speed c = {:.12f} (kappa^2 = {}), residual {:.3e}\n", cal.speed,
                     kappa * kappa, cal.residual);
  const auto phi0 = soliton_exact(kappa, x0, 0.0, c.period, c.grid_points);
  const auto sol = solve_mkdv(phi0, c.T, c.sign, evolve_options(c));
  const auto& tr = sol.trajectory;
  std::ofstream csv(c.out / "soliton.csv");
  csv << "t,l2_error,mass,energy\n";
  double worst = 0.0;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const auto exact = soliton_exact(kappa, x0, tr.times[i], c.period, c.grid_points);
    const double err = std::sqrt(exact.dx()) * diff_norm2(exact.values, tr.states[i]);
    worst = std::max(worst, err);
    csv << fmt::format("{:.17g},{:.6e},{:.17g},{:.17g}\n", tr.times[i], err, tr.invariants[i][0],
                       tr.invariants[i][1]);
  }
  const auto drift = tr.max_relative_drift();
  out << fmt::format("max L2 error vs exact: {:.3e}; drift mass {:.3e} energy {:.3e}\n", worst,
                     drift[0], drift[1]);
  if (tr.times.size() >= 3)
    out << fmt::format("Duhamel residual: {:.3e}\n", duhamel_residual_mkdv(sol));
  const bool ok = cal.residual <= 1e-10 && worst <= 1e-6 && drift[0] <= 1e-8 && drift[1] <= 1e-8;
  out << (ok ? "soliton validation passed\n" : "soliton validation FAILED\n");
  return ok ? exit_ok : exit_numerical;
}

inline int run_diagnose(const RunConfig& c, std::ostream& out) {
  const auto phi0 = build_profile(c);
  const double h = c.h_list.front();
  const auto alpha0 = sample_initial_data(phi0, h, c.sign, c.taper);
  const auto tr = evolve_lattice(alpha0, lattice_time(c.T, h), evolve_options(c));
  std::ofstream f(c.out / "diagnose.txt");
  auto emit = [&](const std::string& key, double v) {
    f << fmt::format("{} = {:.10e}\n", key, v);
    out << fmt::format("{:<28} {:.6e}\n", key, v);
  };
  bool finite = true;
  auto check = [&](double v) { finite = finite && std::isfinite(v); };
  for (const double L : {c.L, 2.0 * c.L, 4.0 * c.L}) {
    const double v = tightness_profile(tr, L);
    check(v);
    emit(fmt::format("tightness_L{}", L), v);
  }
  const auto last = lattice_state_at(tr, tr.states.size() - 1);
  const auto loc = locality_diagnostics(last, 2.0 * last.time, c.L, 4.0 * c.L);
  emit("reconstruction_tail", loc.reconstruction.tail_mass);
  emit("reconstruction_bound", loc.reconstruction.bound);
  for (const std::size_t m : {alpha0.size() / 8, alpha0.size() / 4, 3 * alpha0.size() / 8}) {
    const auto init = initial_data_locality(alpha0, phi0, m);
    emit(fmt::format("initial_lattice_tail_m{}", m), init.lattice_tail);
    emit(fmt::format("initial_maximal_tail_m{}", m), init.maximal_tail);
  }
  const auto sol = solve_mkdv(phi0, c.T, c.sign, evolve_options(c));
  const auto ls = local_smoothing_diagnostics(sol, c.T);
  check(ls.S4);
  check(ls.K);
  emit("S4", ls.S4);
  emit("K", ls.K);
  if (sol.trajectory.times.size() >= 3) emit("duhamel_residual", duhamel_residual_mkdv(sol));
  return finite ? exit_ok : exit_numerical;
}

inline int run_selftest(const RunConfig& c, std::ostream& out) {
  bool ok = true;
  for (const auto& chk : exact_identity_suite(c.seed)) {
    ok = ok && chk.pass();
    out << fmt::format("{} {:<46} {:.3e} ({} {:.0e})\n", chk.pass() ? "PASS" : "FAIL", chk.name,
                       chk.value, chk.upper_bound ? "<=" : ">", chk.threshold);
  }
  return ok ? exit_ok : exit_numerical;
}

}  // namespace detail

inline int dispatch(const RunConfig& c, std::ostream& out = std::cout) {
  if (c.subcommand == "selftest") return detail::run_selftest(c, out);
  write_manifest(c);
  if (c.subcommand == "simulate") return detail::run_simulate(c, out);
  if (c.subcommand == "converge") return detail::run_converge(c, out);
  if (c.subcommand == "soliton") return detail::run_soliton(c, out);
  return detail::run_diagnose(c, out);
}

/// Full command line handling with the exit-code contract.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Lattice-to-continuum experiments for the Ablowitz-Ladik / mKdV limit"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print this help");  // -h would collide with --h
  std::map<std::string, std::string> flag_values;
  std::string config_path;
  app.add_option("--config", config_path, "flat key=value config file");
  struct Flag {
    const char* name;
    const char* key;
    const char* help;
  };
  const Flag flags[] = {
      {"--out", "out", "output directory"},
      {"--h", "h_list", "comma-separated mesh sizes, strictly decreasing"},
      {"--T", "T", "final continuum time"},
      {"--s", "s_list", "comma-separated Sobolev indices"},
      {"--sign", "sign", "+ (defocusing) or - (focusing)"},
      {"--tol", "tol", "step-doubling tolerance per unit time"},
      {"--profile", "profile", "gaussian[:k=v,..] | soliton[:k=v,..] | file:PATH"},
      {"--seed", "seed", "seed for random-data checks"},
      {"--reference-sign", "reference_sign", "sign of the continuum reference (default: --sign)"},
      {"--L", "L", "tightness window"},
      {"--N", "N", "sites at the coarsest h"},
      {"--period", "period", "spatial period"},
      {"--model", "model", "simulate: mal, al or mkdv"},
      {"--outputs", "outputs", "stored output intervals over [0, T]"},
      {"--grid-points", "grid_points", "continuum grid size"},
      {"--taper", "taper", "smooth or raised_cosine"},
  };
  for (const auto& f : flags) app.add_option(f.name, flag_values[f.key], f.help);
  std::string chosen;
  const std::map<std::string, std::string> about{
      {"simulate", "evolve one model (mal, al, mkdv) and write invariants and states"},
      {"converge", "h-refinement sweep against the mKdV reference"},
      {"soliton", "validate the mKdV solver on the focusing one-soliton"},
      {"diagnose", "local smoothing norms and tightness for one run"},
      {"selftest", "exact identity suite"},
  };
  for (const auto& name : subcommands()) {
    auto* sub = app.add_subcommand(name, about.at(name));
    sub->fallthrough()->callback([&chosen, name] { chosen = name; });
    sub->set_help_flag("--help", "print this help");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return exit_config;
  }

  try {
    Settings s;
    if (!config_path.empty()) s = read_config_file(config_path);
    for (const auto& f : flags)
      if (app.get_option(f.name)->count() > 0) s[f.key] = flag_values[f.key];
    const RunConfig cfg = parse_config(chosen, s);
    return dispatch(cfg, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const UnsupportedModeError& e) {
    err << "unsupported: " << e.what() << '\n';
    return exit_config;
  } catch (const StiffnessError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return exit_numerical;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return exit_numerical;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return exit_numerical;
  }
}

}  // namespace almkdv::cli

#endif  // ALMKDV_CLI_HPP
