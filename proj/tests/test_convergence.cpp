#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "almkdv/convergence.hpp"

using namespace almkdv;

namespace {

ContinuumField gaussian(double period, std::size_t M, double mass, double k0 = 0.0) {
  const double amp = std::sqrt(mass / std::sqrt(pi));
  return make_field(period, M, [&](double x) { return std::polar(amp * std::exp(-0.5 * x * x), k0 * x); });
}

SweepConfig base_config() {
  SweepConfig c;
  c.phi0 = gaussian(51.2, 1024, 0.024);
  c.h_list = {0.4, 0.2, 0.1};
  c.T = 0.25;
  c.s_list = {0.0, 0.5};
  return c;
}

std::vector<double> column(const std::vector<ConvergenceRow>& rows, double t, double s,
                           double ConvergenceRow::*field) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rows)
    if (r.t == t && r.s == s) pts.push_back({r.h, r.*field});
  std::sort(pts.begin(), pts.end(), [](auto a, auto b) { return a.first > b.first; });
  std::vector<double> out;
  for (auto [h, v] : pts) out.push_back(v);
  return out;
}

ContinuumField minus(ContinuumField a, const ContinuumField& b) {
  for (std::size_t j = 0; j < a.size(); ++j) a.values[j] -= b.values[j];
  return a;
}

}  // namespace

TEST(HsError, IdenticalAndSingleMode) {
  const auto f = gaussian(20.0, 128, 0.5, 1.0);
  EXPECT_EQ(hs_error(f, f, 1.0), 0.0);
  // unit L2 mass mode at xi = 2: <2>^1 = sqrt(5)
  const auto mode = make_field(2.0 * pi, 32, [](double x) { return std::polar(1.0 / std::sqrt(2.0 * pi), 2.0 * x); });
  EXPECT_NEAR(hs_error(mode, zero_field(2.0 * pi, 32), 1.0), std::sqrt(5.0), 1e-13);
  EXPECT_NEAR(hs_error(zero_field(2.0 * pi, 64), mode, 1.0), std::sqrt(5.0), 1e-13);
}

TEST(HsError, MonotoneInS) {
  const auto f = gaussian(20.0, 256, 0.3, 2.0);
  const auto g = gaussian(20.0, 128, 0.31, 1.9);
  double prev = 0.0;
  for (double s : {-0.5, 0.0, 0.25, 0.5, 1.0, 2.0}) {
    const double e = hs_error(f, g, s);
    EXPECT_GE(e, prev);
    prev = e;
  }
}

TEST(HsError, PeriodMismatchRejected) {
  EXPECT_THROW(hs_error(zero_field(10.0, 32), zero_field(12.0, 32), 0.0), PreconditionError);
}

TEST(LatticeComparison, ZeroAndInitialSampling) {
  LatticeState zero{0.25, Sign::defocusing, Gauge::mal, 0.0, ComplexVector(64)};
  EXPECT_EQ(lattice_comparison(zero, zero_field(16.0, 64), 0.0), 0.0);

  const double h = 0.2;
  const auto phi0 = gaussian(25.6, 512, 0.05, 1.0);
  const auto a0 = sample_initial_data(phi0, h, Sign::defocusing);
  EXPECT_LT(lattice_comparison(a0, smooth_lowpass(phi0, pi / (2.0 * h)), 0.0), 1e-10);
  EXPECT_THROW(lattice_comparison(a0, phi0, 0.1), PreconditionError);
}

TEST(LatticeComparison, EqualsL2ErrorForBandLimitedReference) {
  const double h = 0.2, t = 0.05;
  const auto phi0 = gaussian(25.6, 512, 0.05, 1.0);
  const auto a0 = sample_initial_data(phi0, h, Sign::defocusing);
  EvolveOptions opt;
  const auto tr = evolve_lattice(a0, lattice_time(t, h), opt);
  const auto state = lattice_state_at(tr, tr.states.size() - 1);
  // any reference with spectrum inside |xi| < pi / h will do
  const auto phi = smooth_lowpass(translate(phi0, 0.3), pi / (2.0 * h));
  const auto phih = moving_frame_profile(state, t, 512);
  EXPECT_NEAR(lattice_comparison(state, phi, t), hs_error(phih, phi, 0.0), 1e-12);
}

TEST(WeakPairing, ProfilesAndLinearity) {
  const auto probes = weak_test_profiles(30.0, 256);
  // <g1, g1>_{H^1} = int |g|^2 + |g'|^2 = sqrt(pi) + sqrt(pi) / 2
  EXPECT_NEAR(h1_pairing(probes[0], probes[0]), 1.5 * std::sqrt(pi), 1e-12);
  EXPECT_EQ(h1_pairing(probes[1], zero_field(30.0, 256)), 0.0);
  // g1 even, g2 odd
  EXPECT_LT(h1_pairing(probes[0], probes[1]), 1e-14);
}

TEST(Tightness, ZeroStateAndFullWindow) {
  LatticeState zero{0.2, Sign::defocusing, Gauge::mal, 5.0, ComplexVector(64)};
  EXPECT_EQ(tightness_value(zero, 4.0), 0.0);

  // any data: with L >= period every reachable site has weight 0
  const auto a0 = sample_initial_data(gaussian(12.8, 256, 0.05, 2.0), 0.2, Sign::defocusing);
  EvolveOptions opt;
  opt.outputs = 4;
  const auto tr = evolve_lattice(a0, 100.0, opt);
  EXPECT_EQ(tightness_profile(tr, 12.8), 0.0);
  EXPECT_GT(tightness_profile(tr, 2.0), 0.0);
}

TEST(Tightness, CompactBumpInsideHalfPeriodWindow) {
  // support |x| < 1.5, window L = half the period covers |x| <= L / 2 = 3.2
  const double h = 0.1;
  auto bump = make_field(12.8, 128, [](double x) {
    const double u = x / 1.5;
    return Complex(std::abs(u) < 1.0 ? 0.1 * std::exp(-1.0 / (1.0 - u * u)) : 0.0);
  });
  LatticeState s{h, Sign::defocusing, Gauge::mal, 0.0, sample_on_lattice(bump, 128)};
  for (auto& z : s.alpha) z *= h;
  EXPECT_EQ(tightness_value(s, 6.4), 0.0);
}

TEST(Tightness, DecreasesAsWindowDoubles) {
  for (double h : {0.2, 0.1}) {
    const auto a0 = sample_initial_data(gaussian(51.2, 1024, 0.024), h, Sign::defocusing);
    EvolveOptions opt;
    opt.outputs = 8;
    const auto tr = evolve_lattice(a0, lattice_time(0.25, h), opt);
    const double bound = norm2_sq(a0.alpha) / h;
    double prev = std::numeric_limits<double>::infinity();
    for (double L : {4.0, 8.0, 16.0}) {
      const double v = tightness_profile(tr, L);
      EXPECT_LT(v, prev) << "h = " << h << " L = " << L;
      EXPECT_LE(v, bound);
      prev = v;
    }
  }
}

TEST(GaugePath, AlAndMalProfilesAgree) {
  SweepConfig c;
  c.phi0 = gaussian(64.0, 512, 0.024, 0.5);
  c.h_list = {0.25};
  c.T = 0.1;
  c.outputs = 4;
  const auto r = run_convergence_sweep(c);
  ASSERT_TRUE(r.failures().empty());
  EXPECT_LE(r.levels[0].gauge_deviation, 1e-10);
  EXPECT_EQ(r.levels[0].N, 256u);
}

TEST(GaugePath, InitialDataPhases) {
  LatticeState a{0.25, Sign::focusing, Gauge::mal, 0.0, ComplexVector(8, Complex(1.0, 0.0))};
  const auto u = al_initial_data(a);
  const Complex expect[] = {1.0, I, -1.0, -I};
  for (std::size_t n = 0; n < 8; ++n) EXPECT_NEAR(std::abs(u.alpha[n] - expect[n % 4]), 0.0, 1e-15);
  EXPECT_EQ(u.gauge, Gauge::al);
}

TEST(Sweep, ZeroHorizonGivesProjectionTail) {
  auto c = base_config();
  c.T = 0.0;
  c.h_list = {0.4};
  c.s_list = {0.0, 1.0};
  const auto r = run_convergence_sweep(c);
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.t, 0.0);
    const auto tail = minus(c.phi0, smooth_lowpass(c.phi0, pi / (2.0 * 0.4)));
    EXPECT_NEAR(row.err_hs, sobolev_norm(tail, row.s), 1e-10);
  }
}

TEST(Sweep, ErrorsDecreaseUnderRefinement) {
  const auto r = run_convergence_sweep(base_config());
  ASSERT_TRUE(r.failures().empty());
  ASSERT_EQ(r.rows.size(), 18u);
  for (const auto& row : r.rows) {
    for (double v : {row.err_hs, row.err_lattice, row.weak[0], row.weak[1], row.weak[2], row.tightness_sup})
      EXPECT_TRUE(std::isfinite(v) && v >= 0.0);
  }
  const auto e = column(r.rows, 0.25, 0.0, &ConvergenceRow::err_hs);
  ASSERT_EQ(e.size(), 3u);
  EXPECT_GT(e[0] / e[1], 1.5);
  EXPECT_GT(e[1] / e[2], 1.5);
  for (const auto& a : r.rows)
    for (const auto& b : r.rows)
      if (a.h == b.h && a.t == b.t && a.s < b.s) EXPECT_LE(a.err_hs, b.err_hs);
}

TEST(Sweep, ParallelMatchesSerial) {
  auto c = base_config();
  c.h_list = {0.4, 0.2};
  const auto par = run_convergence_sweep(c);
  c.parallel = false;
  const auto ser = run_convergence_sweep(c);
  ASSERT_EQ(par.rows.size(), ser.rows.size());
  for (std::size_t i = 0; i < par.rows.size(); ++i) {
    EXPECT_EQ(par.rows[i].err_hs, ser.rows[i].err_hs);
    EXPECT_EQ(par.rows[i].err_lattice, ser.rows[i].err_lattice);
    EXPECT_EQ(par.rows[i].weak, ser.rows[i].weak);
  }
}

TEST(Sweep, FailingLevelIsRecordedAndOthersContinue) {
  auto c = base_config();
  c.phi0 = gaussian(51.2, 1024, 0.03);  // h0 = 1/3
  c.h_list = {0.4, 0.2};
  const auto r = run_convergence_sweep(c);
  ASSERT_EQ(r.failures().size(), 1u);
  EXPECT_NE(r.failures()[0].find("h0"), std::string::npos);
  for (const auto& row : r.rows) EXPECT_EQ(row.h, 0.2);
  EXPECT_FALSE(r.rows.empty());
}

TEST(Sweep, ComparisonTimesMustBeOutputTimes) {
  auto c = base_config();
  c.h_list = {0.4};
  c.t_list = {0.1};
  const auto r = run_convergence_sweep(c);
  EXPECT_EQ(r.failures().size(), 1u);
  EXPECT_THROW(run_convergence_sweep(SweepConfig{}), ConfigError);
}

TEST(Rates, SyntheticPowerLaw) {
  std::vector<ConvergenceRow> rows;
  for (double h : {0.4, 0.2, 0.1, 0.05}) {
    ConvergenceRow r;
    r.h = h;
    r.t = 1.0;
    r.err_hs = 3.0 * h * h;
    rows.push_back(r);
    r.t = 2.0;
    r.err_hs = 0.7;
    rows.push_back(r);
  }
  const auto rep = estimate_rates(rows);
  ASSERT_EQ(rep.groups.size(), 2u);
  EXPECT_NEAR(rep.groups[0].slope, 2.0, 0.01);
  EXPECT_NEAR(rep.groups[0].r_squared, 1.0, 1e-12);
  EXPECT_TRUE(rep.groups[0].monotone);
  EXPECT_NEAR(rep.groups[0].min_ratio, 4.0, 1e-12);
  EXPECT_NEAR(rep.groups[1].slope, 0.0, 1e-12);
  EXPECT_FALSE(rep.groups[1].monotone);
  EXPECT_FALSE(converges(rep));
  rows.erase(std::remove_if(rows.begin(), rows.end(), [](auto& r) { return r.t == 2.0; }), rows.end());
  EXPECT_TRUE(converges(estimate_rates(rows)));
}

TEST(Rates, DegenerateGroupSkipped) {
  std::vector<ConvergenceRow> rows(2);
  rows[0].h = 0.2;
  rows[1].h = 0.1;
  const auto rep = estimate_rates(rows);
  EXPECT_TRUE(rep.groups.empty());
  ASSERT_EQ(rep.warnings.size(), 1u);
  EXPECT_FALSE(converges(rep));
}

TEST(Rates, SlopeRobustToTaperChoice) {
  auto c = base_config();
  c.s_list = {0.0};
  const auto smooth = estimate_rates(run_convergence_sweep(c).rows);
  c.taper = Taper::raised_cosine;
  const auto cosine = estimate_rates(run_convergence_sweep(c).rows);
  ASSERT_EQ(smooth.groups.size(), cosine.groups.size());
  for (std::size_t i = 0; i < smooth.groups.size(); ++i)
    EXPECT_LT(std::abs(smooth.groups[i].slope - cosine.groups[i].slope), 0.2);
}

TEST(Reports, FilesAndHeaders) {
  const auto dir = std::filesystem::temp_directory_path() / "almkdv_report_test";
  std::filesystem::remove_all(dir);
  auto c = base_config();
  c.s_list = {0.0};
  const auto r = run_convergence_sweep(c);
  const auto rep = estimate_rate_and_report(r.rows, dir);
  EXPECT_EQ(rep.groups.size(), 3u);

  std::ifstream csv(dir / "sweep.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "h,t,s,err_hs,err_lattice,weak_g1,weak_g2,weak_g3,tightness_sup,mass_drift,energy_drift,runtime_s");
  std::size_t n = 0;
  while (std::getline(csv, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 11);
    ++n;
  }
  EXPECT_EQ(n, r.rows.size());

  std::ifstream summary(dir / "summary.csv");
  std::getline(summary, line);
  EXPECT_EQ(line, "t,s,slope,r_squared,monotone");
  std::getline(summary, line);
  EXPECT_NE(line.find(",true"), std::string::npos);

  std::ifstream dat(dir / "errors.dat");
  std::size_t numeric = 0;
  while (std::getline(dat, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    double v;
    std::size_t cols = 0;
    while (is >> v) ++cols;
    EXPECT_EQ(cols, 9u);
    ++numeric;
  }
  EXPECT_EQ(numeric, r.rows.size());
  std::filesystem::remove_all(dir);
}
