#include <doctest.h>

#include "sal/experiments.hpp"
#include "sal/rng.hpp"

using namespace sal;

namespace {

ScanConfig quick_config(const std::string& source) {
  ScanConfig c;
  c.source = source;
  c.grid_cells = 512;
  c.sim.burn_T = 5;
  c.sim.n_traj = 16;
  c.sim.samples_per_traj = 200;
  c.sim.thin_T = 0.5;
  c.sim.dt = 2e-3;
  return c;
}

ModelSpec spec_of(const std::string& kind) {
  ModelSpec s;
  s.kind = kind;
  return s;
}

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("exact line fits") {
    const std::vector<double> x{0, 1, 2, 3, 4};
    std::vector<double> y;
    for (double v : x) y.push_back(1.5 - 2 * v);
    const PowerLawFit f = fit_line(x, y, "loglog");
    CHECK(f.slope == doctest::Approx(-2));
    CHECK(f.intercept == doctest::Approx(1.5));
    CHECK(f.r_squared == doctest::Approx(1));
    CHECK(f.slope_stderr() < 1e-12);

    ScanResult s;
    for (double e : {0.2, 0.1, 0.05, 0.025}) s.points.push_back({e, 3 * e * e, 0, "mc", 0});
    const PowerLawFit p = fit_power_law(s, "loglog");
    CHECK(p.slope == doctest::Approx(2));
    CHECK(std::exp(p.intercept) == doctest::Approx(3));
    const PowerLawFit l = fit_power_law(s, "lin_in_logeps");
    CHECK(l.mode == "lin_in_logeps");
  }

  TEST_CASE("fit errors") {
    CHECK_THROWS_AS(fit_line({1, 2, 3}, {1, 2, 3}, "loglog"), ConfigError);
    CHECK_THROWS_AS(fit_line({1, 2, 3, 4}, {1, 2, 3}, "loglog"), ConfigError);
    CHECK_THROWS_AS(fit_line({1, 1, 1, 1}, {1, 2, 3, 4}, "loglog"), NumericalError);
    CHECK_THROWS_AS(fit_line({1, 2, 3, 4}, {1, 2, NAN, 4}, "loglog"), NumericalError);
    ScanResult s;
    for (double e : {0.2, 0.1, 0.05, 0.025}) s.points.push_back({e, -1, 0, "mc", 0});
    CHECK_THROWS_AS(fit_power_law(s, "loglog"), NumericalError);
    CHECK_THROWS_AS(fit_power_law(s, "semilog"), ConfigError);
  }

  TEST_CASE("eps list validation") {
    ScanContext ctx(spec_of("gradient_1d"), quick_config("fpe"));
    CHECK_THROWS_AS(run_msd_scan(ctx, {0.2, 0.1, 0.05}), ConfigError);
    CHECK_THROWS_AS(run_msd_scan(ctx, {0.2, 0.15, 0.1, 0.05}), ConfigError);
    CHECK_THROWS_AS(run_msd_scan(ctx, {0.1, 0.2, 0.05, 0.025}), ConfigError);
    CHECK_THROWS_AS(run_msd_scan(ctx, {}), ConfigError);
    CHECK_THROWS_AS(run_shell_scan(ctx, default_eps_grid(), 1.5), ConfigError);
    CHECK_THROWS_AS(ScanContext(spec_of("gradient_1d"), [] {
                      auto c = quick_config("mc");
                      c.source = "exact";
                      return c;
                    }()),
                    ConfigError);
  }

  TEST_CASE("default eps grid") {
    const auto g = default_eps_grid();
    REQUIRE(g.size() >= 4);
    CHECK(g.front() == doctest::Approx(0.2));
    CHECK(g.back() == doctest::Approx(0.025));
  }

  TEST_CASE("msd scan on the 1-D gradient density") {
    ScanConfig cfg = quick_config("fpe");
    cfg.grid_box = Box::cube(1, -1, 1);
    cfg.grid_cells = 2048;
    ScanContext ctx(spec_of("gradient_1d"), cfg);
    const ScanOutcome o = run_msd_scan(ctx, default_eps_grid());
    REQUIRE(o.fit.has_value());
    CHECK(o.fit->slope == doctest::Approx(2).epsilon(0.02));
    CHECK(o.passed());
    const std::string csv = scan_csv(o.scan);
    CHECK(csv.substr(0, csv.find('\n')) == "eps,value,stderr,source");
    CHECK(csv.find(",fpe\n") != std::string::npos);
    CHECK(to_json(*o.fit).contains("slope"));
  }

  TEST_CASE("tail scan censoring") {
    ScanContext ctx(spec_of("linear_ou"), quick_config("mc"));
    CHECK_THROWS_AS(run_tail_scan(ctx, 0.1, {5, 6, 7, 8}), NumericalError);
    CHECK_THROWS_AS(run_tail_scan(ctx, 0.1, {0.1, 0.2, 0.3}), ConfigError);
    CHECK_THROWS_AS(run_tail_scan(ctx, 0.1, {0.3, 0.2, 0.4, 0.5}), ConfigError);
  }

  TEST_CASE("tail scan csv carries the radius") {
    ScanContext ctx(spec_of("gradient_1d"), quick_config("fpe"));
    const ScanOutcome o = run_tail_scan(ctx, 0.2);
    CHECK(o.extra["radii"] == "adaptive");
    const std::string csv = scan_csv(o.scan);
    CHECK(csv.substr(0, csv.find('\n')) == "eps,value,stderr,source,r");
    REQUIRE(o.fit.has_value());
    CHECK(o.fit->slope == doctest::Approx(2).epsilon(0.05));
  }

  TEST_CASE("concentration radius of a Gaussian") {
    RandomStream rng(21, 0);
    const double eps = 0.1;
    Points p(100000, 2);
    for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) << eps / std::sqrt(2.0) * rng.normal(), eps / std::sqrt(2.0) * rng.normal();
    AnalyticAttractor a;
    a.points = Points::Zero(1, 2);
    const AttractorCloud cloud = AttractorCloud::from_analytic(a, Box::cube(2, -1, 1));
    const Estimate m = concentration_radius(MeasureView::of(p, eps), cloud, 0.01);
    CHECK(m.value == doctest::Approx(std::sqrt(std::log(100.0))).epsilon(0.02));
    CHECK_THROWS_AS(concentration_radius(MeasureView::of(p, eps), cloud, 1.5), ConfigError);
  }

  TEST_CASE("support radii") {
    const auto r = support_radii(0.025);
    REQUIRE(r.size() == 5);
    CHECK(r.front() == doctest::Approx(1.6));
    CHECK(r.back() == doctest::Approx(0.1));
  }
}
