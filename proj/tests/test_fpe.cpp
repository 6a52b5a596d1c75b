#include <doctest.h>

#include "sal/fpe.hpp"

#include <sstream>

using namespace sal;

namespace {

SdeSystem model(const std::string& kind, std::map<std::string, double> params = {}) {
  ModelSpec spec;
  spec.kind = kind;
  spec.params = std::move(params);
  return make_builtin(spec);
}

// Relative sup error against the exact Gibbs density of the 1-D gradient system.
double gibbs_error(double quartic, int cells, double eps) {
  const SdeSystem g = model("gradient_1d", {{"quadratic", 1.0}, {"quartic", quartic}});
  const DensityField d = solve_fpe(g, eps, Grid::line(-3, 3, cells));
  Vec exact(d.u.size());
  for (Eigen::Index k = 0; k < exact.size(); ++k) {
    const double x = d.grid.center(k)(0);
    exact(k) = std::exp(-2 * (x * x / 2 + quartic * x * x * x * x / 4) / (eps * eps));
  }
  // normalizer from a fine midpoint rule
  double z = 0;
  const int fine = 1 << 20;
  for (int i = 0; i < fine; ++i) {
    const double x = -3 + 6 * (i + 0.5) / fine;
    z += std::exp(-2 * (x * x / 2 + quartic * x * x * x * x / 4) / (eps * eps)) * 6 / fine;
  }
  exact /= z;
  return (d.u - exact).cwiseAbs().maxCoeff() / exact.maxCoeff();
}

}  // namespace

TEST_SUITE("fpe_solver") {
  TEST_CASE("bernoulli function") {
    CHECK(bernoulli(0.0) == 1.0);
    CHECK(bernoulli(1e-12) == doctest::Approx(1.0));
    CHECK(bernoulli(1.0) == doctest::Approx(1.0 / (std::exp(1.0) - 1)));
    CHECK(bernoulli(-800) == doctest::Approx(800));
    CHECK(bernoulli(800) == 0.0);
  }

  TEST_CASE("column sums vanish") {
    const SdeSystem lc = model("limit_cycle");
    const FpeOperator op = assemble(lc, 0.1, Grid::rect(lc.state_box, 64, 64));
    const Vec sums = Vec::Ones(op.matrix.rows()).transpose() * op.matrix;
    CHECK(sums.cwiseAbs().maxCoeff() < 1e-12 * op.matrix.coeffs().cwiseAbs().maxCoeff());
  }

  TEST_CASE("zero drift gives the uniform density") {
    ModelSpec spec;
    spec.kind = "linear_ou";
    spec.drift_matrix = {-1e-300, 0, 0, -1e-300};
    const SdeSystem flat = make_builtin(spec);
    const DensityField d = solve_fpe(flat, 0.3, Grid::rect(Box::cube(2, -1, 1), 32, 32));
    CHECK((d.u.array() - 0.25).abs().maxCoeff() < 1e-10);
  }

  TEST_CASE("Gibbs oracle in 1-D") {
    CHECK(gibbs_error(0.0, 256, 0.2) < 1e-3);
    CHECK(gibbs_error(0.0, 512, 0.2) < 1e-3);
    const double coarse = gibbs_error(1.0, 128, 0.2), fine = gibbs_error(1.0, 256, 0.2);
    CHECK(std::log2(coarse / fine) >= 1.8);
  }

  TEST_CASE("mass and positivity") {
    for (const char* kind : {"limit_cycle", "linear_ou", "toggle_switch"}) {
      const SdeSystem sys = model(kind);
      const DensityField d = solve_fpe(sys, 0.1, Grid::rect(sys.state_box, 96, 96));
      CHECK(d.mass() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(d.u.minCoeff() >= 0.0);
    }
  }

  TEST_CASE("metastable toggle keeps both wells") {
    const SdeSystem ts = model("toggle_switch");
    const DensityField d = solve_fpe(ts, 0.025, Grid::rect(ts.state_box, 96, 96));
    CHECK(d.u.minCoeff() >= 0.0);
    double upper = 0;
    for (Eigen::Index k = 0; k < d.u.size(); ++k) {
      const Vec c = d.grid.center(k);
      if (c(0) > c(1)) upper += d.u(k) * d.grid.cell_volume();
    }
    CHECK(upper == doctest::Approx(0.5).epsilon(1e-6));
  }

  TEST_CASE("OU covariance and quasi-potential") {
    const SdeSystem ou = model("linear_ou");
    const DensityField d = solve_fpe(ou, 0.2, Grid::rect(Box::cube(2, -1.5, 1.5), 256, 256));
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (Eigen::Index k = 0; k < d.u.size(); ++k) {
      const Vec c = d.grid.center(k);
      cov += d.u(k) * d.grid.cell_volume() * c * c.transpose();
    }
    CHECK(std::abs(cov(0, 0) / 0.02 - 1) < 0.02);
    CHECK(std::abs(cov(1, 1) / 0.02 - 1) < 0.02);
    CHECK(std::abs(cov(0, 1)) < 0.02 * 0.02);

    const Vec v = quasi_potential(d);
    CHECK(v.minCoeff() == 0.0);
    double worst = 0;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      const double r2 = d.grid.center(k).squaredNorm();
      if (r2 <= 1 && r2 > 0.04) worst = std::max(worst, std::abs(v(k) - r2) / r2);
    }
    CHECK(worst < 0.05);
  }

  TEST_CASE("1-D quasi-potential") {
    const SdeSystem g = model("gradient_1d");
    const DensityField d = solve_fpe(g, 0.1, Grid::line(-3, 3, 512));
    const Vec v = quasi_potential(d);
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      const double x = d.grid.center(k)(0);
      if (std::abs(x) < 2.5 && std::isfinite(v(k))) CHECK(std::abs(v(k) - x * x) < 0.05);
    }
  }

  TEST_CASE("limit cycle ridge on the circle") {
    const SdeSystem lc = model("limit_cycle");
    const Grid grid = Grid::rect(lc.state_box, 256, 256);
    const DensityField d = solve_fpe(lc, 0.1, grid);
    for (int deg = 0; deg < 360; deg += 30) {
      // radial profile along one ray
      const double th = deg * kPi / 180;
      double best_r = 0, best = -1;
      for (int i = 0; i <= 400; ++i) {
        const double r = 0.5 + i * 1.0 / 400;
        const double u = d.interpolate(Eigen::Vector2d(r * std::cos(th), r * std::sin(th)));
        if (u > best) best = u, best_r = r;
      }
      CHECK(std::abs(best_r - 1.0) <= grid.h(0) * 1.5);
    }
  }

  TEST_CASE("integral identity oracles") {
    const SdeSystem ou = model("linear_ou");
    const DensityField d = solve_fpe(ou, 0.2, Grid::rect(Box::cube(2, -1.5, 1.5), 128, 128));
    const auto zero = check_integral_identity(d, ou, fields::constant(3.0), fields::squared_norm(), 0.05);
    CHECK(zero.lhs == 0.0);
    CHECK(zero.rhs == 0.0);
    CHECK(zero.residual == 0.0);

    const SdeSystem g = model("gradient_1d");
    const DensityField line = solve_fpe(g, 0.5, Grid::line(-3, 3, 512));
    const ScalarField u = fields::from_function("x^2/2", [](const Eigen::Ref<const Vec>& x) { return 0.5 * x(0) * x(0); });
    const auto one = check_integral_identity(line, g, u, u, 0.1);
    CHECK(one.residual < 1e-3);
  }

  TEST_CASE("co-area oracles") {
    ModelSpec spec;
    spec.kind = "linear_ou";
    spec.drift_matrix = {-1e-300, 0, 0, -1e-300};
    const SdeSystem flat = make_builtin(spec);
    const DensityField uniform = solve_fpe(flat, 0.3, Grid::rect(Box::cube(2, -1, 1), 128, 128));
    const auto c = coarea_check(uniform, fields::squared_norm(), {0.2, 0.4, 0.6});
    for (const auto& lv : c.levels) CHECK(lv.rel_error < 1e-3);
    CHECK(c.levels[0].rhs == doctest::Approx(kPi / 4).epsilon(1e-3));

    const SdeSystem ou = model("linear_ou");
    const DensityField gauss = solve_fpe(ou, 0.5, Grid::rect(Box::cube(2, -3, 3), 256, 256));
    const auto g = coarea_check(gauss, fields::squared_norm(), {0.1, 0.2, 0.3, 0.4});
    for (const auto& lv : g.levels) {
      CHECK(lv.rel_error < 0.01);
      CHECK(lv.lhs == doctest::Approx(std::exp(-lv.rho / 0.25) / 0.25).epsilon(0.02));
    }
    CHECK_THROWS_AS(coarea_check(gauss, fields::squared_norm(), {1e-6}), NumericalError);
  }

  TEST_CASE("density output") {
    const SdeSystem g = model("gradient_1d");
    const DensityField d = solve_fpe(g, 0.3, Grid::line(-3, 3, 64));
    std::ostringstream os;
    write_density_csv(os, d, d.u);
    CHECK(os.str().substr(0, 4) == "x,u\n");
    CHECK(density_header_json(d, "g").find("\"eps\"") != std::string::npos);
  }
}
