#include <doctest.h>

#include "sal/rng.hpp"
#include "sal/spatial_index.hpp"
#include "sal/systems.hpp"

#include <Eigen/Eigenvalues>

using namespace sal;

namespace {

SdeSystem model(const std::string& kind, std::map<std::string, double> params = {}) {
  ModelSpec spec;
  spec.kind = kind;
  spec.params = std::move(params);
  return make_builtin(spec);
}

}  // namespace

TEST_SUITE("systems") {
  TEST_CASE("limit cycle drift") {
    const SdeSystem lc = model("limit_cycle");
    CHECK(eval_drift(lc, Eigen::Vector2d(1, 0)).isApprox(Eigen::Vector2d(0, -1)));
    CHECK(eval_drift(lc, Eigen::Vector2d(0, 0)).norm() == 0.0);
    REQUIRE(lc.attractor);
    CHECK(lc.attractor->kind == AnalyticAttractor::Kind::circle);
  }

  TEST_CASE("toggle switch drift and equilibria") {
    const SdeSystem ts = model("toggle_switch", {{"b", 0.25}});
    CHECK(eval_drift(ts, Eigen::Vector2d(0, 0)).isApprox(Eigen::Vector2d(1, 1)));
    const auto eqs = find_equilibria(ts);
    REQUIRE(eqs.size() == 3);
    int stable = 0;
    for (const auto& e : eqs) {
      CHECK(eval_drift(ts, e.point).norm() < 1e-10);
      stable += e.stable;
    }
    CHECK(stable == 2);
    bool near_a = false;
    for (const auto& e : eqs) near_a = near_a || (e.point - Eigen::Vector2d(0.9416, 0.2655)).norm() < 1e-3;
    CHECK(near_a);
    REQUIRE(ts.attractor);
    CHECK(ts.attractor->points.rows() == 2);
    CHECK(ts.other_equilibria.rows() == 1);
  }

  TEST_CASE("linear OU and gradient drifts") {
    ModelSpec ou;
    ou.kind = "linear_ou";
    ou.drift_matrix = {-1, 0, 0, -1};
    const SdeSystem sys = make_builtin(ou);
    CHECK(eval_drift(sys, Eigen::Vector2d(1, 1)).isApprox(Eigen::Vector2d(-1, -1)));
    const SdeSystem g = model("gradient_1d");
    CHECK(eval_drift(g, Vec::Constant(1, 2.0))(0) == doctest::Approx(-2.0));
  }

  TEST_CASE("diffusion matrices") {
    const SdeSystem lc = model("limit_cycle");
    CHECK(eval_diffusion(lc, Eigen::Vector2d(0.3, -2)).isApprox(Mat::Identity(2, 2)));

    ModelSpec diag;
    diag.kind = "linear_ou";
    diag.drift_matrix = {-1, 0, 0, -1};
    diag.noise_matrix = {1, 0, 0, 2};
    diag.noise_cols = 2;
    Mat want = Mat::Zero(2, 2);
    want.diagonal() << 1, 4;
    CHECK(eval_diffusion(make_builtin(diag), Eigen::Vector2d(1, 1)).isApprox(want));

    ModelSpec wide = diag;
    wide.noise_matrix = {0.3, -1.2, 0.7, 0.9, 0.1, -0.4};
    wide.noise_cols = 3;
    const SdeSystem w = make_builtin(wide);
    CHECK(w.m == 3);
    CHECK(min_diffusion_eigenvalue(w, 64, 3) > 0);
  }

  TEST_CASE("invalid specs are rejected") {
    ModelSpec bad;
    bad.kind = "lorenz";
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad.kind = "gradient_1d";
    bad.params = {{"quadratic", 0.0}, {"quartic", 0.0}};
    CHECK_THROWS_AS(validate(bad), ConfigError);
    ModelSpec unstable;
    unstable.kind = "linear_ou";
    unstable.drift_matrix = {1, 0, 0, -1};
    CHECK_THROWS_AS(validate(unstable), ConfigError);
    ModelSpec toggle;
    toggle.kind = "toggle_switch";
    toggle.params = {{"b", -1.0}};
    CHECK_THROWS_AS(validate(toggle), ConfigError);
  }

  TEST_CASE("hurwitz test") {
    Mat a(2, 2);
    a << -1, 5, 0, -0.1;
    CHECK(is_hurwitz(a));
    a(1, 1) = 0.1;
    CHECK_FALSE(is_hurwitz(a));
  }
}

TEST_SUITE("rng") {
  TEST_CASE("streams are reproducible and distinct") {
    RandomStream a(42, 3), b(42, 3), c(42, 4), d(43, 3);
    bool differ_c = false, differ_d = false;
    for (int i = 0; i < 100; ++i) {
      const double x = a.uniform();
      CHECK(x == b.uniform());
      CHECK(x > 0.0);
      CHECK(x < 1.0);
      differ_c = differ_c || x != c.uniform();
      differ_d = differ_d || x != d.uniform();
    }
    CHECK(differ_c);
    CHECK(differ_d);
  }

  TEST_CASE("normal moments") {
    RandomStream s(7, 0);
    const int n = 200000;
    double m1 = 0, m2 = 0;
    for (int i = 0; i < n; ++i) {
      const double z = s.normal();
      m1 += z;
      m2 += z * z;
    }
    m1 /= n;
    m2 /= n;
    CHECK(std::abs(m1) < 4.0 / std::sqrt(double(n)));
    CHECK(std::abs(m2 - 1.0) < 4.0 * std::sqrt(2.0 / n));
  }
}

TEST_SUITE("spatial_index") {
  TEST_CASE("nearest and k-nearest agree with brute force") {
    RandomStream rng(11, 0);
    Points pts(500, 2);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) pts.row(i) << rng.uniform() * 4 - 2, rng.uniform();
    const GridIndex index(pts);
    for (int q = 0; q < 200; ++q) {
      const Vec x = Eigen::Vector2d(rng.uniform() * 8 - 4, rng.uniform() * 3 - 1);
      std::vector<double> all;
      for (Eigen::Index i = 0; i < pts.rows(); ++i) all.push_back(squared_distance(x, pts.row(i).transpose()));
      std::sort(all.begin(), all.end());
      CHECK(index.nearest(x).first == all[0]);
      std::vector<double> k;
      index.k_nearest(x, 5, k);
      std::sort(k.begin(), k.end());
      for (int j = 0; j < 5; ++j) CHECK(k[std::size_t(j)] == all[std::size_t(j)]);
      const double r = std::sqrt(all[0]);
      CHECK(index.within(x, r * 1.0001));
      CHECK_FALSE(index.within(x, r * 0.9999));
    }
  }
}
