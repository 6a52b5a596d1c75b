#include <doctest.h>

#include "sal/rng.hpp"
#include "sal/sde_engine.hpp"

#include <algorithm>
#include <sstream>

using namespace sal;

namespace {

SdeSystem model(const std::string& kind, std::map<std::string, double> params = {}) {
  ModelSpec spec;
  spec.kind = kind;
  spec.params = std::move(params);
  return make_builtin(spec);
}

SimConfig small(double eps) {
  SimConfig c;
  c.eps = eps;
  c.burn_T = 10;
  c.n_traj = 40;
  c.samples_per_traj = 500;
  c.thin_T = 0.5;
  c.dt = 2e-3;
  return c;
}

}  // namespace

TEST_SUITE("sde_engine") {
  TEST_CASE("euler step oracles") {
    const SdeSystem ou = model("linear_ou");
    Vec x = Eigen::Vector2d(1, 0);
    em_step(ou, x, 0.1, 0.0, Vec::Zero(2));
    CHECK(x.isApprox(Eigen::Vector2d(0.9, 0)));
    Vec y = Eigen::Vector2d(0.4, -0.2);
    em_step(ou, y, 0.0, 0.3, Eigen::Vector2d(1.5, -2));
    CHECK(y == Eigen::Vector2d(0.4, -0.2));
  }

  TEST_CASE("increment law without drift") {
    ModelSpec spec;
    spec.kind = "linear_ou";
    spec.drift_matrix = {-1e-300, 0, 0, -1e-300};
    const SdeSystem flat = make_builtin(spec);
    RandomStream rng(3, 0);
    const int n = 100000;
    const double dt = 0.01, eps = 0.5;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (int i = 0; i < n; ++i) {
      Vec x = Vec::Zero(2);
      em_step(flat, x, dt, eps, Eigen::Vector2d(rng.normal(), rng.normal()));
      mean += x;
      cov += x * x.transpose();
    }
    mean /= n;
    cov /= n;
    const double var = eps * eps * dt;
    CHECK(mean.norm() < 3 * std::sqrt(var / n) * std::sqrt(2.0));
    CHECK(std::abs(cov(0, 0) - var) < 3 * var * std::sqrt(2.0 / n));
    CHECK(std::abs(cov(1, 1) - var) < 3 * var * std::sqrt(2.0 / n));
  }

  TEST_CASE("OU stationary covariance") {
    const SdeSystem ou = model("linear_ou");
    const EnsembleSample s = stationary_sample(ou, small(0.2));
    CHECK(s.size() == 40 * 500);
    const Vec mean = s.points.colwise().mean();
    const Points c = s.points.rowwise() - mean.transpose();
    const Mat cov = c.transpose() * c / double(s.size() - 1);
    CHECK(std::abs(cov(0, 0) / 0.02 - 1) < 0.05);
    CHECK(std::abs(cov(1, 1) / 0.02 - 1) < 0.05);
    CHECK(std::abs(cov(0, 1)) < 0.05 * 0.02);
  }

  TEST_CASE("gradient Gibbs law") {
    const SdeSystem g = model("gradient_1d");
    SimConfig cfg = small(0.2);
    cfg.n_traj = 100;
    cfg.samples_per_traj = 1000;
    const EnsembleSample s = stationary_sample(g, cfg);
    std::vector<double> v(s.points.data(), s.points.data() + s.size());
    std::sort(v.begin(), v.end());
    const double sd = 0.2 / std::sqrt(2.0);
    double ks = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double f = 0.5 * std::erfc(-v[i] / (sd * std::sqrt(2.0)));
      ks = std::max({ks, std::abs(f - double(i) / v.size()), std::abs(f - double(i + 1) / v.size())});
    }
    CHECK(ks < 0.01);
  }

  TEST_CASE("limit cycle concentrates on the circle") {
    const SdeSystem lc = model("limit_cycle");
    const EnsembleSample s = stationary_sample(lc, small(0.05));
    long near = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) near += std::abs(s.points.row(i).norm() - 1) < 0.1;
    CHECK(double(near) / double(s.size()) >= 0.99);
  }

  TEST_CASE("results do not depend on the worker count") {
    const SdeSystem lc = model("limit_cycle");
    SimConfig a = small(0.1);
    a.n_traj = 7;
    a.samples_per_traj = 50;
    SimConfig b = a;
    a.threads = 1;
    b.threads = 3;
    const auto sa = stationary_sample(lc, a), sb = stationary_sample(lc, b);
    CHECK(sa.points == sb.points);
    CHECK(sa.traj == sb.traj);
    std::ostringstream ca, cb;
    write_ensemble_csv(ca, sa);
    write_ensemble_csv(cb, sb);
    CHECK(ca.str() == cb.str());
    CHECK(ca.str().substr(0, 11) == "x1,x2,traj,");
  }

  TEST_CASE("config validation and blow-up") {
    SimConfig bad = small(0.1);
    bad.dt = 0;
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = small(0.1);
    bad.n_traj = 0;
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = small(-0.1);
    CHECK_THROWS_AS(validate(bad), ConfigError);

    // explicit Euler is unstable for this step on the cubic drift
    const SdeSystem lc = model("limit_cycle");
    SimConfig wild = small(0.1);
    wild.dt = 1.0;
    wild.thin_T = 1.0;
    CHECK_THROWS_AS(stationary_sample(lc, wild), NumericalError);
  }
}
