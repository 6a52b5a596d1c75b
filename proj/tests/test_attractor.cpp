#include <doctest.h>

#include "sal/attractor.hpp"

#include <sstream>

using namespace sal;

namespace {

SdeSystem model(const std::string& kind) {
  ModelSpec spec;
  spec.kind = kind;
  return make_builtin(spec);
}

Points circle_points(int n) {
  Points p(n, 2);
  for (int i = 0; i < n; ++i) p.row(i) << std::cos(2 * kPi * i / n), std::sin(2 * kPi * i / n);
  return p;
}

}  // namespace

TEST_SUITE("attractor") {
  TEST_CASE("flow integration oracles") {
    const SdeSystem lc = model("limit_cycle");
    const Points orbit = integrate_flow(lc, Eigen::Vector2d(2, 0), 50, 1e-2);
    CHECK(std::abs(orbit.bottomRows(1).norm() - 1.0) < 1e-3);
    const SdeSystem ou = model("linear_ou");
    const Points decay = integrate_flow(ou, Eigen::Vector2d(1, 1), 20, 1e-2);
    CHECK(decay.bottomRows(1).norm() < 1e-6);
    const Points still = integrate_flow(ou, Eigen::Vector2d(1, 1), 0, 1e-2);
    CHECK(still.rows() == 1);
    CHECK(still.row(0).transpose().isApprox(Eigen::Vector2d(1, 1)));
  }

  TEST_CASE("sampled limit cycle lies on the circle") {
    const SdeSystem lc = model("limit_cycle");
    AttractorSampling opts;
    opts.extra_seeds.push_back(Eigen::Vector2d(0, 0));
    const AttractorCloud cloud = sample_attractor(lc, opts);
    int at_origin = 0;
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
      const double r = cloud.points().row(i).norm();
      if (r < 1e-12) ++at_origin;
      else CHECK(std::abs(r - 1.0) < 1e-3);
    }
    CHECK(at_origin == 1);
    CHECK(cloud.distance(Eigen::Vector2d(2, 0)) == doctest::Approx(1.0).epsilon(cloud.resolution()));
  }

  TEST_CASE("sampled toggle and OU attractors") {
    const SdeSystem ts = model("toggle_switch");
    const AttractorCloud cloud = sample_attractor(ts, {});
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
      double best = 1e9;
      for (Eigen::Index a = 0; a < ts.attractor->points.rows(); ++a)
        best = std::min(best, (cloud.points().row(i) - ts.attractor->points.row(a)).norm());
      CHECK(best < cloud.resolution());
    }
    const AttractorCloud ou = sample_attractor(model("linear_ou"), {});
    CHECK(ou.points().rowwise().norm().maxCoeff() < 1e-6);
  }

  TEST_CASE("near invariance of sampled cloud") {
    const SdeSystem lc = model("limit_cycle");
    const AttractorCloud cloud = sample_attractor(lc, {});
    Vec work[5] = {Vec(2), Vec(2), Vec(2), Vec(2), Vec(2)};
    for (Eigen::Index i = 0; i < cloud.size(); i += 17) {
      Vec x = cloud.points().row(i).transpose();
      rk4_step(lc, x, cloud.resolution(), work);
      CHECK(cloud.distance(x) < cloud.resolution());
    }
  }

  TEST_CASE("distance queries") {
    const Box box = Box::cube(2, -3, 3);
    const AttractorCloud point(Points::Zero(1, 2), 1e-3, box);
    CHECK(point.distance(Eigen::Vector2d(3, 4)) == 5.0);
    const AttractorCloud dense(circle_points(10000), 2 * kPi / 10000, box);
    CHECK(dense.distance(Eigen::Vector2d(0, 0)) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(dense.distance(Eigen::Vector2d(2, 0)) == doctest::Approx(1.0).epsilon(1e-3));
  }

  TEST_CASE("box dimension oracles") {
    const std::vector<double> radii{0.125, 0.0625, 0.03125, 0.015625, 0.0078125};
    CHECK(box_dimension(Points::Zero(1, 2), radii).slope == doctest::Approx(0.0).epsilon(0.05));
    CHECK(std::abs(box_dimension(circle_points(10000), radii).slope - 1.0) < 0.1);
    Points square(200 * 200, 2);
    for (int i = 0; i < 200; ++i)
      for (int j = 0; j < 200; ++j) square.row(i * 200 + j) << i / 200.0, j / 200.0;
    CHECK(std::abs(box_dimension(square, radii).slope - 2.0) < 0.1);
  }

  TEST_CASE("radius validation") {
    const Points p = Points::Zero(1, 2);
    CHECK_THROWS_AS(box_dimension(p, {0.1, 0.05}), ConfigError);
    CHECK_THROWS_AS(box_dimension(p, {0.1, 0.2, 0.01}), ConfigError);
    CHECK_THROWS_AS(box_dimension(p, {0.1, 0.05, 0.02}), ConfigError);
  }

  TEST_CASE("tube volume oracles") {
    const Box box = Box::cube(2, -3, 3);
    const AttractorCloud point(Points::Zero(1, 2), 1e-3, box);
    const auto disk = tube_volume(point, 1.0, 200000, 5);
    CHECK(std::abs(disk.value - kPi) < 3 * disk.stderr_);
    const SdeSystem lc = model("limit_cycle");
    const AttractorCloud circle = default_attractor(lc);
    const auto ring = tube_volume(circle, 0.1, 200000, 6);
    CHECK(std::abs(ring.value - 0.4 * kPi) < 3 * ring.stderr_);
    CHECK(tube_volume(point, 100, 1000, 1).value == doctest::Approx(box.volume()));
    const auto fit = tube_volume_scaling(circle, {0.4, 0.2, 0.1, 0.04}, 200000, 9);
    CHECK(std::abs(fit.slope - 1.0) < 0.15);
  }

  TEST_CASE("points csv round trip") {
    Points p(3, 2);
    p << 0.1, -2, 1.0 / 3, 4e-300, 7, 8;
    std::stringstream ss;
    write_points_csv(ss, p);
    CHECK(read_points_csv(ss) == p);
  }
}
