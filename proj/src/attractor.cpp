#include "sal/attractor.hpp"

#include "sal/io.hpp"
#include "sal/parallel.hpp"
#include "sal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace sal {

void rk4_step(const SdeSystem& sys, Eigen::Ref<Vec> x, double dt, Vec work[5]) {
  Vec& k1 = work[0];
  Vec& k2 = work[1];
  Vec& k3 = work[2];
  Vec& k4 = work[3];
  Vec& tmp = work[4];
  sys.drift(x, k1);
  tmp = x + 0.5 * dt * k1;
  sys.drift(tmp, k2);
  tmp = x + 0.5 * dt * k2;
  sys.drift(tmp, k3);
  tmp = x + dt * k3;
  sys.drift(tmp, k4);
  x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace {

void check_blowup(const SdeSystem& sys, const Eigen::Ref<const Vec>& x, double t) {
  const double limit = 1e3 * sys.state_box.diameter();
  if (!x.allFinite() || x.norm() > limit) {
    std::ostringstream os;
    os << "flow blow-up at t=" << t << " (|x| exceeds " << limit << ")";
    throw NumericalError(os.str());
  }
}

long step_count(double duration, double dt) {
  if (!(dt > 0)) throw ConfigError("integration step must be positive");
  if (!(duration >= 0)) throw ConfigError("integration horizon must be nonnegative");
  return static_cast<long>(std::ceil(duration / dt - 1e-9));
}

}  // namespace

Points integrate_flow(const SdeSystem& sys, const Eigen::Ref<const Vec>& x0, double duration,
                      double dt) {
  const long steps = step_count(duration, dt);
  Points traj(steps + 1, sys.n);
  traj.row(0) = x0.transpose();
  if (steps == 0) return traj;
  const double h = duration / double(steps);
  Vec x = x0;
  Vec work[5] = {Vec(sys.n), Vec(sys.n), Vec(sys.n), Vec(sys.n), Vec(sys.n)};
  for (long s = 1; s <= steps; ++s) {
    rk4_step(sys, x, h, work);
    check_blowup(sys, x, double(s) * h);
    traj.row(s) = x.transpose();
  }
  return traj;
}

AttractorCloud::AttractorCloud(Points points, double resolution, Box domain)
    : points_(std::move(points)), resolution_(resolution), domain_(std::move(domain)) {
  if (points_.rows() == 0) throw NumericalError("attractor cloud is empty");
  index_ = GridIndex(points_);
}

AttractorCloud AttractorCloud::from_analytic(const AnalyticAttractor& exact, const Box& domain,
                                             int samples_per_unit_length) {
  Points pts;
  double resolution = 0;
  if (exact.kind == AnalyticAttractor::Kind::points) {
    pts = exact.points;
  } else {
    const double length = 2 * kPi * exact.radius;
    const auto count = static_cast<Eigen::Index>(std::ceil(length * samples_per_unit_length));
    pts.resize(count, 2);
    for (Eigen::Index i = 0; i < count; ++i) {
      const double a = 2 * kPi * double(i) / double(count);
      pts(i, 0) = exact.center(0) + exact.radius * std::cos(a);
      pts(i, 1) = exact.center(1) + exact.radius * std::sin(a);
    }
    resolution = length / double(count);
  }
  AttractorCloud cloud(std::move(pts), resolution, domain);
  cloud.analytic_ = exact;
  return cloud;
}

std::string AttractorCloud::representation() const {
  return analytic_ ? "analytic:" + analytic_->description : "sampled";
}

double AttractorCloud::distance(const Eigen::Ref<const Vec>& x) const {
  if (analytic_ && analytic_->kind == AnalyticAttractor::Kind::circle)
    return std::abs((x - analytic_->center).norm() - analytic_->radius);
  return std::sqrt(index_.nearest(x).first);
}

bool AttractorCloud::within(const Eigen::Ref<const Vec>& x, double r) const {
  if (analytic_ && analytic_->kind == AnalyticAttractor::Kind::circle) return distance(x) <= r;
  return index_.within(x, r);
}

namespace {

using CellKey = std::vector<std::int64_t>;

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto v : k) h = (h ^ static_cast<std::uint64_t>(v)) * 1099511628211ull;
    return static_cast<std::size_t>(h);
  }
};

CellKey snap_key(const Vec& p, double snap) {
  CellKey k(static_cast<std::size_t>(p.size()));
  for (Eigen::Index d = 0; d < p.size(); ++d) k[std::size_t(d)] = static_cast<std::int64_t>(std::floor(p(d) / snap));
  return k;
}

}  // namespace

AttractorCloud sample_attractor(const SdeSystem& sys, const AttractorSampling& opts) {
  if (opts.seeds < 1 && opts.extra_seeds.empty()) throw ConfigError("sample_attractor: seeds must be >= 1");
  const Box& box = sys.state_box;
  const double h_a = opts.resolution > 0 ? opts.resolution : 1e-3 * box.diameter();
  const double collect_T = opts.collect_T > 0 ? opts.collect_T : 10 * opts.burn_T;

  std::vector<Vec> starts;
  RandomStream rng(opts.seed, 0);
  for (int s = 0; s < opts.seeds; ++s) {
    Vec x(sys.n);
    for (int d = 0; d < sys.n; ++d)
      x(d) = box.lower(d) + (box.upper(d) - box.lower(d)) * rng.uniform();
    starts.push_back(std::move(x));
  }
  for (const auto& e : opts.extra_seeds) starts.push_back(e);

  // Points in an already occupied snapping cell of width h_A/2 are dropped,
  // first within each orbit, then across orbits in seed order.
  const double snap = 0.5 * h_a;
  std::vector<std::vector<Vec>> per_seed(starts.size());
  parallel_for(starts.size(), opts.threads, [&](std::size_t i) {
    Vec x = starts[i];
    Vec work[5] = {Vec(sys.n), Vec(sys.n), Vec(sys.n), Vec(sys.n), Vec(sys.n)};
    const long burn_steps = step_count(opts.burn_T, opts.dt);
    for (long s = 0; s < burn_steps; ++s) {
      rk4_step(sys, x, opts.dt, work);
      check_blowup(sys, x, double(s + 1) * opts.dt);
    }
    auto& out = per_seed[i];
    std::unordered_set<CellKey, CellKeyHash> seen;
    Vec last = x;
    if (seen.insert(snap_key(x, snap)).second) out.push_back(x);
    const long collect_steps = step_count(collect_T, opts.dt);
    for (long s = 0; s < collect_steps; ++s) {
      rk4_step(sys, x, opts.dt, work);
      check_blowup(sys, x, opts.burn_T + double(s + 1) * opts.dt);
      if ((x - last).norm() < h_a) continue;
      last = x;
      if (seen.insert(snap_key(x, snap)).second) out.push_back(x);
    }
  });

  std::unordered_set<CellKey, CellKeyHash> occupied;
  std::vector<Vec> kept;
  for (const auto& orbit : per_seed)
    for (const auto& p : orbit)
      if (occupied.insert(snap_key(p, snap)).second) kept.push_back(p);
  Points pts(static_cast<Eigen::Index>(kept.size()), sys.n);
  for (std::size_t i = 0; i < kept.size(); ++i) pts.row(Eigen::Index(i)) = kept[i].transpose();
  AttractorCloud cloud(std::move(pts), h_a, box);
  cloud.seeds = static_cast<int>(starts.size());
  cloud.burn_T = opts.burn_T;
  cloud.collect_T = collect_T;
  return cloud;
}

AttractorCloud default_attractor(const SdeSystem& sys, const AttractorSampling& opts) {
  if (sys.attractor) return AttractorCloud::from_analytic(*sys.attractor, sys.state_box);
  return sample_attractor(sys, opts);
}

namespace {

// Least-squares line y = a + b x with the standard error of b.
void fit_line(const std::vector<double>& x, const std::vector<double>& y, double& slope,
              double& intercept, double& slope_stderr) {
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0)) throw NumericalError("degenerate dimension fit: abscissae have zero variance");
  slope = sxy / sxx;
  intercept = my - slope * mx;
  double ssr = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - intercept - slope * x[i];
    ssr += r * r;
  }
  slope_stderr = x.size() > 2 ? std::sqrt(ssr / (n - 2) / sxx) : 0.0;
}

void check_radii(const std::vector<double>& radii) {
  if (radii.size() < 3) throw ConfigError("dimension fit needs at least 3 radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0)) throw ConfigError("radii must be positive");
    if (i && !(radii[i] < radii[i - 1])) throw ConfigError("radii must be strictly decreasing");
  }
  if (radii.front() / radii.back() < 10.0 - 1e-9)
    throw ConfigError("radii must span at least one decade");
}

}  // namespace

std::vector<double> dimension_radii(const Box& box, double resolution) {
  std::vector<double> radii;
  for (int j = 0; j < 5; ++j)
    radii.push_back(std::max(box.diameter() * std::ldexp(1.0, -5 - j), 2 * resolution * std::ldexp(1.0, 4 - j)));
  return radii;
}

DimensionFit box_dimension(const Points& points, const std::vector<double>& radii) {
  check_radii(radii);
  if (points.rows() == 0) throw NumericalError("box counting on an empty cloud");
  DimensionFit fit;
  fit.radii = radii;
  const Vec origin = points.colwise().minCoeff().transpose();
  std::vector<double> lx, ly;
  for (const double r : radii) {
    std::unordered_set<std::string> boxes;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      std::string key;
      for (Eigen::Index d = 0; d < points.cols(); ++d) {
        key += std::to_string(static_cast<long long>(std::floor((points(i, d) - origin(d)) / r)));
        key += ',';
      }
      boxes.insert(std::move(key));
    }
    fit.counts_or_volumes.push_back(double(boxes.size()));
    lx.push_back(-std::log(r));
    ly.push_back(std::log(double(boxes.size())));
  }
  fit_line(lx, ly, fit.slope, fit.intercept, fit.stderr_);
  return fit;
}

VolumeEstimate tube_volume(const AttractorCloud& cloud, double r, long mc_points,
                           std::uint64_t rng_seed) {
  if (!(r > 0)) throw ConfigError("tube radius must be positive");
  if (mc_points < 1) throw ConfigError("tube_volume needs at least one Monte Carlo point");
  const Box& box = cloud.domain();
  RandomStream rng(rng_seed, 0);
  Vec x(cloud.dim());
  long hits = 0;
  for (long i = 0; i < mc_points; ++i) {
    for (int d = 0; d < cloud.dim(); ++d)
      x(d) = box.lower(d) + (box.upper(d) - box.lower(d)) * rng.uniform();
    if (cloud.within(x, r)) ++hits;
  }
  const double p = double(hits) / double(mc_points);
  const double vol = box.volume();
  return {p * vol, vol * std::sqrt(p * (1 - p) / double(mc_points))};
}

DimensionFit tube_volume_scaling(const AttractorCloud& cloud, const std::vector<double>& radii,
                                 long mc_points, std::uint64_t rng_seed) {
  check_radii(radii);
  DimensionFit fit;
  fit.radii = radii;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const auto v = tube_volume(cloud, radii[i], mc_points, rng_seed + i);
    if (!(v.value > 0)) throw NumericalError("tube volume estimate is zero; increase mc_points");
    fit.counts_or_volumes.push_back(v.value);
    lx.push_back(std::log(radii[i]));
    ly.push_back(std::log(v.value));
  }
  fit_line(lx, ly, fit.slope, fit.intercept, fit.stderr_);
  return fit;
}

void write_points_csv(std::ostream& os, const Points& points) {
  for (Eigen::Index d = 0; d < points.cols(); ++d) os << (d ? ",x" : "x") << d + 1;
  os << '\n';
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index d = 0; d < points.cols(); ++d) os << (d ? "," : "") << format_double(points(i, d));
    os << '\n';
  }
}

Points read_points_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty point CSV");
  const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Eigen::Index c = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
      ++c;
    }
    if (c != cols) throw ConfigError("point CSV row has the wrong number of columns");
    ++rows;
  }
  Points pts(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index d = 0; d < cols; ++d) pts(i, d) = values[std::size_t(i * cols + d)];
  return pts;
}

}  // namespace sal
