#include "sal/measures.hpp"

#include "sal/parallel.hpp"
#include "sal/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace sal {

namespace {

// Neumaier compensated sum.
struct CompensatedSum {
  double sum = 0, carry = 0;
  void add(double v) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

Estimate proportion(long hits, long n) {
  Estimate e;
  e.value = double(hits) / double(n);
  e.stderr_ = std::sqrt(e.value * (1 - e.value) / double(n));
  return e;
}

ScalarField distance_field(const AttractorCloud& cloud) {
  return fields::from_function("dist(x,A)", [&cloud](const Eigen::Ref<const Vec>& x) { return cloud.distance(x); });
}

double grid_mass_below(const DensityField& d, const ScalarField& f, double level) {
  const int sub = d.grid.dim() == 1 ? 256 : 32;
  return sublevel_cell_fractions(d.grid, f, level, sub).dot(d.u) * d.grid.cell_volume();
}

double grid_mass_at_or_above(const DensityField& d, const ScalarField& f, double level) {
  const int sub = d.grid.dim() == 1 ? 256 : 32;
  const Vec frac = sublevel_cell_fractions(d.grid, f, level, sub);
  return (Vec::Ones(frac.size()) - frac).dot(d.u) * d.grid.cell_volume();
}

}  // namespace

MeasureView MeasureView::of(const EnsembleSample& sample) { return of(sample.points, sample.eps()); }

MeasureView MeasureView::of(const Points& points, double eps) {
  if (points.rows() == 0) throw ConfigError("measure view over an empty sample");
  MeasureView v;
  v.points_ = &points;
  v.eps_ = eps;
  return v;
}

MeasureView MeasureView::of(const DensityField& density) {
  MeasureView v;
  v.density_ = &density;
  v.eps_ = density.eps;
  return v;
}

int MeasureView::dim() const {
  return is_grid() ? density_->grid.dim() : static_cast<int>(points_->cols());
}

Estimate tube_mass(const MeasureView& m, const AttractorCloud& cloud, double radius) {
  if (!(radius >= 0)) throw ConfigError("tube_mass: radius must be nonnegative");
  if (m.is_grid()) {
    Estimate e;
    if (radius > 0) e.value = 1.0 - grid_mass_at_or_above(m.density(), distance_field(cloud), radius);
    return e;
  }
  const Points& p = m.points();
  long hits = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) hits += cloud.distance(p.row(i).transpose()) <= radius;
  return proportion(hits, p.rows());
}

ShellMass shell_mass(const MeasureView& m, const AttractorCloud& cloud, double alpha, double eps) {
  if (!(alpha > 0 && alpha < 1)) throw ConfigError("shell_mass: alpha must lie in (0, 1)");
  if (!(eps > 0)) throw ConfigError("shell_mass: eps must be positive");
  const double lo = std::pow(eps, 1 + alpha), hi = std::pow(eps, 1 - alpha);
  ShellMass s;
  if (m.is_grid()) {
    const ScalarField dist = distance_field(cloud);
    s.inner.value = grid_mass_below(m.density(), dist, lo);
    s.outer.value = grid_mass_at_or_above(m.density(), dist, hi);
    s.shell.value = 1.0 - s.inner.value - s.outer.value;
    return s;
  }
  const Points& p = m.points();
  long inner = 0, outer = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double d = cloud.distance(p.row(i).transpose());
    inner += d < lo;
    outer += d > hi;
  }
  const long n = p.rows();
  s.inner = proportion(inner, n);
  s.outer = proportion(outer, n);
  s.shell = proportion(n - inner - outer, n);
  return s;
}

Estimate msd(const MeasureView& m, const AttractorCloud& cloud) {
  Estimate e;
  if (m.is_grid()) {
    const DensityField& d = m.density();
    CompensatedSum acc;
    for (Eigen::Index k = 0; k < d.grid.size(); ++k) {
      if (d.u(k) == 0) continue;
      const double r = cloud.distance(d.grid.center(k));
      acc.add(r * r * d.u(k));
    }
    e.value = acc.value() * d.grid.cell_volume();
    return e;
  }
  const Points& p = m.points();
  CompensatedSum s1, s2;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double r = cloud.distance(p.row(i).transpose());
    s1.add(r * r);
    s2.add(r * r * r * r);
  }
  const double n = double(p.rows());
  e.value = s1.value() / n;
  const double var = std::max(0.0, s2.value() / n - e.value * e.value);
  e.stderr_ = std::sqrt(var / n);
  return e;
}

Estimate tail_mass(const MeasureView& m, double r) {
  if (!(r >= 0)) throw ConfigError("tail_mass: r must be nonnegative");
  if (m.is_grid()) {
    Estimate e;
    e.value = r == 0 ? 1.0 : grid_mass_at_or_above(m.density(), fields::radial(), r);
    return e;
  }
  const Points& p = m.points();
  long hits = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) hits += p.row(i).norm() > r;
  if (r == 0) hits = p.rows();
  return proportion(hits, p.rows());
}

std::string to_string(EntropyMethod m) {
  switch (m) {
    case EntropyMethod::knn: return "knn";
    case EntropyMethod::histogram: return "histogram";
    default: return "grid";
  }
}

double digamma_int(long m) {
  if (m < 1) throw ConfigError("digamma_int: argument must be positive");
  constexpr double euler_gamma = 0.57721566490153286061;
  if (m < 64) {
    double h = 0;
    for (long i = 1; i < m; ++i) h += 1.0 / double(i);
    return h - euler_gamma;
  }
  const double x = double(m), x2 = x * x;
  return std::log(x) - 1 / (2 * x) - 1 / (12 * x2) + 1 / (120 * x2 * x2) - 1 / (252 * x2 * x2 * x2);
}

double unit_ball_volume(int n) { return std::pow(kPi, 0.5 * n) / std::tgamma(0.5 * n + 1); }

EntropyEstimate entropy(const MeasureView& m, EntropyMethod method, double param, unsigned threads) {
  EntropyEstimate out;
  out.method = method;
  if (method == EntropyMethod::grid) {
    if (!m.is_grid()) throw ConfigError("entropy: grid method needs a density");
    const DensityField& d = m.density();
    CompensatedSum acc;
    for (Eigen::Index k = 0; k < d.u.size(); ++k)
      if (d.u(k) > 0) acc.add(-d.u(k) * std::log(d.u(k)));
    out.value = acc.value() * d.grid.cell_volume();
    return out;
  }
  if (m.is_grid()) throw ConfigError("entropy: knn and histogram methods need samples");
  const Points& p = m.points();
  const long n = p.rows();
  const int dim = static_cast<int>(p.cols());

  if (method == EntropyMethod::knn) {
    const int k = param > 0 ? static_cast<int>(param) : 4;
    if (k < 1 || k >= n) throw ConfigError("entropy: need 1 <= k < N");
    out.param = k;
    const GridIndex index(p);
    std::vector<double> logr(static_cast<std::size_t>(n));
    parallel_for(std::size_t(n), threads, [&](std::size_t i) {
      std::vector<double> sq;
      index.k_nearest(p.row(Eigen::Index(i)).transpose(), k, sq, Eigen::Index(i));
      logr[i] = 0.5 * std::log(sq.back());
    });
    CompensatedSum s1, s2;
    for (const double v : logr) {
      if (!std::isfinite(v)) throw NumericalError("entropy: coincident sample points");
      s1.add(v);
      s2.add(v * v);
    }
    const double mean = s1.value() / double(n);
    const double var = std::max(0.0, s2.value() / double(n) - mean * mean);
    out.value = digamma_int(n) - digamma_int(k) + std::log(unit_ball_volume(dim)) + dim * mean;
    out.stderr_ = dim * std::sqrt(var / double(n));
    return out;
  }

  double width = param;
  if (!(width > 0)) {
    const Vec mean = p.colwise().mean();
    const double var = (p.rowwise() - mean.transpose()).squaredNorm() / double(n * dim);
    width = 0.2 * std::sqrt(var);
    if (!(width > 0)) throw NumericalError("entropy: degenerate sample for histogram");
  }
  out.param = width;
  std::unordered_map<std::string, long> bins;
  std::string key;
  for (Eigen::Index i = 0; i < n; ++i) {
    key.clear();
    for (int d = 0; d < dim; ++d) {
      key += std::to_string(static_cast<long long>(std::floor(p(i, d) / width)));
      key += ',';
    }
    ++bins[key];
  }
  // Deterministic accumulation order regardless of hash layout.
  std::vector<long> counts;
  counts.reserve(bins.size());
  for (const auto& [_, c] : bins) counts.push_back(c);
  std::sort(counts.begin(), counts.end());
  CompensatedSum acc;
  const double log_cell = dim * std::log(width);
  for (const long c : counts) {
    const double q = double(c) / double(n);
    acc.add(-q * (std::log(q) - log_cell));
  }
  out.value = acc.value();
  return out;
}

namespace {

// Composite Simpson rule on [a, b] with an even panel count.
template <typename F>
double simpson(F&& f, double a, double b, int panels = 4096) {
  if (a == b) return 0;
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3;
}

}  // namespace

double lyap_tail_bound(double gamma, const std::function<double(double)>& h, double rho_m, double rho) {
  if (!(gamma > 0)) throw ConfigError("lyap_tail_bound: gamma must be positive");
  if (!(rho >= rho_m)) throw ConfigError("lyap_tail_bound: need rho >= rho_m");
  const double integral = simpson(
      [&](double t) {
        const double v = h(t);
        if (!(v > 0)) throw ConfigError("lyap_tail_bound: H must be positive on [rho_m, rho]");
        return 1.0 / v;
      },
      rho_m, rho);
  return std::exp(-gamma * integral);
}

double lyap_comparison_factor(const std::function<double(double)>& h1,
                              const std::function<double(double)>& h2, double rho_m, double rho,
                              double rho_M) {
  if (!(rho_m < rho && rho <= rho_M)) throw ConfigError("comparison factor: need rho_m < rho <= rho_M");
  auto positive = [](double v) {
    if (!(v > 0)) throw ConfigError("comparison factor: H1, H2 must be positive");
    return v;
  };
  // Cumulative int_{rho_m}^{s} 1/H2 on a fine lattice, then the outer integral.
  constexpr int panels = 4096;
  const double step = (rho_M - rho_m) / panels;
  std::vector<double> inner(panels + 1, 0.0);
  for (int i = 1; i <= panels; ++i) {
    const double a = rho_m + (i - 1) * step, b = rho_m + i * step;
    inner[std::size_t(i)] = inner[std::size_t(i - 1)] +
                            step / 6 * (1 / positive(h2(a)) + 4 / positive(h2(0.5 * (a + b))) + 1 / positive(h2(b)));
  }
  auto inner_at = [&](double s) {
    const double pos = (s - rho_m) / step;
    const int i = std::clamp(int(pos), 0, panels - 1);
    const double a = rho_m + i * step;
    return inner[std::size_t(i)] + simpson([&](double t) { return 1 / positive(h2(t)); }, a, s, 8);
  };
  const double outer = simpson([&](double s) { return 1.0 / (positive(h1(s)) * inner_at(s)); }, rho, rho_M, 2048);
  return std::exp(outer);
}

double regularity_ratio(const DensityField& density, const AttractorCloud& cloud, double k, double eps) {
  if (!(k > 0 && eps > 0)) throw ConfigError("regularity_ratio: K and eps must be positive");
  double lo = INFINITY, hi = 0;
  for (Eigen::Index c = 0; c < density.grid.size(); ++c) {
    if (cloud.distance(density.grid.center(c)) > k * eps) continue;
    lo = std::min(lo, density.u(c));
    hi = std::max(hi, density.u(c));
  }
  if (!(hi > 0)) throw NumericalError("regularity_ratio: tube B(A, K eps) holds no grid cells");
  return lo / hi;
}

}  // namespace sal
