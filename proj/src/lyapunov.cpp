#include "sal/lyapunov.hpp"

#include "sal/parallel.hpp"
#include "sal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sal {

Vec ScalarField::fd_gradient(const Eigen::Ref<const Vec>& x, double h) const {
  Vec g(x.size());
  Vec xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    g(i) = (value(xp) - value(xm)) / (2 * h);
    xp(i) = xm(i) = x(i);
  }
  return g;
}

Mat ScalarField::fd_hessian(const Eigen::Ref<const Vec>& x, double h) const {
  const Eigen::Index n = x.size();
  Mat H(n, n);
  if (grad) {
    Vec xp = x, xm = x;
    for (Eigen::Index j = 0; j < n; ++j) {
      xp(j) = x(j) + h;
      xm(j) = x(j) - h;
      H.col(j) = (grad(xp) - grad(xm)) / (2 * h);
      xp(j) = xm(j) = x(j);
    }
    return 0.5 * (H + H.transpose());
  }
  const double f0 = value(x);
  Vec y = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = x(i) + h;
    const double fp = value(y);
    y(i) = x(i) - h;
    const double fm = value(y);
    y(i) = x(i);
    H(i, i) = (fp - 2 * f0 + fm) / (h * h);
    for (Eigen::Index j = 0; j < i; ++j) {
      auto at = [&](double si, double sj) {
        y(i) = x(i) + si * h;
        y(j) = x(j) + sj * h;
        const double v = value(y);
        y(i) = x(i);
        y(j) = x(j);
        return v;
      };
      H(i, j) = H(j, i) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * h * h);
    }
  }
  return H;
}

Vec ScalarField::gradient(const Eigen::Ref<const Vec>& x) const {
  return grad ? grad(x) : fd_gradient(x, fd_step);
}

Mat ScalarField::hess(const Eigen::Ref<const Vec>& x) const {
  return hessian ? hessian(x) : fd_hessian(x, fd_step);
}

namespace fields {

ScalarField squared_norm(double scale) {
  ScalarField u;
  u.name = scale == 1.0 ? "|x|^2" : std::to_string(scale) + "*|x|^2";
  u.value = [scale](const Eigen::Ref<const Vec>& x) { return scale * x.squaredNorm(); };
  u.grad = [scale](const Eigen::Ref<const Vec>& x) -> Vec { return 2 * scale * x; };
  u.hessian = [scale](const Eigen::Ref<const Vec>& x) -> Mat {
    return 2 * scale * Mat::Identity(x.size(), x.size());
  };
  return u;
}

ScalarField radial() {
  ScalarField u;
  u.name = "|x|";
  u.value = [](const Eigen::Ref<const Vec>& x) { return x.norm(); };
  u.grad = [](const Eigen::Ref<const Vec>& x) -> Vec {
    const double r = x.norm();
    return r > 0 ? Vec(x / r) : Vec(Vec::Zero(x.size()));
  };
  u.hessian = [](const Eigen::Ref<const Vec>& x) -> Mat {
    const double r = x.norm();
    const Eigen::Index n = x.size();
    if (!(r > 0)) return Mat::Zero(n, n);
    return (Mat::Identity(n, n) - x * x.transpose() / (r * r)) / r;
  };
  return u;
}

ScalarField ring_well(double scale) {
  ScalarField u;
  u.name = scale == 1.0 ? "(|x|^2-1)^2" : std::to_string(scale) + "*(|x|^2-1)^2";
  u.value = [scale](const Eigen::Ref<const Vec>& x) {
    const double s = x.squaredNorm() - 1;
    return scale * s * s;
  };
  u.grad = [scale](const Eigen::Ref<const Vec>& x) -> Vec {
    return 4 * scale * (x.squaredNorm() - 1) * x;
  };
  u.hessian = [scale](const Eigen::Ref<const Vec>& x) -> Mat {
    const Eigen::Index n = x.size();
    return 4 * scale * ((x.squaredNorm() - 1) * Mat::Identity(n, n) + 2 * x * x.transpose());
  };
  return u;
}

ScalarField squared_distance_to(const AnalyticAttractor& a) {
  ScalarField u;
  u.name = "dist^2(x," + a.description + ")";
  if (a.kind == AnalyticAttractor::Kind::points) {
    if (a.points.rows() == 0) throw ConfigError("squared_distance_to: empty point set");
    auto nearest = [pts = a.points](const Eigen::Ref<const Vec>& x) {
      Eigen::Index best = 0;
      double best_sq = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        const double d = squared_distance(pts.row(i).transpose(), x);
        if (d < best_sq) best_sq = d, best = i;
      }
      return Vec(pts.row(best).transpose());
    };
    u.value = [nearest](const Eigen::Ref<const Vec>& x) { return (x - nearest(x)).squaredNorm(); };
    u.grad = [nearest](const Eigen::Ref<const Vec>& x) -> Vec { return 2 * (x - nearest(x)); };
    u.hessian = [](const Eigen::Ref<const Vec>& x) -> Mat {
      return 2 * Mat::Identity(x.size(), x.size());
    };
    return u;
  }
  const Vec c = a.center;
  const double R = a.radius;
  u.value = [c, R](const Eigen::Ref<const Vec>& x) {
    const double d = (x - c).norm() - R;
    return d * d;
  };
  u.grad = [c, R](const Eigen::Ref<const Vec>& x) -> Vec {
    const Vec y = x - c;
    const double r = y.norm();
    if (!(r > 0)) return Vec::Zero(x.size());
    return 2 * (r - R) / r * y;
  };
  u.hessian = [c, R](const Eigen::Ref<const Vec>& x) -> Mat {
    const Vec y = x - c;
    const double r = y.norm();
    const Eigen::Index n = x.size();
    if (!(r > 0)) return Mat::Zero(n, n);
    const Mat p = y * y.transpose() / (r * r);
    return 2 * p + 2 * (r - R) / r * (Mat::Identity(n, n) - p);
  };
  return u;
}

ScalarField constant(double c) {
  ScalarField u;
  u.name = "const";
  u.value = [c](const Eigen::Ref<const Vec>&) { return c; };
  u.grad = [](const Eigen::Ref<const Vec>& x) -> Vec { return Vec::Zero(x.size()); };
  u.hessian = [](const Eigen::Ref<const Vec>& x) -> Mat { return Mat::Zero(x.size(), x.size()); };
  return u;
}

ScalarField log_norm() {
  ScalarField u;
  u.name = "log(1+|x|)";
  u.value = [](const Eigen::Ref<const Vec>& x) { return std::log1p(x.norm()); };
  u.grad = [](const Eigen::Ref<const Vec>& x) -> Vec {
    const double r = x.norm();
    return r > 0 ? Vec(x / (r * (1 + r))) : Vec(Vec::Zero(x.size()));
  };
  return u;
}

ScalarField from_function(std::string name, ScalarField::ValueFn f, double fd_step) {
  ScalarField u;
  u.name = std::move(name);
  u.value = std::move(f);
  u.fd_step = fd_step;
  return u;
}

ScalarField limit_cycle_glued() {
  ScalarField u = glue(ring_well(1.0), radial(), 1.3, 1.4);
  u.name = "glued[(|x|^2-1)^2 | |x|; 1.3..1.4]";
  return u;
}

}  // namespace fields

ScalarField glue(const ScalarField& inner, const ScalarField& outer, double r0, double r1) {
  if (!(r0 < r1)) throw ConfigError("glue: r0 must be below r1");
  const double width = r1 - r0;
  ScalarField u;
  u.name = "glue(" + inner.name + "," + outer.name + ")";
  u.fd_step = std::min(inner.fd_step, outer.fd_step);
  u.value = [=](const Eigen::Ref<const Vec>& x) {
    const double r = x.norm();
    if (r <= r0) return inner(x);
    if (r >= r1) return outer(x);
    const double h = smoothstep((r - r0) / width);
    return h * outer(x) + (1 - h) * inner(x);
  };
  u.grad = [=](const Eigen::Ref<const Vec>& x) -> Vec {
    const double r = x.norm();
    if (r <= r0) return inner.gradient(x);
    if (r >= r1) return outer.gradient(x);
    const double t = (r - r0) / width;
    const double h = smoothstep(t), dh = smoothstep_d1(t) / width;
    return h * outer.gradient(x) + (1 - h) * inner.gradient(x) + (outer(x) - inner(x)) * dh * x / r;
  };
  u.hessian = [=](const Eigen::Ref<const Vec>& x) -> Mat {
    const double r = x.norm();
    if (r <= r0) return inner.hess(x);
    if (r >= r1) return outer.hess(x);
    const Eigen::Index n = x.size();
    const double t = (r - r0) / width;
    const double h = smoothstep(t);
    const double dh = smoothstep_d1(t) / width;
    const double ddh = smoothstep_d2(t) / (width * width);
    const Vec e = x / r;
    const Vec dg = outer.gradient(x) - inner.gradient(x);
    const double du = outer(x) - inner(x);
    const Mat ee = e * e.transpose();
    return h * outer.hess(x) + (1 - h) * inner.hess(x) +
           dh * (e * dg.transpose() + dg * e.transpose()) +
           du * (ddh * ee + dh * (Mat::Identity(n, n) - ee) / r);
  };
  return u;
}

Region Region::make_box(Box b) {
  Region r;
  r.shape = Shape::box;
  r.box = std::move(b);
  return r;
}

Region Region::make_annulus(Vec center, double r_inner, double r_outer) {
  if (!(r_inner >= 0 && r_outer > r_inner)) throw ConfigError("annulus: need 0 <= r_inner < r_outer");
  Region r;
  r.shape = Shape::annulus;
  r.center = std::move(center);
  r.r_inner = r_inner;
  r.r_outer = r_outer;
  return r;
}

std::string Region::describe() const {
  std::ostringstream os;
  os.precision(6);
  if (shape == Shape::box) {
    os << "box";
    for (int d = 0; d < box.dim(); ++d) os << (d ? "x" : "") << "[" << box.lower(d) << "," << box.upper(d) << "]";
  } else {
    os << "annulus(r=[" << r_inner << "," << r_outer << "])";
  }
  if (exclude_cloud) os << " minus tube(" << exclude_radius << ")";
  if (level_field) {
    if (std::isfinite(min_level)) os << " with " << level_field->name << ">=" << min_level;
    if (std::isfinite(max_level)) os << " with " << level_field->name << "<=" << max_level;
  }
  return os.str();
}

namespace {

int region_dim(const Region& region) {
  return region.shape == Region::Shape::box ? region.box.dim() : static_cast<int>(region.center.size());
}

bool accepted(const Region& region, const Vec& x) {
  if (region.shape == Region::Shape::annulus && region.box.dim() == x.size() && !region.box.contains(x))
    return false;
  if (region.exclude_cloud && region.exclude_cloud->distance(x) < region.exclude_radius) return false;
  if (region.level_field) {
    const double v = (*region.level_field)(x);
    if (v < region.min_level || v > region.max_level) return false;
  }
  return true;
}

}  // namespace

Points sample_region(const Region& region, long n, std::uint64_t seed) {
  const int dim = region_dim(region);
  if (dim < 1) throw ConfigError("sample_region: region has no dimension");
  if (n < 1) throw ConfigError("sample_region: need at least one sample");
  Points out(n, dim);
  RandomStream rng(seed, 0x5a4d);
  const long max_attempts = 1000 * n + 100000;
  long attempts = 0, kept = 0;
  Vec x(dim);
  while (kept < n) {
    if (++attempts > max_attempts)
      throw NumericalError("sample_region: rejection sampling stalled in " + region.describe());
    if (region.shape == Region::Shape::box) {
      for (int d = 0; d < dim; ++d)
        x(d) = region.box.lower(d) + (region.box.upper(d) - region.box.lower(d)) * rng.uniform();
    } else {
      Vec dir(dim);
      double norm = 0;
      do {
        for (int d = 0; d < dim; ++d) dir(d) = rng.normal();
        norm = dir.norm();
      } while (!(norm > 1e-12));
      const double a = std::pow(region.r_inner, dim), b = std::pow(region.r_outer, dim);
      const double r = std::pow(a + (b - a) * rng.uniform(), 1.0 / dim);
      x = region.center + r * dir / norm;
    }
    if (!accepted(region, x)) continue;
    out.row(kept++) = x.transpose();
  }
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    default: return "inconclusive";
  }
}

double generator_apply(const SdeSystem& sys, const ScalarField& u, double eps,
                       const Eigen::Ref<const Vec>& x) {
  double out = eval_drift(sys, x).dot(u.gradient(x));
  if (eps != 0) out += 0.5 * eps * eps * eval_diffusion(sys, x).cwiseProduct(u.hess(x)).sum();
  return out;
}

namespace {

// Same field with derivatives taken a different way, used to size FD noise.
ScalarField probe_field(const ScalarField& u) {
  ScalarField p = u;
  if (u.grad) {
    p.grad = nullptr;
    p.hessian = nullptr;
  } else {
    p.fd_step *= 2;
  }
  return p;
}

Points with_extra(Points pts, const Points& extra) {
  if (extra.rows() == 0) return pts;
  Points all(pts.rows() + extra.rows(), pts.cols());
  all << pts, extra;
  return all;
}

template <typename Quantity>
void reduce_samples(const Points& pts, const VerifyOptions& opts, LyapunovReport& rep,
                    Quantity&& q, double& inf_value) {
  const auto n = static_cast<std::size_t>(pts.rows());
  std::vector<double> vals(n);
  parallel_for(n, opts.threads, [&](std::size_t i) { vals[i] = q(Vec(pts.row(Eigen::Index(i)).transpose())); });
  inf_value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    inf_value = std::min(inf_value, vals[i]);
    if (!(vals[i] > 0) && rep.violations.size() < opts.max_violations_kept)
      rep.violations.push_back(pts.row(Eigen::Index(i)).transpose());
  }
}

void settle_verdict(LyapunovReport& rep) {
  if (!rep.violations.empty() || !(rep.gamma_est > 0))
    rep.verdict = Verdict::fail;
  else if (rep.gamma_est < 10 * rep.fd_noise)
    rep.verdict = Verdict::inconclusive;
  else
    rep.verdict = Verdict::pass;
}

}  // namespace

LyapunovReport verify_strong_lyapunov(const SdeSystem& sys, const ScalarField& u,
                                      const Region& region, const VerifyOptions& opts) {
  LyapunovReport rep;
  rep.kind = "strong";
  rep.region = region.describe();
  const Points pts = with_extra(sample_region(region, opts.n_samples, opts.seed), opts.extra_points);
  rep.sample_count = pts.rows();

  const auto n = static_cast<std::size_t>(pts.rows());
  std::vector<double> ratio(n), gnorm(n), w(n), dist(n);
  parallel_for(n, opts.threads, [&](std::size_t i) {
    const Vec x = pts.row(Eigen::Index(i)).transpose();
    const Vec g = u.gradient(x);
    gnorm[i] = g.norm();
    if (gnorm[i] < 1e-10) return;
    ratio[i] = -eval_drift(sys, x).dot(g) / (gnorm[i] * gnorm[i]);
    w[i] = u(x);
    dist[i] = opts.attractor ? opts.attractor->distance(x) : 0.0;
  });
  for (std::size_t i = 0; i < n; ++i)
    if (gnorm[i] < 1e-10) {
      std::ostringstream os;
      os << "degenerate gradient |grad U| = " << gnorm[i] << " at (" << pts.row(Eigen::Index(i)) << ")";
      throw NumericalError(os.str());
    }

  rep.gamma_est = std::numeric_limits<double>::infinity();
  double kappa = 0;
  for (std::size_t i = 0; i < n; ++i) {
    rep.gamma_est = std::min(rep.gamma_est, ratio[i]);
    kappa = std::max(kappa, ratio[i]);
    if (!(ratio[i] > 0) && rep.violations.size() < opts.max_violations_kept)
      rep.violations.push_back(pts.row(Eigen::Index(i)).transpose());
  }
  rep.constants["kappa"] = kappa;
  if (opts.attractor) {
    double l1 = INFINITY, l2 = 0, k1 = INFINITY, k2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(dist[i] > 0)) continue;
      l1 = std::min(l1, w[i] / (dist[i] * dist[i]));
      l2 = std::max(l2, w[i] / (dist[i] * dist[i]));
      k1 = std::min(k1, gnorm[i] / dist[i]);
      k2 = std::max(k2, gnorm[i] / dist[i]);
    }
    rep.constants["L1"] = l1;
    rep.constants["L2"] = l2;
    rep.constants["K1"] = k1;
    rep.constants["K2"] = k2;
  }

  const ScalarField probe = probe_field(u);
  const std::size_t probes = std::min<std::size_t>(n, 256);
  for (std::size_t i = 0; i < probes; ++i) {
    const Vec x = pts.row(Eigen::Index(i)).transpose();
    const Vec g = probe.gradient(x);
    const double alt = -eval_drift(sys, x).dot(g) / g.squaredNorm();
    rep.fd_noise = std::max(rep.fd_noise, std::abs(alt - ratio[i]));
  }
  settle_verdict(rep);
  return rep;
}

namespace {

LyapunovReport fpe_check(const SdeSystem& sys, const ScalarField& u,
                         const std::vector<double>& eps_list, const Region& region,
                         const VerifyOptions& opts, std::string kind) {
  if (eps_list.empty()) throw ConfigError("verify-lyapunov: empty eps list");
  for (const double e : eps_list)
    if (!(e >= 0)) throw ConfigError("verify-lyapunov: eps must be nonnegative");
  LyapunovReport rep;
  rep.kind = std::move(kind);
  rep.region = region.describe();
  const Points pts = with_extra(sample_region(region, opts.n_samples, opts.seed), opts.extra_points);
  rep.sample_count = pts.rows();
  const ScalarField probe = probe_field(u);
  const bool weak = rep.kind == "weak";

  rep.gamma_est = std::numeric_limits<double>::infinity();
  for (const double eps : eps_list) {
    double inf_value = 0;
    reduce_samples(pts, opts, rep, [&](const Vec& x) {
      const double v = -generator_apply(sys, u, eps, x);
      // the weak form only requires L U <= 0; zero margin is admissible
      return weak && v == 0 ? std::numeric_limits<double>::min() : v;
    }, inf_value);
    rep.per_eps.emplace_back(eps, inf_value);
    rep.gamma_est = std::min(rep.gamma_est, inf_value);
    const std::size_t probes = std::min<std::size_t>(std::size_t(pts.rows()), 256);
    for (std::size_t i = 0; i < probes; ++i) {
      const Vec x = pts.row(Eigen::Index(i)).transpose();
      rep.fd_noise = std::max(rep.fd_noise, std::abs(generator_apply(sys, u, eps, x) -
                                                     generator_apply(sys, probe, eps, x)));
    }
  }
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& [eps, g] : rep.per_eps) lo = std::min(lo, g), hi = std::max(hi, g);
  rep.uniform = lo > 0 && (hi - lo) <= 0.1 * hi;
  settle_verdict(rep);
  if (weak && rep.violations.empty() && rep.verdict == Verdict::inconclusive) rep.verdict = Verdict::pass;
  return rep;
}

}  // namespace

LyapunovReport verify_fpe_lyapunov(const SdeSystem& sys, const ScalarField& u,
                                   const std::vector<double>& eps_list, const Region& region,
                                   const VerifyOptions& opts) {
  return fpe_check(sys, u, eps_list, region, opts, "fpe_uniform");
}

LyapunovReport verify_weak_lyapunov(const SdeSystem& sys, const ScalarField& u, double eps,
                                    const Region& region, const VerifyOptions& opts) {
  return fpe_check(sys, u, {eps}, region, opts, "weak");
}

namespace {

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  const double n = double(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) mx += std::log(x[i]), my += std::log(y[i]);
  mx /= n, my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  return sxy / sxx;
}

}  // namespace

LyapunovReport verify_class_bstar(const ScalarField& u, const Region& outer, double p,
                                  const VerifyOptions& opts) {
  if (outer.shape != Region::Shape::annulus) throw ConfigError("class-B* check needs an annulus region");
  if (!(p > 0)) throw ConfigError("class-B* exponent p must be positive");
  LyapunovReport rep;
  rep.kind = "class_bstar";
  rep.region = outer.describe();
  const Points pts = sample_region(outer, opts.n_samples, opts.seed);
  rep.sample_count = pts.rows();

  const auto n = static_cast<std::size_t>(pts.rows());
  std::vector<double> radius(n), gnorm(n), ratio(n);
  parallel_for(n, opts.threads, [&](std::size_t i) {
    const Vec x = pts.row(Eigen::Index(i)).transpose();
    radius[i] = (x - outer.center).norm();
    gnorm[i] = u.gradient(x).norm();
    ratio[i] = u(x) / std::pow(x.norm(), p);
  });

  // Geometric radial shells; the trend of the per-shell extremes stands in for the limit.
  constexpr int kShells = 8;
  const double lr0 = std::log(std::max(outer.r_inner, 1e-12)), lr1 = std::log(outer.r_outer);
  std::vector<double> sup_grad(kShells, 0), inf_ratio(kShells, INFINITY);
  std::vector<long> counts(kShells, 0);
  auto shell_of = [&](double r) {
    const int s = int((std::log(std::max(r, 1e-12)) - lr0) / (lr1 - lr0) * kShells);
    return std::clamp(s, 0, kShells - 1);
  };
  double sup_all = 0, inf_all = INFINITY;
  bool finite = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(gnorm[i]) || !std::isfinite(ratio[i])) finite = false;
    const int s = shell_of(radius[i]);
    ++counts[std::size_t(s)];
    sup_grad[std::size_t(s)] = std::max(sup_grad[std::size_t(s)], gnorm[i]);
    inf_ratio[std::size_t(s)] = std::min(inf_ratio[std::size_t(s)], ratio[i]);
    sup_all = std::max(sup_all, gnorm[i]);
    inf_all = std::min(inf_all, ratio[i]);
  }
  std::vector<double> mids, g_series, r_series;
  for (int s = 0; s < kShells; ++s) {
    if (counts[std::size_t(s)] == 0) continue;
    mids.push_back(std::exp(lr0 + (s + 0.5) * (lr1 - lr0) / kShells));
    g_series.push_back(std::max(sup_grad[std::size_t(s)], 1e-300));
    r_series.push_back(std::max(inf_ratio[std::size_t(s)], 1e-300));
  }
  if (mids.size() < 3) throw NumericalError("class-B* check: too few populated radial shells");
  const double grad_slope = loglog_slope(mids, g_series);
  const double ratio_slope = loglog_slope(mids, r_series);
  rep.constants["sup_grad"] = sup_all;
  rep.constants["inf_ratio"] = inf_all;
  rep.constants["grad_trend"] = grad_slope;
  rep.constants["ratio_trend"] = ratio_slope;
  rep.constants["p"] = p;

  const bool grad_ok = finite && grad_slope <= 0.1;
  const bool ratio_ok = finite && inf_all > 0 && ratio_slope >= -0.1;
  if (!grad_ok || !ratio_ok) {
    const double g_ref = g_series.front(), r_ref = r_series.front();
    std::size_t worst = 0;
    double worst_score = -INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
      const double score = !grad_ok ? gnorm[i] / g_ref : r_ref / std::max(ratio[i], 1e-300);
      if (score > worst_score) worst_score = score, worst = i;
      if (score > 2 && rep.violations.size() < opts.max_violations_kept)
        rep.violations.push_back(pts.row(Eigen::Index(i)).transpose());
    }
    if (rep.violations.empty()) rep.violations.push_back(pts.row(Eigen::Index(worst)).transpose());
    rep.gamma_est = 0;
    rep.verdict = Verdict::fail;
  } else {
    rep.gamma_est = inf_all;
    rep.verdict = Verdict::pass;
  }
  return rep;
}

namespace {

// Pulls x onto {U = rho} along the gradient.
Vec project_to_level(const ScalarField& u, double rho, Vec x) {
  for (int it = 0; it < 8; ++it) {
    const double r = u(x) - rho;
    const Vec g = u.gradient(x);
    const double g2 = g.squaredNorm();
    if (!(g2 > 0)) break;
    x -= r * g / g2;
    if (std::abs(r) < 1e-14 * std::max(1.0, std::abs(rho))) break;
  }
  return x;
}

}  // namespace

LevelSetGeometry level_set(const ScalarField& u, double rho, const Box& box, int resolution) {
  if (resolution < 4) throw ConfigError("level_set: resolution must be at least 4");
  LevelSetGeometry geo;
  geo.rho = rho;
  std::vector<Vec> samples;
  const int dim = box.dim();

  if (dim == 1) {
    const double h = (box.upper(0) - box.lower(0)) / resolution;
    Vec a(1), b(1);
    for (int i = 0; i < resolution; ++i) {
      a(0) = box.lower(0) + i * h;
      b(0) = a(0) + h;
      const double fa = u(a) - rho, fb = u(b) - rho;
      if ((fa < 0) == (fb < 0)) continue;
      Vec x(1);
      x(0) = a(0) + h * fa / (fa - fb);
      samples.push_back(project_to_level(u, rho, x));
      geo.weights.push_back(1.0);
    }
  } else if (dim == 2) {
    const int m = resolution;
    const double hx = (box.upper(0) - box.lower(0)) / m, hy = (box.upper(1) - box.lower(1)) / m;
    auto node = [&](int i, int j) {
      Vec p(2);
      p << box.lower(0) + i * hx, box.lower(1) + j * hy;
      return p;
    };
    Mat f(m + 1, m + 1);
    for (int j = 0; j <= m; ++j)
      for (int i = 0; i <= m; ++i) f(i, j) = u(node(i, j)) - rho;
    auto crossing = [&](int i0, int j0, int i1, int j1) {
      const double a = f(i0, j0), b = f(i1, j1);
      return Vec(node(i0, j0) + (node(i1, j1) - node(i0, j0)) * (a / (a - b)));
    };
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) {
        // corners counter-clockwise: (i,j) (i+1,j) (i+1,j+1) (i,j+1); edges follow
        const int ci[4] = {i, i + 1, i + 1, i}, cj[4] = {j, j, j + 1, j + 1};
        std::vector<Vec> pts;
        std::vector<int> edges;
        for (int e = 0; e < 4; ++e) {
          const int a = e, b = (e + 1) % 4;
          if ((f(ci[a], cj[a]) < 0) != (f(ci[b], cj[b]) < 0)) {
            pts.push_back(crossing(ci[a], cj[a], ci[b], cj[b]));
            edges.push_back(e);
          }
        }
        std::vector<std::pair<Vec, Vec>> segs;
        if (pts.size() == 2) {
          segs.emplace_back(pts[0], pts[1]);
        } else if (pts.size() == 4) {
          const Vec c = 0.5 * (node(i, j) + node(i + 1, j + 1));
          const bool center_inside = u(c) - rho < 0;
          const bool corner0_inside = f(i, j) < 0;
          if (center_inside == corner0_inside) {
            segs.emplace_back(pts[0], pts[1]);
            segs.emplace_back(pts[2], pts[3]);
          } else {
            segs.emplace_back(pts[3], pts[0]);
            segs.emplace_back(pts[1], pts[2]);
          }
        }
        for (auto& [p, q] : segs) {
          const Vec a = project_to_level(u, rho, p), b = project_to_level(u, rho, q);
          samples.push_back(project_to_level(u, rho, 0.5 * (a + b)));
          geo.weights.push_back((b - a).norm());
        }
      }
  } else {
    throw ConfigError("level_set: only 1-D and 2-D boxes are supported");
  }

  geo.boundary_samples.resize(Eigen::Index(samples.size()), dim);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Vec& p = samples[k];
    geo.boundary_samples.row(Eigen::Index(k)) = p.transpose();
    geo.gradients.push_back(u.gradient(p));
    if (!(geo.gradients.back().norm() > 1e-12))
      throw NumericalError("level_set: vanishing gradient on the level set");
    geo.max_level_error = std::max(geo.max_level_error, std::abs(u(p) - rho));
  }
  return geo;
}

Probability sublevel_mass(const Points& samples, const ScalarField& u, double rho) {
  const auto n = samples.rows();
  if (n == 0) throw ConfigError("sublevel_mass: no samples");
  long inside = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (u(samples.row(i).transpose()) < rho) ++inside;
  Probability p;
  p.value = double(inside) / double(n);
  p.stderr_ = std::sqrt(p.value * (1 - p.value) / double(n));
  return p;
}

Vec sublevel_cell_fractions(const Grid& grid, const ScalarField& u, double rho, int subsamples) {
  Vec frac(grid.size());
  const int dim = grid.dim();
  const double hx = grid.h(0), hy = dim == 2 ? grid.h(1) : 0.0;
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const Vec c = grid.center(k);
    int below = 0, total = 0;
    Vec p = c;
    for (int sx = -1; sx <= 1; ++sx)
      for (int sy = (dim == 2 ? -1 : 0); sy <= (dim == 2 ? 1 : 0); ++sy) {
        p(0) = c(0) + 0.5 * sx * hx;
        if (dim == 2) p(1) = c(1) + 0.5 * sy * hy;
        below += u(p) < rho;
        ++total;
      }
    if (below == total) {
      frac(k) = 1;
      continue;
    }
    if (below == 0) {
      frac(k) = 0;
      continue;
    }
    int in = 0, all = 0;
    for (int a = 0; a < subsamples; ++a)
      for (int b = 0; b < (dim == 2 ? subsamples : 1); ++b) {
        p(0) = c(0) + ((a + 0.5) / subsamples - 0.5) * hx;
        if (dim == 2) p(1) = c(1) + ((b + 0.5) / subsamples - 0.5) * hy;
        in += u(p) < rho;
        ++all;
      }
    frac(k) = double(in) / double(all);
  }
  return frac;
}

double sublevel_mass(const DensityField& density, const ScalarField& u, double rho) {
  const Vec frac = sublevel_cell_fractions(density.grid, u, rho);
  return frac.dot(density.u) * density.grid.cell_volume();
}

}  // namespace sal
