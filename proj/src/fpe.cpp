#include "sal/fpe.hpp"

#include "sal/io.hpp"
#include "sal/parallel.hpp"

#include <Eigen/SparseLU>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace sal {

double bernoulli(double z) {
  if (std::abs(z) < 1e-8) return 1.0 - 0.5 * z;
  return z / std::expm1(z);
}

namespace {

using Triplet = Eigen::Triplet<double>;

struct FaceFlux {
  // J = alpha u_L - beta u_R, plus cross-diffusion terms sum c_m u_m
  double alpha = 0, beta = 0, log_ratio = 0;
  std::vector<std::pair<Eigen::Index, double>> cross;
};

}  // namespace

FpeOperator assemble(const SdeSystem& sys, double eps, const Grid& grid, unsigned threads) {
  if (sys.n != grid.dim()) throw ConfigError("fpe: grid dimension does not match the system");
  if (!(eps > 0)) throw ConfigError("fpe: eps must be positive");
  const Eigen::Index cells = grid.size();
  const int dim = grid.dim();
  const double diff = 0.5 * eps * eps;

  std::vector<Mat> a(static_cast<std::size_t>(cells));
  parallel_for(std::size_t(cells), threads, [&](std::size_t k) {
    a[k] = eval_diffusion(sys, grid.center(Eigen::Index(k)));
    if (!(a[k].diagonal().minCoeff() > 0))
      throw ConfigError("fpe: diffusion is not positive definite on the grid");
  });
  bool has_cross = false;
  if (dim == 2)
    for (const auto& m : a) has_cross = has_cross || m(0, 1) != 0.0;

  const int counts[2] = {grid.nx(), grid.ny()};
  std::vector<std::vector<Triplet>> rows(static_cast<std::size_t>(cells));
  std::vector<double> log_ratio(dim == 1 ? std::size_t(grid.nx() - 1) : 0);

  parallel_for(std::size_t(cells), threads, [&](std::size_t kk) {
    const auto k = Eigen::Index(kk);
    const int ix = int(k % grid.nx()), iy = int(k / grid.nx());
    const int idx[2] = {ix, iy};
    auto& out = rows[kk];
    for (int axis = 0; axis < dim; ++axis) {
      if (idx[axis] + 1 >= counts[axis]) continue;
      const Eigen::Index r = axis == 0 ? grid.index(ix + 1, iy) : grid.index(ix, iy + 1);
      const double h = grid.h(axis);
      Vec face = grid.center(k);
      face(axis) += 0.5 * h;
      const double a_l = a[kk](axis, axis), a_r = a[std::size_t(r)](axis, axis);
      const double a_face = 0.5 * (a_l + a_r);
      const double v = eval_drift(sys, face)(axis) / a_face;
      const double pe = v * h / diff;
      const double alpha = diff / h * bernoulli(-pe) * a_l;
      const double beta = diff / h * bernoulli(pe) * a_r;
      if (dim == 1) log_ratio[kk] = pe + std::log(a_l / a_r);
      // row k loses J/h, row r gains J/h
      out.emplace_back(k, k, -alpha / h);
      out.emplace_back(k, r, beta / h);
      out.emplace_back(r, k, alpha / h);
      out.emplace_back(r, r, -beta / h);
      if (has_cross) {
        const int other = 1 - axis;
        const int lo = std::max(idx[other] - 1, 0), hi = std::min(idx[other] + 1, counts[other] - 1);
        const double denom = 2.0 * (hi - lo) * grid.h(other);
        for (const int side : {0, 1}) {
          for (const int j : {lo, hi}) {
            int c[2] = {ix, iy};
            c[axis] += side;
            c[other] = j;
            const Eigen::Index m = grid.index(c[0], c[1]);
            const double coef = -diff * a[std::size_t(m)](0, 1) * (j == hi ? 1.0 : -1.0) / denom;
            out.emplace_back(k, m, -coef / h);
            out.emplace_back(r, m, coef / h);
          }
        }
      }
    }
  });

  std::vector<Triplet> all;
  for (const auto& r : rows) all.insert(all.end(), r.begin(), r.end());
  FpeOperator op;
  op.grid = grid;
  op.eps = eps;
  op.matrix.resize(cells, cells);
  op.matrix.setFromTriplets(all.begin(), all.end());
  op.matrix.makeCompressed();
  op.face_log_ratio = std::move(log_ratio);
  return op;
}

namespace {

double relative_residual(const SparseMat& m, const Vec& u) {
  const double scale = m.diagonal().cwiseAbs().maxCoeff() * u.cwiseAbs().maxCoeff();
  return scale > 0 ? (m * u).cwiseAbs().maxCoeff() / scale : 0.0;
}

Vec bordered_solve(const SparseMat& m, const Grid& grid, bool& ok) {
  const Eigen::Index n = m.rows();
  const Eigen::Index pivot = n / 2 + grid.nx() / 2;
  std::vector<Triplet> trips;
  trips.reserve(std::size_t(m.nonZeros() + n));
  for (Eigen::Index c = 0; c < m.outerSize(); ++c)
    for (SparseMat::InnerIterator it(m, c); it; ++it)
      if (it.row() != pivot) trips.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index c = 0; c < n; ++c) trips.emplace_back(pivot, c, grid.cell_volume());
  SparseMat b(n, n);
  b.setFromTriplets(trips.begin(), trips.end());
  b.makeCompressed();
  Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(b);
  ok = lu.info() == Eigen::Success;
  if (!ok) return {};
  Vec rhs = Vec::Zero(n);
  rhs(pivot) = 1.0;
  Vec u = lu.solve(rhs);
  ok = lu.info() == Eigen::Success && u.allFinite();
  return u;
}

Vec inverse_iteration(const SparseMat& m, bool& ok) {
  const Eigen::Index n = m.rows();
  const double shift = 1e-8 * m.diagonal().cwiseAbs().maxCoeff();
  SparseMat s = m;
  for (Eigen::Index i = 0; i < n; ++i) s.coeffRef(i, i) -= shift;
  Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(s);
  ok = lu.info() == Eigen::Success;
  if (!ok) return {};
  Vec x = Vec::Ones(n);
  for (int it = 0; it < 20; ++it) {
    x = lu.solve(x);
    const double norm = x.cwiseAbs().maxCoeff();
    if (!(norm > 0) || !x.allFinite()) {
      ok = false;
      return {};
    }
    x /= norm;
    if (x.sum() < 0) x = -x;
    if (relative_residual(m, x) < 1e-12) break;
  }
  return x;
}

}  // namespace

// Grassmann-Taksar-Heyman state reduction on the band of Q = M^T, the
// generator whose stationary row vector is the density. Subtraction free, so
// the result keeps full relative accuracy when the two-well structure makes
// the kernel numerically two dimensional. Requires nonnegative off-diagonals.
Vec gth_solve(const SparseMat& m, bool& ok) {
  ok = false;
  const Eigen::Index n = m.rows();
  Eigen::Index w = 0;
  for (Eigen::Index c = 0; c < m.outerSize(); ++c)
    for (SparseMat::InnerIterator it(m, c); it; ++it) {
      if (it.row() == it.col() || it.value() == 0) continue;
      if (it.value() < 0) return {};
      w = std::max(w, std::abs(it.row() - it.col()));
    }
  const Eigen::Index span = 2 * w + 1;
  std::vector<double> q(std::size_t(n * span), 0.0);
  auto at = [&](Eigen::Index i, Eigen::Index j) -> double& { return q[std::size_t(i * span + (j - i + w))]; };
  for (Eigen::Index c = 0; c < m.outerSize(); ++c)
    for (SparseMat::InnerIterator it(m, c); it; ++it)
      if (it.row() != it.col()) at(it.col(), it.row()) = it.value();

  for (Eigen::Index k = n - 1; k > 0; --k) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, k - w);
    double out = 0;
    for (Eigen::Index j = lo; j < k; ++j) out += at(k, j);
    if (!(out > 0)) return {};
    const double* qk = &at(k, lo);
    for (Eigen::Index i = lo; i < k; ++i) {
      double& a = at(i, k);
      if (a == 0) continue;
      a /= out;
      double* qi = &at(i, lo);
      const double ai = a;
      for (Eigen::Index j = 0; j < k - lo; ++j) qi[j] += ai * qk[j];
      at(i, i) = 0;  // diagonal is implicit
    }
  }
  Vec pi(n);
  pi(0) = 1;
  for (Eigen::Index k = 1; k < n; ++k) {
    double v = 0;
    for (Eigen::Index i = std::max<Eigen::Index>(0, k - w); i < k; ++i) v += pi(i) * at(i, k);
    pi(k) = v;
    if (v > 1e200) pi.head(k + 1) *= 1e-200;
  }
  ok = pi.allFinite() && pi.maxCoeff() > 0;
  return pi;
}

DensityField solve_stationary(const FpeOperator& op) {
  DensityField d;
  d.grid = op.grid;
  d.eps = op.eps;
  const Eigen::Index n = op.grid.size();
  Vec u(n);

  if (op.grid.dim() == 1) {
    Vec logu(n);
    logu(0) = 0;
    for (Eigen::Index i = 0; i + 1 < n; ++i) logu(i + 1) = logu(i) + op.face_log_ratio[std::size_t(i)];
    const double top = logu.maxCoeff();
    u = (logu.array() - top).exp().matrix();
  } else {
    bool ok = false;
    u = bordered_solve(op.matrix, op.grid, ok);
    if (!ok || relative_residual(op.matrix, u) > 1e-8) u = inverse_iteration(op.matrix, ok);
    if (!ok || u.minCoeff() < -1e-10 * u.cwiseAbs().maxCoeff()) {
      bool gth_ok = false;
      Vec v = gth_solve(op.matrix, gth_ok);
      if (gth_ok) u = std::move(v), ok = true;
    }
    if (!ok) throw NumericalError("fpe: stationary solve did not converge");
  }

  const double top = u.maxCoeff();
  if (!(top > 0)) throw NumericalError("fpe: kernel vector has no positive entries");
  if (u.minCoeff() < -1e-10 * top) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "fpe: scheme failure, negative density (min/max = %.3g)", u.minCoeff() / top);
    throw NumericalError(buf);
  }
  u = u.cwiseMax(0.0);
  u /= u.sum() * op.grid.cell_volume();
  d.u = std::move(u);
  d.residual = relative_residual(op.matrix, d.u);
  return d;
}

DensityField solve_fpe(const SdeSystem& sys, double eps, const Grid& grid, unsigned threads) {
  return solve_stationary(assemble(sys, eps, grid, threads));
}

Vec quasi_potential(const DensityField& density) {
  Vec v(density.u.size());
  const double e2 = density.eps * density.eps;
  for (Eigen::Index k = 0; k < v.size(); ++k)
    v(k) = density.u(k) > 0 ? -e2 * std::log(density.u(k)) : std::numeric_limits<double>::quiet_NaN();
  double lo = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < v.size(); ++k)
    if (std::isfinite(v(k))) lo = std::min(lo, v(k));
  if (std::isfinite(lo)) v.array() -= lo;
  return v;
}

double superlevel_mass(const DensityField& density, const ScalarField& u, double rho) {
  const int sub = density.grid.dim() == 1 ? 256 : 32;
  const Vec frac = sublevel_cell_fractions(density.grid, u, rho, sub);
  return (Vec::Ones(frac.size()) - frac).dot(density.u) * density.grid.cell_volume();
}

namespace {

int default_boundary_resolution(const Grid& g) { return 2 * std::max(g.nx(), g.dim() == 2 ? g.ny() : 1); }

}  // namespace

IdentityCheck check_integral_identity(const DensityField& density, const SdeSystem& sys,
                                      const ScalarField& F, const ScalarField& level, double rho,
                                      int boundary_resolution) {
  const Grid& g = density.grid;
  const double eps = density.eps;
  const int dim = g.dim();
  const int sub = dim == 1 ? 256 : 16;
  IdentityCheck out;

  // Interior integral; cut cells average L F over their inside sub-points.
  const Vec frac = sublevel_cell_fractions(g, level, rho, 2);
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    if (frac(k) == 0 && density.u(k) == 0) continue;
    const Vec c = g.center(k);
    const double hx = g.h(0), hy = dim == 2 ? g.h(1) : 0.0;
    if (frac(k) == 1) {
      out.lhs += generator_apply(sys, F, eps, c) * density.u(k) * g.cell_volume();
      continue;
    }
    if (frac(k) == 0 && level(c) >= rho) {
      // corners and center all outside; confirm with a coarse look before skipping
      bool any = false;
      Vec p = c;
      for (int a = 0; a < 4 && !any; ++a)
        for (int b = 0; b < (dim == 2 ? 4 : 1) && !any; ++b) {
          p(0) = c(0) + ((a + 0.5) / 4 - 0.5) * hx;
          if (dim == 2) p(1) = c(1) + ((b + 0.5) / 4 - 0.5) * hy;
          any = level(p) < rho;
        }
      if (!any) continue;
    }
    double acc = 0;
    int total = 0;
    Vec p = c;
    for (int a = 0; a < sub; ++a)
      for (int b = 0; b < (dim == 2 ? sub : 1); ++b) {
        p(0) = c(0) + ((a + 0.5) / sub - 0.5) * hx;
        if (dim == 2) p(1) = c(1) + ((b + 0.5) / sub - 0.5) * hy;
        ++total;
        if (level(p) < rho) acc += generator_apply(sys, F, eps, p);
      }
    out.lhs += acc / total * density.u(k) * g.cell_volume();
  }

  const int res = boundary_resolution > 0 ? boundary_resolution : default_boundary_resolution(g);
  const LevelSetGeometry geo = level_set(level, rho, g.box(), res);
  out.boundary_samples = geo.boundary_samples.rows();
  for (Eigen::Index i = 0; i < geo.boundary_samples.rows(); ++i) {
    const Vec p = geo.boundary_samples.row(i).transpose();
    const Vec nu = geo.gradients[std::size_t(i)].normalized();
    const double flux = 0.5 * eps * eps * (eval_diffusion(sys, p) * F.gradient(p)).dot(nu);
    out.rhs += flux * density.interpolate(p) * geo.weights[std::size_t(i)];
  }
  out.residual = std::abs(out.lhs - out.rhs) /
                 std::max({std::abs(out.lhs), std::abs(out.rhs), eps * eps});
  return out;
}

CoareaCheck coarea_check(const DensityField& density, const ScalarField& u,
                         const std::vector<double>& rho_grid, double drho, int boundary_resolution) {
  const Grid& g = density.grid;
  const int sub = g.dim() == 1 ? 256 : 32;
  const int res = boundary_resolution > 0 ? boundary_resolution : default_boundary_resolution(g);
  auto mass = [&](double rho) {
    return sublevel_cell_fractions(g, u, rho, sub).dot(density.u) * g.cell_volume();
  };
  CoareaCheck out;
  for (const double rho : rho_grid) {
    const LevelSetGeometry geo = level_set(u, rho, g.box(), res);
    const long min_samples = g.dim() == 1 ? 1 : 8;
    if (geo.boundary_samples.rows() < min_samples)
      throw NumericalError("coarea_check: level " + format_double(rho) + " is below the grid resolution");
    CoareaLevel lv;
    lv.rho = rho;
    for (Eigen::Index i = 0; i < geo.boundary_samples.rows(); ++i) {
      const Vec p = geo.boundary_samples.row(i).transpose();
      lv.rhs += density.interpolate(p) / geo.gradients[std::size_t(i)].norm() * geo.weights[std::size_t(i)];
    }
    // Richardson-extrapolated central difference in rho
    const double d = drho > 0 ? drho : 0.1 * std::abs(rho);
    const double d1 = (mass(rho + d) - mass(rho - d)) / (2 * d);
    const double d2 = (mass(rho + 0.5 * d) - mass(rho - 0.5 * d)) / d;
    lv.lhs = (4 * d2 - d1) / 3;
    lv.rel_error = std::abs(lv.lhs - lv.rhs) / std::max(std::abs(lv.rhs), 1e-300);
    out.max_rel_error = std::max(out.max_rel_error, lv.rel_error);
    out.levels.push_back(lv);
  }
  return out;
}

void write_density_csv(std::ostream& os, const DensityField& density, const Vec& values) {
  const Grid& g = density.grid;
  os << (g.dim() == 1 ? "x,u\n" : "x,y,u\n");
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const Vec c = g.center(k);
    for (int d = 0; d < g.dim(); ++d) os << format_double(c(d)) << ',';
    os << format_double(values(k)) << '\n';
  }
}

std::string density_header_json(const DensityField& density, const std::string& label) {
  const Grid& g = density.grid;
  nlohmann::ordered_json j;
  j["model"] = label;
  j["eps"] = density.eps;
  j["grid"]["lower"] = std::vector<double>(g.box().lower.data(), g.box().lower.data() + g.dim());
  j["grid"]["upper"] = std::vector<double>(g.box().upper.data(), g.box().upper.data() + g.dim());
  j["grid"]["cells"] = g.dim() == 1 ? std::vector<int>{g.nx()} : std::vector<int>{g.nx(), g.ny()};
  j["residual"] = density.residual;
  j["mass"] = density.mass();
  return j.dump(2);
}

}  // namespace sal
