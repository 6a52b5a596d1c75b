#include "sal/systems.hpp"

#include "sal/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sal {
namespace {

std::string fmt_param(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

Mat row_major(const std::vector<double>& values, int rows, int cols) {
  Mat out(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out(i, j) = values[static_cast<std::size_t>(i * cols + j)];
  return out;
}

int ou_dimension(const ModelSpec& spec) {
  if (!spec.drift_matrix.empty()) {
    const auto side = static_cast<int>(std::lround(std::sqrt(double(spec.drift_matrix.size()))));
    if (static_cast<std::size_t>(side * side) != spec.drift_matrix.size())
      throw ConfigError("linear_ou: drift_matrix must have n*n entries");
    return side;
  }
  return static_cast<int>(spec.param("n", 2));
}

// Stationary covariance S of dX = A X dt + dW: A S + S A^T + Q = 0.
Mat stationary_covariance(const Mat& a, const Mat& q) {
  const int n = static_cast<int>(a.rows());
  const Mat eye = Mat::Identity(n, n);
  // vec is column-major: vec(A S) = (I kron A) vec S, vec(S A^T) = (A kron I) vec S.
  Mat sys = Mat::Zero(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      sys.block(j * n, j * n, n, n).noalias() += (i == j ? a : Mat::Zero(n, n));
      sys.block(i * n, j * n, n, n) += a(i, j) * eye;
    }
  const Eigen::Map<const Vec> qv(q.data(), n * n);
  const Vec s = sys.fullPivLu().solve(-qv);
  return Eigen::Map<const Mat>(s.data(), n, n);
}

void attach_noise(SdeSystem& sys, const ModelSpec& spec) {
  if (spec.noise_matrix.empty()) {
    sys.m = sys.n;
    sys.constant_noise = Mat::Identity(sys.n, sys.n);
  } else {
    const int m = spec.noise_cols > 0 ? spec.noise_cols
                                      : static_cast<int>(spec.noise_matrix.size()) / sys.n;
    if (m < sys.n || static_cast<std::size_t>(m * sys.n) != spec.noise_matrix.size())
      throw ConfigError("noise_matrix must be n x m with m >= n");
    sys.m = m;
    sys.constant_noise = row_major(spec.noise_matrix, sys.n, m);
    const Mat a = *sys.constant_noise * sys.constant_noise->transpose();
    if (Eigen::SelfAdjointEigenSolver<Mat>(a).eigenvalues().minCoeff() <= 0)
      throw ConfigError("noise_matrix: sigma sigma^T must be positive definite");
  }
  const Mat sigma = *sys.constant_noise;
  sys.noise = [sigma](const Eigen::Ref<const Vec>&, Eigen::Ref<Mat> out) { out = sigma; };
}

std::string noise_label(const ModelSpec& spec) {
  return spec.noise_matrix.empty() ? "sigma=I" : "sigma=custom";
}

void apply_box_override(SdeSystem& sys, const ModelSpec& spec) {
  if (spec.params.count("box_lo") || spec.params.count("box_hi")) {
    const double lo = spec.param("box_lo", sys.state_box.lower.minCoeff());
    const double hi = spec.param("box_hi", sys.state_box.upper.maxCoeff());
    if (!(lo < hi)) throw ConfigError("box_lo must be below box_hi");
    sys.state_box = Box::cube(sys.n, lo, hi);
  }
}

}  // namespace

bool is_hurwitz(const Mat& a) {
  return Eigen::EigenSolver<Mat>(a, false).eigenvalues().real().maxCoeff() < 0;
}

void validate(const ModelSpec& spec) {
  if (spec.kind == "limit_cycle") {
    return;
  }
  if (spec.kind == "toggle_switch") {
    if (!(spec.param("b", 0.25) > 0)) throw ConfigError("toggle_switch: b must be positive");
    return;
  }
  if (spec.kind == "gradient_1d") {
    const double quad = spec.param("quadratic", 1.0);
    const double quart = spec.param("quartic", 0.0);
    if (quart < 0 || (quart == 0 && quad <= 0))
      throw ConfigError("gradient_1d: potential must be confining (quartic > 0, or quadratic > 0)");
    return;
  }
  if (spec.kind == "linear_ou") {
    const int n = ou_dimension(spec);
    if (n < 1) throw ConfigError("linear_ou: n must be >= 1");
    if (!spec.drift_matrix.empty() && !is_hurwitz(row_major(spec.drift_matrix, n, n)))
      throw ConfigError("linear_ou: drift matrix must be Hurwitz");
    return;
  }
  throw ConfigError("unknown model kind '" + spec.kind + "'");
}

SdeSystem make_builtin(const ModelSpec& spec) {
  validate(spec);
  SdeSystem sys;
  if (spec.kind == "limit_cycle") {
    sys.n = 2;
    sys.drift = [](const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) {
      out = limit_cycle_drift(x);
    };
    sys.state_box = Box::cube(2, -3.0, 3.0);
    sys.label = "limit_cycle(" + noise_label(spec) + ")";
    AnalyticAttractor cycle;
    cycle.kind = AnalyticAttractor::Kind::circle;
    cycle.center = Vec::Zero(2);
    cycle.radius = 1.0;
    cycle.description = "unit circle";
    sys.attractor = cycle;
    sys.other_equilibria = Points::Zero(1, 2);
  } else if (spec.kind == "toggle_switch") {
    const double b = spec.param("b", 0.25);
    sys.n = 2;
    sys.drift = [b](const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) {
      out = toggle_switch_drift(x, b);
    };
    sys.state_box = Box::cube(2, 0.0, 2.0);
    sys.label = "toggle_switch(b=" + fmt_param(b) + ";" + noise_label(spec) + ")";
  } else if (spec.kind == "gradient_1d") {
    const double quad = spec.param("quadratic", 1.0);
    const double quart = spec.param("quartic", 0.0);
    sys.n = 1;
    // U(x) = quad x^2/2 + quart x^4/4
    sys.drift = [quad, quart](const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) {
      out(0) = -(quad * x(0) + quart * x(0) * x(0) * x(0));
    };
    sys.state_box = Box::cube(1, -3.0, 3.0);
    sys.label = "gradient_1d(quadratic=" + fmt_param(quad) + ";quartic=" + fmt_param(quart) + ")";
    AnalyticAttractor eq;
    eq.points = Points::Zero(1, 1);
    eq.description = "origin";
    if (quad < 0) {
      const double w = std::sqrt(-quad / quart);
      eq.points.resize(2, 1);
      eq.points << -w, w;
      eq.description = "double-well minima";
      sys.other_equilibria = Points::Zero(1, 1);
    }
    sys.attractor = eq;
  } else {
    const int n = ou_dimension(spec);
    const Mat a = spec.drift_matrix.empty() ? Mat(-Mat::Identity(n, n))
                                            : row_major(spec.drift_matrix, n, n);
    sys.n = n;
    sys.drift = [a](const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) { out.noalias() = a * x; };
    sys.label = "linear_ou(n=" + std::to_string(n) +
                (spec.drift_matrix.empty() ? ";A=-I" : ";A=custom") + ";" + noise_label(spec) + ")";
    AnalyticAttractor eq;
    eq.points = Points::Zero(1, n);
    eq.description = "origin";
    sys.attractor = eq;
  }
  attach_noise(sys, spec);

  if (spec.kind == "linear_ou") {
    const Mat a = spec.drift_matrix.empty() ? Mat(-Mat::Identity(sys.n, sys.n))
                                            : row_major(spec.drift_matrix, sys.n, sys.n);
    const Mat q = *sys.constant_noise * sys.constant_noise->transpose();
    const Mat cov = stationary_covariance(a, q);
    const double sd = std::sqrt(Eigen::SelfAdjointEigenSolver<Mat>(cov).eigenvalues().maxCoeff());
    sys.state_box = Box::cube(sys.n, -6.0 * sd, 6.0 * sd);
  }
  apply_box_override(sys, spec);

  if (spec.kind == "toggle_switch") {
    // Equilibria located numerically at build time.
    const auto eqs = find_equilibria(sys, 9);
    std::vector<Vec> stable, other;
    for (const auto& e : eqs) (e.stable ? stable : other).push_back(e.point);
    if (stable.empty()) throw NumericalError("toggle_switch: no stable equilibrium found");
    AnalyticAttractor atoms;
    atoms.points.resize(static_cast<Eigen::Index>(stable.size()), 2);
    for (std::size_t i = 0; i < stable.size(); ++i) atoms.points.row(Eigen::Index(i)) = stable[i];
    atoms.description = "stable equilibria (saddle excluded)";
    sys.attractor = atoms;
    sys.other_equilibria.resize(static_cast<Eigen::Index>(other.size()), 2);
    for (std::size_t i = 0; i < other.size(); ++i) sys.other_equilibria.row(Eigen::Index(i)) = other[i];
  }
  return sys;
}

Vec eval_drift(const SdeSystem& sys, const Eigen::Ref<const Vec>& x) {
  Vec out(sys.n);
  sys.drift(x, out);
  if (!out.allFinite()) throw NumericalError("drift evaluation produced a non-finite value");
  return out;
}

Mat eval_noise(const SdeSystem& sys, const Eigen::Ref<const Vec>& x) {
  Mat out(sys.n, sys.m);
  sys.noise(x, out);
  return out;
}

Mat eval_diffusion(const SdeSystem& sys, const Eigen::Ref<const Vec>& x) {
  const Mat s = eval_noise(sys, x);
  Mat a = s * s.transpose();
  return 0.5 * (a + a.transpose());
}

Mat drift_jacobian(const SdeSystem& sys, const Eigen::Ref<const Vec>& x, double h) {
  Mat jac(sys.n, sys.n);
  Vec xp = x, xm = x, fp(sys.n), fm(sys.n);
  for (int j = 0; j < sys.n; ++j) {
    xp(j) = x(j) + h;
    xm(j) = x(j) - h;
    sys.drift(xp, fp);
    sys.drift(xm, fm);
    jac.col(j) = (fp - fm) / (2 * h);
    xp(j) = xm(j) = x(j);
  }
  return jac;
}

std::vector<Equilibrium> find_equilibria(const SdeSystem& sys, int seeds_per_dim, double tol) {
  const int n = sys.n;
  const Box& box = sys.state_box;
  std::vector<Equilibrium> found;
  const double merge_tol = 1e-6 * box.diameter();

  long total = 1;
  for (int d = 0; d < n; ++d) total *= seeds_per_dim;
  for (long idx = 0; idx < total; ++idx) {
    Vec x(n);
    long rem = idx;
    for (int d = 0; d < n; ++d) {
      const int k = static_cast<int>(rem % seeds_per_dim);
      rem /= seeds_per_dim;
      x(d) = box.lower(d) + (box.upper(d) - box.lower(d)) * (k + 0.5) / seeds_per_dim;
    }
    Vec f = eval_drift(sys, x);
    bool converged = false;
    for (int it = 0; it < 100 && !converged; ++it) {
      const Mat jac = drift_jacobian(sys, x);
      const Vec step = jac.fullPivLu().solve(-f);
      if (!step.allFinite()) break;
      double lambda = 1.0;
      const double f0 = f.norm();
      for (int back = 0; back < 30; ++back) {
        const Vec trial = x + lambda * step;
        Vec ft(n);
        sys.drift(trial, ft);
        if (ft.allFinite() && ft.norm() < (1 - 1e-4 * lambda) * f0) {
          x = trial;
          f = ft;
          break;
        }
        lambda *= 0.5;
        if (back == 29) it = 100;
      }
      if (f.norm() < tol) converged = true;
    }
    if (!converged) continue;
    // The root may legitimately sit slightly outside the box (e.g. on a face).
    if (!box.inflated(1.5).contains(x)) continue;
    bool duplicate = false;
    for (const auto& e : found)
      if ((e.point - x).norm() < merge_tol) duplicate = true;
    if (duplicate) continue;
    Equilibrium e;
    e.point = x;
    e.residual = f.norm();
    e.eigenvalue_real_parts =
        Eigen::EigenSolver<Mat>(drift_jacobian(sys, x), false).eigenvalues().real();
    e.stable = e.eigenvalue_real_parts.maxCoeff() < 0;
    found.push_back(std::move(e));
  }
  std::sort(found.begin(), found.end(), [](const Equilibrium& a, const Equilibrium& b) {
    for (Eigen::Index i = 0; i < a.point.size(); ++i)
      if (a.point(i) != b.point(i)) return a.point(i) < b.point(i);
    return false;
  });
  return found;
}

double min_diffusion_eigenvalue(const SdeSystem& sys, int samples, std::uint64_t seed) {
  RandomStream rng(seed, 0);
  double min_eig = std::numeric_limits<double>::infinity();
  Vec x(sys.n);
  for (int s = 0; s < samples; ++s) {
    for (int d = 0; d < sys.n; ++d)
      x(d) = sys.state_box.lower(d) + (sys.state_box.upper(d) - sys.state_box.lower(d)) * rng.uniform();
    const Mat a = eval_diffusion(sys, x);
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Mat>(a).eigenvalues().minCoeff());
  }
  return min_eig;
}

}  // namespace sal
