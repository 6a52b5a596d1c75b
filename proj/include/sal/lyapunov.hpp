#pragma once

#include "sal/attractor.hpp"
#include "sal/grid.hpp"

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sal {

/// Scalar function with gradient and Hessian access. Missing derivatives
/// fall back to central differences with step fd_step.
struct ScalarField {
  using ValueFn = std::function<double(const Eigen::Ref<const Vec>&)>;
  using GradFn = std::function<Vec(const Eigen::Ref<const Vec>&)>;
  using HessFn = std::function<Mat(const Eigen::Ref<const Vec>&)>;

  std::string name;
  ValueFn value;
  GradFn grad;
  HessFn hessian;
  double fd_step = 1e-4;  // 1e-4 x domain scale

  double operator()(const Eigen::Ref<const Vec>& x) const { return value(x); }
  Vec gradient(const Eigen::Ref<const Vec>& x) const;
  Mat hess(const Eigen::Ref<const Vec>& x) const;
  bool analytic_gradient() const { return static_cast<bool>(grad); }

  Vec fd_gradient(const Eigen::Ref<const Vec>& x, double h) const;
  Mat fd_hessian(const Eigen::Ref<const Vec>& x, double h) const;
};

namespace fields {
/// |x|^2 (scale * |x|^2).
ScalarField squared_norm(double scale = 1.0);
/// |x|.
ScalarField radial();
/// scale * (|x|^2 - 1)^2, planar.
ScalarField ring_well(double scale = 1.0);
/// dist(x, A)^2 for an exact attractor (points or circle).
ScalarField squared_distance_to(const AnalyticAttractor& attractor);
ScalarField constant(double c);
/// log(1 + |x|).
ScalarField log_norm();
/// Value-only field; derivatives by finite differences.
ScalarField from_function(std::string name, ScalarField::ValueFn f, double fd_step = 1e-4);
/// The glued candidate for the planar limit cycle: r for r >= 1.4, (r^2-1)^2 for r <= 1.3.
ScalarField limit_cycle_glued();
}  // namespace fields

/// Quintic smoothstep h(t) = 6t^5 - 15t^4 + 10t^3 clamped to [0,1], with derivatives.
template <typename Scalar>
Scalar smoothstep(Scalar t) {
  if (t <= Scalar(0)) return Scalar(0);
  if (t >= Scalar(1)) return Scalar(1);
  return t * t * t * (t * (t * Scalar(6) - Scalar(15)) + Scalar(10));
}
template <typename Scalar>
Scalar smoothstep_d1(Scalar t) {
  if (t <= Scalar(0) || t >= Scalar(1)) return Scalar(0);
  return Scalar(30) * t * t * (t - Scalar(1)) * (t - Scalar(1));
}
template <typename Scalar>
Scalar smoothstep_d2(Scalar t) {
  if (t <= Scalar(0) || t >= Scalar(1)) return Scalar(0);
  return Scalar(60) * t * (Scalar(2) * t * t - Scalar(3) * t + Scalar(1));
}

/// U = h U_outer + (1 - h) U_inner with h the smoothstep in t = (|x| - r0)/(r1 - r0).
ScalarField glue(const ScalarField& inner, const ScalarField& outer, double r0, double r1);

/// C^2 ramp: 0 below rho0, the quintic 3s^5/d^4 - 8s^4/d^3 + 6s^3/d^2 on (rho0, rho0+d), then s.
template <typename Scalar>
Scalar cutoff_phi(Scalar rho, Scalar rho0, Scalar delta_rho) {
  if (!(delta_rho > Scalar(0))) throw ConfigError("cutoff_phi: delta_rho must be positive");
  const Scalar s = rho - rho0;
  if (s <= Scalar(0)) return Scalar(0);
  if (s >= delta_rho) return s;
  const Scalar d = delta_rho;
  return Scalar(3) * s * s * s * s * s / (d * d * d * d) - Scalar(8) * s * s * s * s / (d * d * d) +
         Scalar(6) * s * s * s / (d * d);
}
template <typename Scalar>
Scalar cutoff_phi_d1(Scalar rho, Scalar rho0, Scalar delta_rho) {
  const Scalar s = rho - rho0;
  if (s <= Scalar(0)) return Scalar(0);
  if (s >= delta_rho) return Scalar(1);
  const Scalar d = delta_rho;
  return Scalar(15) * s * s * s * s / (d * d * d * d) - Scalar(32) * s * s * s / (d * d * d) +
         Scalar(18) * s * s / (d * d);
}
template <typename Scalar>
Scalar cutoff_phi_d2(Scalar rho, Scalar rho0, Scalar delta_rho) {
  const Scalar s = rho - rho0;
  if (s <= Scalar(0) || s >= delta_rho) return Scalar(0);
  const Scalar d = delta_rho;
  return Scalar(60) * s * s * s / (d * d * d * d) - Scalar(96) * s * s / (d * d * d) +
         Scalar(36) * s / (d * d);
}

/// Sampling region: a base shape intersected with rejection predicates.
struct Region {
  enum class Shape { box, annulus };
  Shape shape = Shape::box;
  Box box;                     // Shape::box, also the rejection envelope
  Vec center;                  // Shape::annulus
  double r_inner = 0, r_outer = 1;
  // Excluded tube {dist(x, A) < exclude_radius}.
  const AttractorCloud* exclude_cloud = nullptr;
  double exclude_radius = 0;
  // Excluded sublevel set {U < min_level}.
  std::optional<ScalarField> level_field;
  double min_level = -std::numeric_limits<double>::infinity();
  double max_level = std::numeric_limits<double>::infinity();

  static Region make_box(Box b);
  static Region make_annulus(Vec center, double r_inner, double r_outer);
  std::string describe() const;
};

/// Deterministic sample sequence from (region, n, seed). Throws when rejection stalls.
Points sample_region(const Region& region, long n, std::uint64_t seed);

enum class Verdict { pass, fail, inconclusive };
std::string to_string(Verdict v);

struct LyapunovReport {
  std::string kind;  // strong | fpe_uniform | weak | class_bstar
  double gamma_est = 0;
  Verdict verdict = Verdict::fail;
  std::vector<Vec> violations;
  long sample_count = 0;
  std::string region;
  double fd_noise = 0;
  std::map<std::string, double> constants;
  std::vector<std::pair<double, double>> per_eps;  // (eps, gamma) for fpe checks
  bool uniform = false;
};

struct VerifyOptions {
  long n_samples = 10000;
  std::uint64_t seed = 7;
  unsigned threads = 0;
  const AttractorCloud* attractor = nullptr;  // enables attractor-distance constants
  std::size_t max_violations_kept = 32;
  Points extra_points;  // e.g. FPE mesh nodes, checked in addition to the random samples
};

/// Strong Lyapunov check: gamma_est = inf -(f.gradU)/|gradU|^2 over samples.
LyapunovReport verify_strong_lyapunov(const SdeSystem& sys, const ScalarField& u,
                                      const Region& region, const VerifyOptions& opts);

/// FPE Lyapunov check: gamma_est = min over eps of inf -L_eps U over samples,
/// L_eps = 1/2 eps^2 sum a_ij d_ij + f.grad. Uniform when per-eps gammas agree within 10%.
LyapunovReport verify_fpe_lyapunov(const SdeSystem& sys, const ScalarField& u,
                                   const std::vector<double>& eps_list, const Region& region,
                                   const VerifyOptions& opts);

/// Weak FPE Lyapunov check (L_eps U <= 0); gamma_est is the margin inf -L_eps U.
LyapunovReport verify_weak_lyapunov(const SdeSystem& sys, const ScalarField& u, double eps,
                                    const Region& region, const VerifyOptions& opts);

/// Class-B* sufficient condition on a large annulus: bounded gradient and
/// U/|x|^p bounded away from zero, judged by log-log trends across radial shells.
LyapunovReport verify_class_bstar(const ScalarField& u, const Region& outer_annulus, double p,
                                  const VerifyOptions& opts);

/// L_eps U(x).
double generator_apply(const SdeSystem& sys, const ScalarField& u, double eps,
                       const Eigen::Ref<const Vec>& x);

/// Points on the level set {U = rho} with quadrature weights (segment lengths in 2-D, 1 in 1-D).
struct LevelSetGeometry {
  double rho = 0;
  Points boundary_samples;
  std::vector<double> weights;
  std::vector<Vec> gradients;
  double max_level_error = 0;
};

/// Marching squares on a (resolution x resolution) node lattice over `box`
/// (2-D) or sign changes on a 1-D lattice; samples refined onto the level set.
LevelSetGeometry level_set(const ScalarField& u, double rho, const Box& box, int resolution);

struct Probability {
  double value = 0;
  double stderr_ = 0;
};

/// mu(Omega_rho) for sample measures.
Probability sublevel_mass(const Points& samples, const ScalarField& u, double rho);
/// mu(Omega_rho) for grid densities, with partial cells resolved by sub-sampling.
double sublevel_mass(const DensityField& density, const ScalarField& u, double rho);
/// Per-cell fraction of the cell inside {U < rho}.
Vec sublevel_cell_fractions(const Grid& grid, const ScalarField& u, double rho, int subsamples = 8);

}  // namespace sal
