#pragma once

#include "sal/common.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sal {

/// Axis-aligned box [lower, upper].
struct Box {
  Vec lower;
  Vec upper;

  int dim() const { return static_cast<int>(lower.size()); }
  double diameter() const { return (upper - lower).norm(); }
  double volume() const { return (upper - lower).prod(); }
  bool contains(const Eigen::Ref<const Vec>& x) const {
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
  }
  /// Box scaled about its center by `factor`.
  Box inflated(double factor) const {
    const Vec center = 0.5 * (lower + upper);
    const Vec half = 0.5 * factor * (upper - lower);
    return {center - half, center + half};
  }
  static Box cube(int n, double lo, double hi) {
    return {Vec::Constant(n, lo), Vec::Constant(n, hi)};
  }
};

/// Exactly known attractor geometry used for oracle-grade distance queries.
struct AnalyticAttractor {
  enum class Kind { points, circle };
  Kind kind = Kind::points;
  Points points;      // Kind::points: one equilibrium per row
  Vec center;         // Kind::circle
  double radius = 0;  // Kind::circle
  std::string description;
};

using DriftFn = std::function<void(const Eigen::Ref<const Vec>&, Eigen::Ref<Vec>)>;
using NoiseFn = std::function<void(const Eigen::Ref<const Vec>&, Eigen::Ref<Mat>)>;

/// dX = f(X) dt + eps sigma(X) dW with X in R^n and W in R^m.
struct SdeSystem {
  int n = 0;
  int m = 0;
  DriftFn drift;
  NoiseFn noise;
  std::optional<Mat> constant_noise;  // set when sigma does not depend on x
  Box state_box;
  std::string label;
  std::optional<AnalyticAttractor> attractor;
  // Saddles and other invariant points not included in `attractor`.
  Points other_equilibria;
};

/// Builtin model selector with named real parameters.
struct ModelSpec {
  std::string kind;  // limit_cycle | toggle_switch | gradient_1d | linear_ou
  std::map<std::string, double> params;
  std::vector<double> drift_matrix;  // linear_ou, row-major n x n
  std::vector<double> noise_matrix;  // optional, row-major n x m
  int noise_cols = 0;                // m when noise_matrix is given

  double param(const std::string& name, double fallback) const {
    const auto it = params.find(name);
    return it == params.end() ? fallback : it->second;
  }
};

/// Throws ConfigError when the spec is inconsistent.
void validate(const ModelSpec& spec);

SdeSystem make_builtin(const ModelSpec& spec);

Vec eval_drift(const SdeSystem& sys, const Eigen::Ref<const Vec>& x);
Mat eval_noise(const SdeSystem& sys, const Eigen::Ref<const Vec>& x);
/// A(x) = sigma(x) sigma(x)^T.
Mat eval_diffusion(const SdeSystem& sys, const Eigen::Ref<const Vec>& x);

/// Central-difference Jacobian of the drift.
Mat drift_jacobian(const SdeSystem& sys, const Eigen::Ref<const Vec>& x, double h = 1e-6);

struct Equilibrium {
  Vec point;
  Vec eigenvalue_real_parts;
  bool stable = false;
  double residual = 0;
};

/// Damped Newton from a seeds_per_dim^n grid over the state box; duplicates merged.
std::vector<Equilibrium> find_equilibria(const SdeSystem& sys, int seeds_per_dim = 9,
                                         double tol = 1e-13);

/// Smallest eigenvalue of A(x) over random points in the state box.
double min_diffusion_eigenvalue(const SdeSystem& sys, int samples, std::uint64_t seed);

bool is_hurwitz(const Mat& a);

// Analytic drifts, usable on any Eigen expression.

template <typename Derived>
Eigen::Vector2d limit_cycle_drift(const Eigen::MatrixBase<Derived>& p) {
  const double x = p(0), y = p(1);
  const double g = 1.0 - x * x - y * y;
  return {y + x * g, -x + y * g};
}

template <typename Derived>
Eigen::Vector2d toggle_switch_drift(const Eigen::MatrixBase<Derived>& p, double b) {
  const double x = p(0), y = p(1);
  return {1.0 / (1.0 + y * y / (b + x * x)) - x, 1.0 / (1.0 + x * x / (b + y * y)) - y};
}

}  // namespace sal
