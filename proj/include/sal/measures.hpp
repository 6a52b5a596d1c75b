#pragma once

#include "sal/attractor.hpp"
#include "sal/grid.hpp"
#include "sal/lyapunov.hpp"
#include "sal/sde_engine.hpp"

#include <functional>
#include <string>

namespace sal {

/// Read-only view of a stationary measure: N uniform atoms or a grid density.
class MeasureView {
 public:
  static MeasureView of(const EnsembleSample& sample);
  static MeasureView of(const Points& points, double eps);
  static MeasureView of(const DensityField& density);

  bool is_grid() const { return density_ != nullptr; }
  const Points& points() const { return *points_; }
  const DensityField& density() const { return *density_; }
  double eps() const { return eps_; }
  int dim() const;
  /// "mc" for samples, "fpe" for grid densities.
  std::string source() const { return is_grid() ? "fpe" : "mc"; }

 private:
  const Points* points_ = nullptr;
  const DensityField* density_ = nullptr;
  double eps_ = 0;
};

/// Value with a standard error; stderr is 0 for grid quadratures.
struct Estimate {
  double value = 0;
  double stderr_ = 0;
};

/// mu(B(A, radius)).
Estimate tube_mass(const MeasureView& m, const AttractorCloud& cloud, double radius);

struct ShellMass {
  Estimate inner;  // dist < eps^(1+alpha)
  Estimate shell;  // eps^(1+alpha) <= dist <= eps^(1-alpha)
  Estimate outer;  // dist > eps^(1-alpha)
};
ShellMass shell_mass(const MeasureView& m, const AttractorCloud& cloud, double alpha, double eps);

/// V(eps) = int dist^2(x, A) dmu.
Estimate msd(const MeasureView& m, const AttractorCloud& cloud);

/// mu(|x| > r).
Estimate tail_mass(const MeasureView& m, double r);

enum class EntropyMethod { knn, histogram, grid };

struct EntropyEstimate {
  double value = 0;
  EntropyMethod method = EntropyMethod::knn;
  double param = 0;  // k for knn, bin width for histogram
  double stderr_ = 0;
};
std::string to_string(EntropyMethod m);

/// Differential entropy in nats. knn is Kozachenko-Leonenko; histogram takes a bin
/// width (0 picks 0.2 pooled standard deviations); grid is -sum u log u * cell volume.
EntropyEstimate entropy(const MeasureView& m, EntropyMethod method, double param = 0,
                        unsigned threads = 0);

/// Digamma at positive integers.
double digamma_int(long m);
/// Volume of the unit ball in R^n.
double unit_ball_volume(int n);

/// exp(-gamma int_{rho_m}^{rho} dt / H(t)); the level-set tail bound.
double lyap_tail_bound(double gamma, const std::function<double(double)>& h, double rho_m, double rho);

/// exp(int_{rho}^{rho_M} ds / Htilde(s)) with Htilde(s) = H1(s) int_{rho_m}^{s} dt / H2(t);
/// the multiplicative comparison factor of the weak-Lyapunov estimate.
double lyap_comparison_factor(const std::function<double(double)>& h1,
                              const std::function<double(double)>& h2, double rho_m, double rho,
                              double rho_M);

/// inf u / sup u over cells with dist(center, A) <= K eps.
double regularity_ratio(const DensityField& density, const AttractorCloud& cloud, double k, double eps);

}  // namespace sal
