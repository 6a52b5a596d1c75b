#pragma once

#include "sal/spatial_index.hpp"
#include "sal/systems.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sal {

/// Fixed-step classical RK4. Returns ceil(T/dt)+1 rows; the last row is the state at T.
Points integrate_flow(const SdeSystem& sys, const Eigen::Ref<const Vec>& x0, double duration,
                      double dt);

/// Single RK4 step.
void rk4_step(const SdeSystem& sys, Eigen::Ref<Vec> x, double dt, Vec work[5]);

/// Finite point-cloud approximation of the global attractor with distance queries.
class AttractorCloud {
 public:
  AttractorCloud() = default;
  AttractorCloud(Points points, double resolution, Box domain);

  /// Cloud backed by exact geometry; distance() answers analytically.
  static AttractorCloud from_analytic(const AnalyticAttractor& exact, const Box& domain,
                                      int samples_per_unit_length = 2000);

  const Points& points() const { return points_; }
  Eigen::Index size() const { return points_.rows(); }
  int dim() const { return static_cast<int>(points_.cols()); }
  double resolution() const { return resolution_; }
  const Box& domain() const { return domain_; }
  const GridIndex& index() const { return index_; }
  const std::optional<AnalyticAttractor>& analytic() const { return analytic_; }
  /// "sampled" or "analytic:<description>".
  std::string representation() const;

  double distance(const Eigen::Ref<const Vec>& x) const;
  bool within(const Eigen::Ref<const Vec>& x, double r) const;

  // Provenance of sampled clouds.
  int seeds = 0;
  double burn_T = 0;
  double collect_T = 0;

 private:
  Points points_;
  double resolution_ = 0;
  Box domain_;
  GridIndex index_;
  std::optional<AnalyticAttractor> analytic_;
};

struct AttractorSampling {
  int seeds = 64;
  double burn_T = 50;
  double collect_T = 0;    // 0 selects 10 * burn_T
  double dt = 1e-2;
  double resolution = 0;   // h_A; 0 selects 1e-3 * box diameter
  std::uint64_t seed = 1;  // seed positions are uniform in the state box
  std::vector<Vec> extra_seeds;
  unsigned threads = 0;
};

AttractorCloud sample_attractor(const SdeSystem& sys, const AttractorSampling& opts);

/// Attractor used by measures and experiments: analytic when the system has one.
AttractorCloud default_attractor(const SdeSystem& sys, const AttractorSampling& opts = {});

struct DimensionFit {
  std::vector<double> radii;
  std::vector<double> counts_or_volumes;
  double slope = 0;
  double stderr_ = 0;
  double intercept = 0;
};

/// Box-counting radii diam * 2^-5 .. 2^-9 of the box, kept above 2 h_A.
std::vector<double> dimension_radii(const Box& box, double resolution);

/// Box counting: slope of log N(r) against log(1/r).
DimensionFit box_dimension(const Points& points, const std::vector<double>& radii);

struct VolumeEstimate {
  double value = 0;
  double stderr_ = 0;
};

/// Hit-or-miss Monte Carlo volume of {x in domain : dist(x, cloud) <= r}.
VolumeEstimate tube_volume(const AttractorCloud& cloud, double r, long mc_points,
                           std::uint64_t rng_seed);

/// Slope of log m(B(A,r)) against log r; equals n - d for regular sets.
DimensionFit tube_volume_scaling(const AttractorCloud& cloud, const std::vector<double>& radii,
                                 long mc_points, std::uint64_t rng_seed);

void write_points_csv(std::ostream& os, const Points& points);
Points read_points_csv(std::istream& is);

}  // namespace sal
