#pragma once

#include "sal/common.hpp"

#include <cstdint>
#include <vector>

namespace sal {

/// Uniform-grid bucket index over the bounding box of a point set.
/// Queries are exact: ring search over Chebyshev shells of cells stops once
/// no unvisited cell can hold a closer point, with a brute-force fallback
/// when the shell would cover more cells than there are points.
class GridIndex {
 public:
  GridIndex() = default;
  /// `cell_size` <= 0 picks a size giving about `target_per_cell` points per occupied cell.
  explicit GridIndex(const Points& points, double cell_size = 0, double target_per_cell = 4);

  Eigen::Index size() const { return points_.rows(); }
  int dim() const { return static_cast<int>(points_.cols()); }
  const Points& points() const { return points_; }
  double cell_size() const { return cell_; }

  /// Squared distance to the nearest point and its index.
  std::pair<double, Eigen::Index> nearest(const Eigen::Ref<const Vec>& x) const;

  /// True when some point lies within distance r of x.
  bool within(const Eigen::Ref<const Vec>& x, double r) const;

  /// Squared distances to the k nearest points, ascending. `skip` excludes one index.
  void k_nearest(const Eigen::Ref<const Vec>& x, int k, std::vector<double>& out_sq,
                 Eigen::Index skip = -1) const;

 private:
  std::int64_t cell_coord(double v, int axis) const;
  std::int64_t linear(const std::vector<std::int64_t>& c) const;
  template <typename Visit>
  void search(const Eigen::Ref<const Vec>& x, Visit&& visit, const double& bound_sq) const;

  Points points_;
  Vec origin_;
  double cell_ = 1;
  std::vector<std::int64_t> dims_;
  std::vector<std::int64_t> strides_;
  std::vector<std::uint32_t> cell_start_;  // CSR layout, size = cells + 1
  std::vector<std::uint32_t> order_;
};

/// Squared Euclidean distance; the single formula shared by index and brute force.
inline double squared_distance(const Eigen::Ref<const Vec>& a, const Eigen::Ref<const Vec>& b) {
  double s = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = a(i) - b(i);
    s += d * d;
  }
  return s;
}

}  // namespace sal
