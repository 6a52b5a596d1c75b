#pragma once

#include "sal/systems.hpp"

#include <array>

namespace sal {

/// Uniform cell-centered grid on a 1-D interval or a 2-D rectangle.
class Grid {
 public:
  Grid() = default;
  Grid(Box box, std::array<int, 2> cells);
  static Grid line(double a, double b, int nx) { return Grid(Box::cube(1, a, b), {nx, 1}); }
  static Grid rect(const Box& box, int nx, int ny) { return Grid(box, {nx, ny}); }

  int dim() const { return box_.dim(); }
  int nx() const { return cells_[0]; }
  int ny() const { return cells_[1]; }
  Eigen::Index size() const { return Eigen::Index(cells_[0]) * cells_[1]; }
  const Box& box() const { return box_; }
  double h(int axis) const { return h_[std::size_t(axis)]; }
  double cell_volume() const { return dim() == 1 ? h_[0] : h_[0] * h_[1]; }

  Eigen::Index index(int ix, int iy = 0) const { return Eigen::Index(ix) + Eigen::Index(iy) * cells_[0]; }
  Vec center(Eigen::Index k) const;
  Vec center(int ix, int iy) const { return center(index(ix, iy)); }

 private:
  Box box_;
  std::array<int, 2> cells_{1, 1};
  std::array<double, 2> h_{1, 1};
};

/// Nonnegative grid density with unit mass; discrete stationary FPE solution.
struct DensityField {
  Grid grid;
  Vec u;
  double eps = 0;
  double residual = 0;

  double mass() const { return u.sum() * grid.cell_volume(); }
  /// Linear (1-D) or bilinear (2-D) interpolation between cell centers, clamped at the border.
  double interpolate(const Eigen::Ref<const Vec>& x) const;
};

}  // namespace sal
