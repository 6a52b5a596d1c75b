#include "sal/grid.hpp"

#include <algorithm>
#include <cmath>

namespace sal {

Grid::Grid(Box box, std::array<int, 2> cells) : box_(std::move(box)), cells_(cells) {
  const int d = box_.dim();
  if (d != 1 && d != 2) throw ConfigError("grid: only 1-D and 2-D boxes are supported");
  if (d == 1) cells_[1] = 1;
  if (cells_[0] < 16 || (d == 2 && cells_[1] < 16))
    throw ConfigError("grid: at least 16 cells per axis required");
  for (int a = 0; a < d; ++a) {
    if (!(box_.upper(a) > box_.lower(a))) throw ConfigError("grid: empty box");
    h_[std::size_t(a)] = (box_.upper(a) - box_.lower(a)) / cells_[std::size_t(a)];
  }
}

Vec Grid::center(Eigen::Index k) const {
  Vec c(dim());
  const Eigen::Index ix = k % cells_[0];
  c(0) = box_.lower(0) + (double(ix) + 0.5) * h_[0];
  if (dim() == 2) c(1) = box_.lower(1) + (double(k / cells_[0]) + 0.5) * h_[1];
  return c;
}

namespace {

// Cell-center coordinate along one axis: lower index and weight of the upper neighbour.
std::pair<int, double> locate(double x, double lo, double h, int n) {
  const double s = std::clamp((x - lo) / h - 0.5, 0.0, double(n - 1));
  const int i = std::min(int(s), n - 2);
  return {i, s - i};
}

}  // namespace

double DensityField::interpolate(const Eigen::Ref<const Vec>& x) const {
  const auto [ix, tx] = locate(x(0), grid.box().lower(0), grid.h(0), grid.nx());
  if (grid.dim() == 1) return (1 - tx) * u(ix) + tx * u(ix + 1);
  const auto [iy, ty] = locate(x(1), grid.box().lower(1), grid.h(1), grid.ny());
  return (1 - tx) * (1 - ty) * u(grid.index(ix, iy)) + tx * (1 - ty) * u(grid.index(ix + 1, iy)) +
         (1 - tx) * ty * u(grid.index(ix, iy + 1)) + tx * ty * u(grid.index(ix + 1, iy + 1));
}

}  // namespace sal
