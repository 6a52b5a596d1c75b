#include "sal/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sal {

GridIndex::GridIndex(const Points& points, double cell_size, double target_per_cell)
    : points_(points) {
  const int n = dim();
  const auto count = static_cast<double>(std::max<Eigen::Index>(points.rows(), 1));
  if (points.rows() == 0) {
    origin_ = Vec::Zero(n);
    dims_.assign(static_cast<std::size_t>(n), 1);
  } else {
    origin_ = points.colwise().minCoeff().transpose();
  }
  const Vec extent =
      points.rows() == 0 ? Vec(Vec::Zero(n)) : Vec(points.colwise().maxCoeff().transpose() - origin_);

  if (cell_size > 0) {
    cell_ = cell_size;
  } else {
    double log_volume = 0;
    int spread_dims = 0;
    for (int d = 0; d < n; ++d)
      if (extent(d) > 0) {
        log_volume += std::log(extent(d));
        ++spread_dims;
      }
    cell_ = spread_dims == 0
                ? 1.0
                : std::exp((log_volume + std::log(target_per_cell / count)) / spread_dims);
  }
  const double max_cells = std::max(64.0, 8.0 * count);
  for (;;) {
    double total = 1;
    dims_.assign(static_cast<std::size_t>(n), 1);
    for (int d = 0; d < n; ++d) {
      dims_[std::size_t(d)] = static_cast<std::int64_t>(std::floor(extent(d) / cell_)) + 1;
      total *= static_cast<double>(dims_[std::size_t(d)]);
    }
    if (total <= max_cells) break;
    cell_ *= 1.25;
  }
  strides_.assign(static_cast<std::size_t>(n), 1);
  for (int d = 1; d < n; ++d) strides_[std::size_t(d)] = strides_[std::size_t(d - 1)] * dims_[std::size_t(d - 1)];
  const std::int64_t cells =
      std::accumulate(dims_.begin(), dims_.end(), std::int64_t{1}, std::multiplies<>());

  std::vector<std::int64_t> key(static_cast<std::size_t>(points.rows()));
  std::vector<std::int64_t> c(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (int d = 0; d < n; ++d) c[std::size_t(d)] = cell_coord(points(i, d), d);
    key[std::size_t(i)] = linear(c);
  }
  cell_start_.assign(static_cast<std::size_t>(cells + 1), 0);
  for (const auto k : key) ++cell_start_[std::size_t(k + 1)];
  for (std::size_t i = 1; i < cell_start_.size(); ++i) cell_start_[i] += cell_start_[i - 1];
  order_.resize(key.size());
  std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < key.size(); ++i)
    order_[fill[std::size_t(key[i])]++] = static_cast<std::uint32_t>(i);
}

std::int64_t GridIndex::cell_coord(double v, int axis) const {
  const double t = std::floor((v - origin_(axis)) / cell_);
  const auto hi = dims_[std::size_t(axis)] - 1;
  if (!(t > 0)) return 0;
  if (t >= static_cast<double>(hi)) return hi;
  return static_cast<std::int64_t>(t);
}

std::int64_t GridIndex::linear(const std::vector<std::int64_t>& c) const {
  std::int64_t k = 0;
  for (std::size_t d = 0; d < c.size(); ++d) k += c[d] * strides_[d];
  return k;
}

template <typename Visit>
void GridIndex::search(const Eigen::Ref<const Vec>& x, Visit&& visit, const double& bound_sq) const {
  const int n = dim();
  std::vector<std::int64_t> center(static_cast<std::size_t>(n));
  std::int64_t max_layer = 0;
  for (int d = 0; d < n; ++d) {
    center[std::size_t(d)] = cell_coord(x(d), d);
    max_layer = std::max({max_layer, center[std::size_t(d)], dims_[std::size_t(d)] - 1 - center[std::size_t(d)]});
  }
  const auto total_cells = static_cast<double>(cell_start_.size() - 1);

  auto visit_cell = [&](const std::vector<std::int64_t>& c) {
    const auto k = static_cast<std::size_t>(linear(c));
    for (auto p = cell_start_[k]; p < cell_start_[k + 1]; ++p) {
      const auto idx = order_[p];
      visit(static_cast<Eigen::Index>(idx), squared_distance(x, points_.row(idx).transpose()));
    }
  };
  auto chebyshev = [&](const std::vector<std::int64_t>& c) {
    std::int64_t m = 0;
    for (int d = 0; d < n; ++d) m = std::max(m, std::abs(c[std::size_t(d)] - center[std::size_t(d)]));
    return m;
  };
  // Visits every cell in the clipped block of half-width `layer` whose
  // Chebyshev distance from the center passes `keep`.
  auto sweep = [&](std::int64_t layer, auto&& keep) {
    std::vector<std::int64_t> lo(static_cast<std::size_t>(n)), hi(static_cast<std::size_t>(n));
    for (int d = 0; d < n; ++d) {
      lo[std::size_t(d)] = std::max<std::int64_t>(0, center[std::size_t(d)] - layer);
      hi[std::size_t(d)] = std::min<std::int64_t>(dims_[std::size_t(d)] - 1, center[std::size_t(d)] + layer);
    }
    std::vector<std::int64_t> c = lo;
    for (;;) {
      if (keep(chebyshev(c))) visit_cell(c);
      int d = 0;
      for (; d < n; ++d) {
        if (++c[std::size_t(d)] <= hi[std::size_t(d)]) break;
        c[std::size_t(d)] = lo[std::size_t(d)];
      }
      if (d == n) break;
    }
  };

  for (std::int64_t layer = 0; layer <= max_layer; ++layer) {
    if (std::pow(2.0 * double(layer) + 1.0, n) >= total_cells) {
      sweep(max_layer, [layer](std::int64_t m) { return m >= layer; });
      return;
    }
    sweep(layer, [layer](std::int64_t m) { return m == layer; });
    const double reach = double(layer) * cell_;
    if (bound_sq <= reach * reach) return;
  }
}

std::pair<double, Eigen::Index> GridIndex::nearest(const Eigen::Ref<const Vec>& x) const {
  double best = std::numeric_limits<double>::infinity();
  Eigen::Index best_idx = -1;
  search(
      x,
      [&](Eigen::Index idx, double d2) {
        if (d2 < best || (d2 == best && idx < best_idx)) {
          best = d2;
          best_idx = idx;
        }
      },
      best);
  return {best, best_idx};
}

bool GridIndex::within(const Eigen::Ref<const Vec>& x, double r) const {
  if (size() == 0) return false;
  double bound = r * r;
  bool found = false;
  search(
      x,
      [&](Eigen::Index, double d2) {
        if (d2 <= r * r) {
          found = true;
          bound = 0;
        }
      },
      bound);
  return found;
}

void GridIndex::k_nearest(const Eigen::Ref<const Vec>& x, int k, std::vector<double>& out_sq,
                          Eigen::Index skip) const {
  out_sq.clear();
  double bound = std::numeric_limits<double>::infinity();
  // out_sq is kept as a max-heap of the k best candidates.
  search(
      x,
      [&](Eigen::Index idx, double d2) {
        if (idx == skip) return;
        if (static_cast<int>(out_sq.size()) < k) {
          out_sq.push_back(d2);
          std::push_heap(out_sq.begin(), out_sq.end());
          if (static_cast<int>(out_sq.size()) == k) bound = out_sq.front();
        } else if (d2 < out_sq.front()) {
          std::pop_heap(out_sq.begin(), out_sq.end());
          out_sq.back() = d2;
          std::push_heap(out_sq.begin(), out_sq.end());
          bound = out_sq.front();
        }
      },
      bound);
  std::sort_heap(out_sq.begin(), out_sq.end());
}

}  // namespace sal
