#include "fedrate/cover.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>

#include "fedrate/stats.hpp"

namespace fedrate::dim {

namespace {
constexpr double kBallSlack = 1e-9;
}

PointCloud::PointCloud(std::size_t dim, std::vector<double> coords)
    : dim_(dim), coords_(std::move(coords)) {
  if (dim_ == 0) throw std::invalid_argument("PointCloud: dimension must be positive");
  if (coords_.size() % dim_ != 0) {
    throw std::invalid_argument("PointCloud: coordinate count is not a multiple of the dimension");
  }
  for (double c : coords_) {
    if (!std::isfinite(c)) throw std::invalid_argument("PointCloud: non-finite coordinate");
  }
}

PointCloud PointCloud::from_columns(const Eigen::Ref<const Eigen::MatrixXd>& points) {
  std::vector<double> coords(static_cast<std::size_t>(points.size()));
  std::size_t k = 0;
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    for (Eigen::Index r = 0; r < points.rows(); ++r) coords[k++] = points(r, j);
  }
  return PointCloud(static_cast<std::size_t>(points.rows()), std::move(coords));
}

PointCloud PointCloud::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("PointCloud: no points");
  const std::size_t dim = rows.front().size();
  std::vector<double> coords;
  coords.reserve(rows.size() * dim);
  for (const auto& row : rows) {
    if (row.size() != dim) throw std::invalid_argument("PointCloud: ragged rows");
    coords.insert(coords.end(), row.begin(), row.end());
  }
  return PointCloud(dim, std::move(coords));
}

double PointCloud::diameter() const {
  double best = 0.0;
  for (std::size_t k = 0; k < dim_; ++k) {
    double lo = coords_[k];
    double hi = coords_[k];
    for (std::size_t i = 0; i < size(); ++i) {
      lo = std::min(lo, coords_[i * dim_ + k]);
      hi = std::max(hi, coords_[i * dim_ + k]);
    }
    best = std::max(best, hi - lo);
  }
  return best;
}

double linf_distance(std::span<const double> a, std::span<const double> b) {
  double best = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) best = std::max(best, std::abs(a[k] - b[k]));
  return best;
}

bool within_ball(double distance, double eps) { return distance <= eps * (1.0 + kBallSlack); }

namespace {

// Enumerates eps-neighbors. Coordinates that are constant over the cloud
// never contribute to an l-infinity distance and are dropped; points are
// sorted along the widest remaining coordinate so each query scans only a
// window of that coordinate.
class NeighborIndex {
 public:
  NeighborIndex(const PointCloud& cloud, double eps) : cloud_(cloud), eps_(eps) {
    const std::size_t dim = cloud.dim();
    double widest = -1.0;
    std::size_t sort_axis = 0;
    for (std::size_t k = 0; k < dim; ++k) {
      double lo = cloud.point(0)[k];
      double hi = lo;
      for (std::size_t i = 1; i < cloud.size(); ++i) {
        lo = std::min(lo, cloud.point(i)[k]);
        hi = std::max(hi, cloud.point(i)[k]);
      }
      if (hi > lo) {
        active_.push_back(k);
        if (hi - lo > widest) {
          widest = hi - lo;
          sort_axis = k;
        }
      }
    }
    order_.resize(cloud.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return cloud.point(a)[sort_axis] < cloud.point(b)[sort_axis];
    });
    keys_.resize(cloud.size());
    for (std::size_t r = 0; r < order_.size(); ++r) keys_[r] = cloud.point(order_[r])[sort_axis];
    sort_axis_ = sort_axis;
  }

  template <typename Visit>
  void for_each_neighbor(std::size_t i, Visit&& visit) const {
    const auto p = cloud_.point(i);
    if (active_.empty()) {
      for (std::size_t j = 0; j < cloud_.size(); ++j) visit(j);
      return;
    }
    const double reach = eps_ * (1.0 + 4.0 * kBallSlack);
    const double key = p[sort_axis_];
    const auto first = std::lower_bound(keys_.begin(), keys_.end(), key - reach - std::abs(key) * 1e-15);
    const auto last = std::upper_bound(keys_.begin(), keys_.end(), key + reach + std::abs(key) * 1e-15);
    for (auto it = first; it != last; ++it) {
      const std::size_t j = order_[static_cast<std::size_t>(it - keys_.begin())];
      const auto q = cloud_.point(j);
      double dist = 0.0;
      for (std::size_t k : active_) {
        dist = std::max(dist, std::abs(p[k] - q[k]));
        if (!within_ball(dist, eps_)) break;
      }
      if (within_ball(dist, eps_)) visit(j);
    }
  }

 private:
  const PointCloud& cloud_;
  double eps_;
  std::vector<std::size_t> active_;
  std::vector<std::size_t> order_;
  std::vector<double> keys_;
  std::size_t sort_axis_ = 0;
};

}  // namespace

Cover greedy_partial_cover(const PointCloud& cloud, double eps, double tau) {
  if (cloud.size() == 0) throw std::invalid_argument("cover of an empty cloud");
  if (!(eps > 0.0)) throw std::invalid_argument("cover radius must be positive");
  if (!(tau >= 0.0) || !(tau < 1.0)) throw std::invalid_argument("tau must lie in [0, 1)");

  const std::size_t n = cloud.size();
  // At most floor(tau * n) points may stay uncovered.
  const auto allowed_uncovered =
      static_cast<std::size_t>(std::floor(tau * static_cast<double>(n) * (1.0 + 1e-12)));
  const std::size_t target = n - std::min(allowed_uncovered, n - 1);

  const NeighborIndex index(cloud, eps);
  std::vector<std::size_t> gain(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    index.for_each_neighbor(i, [&](std::size_t) { ++gain[i]; });
  }

  // Max-heap on (gain, -index); stale entries are refreshed lazily since
  // gains only ever decrease.
  using Entry = std::pair<std::size_t, std::size_t>;
  auto later = [](const Entry& a, const Entry& b) {
    return a.first != b.first ? a.first < b.first : a.second > b.second;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(later)> heap(later);
  for (std::size_t i = 0; i < n; ++i) heap.emplace(gain[i], i);

  std::vector<char> covered(n, 0);
  Cover cover;
  while (cover.covered < target) {
    const auto [stored, i] = heap.top();
    heap.pop();
    if (stored != gain[i]) {
      heap.emplace(gain[i], i);
      continue;
    }
    cover.centers.push_back(i);
    index.for_each_neighbor(i, [&](std::size_t q) {
      if (covered[q]) return;
      covered[q] = 1;
      ++cover.covered;
      index.for_each_neighbor(q, [&](std::size_t r) { --gain[r]; });
    });
  }
  return cover;
}

Cover greedy_cover(const PointCloud& cloud, double eps) {
  return greedy_partial_cover(cloud, eps, 0.0);
}

std::size_t eps_tau_cover(const PointCloud& cloud, double eps, double tau) {
  return greedy_partial_cover(cloud, eps, tau).count();
}

namespace {

DimEstimate fit_dimension(const PointCloud& cloud, std::optional<double> alpha,
                          std::span<const double> eps_grid) {
  if (eps_grid.size() < 2) throw std::invalid_argument("eps grid needs at least two values");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0.0) || !(eps_grid[i] < 1.0)) {
      throw std::invalid_argument("eps grid values must lie in (0, 1), got " +
                                  std::to_string(eps_grid[i]));
    }
    if (i > 0 && !(eps_grid[i] < eps_grid[i - 1])) {
      throw std::invalid_argument("eps grid must be strictly decreasing");
    }
  }
  if (alpha && !(*alpha > 0.0)) throw std::invalid_argument("alpha must be positive");

  DimEstimate est;
  est.alpha = alpha;
  est.eps_grid.assign(eps_grid.begin(), eps_grid.end());
  std::vector<double> log_inv_eps;
  std::vector<double> log_count;
  for (double eps : eps_grid) {
    const double tau = alpha ? std::pow(eps, *alpha) : 0.0;
    const std::size_t count = eps_tau_cover(cloud, eps, tau);
    est.cover_counts.push_back(count);
    log_inv_eps.push_back(std::log(1.0 / eps));
    log_count.push_back(std::log(static_cast<double>(count)));
  }
  const auto fit = stats::ols(log_inv_eps, log_count);
  est.slope = fit.slope;
  est.slope_stderr = fit.slope_stderr;
  est.intercept = fit.intercept;
  return est;
}

}  // namespace

DimEstimate entropic_dim(const PointCloud& cloud, double alpha, std::span<const double> eps_grid) {
  return fit_dimension(cloud, alpha, eps_grid);
}

DimEstimate minkowski_dim(const PointCloud& cloud, std::span<const double> eps_grid) {
  return fit_dimension(cloud, std::nullopt, eps_grid);
}

std::vector<double> default_eps_grid(const PointCloud& cloud, std::size_t points) {
  if (points < 2) throw std::invalid_argument("default grid needs at least two points");
  const double diameter = cloud.diameter();
  double top = diameter > 0.0 ? 0.2 * diameter : 0.2;
  top = std::min(top, 0.5);
  std::vector<double> grid;
  for (std::size_t i = 0; i < points; ++i) grid.push_back(top * std::pow(0.7, static_cast<double>(i)));
  return grid;
}

}  // namespace fedrate::dim
