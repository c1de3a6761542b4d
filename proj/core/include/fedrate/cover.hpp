#pragma once

// Covering numbers of finite samples under the l-infinity metric, partial
// (eps, tau)-covers, and the Minkowski / entropic dimension estimates built on
// them.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace fedrate::dim {

class PointCloud {
 public:
  PointCloud(std::size_t dim, std::vector<double> coords);
  // One point per column.
  static PointCloud from_columns(const Eigen::Ref<const Eigen::MatrixXd>& points);
  static PointCloud from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t size() const { return coords_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> point(std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }
  const std::vector<double>& coords() const { return coords_; }

  // l-infinity diameter, i.e. the largest per-coordinate range.
  double diameter() const;

 private:
  std::size_t dim_;
  std::vector<double> coords_;
};

double linf_distance(std::span<const double> a, std::span<const double> b);

// Closed-ball membership. A relative slack of 1e-9 absorbs rounding in
// coordinate differences, so grids whose spacing equals eps behave as in
// exact arithmetic.
bool within_ball(double distance, double eps);

struct Cover {
  std::vector<std::size_t> centers;  // indices into the cloud, in pick order
  std::size_t covered = 0;           // points inside the union of the balls

  std::size_t count() const { return centers.size(); }
};

// Greedy max-coverage cover with centers restricted to sample points: every
// step takes the ball holding the most still-uncovered points, ties to the
// lowest index. Stops once at least ceil((1 - tau) * size) points are covered.
Cover greedy_partial_cover(const PointCloud& cloud, double eps, double tau);

// Full cover (tau = 0).
Cover greedy_cover(const PointCloud& cloud, double eps);

std::size_t eps_tau_cover(const PointCloud& cloud, double eps, double tau);

struct DimEstimate {
  std::optional<double> alpha;  // nullopt: Minkowski (tau = 0)
  std::vector<double> eps_grid;
  std::vector<std::size_t> cover_counts;
  double slope = 0.0;
  double slope_stderr = 0.0;
  double intercept = 0.0;
};

// Fits log N_eps(mu, eps^alpha) against log(1/eps) over the grid.
DimEstimate entropic_dim(const PointCloud& cloud, double alpha, std::span<const double> eps_grid);
DimEstimate minkowski_dim(const PointCloud& cloud, std::span<const double> eps_grid);

// Geometric grid with ratio 0.7 whose top value is 20% of the cloud diameter
// (capped at 0.5 so every value stays below 1).
std::vector<double> default_eps_grid(const PointCloud& cloud, std::size_t points = 6);

}  // namespace fedrate::dim
