#pragma once

#include <span>

namespace fedrate::stats {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;  // 0 when only two points are given
  double r2 = 0.0;
};

// Ordinary least squares y = intercept + slope * x. Needs at least two
// distinct x values.
LineFit ols(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> values);
// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double sample_sd(std::span<const double> values);
// Linear interpolation between order statistics, q in [0, 1].
double quantile(std::span<const double> values, double q);

}  // namespace fedrate::stats
