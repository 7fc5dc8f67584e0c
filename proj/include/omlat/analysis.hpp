#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "omlat/error.hpp"

namespace omlat {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Ordinary least squares y = slope * x + intercept.
inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("fit_line needs >= 2 points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw ValidationError("fit_line: degenerate abscissa");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    ssr += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  return f;
}

struct Peak {
  std::size_t index;
  double position;
  double height;
};

// Strict interior local maxima above `min_height`, in ascending position.
inline std::vector<Peak> local_maxima(const std::vector<double>& x, const std::vector<double>& y,
                                      double min_height = 0.0) {
  std::vector<Peak> out;
  for (std::size_t i = 1; i + 1 < y.size(); ++i)
    if (y[i] > y[i - 1] && y[i] > y[i + 1] && y[i] >= min_height) out.push_back({i, x[i], y[i]});
  return out;
}

// Index of the grid point closest to `target`.
inline std::size_t nearest_index(const std::vector<double>& x, double target) {
  if (x.empty()) throw ValidationError("nearest_index on empty grid");
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (std::abs(x[i] - target) < std::abs(x[best] - target)) best = i;
  return best;
}

}  // namespace omlat
