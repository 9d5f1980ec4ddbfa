#pragma once
// Small statistics helpers: weighted least squares with standard errors and
// a deterministic multinomial bootstrap over histogram counts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "percolate/rng.hpp"

namespace perc {

struct LinFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double r_squared = 0.0;
  int n_points = 0;
};

// Weights are treated as inverse-variance proportional; the residual scale is
// re-estimated, so only relative weights matter.
inline LinFit weighted_least_squares(const std::vector<double>& x,
                                     const std::vector<double>& y,
                                     const std::vector<double>& w) {
  const int n = static_cast<int>(x.size());
  if (n < 2 || y.size() != x.size() || w.size() != x.size())
    throw std::invalid_argument("weighted_least_squares: need >= 2 matching points");
  double W = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    if (!(w[i] > 0.0))
      throw std::invalid_argument("weighted_least_squares: weights must be > 0");
    W += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
    sxx += w[i] * x[i] * x[i];
    sxy += w[i] * x[i] * y[i];
  }
  const double denom = W * sxx - sx * sx;
  if (!(std::abs(denom) > 0.0))
    throw std::invalid_argument("weighted_least_squares: degenerate x values");
  LinFit fit;
  fit.n_points = n;
  fit.slope = (W * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / W;
  double ss_res = 0, ss_tot = 0;
  const double y_mean = sy / W;
  for (int i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += w[i] * r * r;
    ss_tot += w[i] * (y[i] - y_mean) * (y[i] - y_mean);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  const double scale = n > 2 ? ss_res / (n - 2) : 0.0;
  fit.slope_se = std::sqrt(std::max(0.0, scale * W / denom));
  fit.intercept_se = std::sqrt(std::max(0.0, scale * sxx / denom));
  return fit;
}

// q-quantile with linear interpolation; v is copied and sorted.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

// Standard normal draw via Box-Muller; consumes u01 elements 2k and 2k+1.
inline double normal01(const SeedSpec& seed, std::uint64_t k) {
  const double u1 = u01(seed, 2 * k);
  const double u2 = u01(seed, 2 * k + 1);
  const double r = std::sqrt(-2.0 * std::log(std::max(u1, 1e-300)));
  return r * std::cos(2.0 * 3.14159265358979323846 * u2);
}

// One bootstrap replicate of an empirical histogram: draws `replicas`
// observations from the normalized counts. Deterministic in (seed,
// boot_index): draw r of replicate b consumes u01(seed with replica_index=b,
// element=r).
inline std::map<std::int64_t, std::uint64_t> bootstrap_counts(
    const std::map<std::int64_t, double>& mass, std::uint64_t replicas,
    SeedSpec seed, std::uint64_t boot_index) {
  std::vector<std::int64_t> sizes;
  std::vector<double> cdf;
  double total = 0.0;
  for (const auto& [n, c] : mass) {
    total += c;
    sizes.push_back(n);
    cdf.push_back(total);
  }
  if (!(total > 0.0)) throw std::invalid_argument("bootstrap_counts: empty histogram");
  for (double& c : cdf) c /= total;
  std::map<std::int64_t, std::uint64_t> out;
  seed.replica_index = boot_index;
  for (std::uint64_t r = 0; r < replicas; ++r) {
    const double u = u01(seed, r);
    const std::size_t idx =
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    ++out[sizes[std::min(idx, sizes.size() - 1)]];
  }
  return out;
}

}  // namespace perc
