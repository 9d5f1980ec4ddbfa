#pragma once
// Tail-decay fitting and critical-point scanning.
//
// Decay fits run count-weighted least squares on log tail probabilities,
// using only bins with enough empirical mass to trust the log transform.
//
// The critical scan estimates two thresholds from finite-volume data:
//   p_T: where the mean cluster size stops converging in the volume size.
//        Per grid point, divergence is declared when E|C| grows by more than
//        `growth_factor` per doubling of l. Below the threshold that ratio
//        tends to 1 with growing l, above it to the volume ratio, so the p
//        at which a ratio curve crosses the factor converges to the
//        threshold; the crossing's upward drift across sizes is measured and
//        extrapolated out.
//   p_H: same construction on the sphere-reaching probability theta_l(p)
//        against a fixed threshold level.
// Brackets are widened by a parametric bootstrap over cell statistics plus
// the measured drift step, which bounds the residual finite-size bias.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "percolate/engine.hpp"
#include "percolate/graph.hpp"
#include "percolate/parallel.hpp"
#include "percolate/rng.hpp"
#include "percolate/stats.hpp"

namespace perc {

// ---- exponential tail fits ----

struct TailCurve {
  std::vector<double> n;      // abscissae (cluster size or radius)
  std::vector<double> tail;   // P(X >= n)
  std::vector<double> count;  // empirical observations behind each bin
};

inline TailCurve size_tail_curve(const ClusterSizeDistribution& d) {
  TailCurve c;
  const double total =
      d.mode == DistMode::empirical ? static_cast<double>(d.replicas) : 1.0;
  for (std::int64_t n = 1; n <= d.max_observed(); ++n) {
    const double t = d.tail(n);
    c.n.push_back(static_cast<double>(n));
    c.tail.push_back(t);
    c.count.push_back(t * total);
  }
  return c;
}

// P(cluster of x reaches distance >= n) for n = 1..l, one BFS per replica.
inline TailCurve radius_tail_curve(const FiniteVolume& vol, Kind kind,
                                   double beta, int x, std::uint64_t replicas,
                                   SeedSpec seed) {
  if (!(beta > 0.0)) throw std::invalid_argument("radius_tail_curve: beta > 0");
  const double p = p_of_beta(beta);
  const int l = vol.l;
  using Hist = std::vector<std::uint64_t>;
  auto partials = map_chunks<Hist>(
      replicas, [&](std::size_t, std::uint64_t b, std::uint64_t e) {
        Hist h(static_cast<std::size_t>(l) + 1, 0);
        ClusterScratch sc;
        SeedSpec sd = seed;
        for (std::uint64_t r = b; r < e; ++r) {
          sd.replica_index = seed.replica_index + r;
          auto open = [&](std::int64_t el) {
            return u01(sd, static_cast<std::uint64_t>(el)) < p;
          };
          const ClusterStats st = grow_cluster(vol, kind, x, open, 0,
                                               vol.dist_to_domain.data(), sc);
          ++h[static_cast<std::size_t>(std::min<int>(st.max_dist, l))];
        }
        return h;
      });
  Hist h(static_cast<std::size_t>(l) + 1, 0);
  for (const auto& part : partials)
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += part[i];
  TailCurve c;
  std::uint64_t above = 0;
  std::vector<std::uint64_t> tail_counts(h.size(), 0);
  for (int n = l; n >= 1; --n) {
    above += h[static_cast<std::size_t>(n)];
    tail_counts[static_cast<std::size_t>(n)] = above;
  }
  for (int n = 1; n <= l; ++n) {
    c.n.push_back(static_cast<double>(n));
    c.tail.push_back(static_cast<double>(tail_counts[n]) /
                     static_cast<double>(replicas));
    c.count.push_back(static_cast<double>(tail_counts[n]));
  }
  return c;
}

struct DecayFit {
  double alpha = 0.0;  // tail ~ exp(intercept - alpha n)
  double alpha_se = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double n_min = 0.0, n_max = 0.0;  // fit window actually used
  int bins_used = 0;
};

constexpr double decay_fit_min_count = 50.0;

// Count-weighted least squares on log tail over the window [n_min, n_max].
// A bin is usable when it has at least `min_count` observations and its tail
// estimate is strictly inside (0, 1): saturated bins carry no decay
// information and empty ones no log.
inline DecayFit fit_exponential_tail(const TailCurve& curve, double n_min,
                                     double n_max,
                                     double min_count = decay_fit_min_count) {
  std::vector<double> xs, ys, ws;
  for (std::size_t i = 0; i < curve.n.size(); ++i) {
    if (curve.n[i] < n_min || curve.n[i] > n_max) continue;
    if (curve.count[i] < min_count) continue;
    if (!(curve.tail[i] > 0.0) || !(curve.tail[i] < 1.0)) continue;
    xs.push_back(curve.n[i]);
    ys.push_back(std::log(curve.tail[i]));
    ws.push_back(curve.count[i]);
  }
  if (xs.size() < 4) {
    std::ostringstream msg;
    msg << "fit_exponential_tail: only " << xs.size()
        << " usable bins in [" << n_min << ", " << n_max << "] (need 4); usable n:";
    for (double x : xs) msg << " " << x;
    throw std::invalid_argument(msg.str());
  }
  const LinFit fit = weighted_least_squares(xs, ys, ws);
  DecayFit out;
  out.alpha = -fit.slope;
  out.alpha_se = fit.slope_se;
  out.intercept = fit.intercept;
  out.r_squared = fit.r_squared;
  out.n_min = xs.front();
  out.n_max = xs.back();
  out.bins_used = static_cast<int>(xs.size());
  return out;
}

// ---- critical scan ----

struct ScanOptions {
  double growth_factor = 2.0;    // per-doubling ratio declaring divergence
  double reach_threshold = 0.25; // theta level whose crossing tracks p_H
  int bootstrap = 200;           // parametric bootstrap replicates
};

struct ScanCell {
  double p = 0.0;
  int l = 0;
  double mean_size = 0.0, mean_size_se = 0.0;
  double reach = 0.0, reach_se = 0.0;
  bool divergent = false;  // growth_factor verdict vs the next smaller l
};

struct Bracket {
  double lo = 0.0, hi = 0.0;
  double center() const { return 0.5 * (lo + hi); }
  double half_width() const { return 0.5 * (hi - lo); }
  bool contains(double p) const { return lo <= p && p <= hi; }
};

inline double interval_gap(const Bracket& a, const Bracket& b) {
  return std::max(0.0, std::max(a.lo, b.lo) - std::min(a.hi, b.hi));
}

struct CriticalScanResult {
  std::vector<ScanCell> cells;  // ordered by (l, p)
  Bracket p_T_bracket;
  Bracket p_H_bracket;
  double p_T_estimate = 0.0;
  double p_H_estimate = 0.0;
  double verdict_gap = 0.0;
  std::vector<double> growth_crossings;  // per doubling pair, at growth_factor
  std::vector<double> theta_crossings;   // per l, at reach_threshold
};

namespace detail {

// Last upward crossing of `target` by the piecewise-linear curve (p, v):
// the largest i with v[i] <= target < v[i+1], linearly interpolated.
// Returns NaN when the curve never crosses.
inline double last_upward_crossing(const std::vector<double>& p,
                                   const std::vector<double>& v,
                                   double target) {
  double out = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    if (v[i] <= target && v[i + 1] > target) {
      const double f = (target - v[i]) / (v[i + 1] - v[i]);
      out = p[i] + f * (p[i + 1] - p[i]);
    }
  }
  return out;
}

struct ScanSignature {
  double p_T = std::numeric_limits<double>::quiet_NaN();
  double p_H = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> growth_crossings;  // per doubling pair, at growth_factor
  std::vector<double> theta_crossings;   // per l, at reach_threshold
  double growth_drift = 0.0;  // last drift step of the growth crossings
  double theta_drift = 0.0;   // last drift step of the theta crossings
};

// Crossing drift decays roughly geometrically as l doubles (the crossing
// approaches the threshold like l^{-1/nu}); 0.65 is a conservative decay
// factor for the built-in families, and the bracket width absorbs the
// remainder through the measured drift term.
constexpr double scan_drift_decay = 0.65;

// Computes both threshold estimates from one table of cell statistics
// (sizes[li][pi], reach[li][pi]).
//
// p_T: each doubling-ratio curve r_i(p) = E_{l_{i+1}}/E_{l_i} rises
// monotonically from ~1 through the growth factor as p passes the threshold,
// so its crossing is unique and well conditioned; the crossings drift upward
// with volume size and the drift of the last two is extrapolated out.
//
// p_H: same treatment for the reach-probability curves against the fixed
// threshold.
inline ScanSignature scan_signature(const std::vector<double>& p_grid,
                                    const std::vector<std::vector<double>>& sizes,
                                    const std::vector<std::vector<double>>& reach,
                                    const ScanOptions& opts) {
  ScanSignature sig;
  const std::size_t nl = sizes.size();
  const double extrap = scan_drift_decay / (1.0 - scan_drift_decay);
  sig.growth_crossings.resize(nl - 1);
  for (std::size_t i = 0; i + 1 < nl; ++i) {
    std::vector<double> ratio(p_grid.size());
    for (std::size_t pi = 0; pi < p_grid.size(); ++pi)
      ratio[pi] = sizes[i + 1][pi] / std::max(sizes[i][pi], 1e-300);
    sig.growth_crossings[i] =
        last_upward_crossing(p_grid, ratio, opts.growth_factor);
  }
  const double ga = sig.growth_crossings[nl - 3];
  const double gb = sig.growth_crossings[nl - 2];
  if (!std::isnan(ga) && !std::isnan(gb)) {
    sig.growth_drift = std::max(0.0, gb - ga);
    sig.p_T = gb + extrap * sig.growth_drift;
  }
  sig.theta_crossings.resize(nl);
  for (std::size_t li = 0; li < nl; ++li)
    sig.theta_crossings[li] =
        last_upward_crossing(p_grid, reach[li], opts.reach_threshold);
  const double q2 = sig.theta_crossings[nl - 2];
  const double q3 = sig.theta_crossings[nl - 1];
  if (!std::isnan(q2) && !std::isnan(q3)) {
    sig.theta_drift = std::max(0.0, q3 - q2);
    sig.p_H = q3 + extrap * sig.theta_drift;
  }
  return sig;
}

}  // namespace detail

// One BFS per (p, l, x, replica) records cluster size and whether the
// cluster touched the sphere S(x, l). Cells are seeded by consecutive
// replica blocks so the table is independent of thread count.
inline CriticalScanResult scan_critical(std::shared_ptr<const GraphPatch> patch,
                                        Kind kind,
                                        const std::vector<double>& p_grid,
                                        const std::vector<int>& l_list,
                                        std::uint64_t replicas, SeedSpec seed,
                                        const ScanOptions& opts = {}) {
  if (l_list.size() < 3)
    throw std::invalid_argument("scan_critical: need at least 3 volume sizes");
  for (std::size_t i = 0; i + 1 < l_list.size(); ++i)
    if (l_list[i + 1] <= l_list[i])
      throw std::invalid_argument("scan_critical: l_list must be increasing");
  if (p_grid.size() < 3)
    throw std::invalid_argument("scan_critical: need at least 3 grid points");
  for (std::size_t i = 0; i + 1 < p_grid.size(); ++i)
    if (p_grid[i + 1] <= p_grid[i])
      throw std::invalid_argument("scan_critical: p_grid must be increasing");
  for (double p : p_grid)
    if (!(p > 0.0) || !(p < 1.0))
      throw std::invalid_argument("scan_critical: p_grid inside (0, 1)");

  CriticalScanResult res;
  const std::size_t nl = l_list.size(), np = p_grid.size();
  std::vector<std::vector<double>> mean_size(nl, std::vector<double>(np)),
      size_se(nl, std::vector<double>(np)), reach(nl, std::vector<double>(np)),
      reach_se(nl, std::vector<double>(np));
  std::uint64_t cell_index = 0;
  for (std::size_t li = 0; li < nl; ++li) {
    const FiniteVolume vol = finite_volume(patch, l_list[li]);
    const int l = l_list[li];
    for (std::size_t pi = 0; pi < np; ++pi) {
      const double p = p_grid[pi];
      struct Sums {
        double s = 0, s2 = 0;
        std::uint64_t hits = 0;
      };
      double sum_s = 0, sum_s2 = 0;
      std::uint64_t sum_hits = 0;
      const std::uint64_t per_x = replicas / vol.f_local.size() +
                                  (replicas % vol.f_local.size() ? 1 : 0);
      std::uint64_t used = 0;
      for (std::size_t xi = 0; xi < vol.f_local.size(); ++xi) {
        const int x = vol.f_local[xi];
        const std::uint64_t want = std::min(per_x, replicas - used);
        if (want == 0) break;
        const std::uint64_t base =
            seed.replica_index + cell_index * replicas + used;
        auto partials = map_chunks<Sums>(
            want, [&](std::size_t, std::uint64_t b, std::uint64_t e) {
              Sums s{};
              ClusterScratch sc;
              SeedSpec sd = seed;
              for (std::uint64_t r = b; r < e; ++r) {
                sd.replica_index = base + r;
                auto open = [&](std::int64_t el) {
                  return u01(sd, static_cast<std::uint64_t>(el)) < p;
                };
                const ClusterStats st = grow_cluster(
                    vol, kind, x, open, 0, vol.dist_to_domain.data(), sc);
                const double sz = static_cast<double>(st.size);
                s.s += sz;
                s.s2 += sz * sz;
                if (st.max_dist >= l) ++s.hits;
              }
              return s;
            });
        for (const auto& part : partials) {
          sum_s += part.s;
          sum_s2 += part.s2;
          sum_hits += part.hits;
        }
        used += want;
      }
      const double R = static_cast<double>(used);
      const double ms = sum_s / R;
      const double var_s = std::max(0.0, sum_s2 / R - ms * ms);
      const double th = static_cast<double>(sum_hits) / R;
      mean_size[li][pi] = ms;
      size_se[li][pi] = std::sqrt(var_s / R);
      reach[li][pi] = th;
      reach_se[li][pi] = std::sqrt(th * (1.0 - th) / R);
      ++cell_index;
    }
  }

  for (std::size_t li = 0; li < nl; ++li)
    for (std::size_t pi = 0; pi < np; ++pi) {
      ScanCell c;
      c.p = p_grid[pi];
      c.l = l_list[li];
      c.mean_size = mean_size[li][pi];
      c.mean_size_se = size_se[li][pi];
      c.reach = reach[li][pi];
      c.reach_se = reach_se[li][pi];
      c.divergent = li > 0 && mean_size[li][pi] >
                                  opts.growth_factor * mean_size[li - 1][pi];
      res.cells.push_back(c);
    }

  const detail::ScanSignature point =
      detail::scan_signature(p_grid, mean_size, reach, opts);
  if (std::isnan(point.p_T)) {
    std::ostringstream msg;
    msg << "scan_critical: mean-size growth never crosses the factor "
        << opts.growth_factor << " per doubling within [" << p_grid.front()
        << ", " << p_grid.back()
        << "]; refine or extend the p grid around the suspected threshold";
    throw std::runtime_error(msg.str());
  }
  if (std::isnan(point.p_H)) {
    std::ostringstream msg;
    msg << "scan_critical: reach probability never crosses "
        << opts.reach_threshold << " on every volume within ["
        << p_grid.front() << ", " << p_grid.back()
        << "]; refine or extend the p grid";
    throw std::runtime_error(msg.str());
  }
  res.p_T_estimate = point.p_T;
  res.p_H_estimate = point.p_H;
  res.growth_crossings = point.growth_crossings;
  res.theta_crossings = point.theta_crossings;

  // Parametric bootstrap: jitter every cell mean by its standard error and
  // recompute both estimates; skip replicates where a crossing disappears.
  std::vector<double> boot_T, boot_H;
  SeedSpec bseed = seed;
  bseed.stream = Stream::bootstrap;
  for (int b = 0; b < opts.bootstrap; ++b) {
    SeedSpec sb = bseed;
    sb.replica_index = seed.replica_index + static_cast<std::uint64_t>(b);
    auto s2 = mean_size;
    auto r2 = reach;
    std::uint64_t k = 0;
    for (std::size_t li = 0; li < nl; ++li)
      for (std::size_t pi = 0; pi < np; ++pi) {
        s2[li][pi] = std::max(1.0, s2[li][pi] +
                                       size_se[li][pi] * normal01(sb, k++));
        r2[li][pi] = std::clamp(
            r2[li][pi] + reach_se[li][pi] * normal01(sb, k++), 0.0, 1.0);
      }
    const detail::ScanSignature sig = detail::scan_signature(p_grid, s2, r2, opts);
    if (!std::isnan(sig.p_T)) boot_T.push_back(sig.p_T);
    if (!std::isnan(sig.p_H)) boot_H.push_back(sig.p_H);
  }
  const double grid_step = (p_grid.back() - p_grid.front()) /
                           static_cast<double>(p_grid.size() - 1);
  // Robust spread (central 68% of survivors, scaled to ~95%): the crossing
  // functional is discontinuous, so a few replicates can jump to a different
  // grid segment; extreme quantiles would let those artifacts swamp the
  // bracket.
  auto spread = [&](std::vector<double>& boot) {
    if (boot.size() < 8) return grid_step;  // too few survivors: grid-scale
    const double sigma = 0.5 * (quantile(boot, 0.84) - quantile(boot, 0.16));
    return 1.96 * sigma;
  };
  const double hw_T =
      std::max({spread(boot_T), 0.5 * grid_step, point.growth_drift});
  const double hw_H =
      std::max({spread(boot_H), 0.5 * grid_step, point.theta_drift});
  res.p_T_bracket = {point.p_T - hw_T, point.p_T + hw_T};
  res.p_H_bracket = {point.p_H - hw_H, point.p_H + hw_H};
  res.verdict_gap = interval_gap(res.p_T_bracket, res.p_H_bracket);
  return res;
}

}  // namespace perc
