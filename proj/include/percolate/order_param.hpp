#pragma once
// Order parameter M_y(beta, h) = 1 - sum_n P(|C_y| = n) e^{-nh} and friends.
// Two independent routes are kept alive on purpose: the cluster-size series
// (computed from sampled or exact distributions) and the blue-vertex coupling
// (y reaches an independently marked vertex). Their agreement is one of the
// main correctness gates.

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "percolate/engine.hpp"
#include "percolate/oracle.hpp"

namespace perc {

// Caps cluster growth once e^{-nh} is below e^{-24} (~3.8e-11): pooled mass
// at the cap changes the series transforms by less than that, far under any
// Monte Carlo error bar here. Returns 0 (uncapped) when the cap would not
// bite.
inline std::int64_t default_size_cap(const FiniteVolume& vol, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("default_size_cap: h must be > 0");
  const double raw = std::ceil(24.0 / h);
  if (raw >= static_cast<double>(vol.vertex_count())) return 0;
  return static_cast<std::int64_t>(raw);
}

namespace detail {

struct SeriesSums {
  double t = 0.0;    // E e^{-nh}
  double t2 = 0.0;   // E e^{-2nh}
  double u = 0.0;    // E n e^{-nh}
  double u2 = 0.0;   // E n^2 e^{-2nh}
  double n1 = 0.0;   // E n
  double n2 = 0.0;   // E n^2
  double n3t = 0.0;  // E n^3 e^{-nh}
};

inline SeriesSums series_sums(const ClusterSizeDistribution& dist, double h) {
  SeriesSums s;
  const double norm = dist.mode == DistMode::exact
                          ? 1.0
                          : static_cast<double>(dist.replicas);
  for (const auto& [n, w] : dist.mass) {
    const double q = w / norm;
    const double nn = static_cast<double>(n);
    const double t = std::exp(-h * nn);
    s.t += q * t;
    s.t2 += q * t * t;
    s.u += q * nn * t;
    s.u2 += q * nn * nn * t * t;
    s.n1 += q * nn;
    s.n2 += q * nn * nn;
    s.n3t += q * nn * nn * nn * t;
  }
  return s;
}

}  // namespace detail

// M = 1 - sum_n P(n) e^{-nh}, with the telescoped tail form
// sum_{n>=1} P(size >= n) (e^{-(n-1)h} - e^{-nh}) recomputed as a guard:
// the two must agree to 1e-12 on every input.
inline Estimate M_from_distribution(const ClusterSizeDistribution& dist,
                                    double h) {
  if (!(h > 0.0))
    throw std::invalid_argument("M_from_distribution: h must be > 0");
  if (dist.mode == DistMode::empirical && dist.replicas == 0)
    throw std::invalid_argument("M_from_distribution: empty distribution");
  const auto s = detail::series_sums(dist, h);
  const double m_def = 1.0 - s.t;
  // Tail form: between consecutive stored sizes the tail is constant and the
  // inner sum telescopes.
  const double norm = dist.mode == DistMode::exact
                          ? 1.0
                          : static_cast<double>(dist.replicas);
  double suffix = 0.0;
  for (const auto& [n, w] : dist.mass)
    if (n >= 1) suffix += w / norm;
  double m_tail = 0.0;
  std::int64_t prev = 0;
  for (const auto& [n, w] : dist.mass) {
    if (n < 1) continue;
    m_tail += suffix * (std::exp(-h * static_cast<double>(prev)) -
                        std::exp(-h * static_cast<double>(n)));
    suffix -= w / norm;
    prev = n;
  }
  // The n = 0 class (unmodified site cluster of a closed vertex) contributes
  // 1 - e^{0} = 0 to both forms; the tail form sees it through the missing
  // suffix mass.
  if (std::abs(m_def - m_tail) > 1e-12)
    throw std::logic_error("M_from_distribution: series and tail forms disagree");
  Estimate out;
  out.value = m_def;
  if (dist.mode == DistMode::empirical) {
    const double var = std::max(0.0, s.t2 - s.t * s.t);
    out.std_err = std::sqrt(var / static_cast<double>(dist.replicas));
  }
  return out;
}

// dM/dh = sum_n n P(n) e^{-nh}. Guarded by a central finite difference of the
// series itself; the allowance is 1e-5 relative plus the provable truncation
// term (step^2 / 6) * sup |d3M/dh3|, bounded by the empirical third moment at
// h - step.
inline Estimate dMdh_from_distribution(const ClusterSizeDistribution& dist,
                                       double h) {
  if (!(h > 0.0))
    throw std::invalid_argument("dMdh_from_distribution: h must be > 0");
  const auto s = detail::series_sums(dist, h);
  const double step = 1e-4;
  if (h > step) {
    auto m_at = [&](double hh) { return 1.0 - detail::series_sums(dist, hh).t; };
    const double fd = (m_at(h + step) - m_at(h - step)) / (2.0 * step);
    const double third = detail::series_sums(dist, h - step).n3t;
    const double allow = 1e-5 * std::max(std::abs(s.u), 1e-15) +
                         step * step / 6.0 * third + 1e-15;
    if (std::abs(fd - s.u) > allow)
      throw std::logic_error(
          "dMdh_from_distribution: finite difference disagrees with series");
  }
  Estimate out;
  out.value = s.u;
  if (dist.mode == DistMode::empirical) {
    const double var = std::max(0.0, s.u2 - s.u * s.u);
    out.std_err = std::sqrt(var / static_cast<double>(dist.replicas));
  }
  return out;
}

inline Estimate mean_cluster_size(const ClusterSizeDistribution& dist) {
  detail::SeriesSums s = detail::series_sums(dist, 1.0);  // t-fields unused
  Estimate out;
  out.value = s.n1;
  if (dist.mode == DistMode::empirical) {
    const double var = std::max(0.0, s.n2 - s.n1 * s.n1);
    out.std_err = std::sqrt(var / static_cast<double>(dist.replicas));
  }
  return out;
}

// P(x reaches a blue vertex). Blue marks live on their own stream with the
// same (master, replica), so they are independent of the percolation bits
// replica by replica. The walk stops at the first blue member.
inline Estimate M_blue_mc(const FiniteVolume& vol, Kind kind, double beta,
                          double h, int x, std::uint64_t replicas,
                          SeedSpec seed) {
  if (!(beta > 0.0)) throw std::invalid_argument("M_blue_mc: beta must be > 0");
  if (!(h > 0.0)) throw std::invalid_argument("M_blue_mc: h must be > 0");
  if (x < 0 || x >= vol.vertex_count())
    throw std::out_of_range("M_blue_mc: vertex out of range");
  const double p = p_of_beta(beta);
  const double blue_p = -std::expm1(-h);
  auto partials = map_chunks<std::uint64_t>(
      replicas, [&](std::size_t, std::uint64_t b, std::uint64_t e) {
        std::uint64_t hits = 0;
        ClusterScratch sc;
        SeedSpec perc_seed = seed;
        for (std::uint64_t r = b; r < e; ++r) {
          perc_seed.replica_index = seed.replica_index + r;
          SeedSpec blue_seed = perc_seed;
          blue_seed.stream = Stream::blue_layer;
          auto blue = [&](int v) { return u01(blue_seed, v) < blue_p; };
          auto open = [&](int i) { return u01(perc_seed, i) < p; };
          sc.prepare(vol.vertex_count());
          sc.mark[x] = sc.epoch;
          sc.queue.push_back(x);
          bool reached = blue(x);
          std::size_t head = 0;
          while (!reached && head < sc.queue.size()) {
            const int u = sc.queue[head++];
            for (std::int64_t a = vol.arc_start[u];
                 !reached && a < vol.arc_start[u + 1]; ++a) {
              const int v = vol.arc_to[a];
              if (sc.mark[v] == sc.epoch) continue;
              const bool step_open =
                  kind == Kind::bond ? open(vol.arc_edge[a]) : open(v);
              if (!step_open) continue;
              sc.mark[v] = sc.epoch;
              sc.queue.push_back(v);
              reached = blue(v);
            }
          }
          if (reached) ++hits;
        }
        return hits;
      });
  std::uint64_t hits = 0;
  for (auto hcount : partials) hits += hcount;
  const double q = static_cast<double>(hits) / static_cast<double>(replicas);
  return {q, std::sqrt(q * (1.0 - q) / static_cast<double>(replicas))};
}

struct OrderParameterPoint {
  double beta = 0.0;
  double h = 0.0;
  double M = 0.0;
  double M_std_err = 0.0;
  double dMdh = 0.0;
  double dMdh_std_err = 0.0;
  int volume_l = 0;
  std::map<int, Estimate> per_vertex_M;  // key: patch-global fundamental vertex
};

// Aggregate M = sum over fundamental-domain vertices. Each vertex gets its
// own replica block (replica index = block * replicas + r), so the per-vertex
// estimates are independent and the aggregate error adds in quadrature.
inline OrderParameterPoint finite_volume_M(const FiniteVolume& vol, Kind kind,
                                           double beta, double h,
                                           std::uint64_t replicas,
                                           SeedSpec seed) {
  OrderParameterPoint pt;
  pt.beta = beta;
  pt.h = h;
  pt.volume_l = vol.l;
  const std::int64_t cap = default_size_cap(vol, h);
  for (std::size_t xi = 0; xi < vol.f_local.size(); ++xi) {
    const int x = vol.f_local[xi];
    const double p = p_of_beta(beta);
    using Counts = std::map<std::int64_t, std::uint64_t>;
    auto partials = map_chunks<Counts>(
        replicas, [&](std::size_t, std::uint64_t b, std::uint64_t e) {
          Counts local;
          ClusterScratch sc;
          SeedSpec s = seed;
          for (std::uint64_t r = b; r < e; ++r) {
            s.replica_index = seed.replica_index + xi * replicas + r;
            const std::int64_t n =
                kind == Kind::bond ? bond_cluster_size(vol, x, p, s, cap, sc)
                                   : site_cluster_size(vol, x, p, s, cap, sc);
            ++local[n];
          }
          return local;
        });
    ClusterSizeDistribution d;
    d.kind = kind;
    d.mode = DistMode::empirical;
    d.replicas = replicas;
    d.size_cap = cap;
    d.beta = beta;
    d.p = p;
    Counts merged;
    for (const auto& part : partials)
      for (const auto& [n, c] : part) merged[n] += c;
    for (const auto& [n, c] : merged) d.mass[n] = static_cast<double>(c);
    const Estimate mx = M_from_distribution(d, h);
    const Estimate dx = dMdh_from_distribution(d, h);
    pt.per_vertex_M[vol.vertices[x]] = mx;
    pt.M += mx.value;
    pt.M_std_err = std::sqrt(pt.M_std_err * pt.M_std_err +
                             mx.std_err * mx.std_err);
    pt.dMdh += dx.value;
    pt.dMdh_std_err = std::sqrt(pt.dMdh_std_err * pt.dMdh_std_err +
                                dx.std_err * dx.std_err);
  }
  return pt;
}

// Exact counterpart on enumerable volumes.
inline OrderParameterPoint finite_volume_M_exact(const FiniteVolume& vol,
                                                 Kind kind, double beta,
                                                 double h) {
  OrderParameterPoint pt;
  pt.beta = beta;
  pt.h = h;
  pt.volume_l = vol.l;
  for (int x : vol.f_local) {
    const auto polys = exact_cluster_distribution(vol, kind, x);
    const auto d = exact_distribution_at(polys, kind, beta);
    const Estimate mx = M_from_distribution(d, h);
    pt.per_vertex_M[vol.vertices[x]] = mx;
    pt.M += mx.value;
    pt.dMdh += dMdh_from_distribution(d, h).value;
  }
  return pt;
}

// ---- basic volume-modification bound: M_y <= M_x + e^{-lh} ----

struct ModificationCheck {
  int y = 0;  // local vertex id in the volume
  int x = 0;  // local id of y's orbit representative
  double beta = 0.0;
  double h = 0.0;
  int l = 0;
  double M_y = 0.0;
  double M_x = 0.0;
  double bound = 0.0;  // e^{-l h}
  double slack = 0.0;  // M_x + bound - M_y
  double std_err = 0.0;  // of the slack (paired); 0 in exact mode
  bool exact = false;
  bool pass = false;
};

inline int orbit_representative_local(const FiniteVolume& vol, int y) {
  const int orbit = vol.orbit_of(y);
  for (int x : vol.f_local)
    if (vol.orbit_of(x) == orbit) return x;
  throw std::logic_error("orbit_representative_local: orbit has no representative");
}

// Checks every vertex of the volume in one pass. Per replica a single
// union-find over the configuration yields every cluster size, and the slack
// is estimated from paired per-replica differences (same configuration for y
// and its representative), which is what makes small slacks resolvable.
inline std::vector<ModificationCheck> check_basic_modification_all(
    const FiniteVolume& vol, Kind kind, double beta, double h,
    std::uint64_t replicas, SeedSpec seed) {
  if (!(beta > 0.0) || !(h > 0.0))
    throw std::invalid_argument("check_basic_modification_all: beta, h > 0");
  const int n = vol.vertex_count();
  const double bound = std::exp(-h * static_cast<double>(vol.l));
  std::vector<int> rep(n);
  for (int y = 0; y < n; ++y) rep[y] = orbit_representative_local(vol, y);

  struct Partial {
    std::vector<double> sum_d;   // per y: sum of T_y - T_rep
    std::vector<double> sum_d2;  //        sum of squares
    std::vector<double> sum_t;   //        sum of T_y
  };
  auto partials = map_chunks<Partial>(
      replicas, [&](std::size_t, std::uint64_t b, std::uint64_t e) {
        Partial part;
        part.sum_d.assign(n, 0.0);
        part.sum_d2.assign(n, 0.0);
        part.sum_t.assign(n, 0.0);
        std::vector<double> t(n);
        std::vector<int> root_buf;
        SeedSpec s = seed;
        for (std::uint64_t r = b; r < e; ++r) {
          s.replica_index = seed.replica_index + r;
          const Configuration c = kind == Kind::bond ? sample_bond(vol, beta, s)
                                                     : sample_site(vol, beta, s);
          UnionFind uf = open_components(vol, c);
          for (int y = 0; y < n; ++y) {
            const std::int64_t sz =
                kind == Kind::bond
                    ? uf.size[uf.find(y)]
                    : modified_cluster_size_from_uf(vol, c, uf, y, root_buf);
            t[y] = std::exp(-h * static_cast<double>(sz));
          }
          for (int y = 0; y < n; ++y) {
            const double d = t[y] - t[rep[y]];
            part.sum_d[y] += d;
            part.sum_d2[y] += d * d;
            part.sum_t[y] += t[y];
          }
        }
        return part;
      });
  std::vector<double> sum_d(n, 0.0), sum_d2(n, 0.0), sum_t(n, 0.0);
  for (const auto& part : partials)
    for (int y = 0; y < n; ++y) {
      sum_d[y] += part.sum_d[y];
      sum_d2[y] += part.sum_d2[y];
      sum_t[y] += part.sum_t[y];
    }
  // slack = bound + mean(T_y - T_rep), since M_y - M_x = -mean(T_y - T_rep);
  // the paired difference is what keeps its error bar small.
  std::vector<ModificationCheck> out;
  out.reserve(n);
  const double R = static_cast<double>(replicas);
  for (int y = 0; y < n; ++y) {
    ModificationCheck mc;
    mc.y = y;
    mc.x = rep[y];
    mc.beta = beta;
    mc.h = h;
    mc.l = vol.l;
    mc.bound = bound;
    const double mean_d = sum_d[y] / R;
    const double var_d = std::max(0.0, sum_d2[y] / R - mean_d * mean_d);
    mc.slack = bound + mean_d;
    mc.std_err = std::sqrt(var_d / R);
    mc.M_y = 1.0 - sum_t[y] / R;
    mc.M_x = 1.0 - sum_t[rep[y]] / R;
    mc.exact = false;
    mc.pass = mc.slack >= -3.0 * mc.std_err;
    out.push_back(mc);
  }
  return out;
}

// Single-vertex check; exact on enumerable volumes, paired MC otherwise.
inline ModificationCheck check_basic_modification(const FiniteVolume& vol,
                                                  Kind kind, double beta,
                                                  double h, int y,
                                                  std::uint64_t replicas = 100000,
                                                  SeedSpec seed = {0, 0,
                                                                   Stream::bond_layer}) {
  if (y < 0 || y >= vol.vertex_count())
    throw std::out_of_range("check_basic_modification: vertex out of range");
  ModificationCheck mc;
  mc.y = y;
  mc.x = orbit_representative_local(vol, y);
  mc.beta = beta;
  mc.h = h;
  mc.l = vol.l;
  mc.bound = std::exp(-h * static_cast<double>(vol.l));
  if (element_count(vol, kind) <= enumeration_cap_bits) {
    const auto dy = exact_distribution_at(
        exact_cluster_distribution(vol, kind, y), kind, beta);
    const auto dx = exact_distribution_at(
        exact_cluster_distribution(vol, kind, mc.x), kind, beta);
    mc.M_y = M_from_distribution(dy, h).value;
    mc.M_x = M_from_distribution(dx, h).value;
    mc.slack = mc.M_x + mc.bound - mc.M_y;
    mc.exact = true;
    mc.pass = mc.slack >= -1e-12;
    return mc;
  }
  const auto all = check_basic_modification_all(vol, kind, beta, h, replicas, seed);
  return all[y];
}

// M^{Lambda_l} along an increasing l list; callers inspect the successive
// differences (they shrink subcritically, and are allowed not to near or
// above criticality).
inline std::vector<OrderParameterPoint> convergence_scan(
    std::shared_ptr<const GraphPatch> patch, Kind kind, double beta, double h,
    const std::vector<int>& l_list, std::uint64_t replicas, SeedSpec seed) {
  std::vector<OrderParameterPoint> out;
  for (int l : l_list) {
    const FiniteVolume vol = finite_volume(patch, l);
    out.push_back(finite_volume_M(vol, kind, beta, h, replicas, seed));
  }
  return out;
}

}  // namespace perc
