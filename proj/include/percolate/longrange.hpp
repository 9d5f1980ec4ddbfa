#pragma once
// Partially oriented long-range percolation: every vertex pair carries an
// unoriented coupling J_[x,y] and each ordered pair an oriented coupling
// J_[x,y>, both functions of the two orbit labels and the graph distance.
// A pair is open with probability 1 - e^{-beta J}. Clusters are forward
// reachability sets: unoriented links work both ways, oriented links only
// from their source.
//
// Truncation ladder (certified, not assumed):
//   J_r        = max over fundamental x of the coupling mass at distance >= r
//   K_n        = n * sum_{k=1..n} (n J0)^{k-1}
//   L_n        = smallest L with J_{L/n} K_n <= 1/n^2   (explicit 1/n^2 rate)
//   n_l        = max { n : L_n <= l }
//   g_l(beta)  = beta J_{l/n_l} sum_{k=1..n_l} (beta J0)^{k-1}
//   f_l(b, h)  = g_l(b) + e^{-n_l h}
// J at a real argument r means the tail over integer distances >= r, i.e.
// J_tail[ceil(r)].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "percolate/diffineq.hpp"
#include "percolate/engine.hpp"
#include "percolate/graph.hpp"
#include "percolate/order_param.hpp"
#include "percolate/parallel.hpp"
#include "percolate/rng.hpp"

namespace perc {

struct KernelSpec {
  enum class Family { zero, exponential, power, finite_range };
  Family family = Family::zero;
  double rate = 1.0;             // exponential: e^{-rate d}
  double exponent = 2.0;         // power: d^{-exponent}
  int range = 1;                 // finite_range: support d in [1, range]
  std::vector<double> weights;   // finite_range: weights[d-1]

  // Built-in families depend on distance only; the orbit arguments are part
  // of the interface so orbit-sensitive kernels can slot in.
  double eval(int /*orbit_u*/, int /*orbit_v*/, int d) const {
    if (d <= 0) return 0.0;
    switch (family) {
      case Family::zero:
        return 0.0;
      case Family::exponential:
        return std::exp(-rate * static_cast<double>(d));
      case Family::power:
        return std::pow(static_cast<double>(d), -exponent);
      case Family::finite_range:
        return d <= range ? weights[static_cast<std::size_t>(d - 1)] : 0.0;
    }
    return 0.0;
  }

  std::string name() const {
    std::ostringstream s;
    switch (family) {
      case Family::zero: s << "zero"; break;
      case Family::exponential: s << "exponential(rate=" << rate << ")"; break;
      case Family::power: s << "power(exponent=" << exponent << ")"; break;
      case Family::finite_range: s << "finite_range(R=" << range << ")"; break;
    }
    return s.str();
  }
};

struct LongRangeSpec {
  std::shared_ptr<const GraphPatch> patch;
  KernelSpec unoriented;
  KernelSpec oriented;
  double J0 = 0.0;
  // J_tail[r] = max_x sum over y with d(x,y) >= r of (J_un + J_or-out);
  // index 0..max_distance+1 (last entry 0).
  std::vector<double> J_tail;
  int trunc_radius = 0;          // pairs with d >= trunc_radius are omitted
  double omitted_weight = 0.0;   // per-vertex coupling mass of omitted pairs

  double tail_at(double r) const {
    if (r <= 0.0) return J_tail.empty() ? 0.0 : J_tail[0];
    const double rc = std::ceil(r - 1e-12);
    const std::size_t idx = static_cast<std::size_t>(rc);
    if (idx >= J_tail.size()) return 0.0;
    return J_tail[idx];
  }
};

constexpr double longrange_summability_gate = 1e-9;
constexpr double longrange_pair_cut_ratio = 1e-12;

inline LongRangeSpec build_longrange_spec(std::shared_ptr<const GraphPatch> patch,
                                          KernelSpec unoriented,
                                          KernelSpec oriented = {}) {
  if (!patch) throw std::invalid_argument("build_longrange_spec: null patch");
  LongRangeSpec spec;
  spec.patch = patch;
  spec.unoriented = unoriented;
  spec.oriented = oriented;
  int max_d = 0;
  std::vector<std::vector<double>> tails;  // per fundamental vertex, by r
  for (int x : patch->fundamental_domain) {
    const auto dist = distances_from(*patch, {x});
    int local_max = 0;
    for (int d : dist)
      if (d != infinite_distance) local_max = std::max(local_max, d);
    std::vector<double> by_dist(local_max + 1, 0.0);
    for (int y = 0; y < patch->vertex_count(); ++y) {
      if (y == x || dist[y] == infinite_distance) continue;
      const double j = unoriented.eval(patch->orbit_label[x], patch->orbit_label[y],
                                       dist[y]) +
                       oriented.eval(patch->orbit_label[x], patch->orbit_label[y],
                                     dist[y]);
      by_dist[dist[y]] += j;
    }
    std::vector<double> tail(local_max + 2, 0.0);
    for (int r = local_max; r >= 0; --r) tail[r] = tail[r + 1] + by_dist[r];
    spec.J0 = std::max(spec.J0, tail[0]);
    tails.push_back(std::move(tail));
    max_d = std::max(max_d, local_max);
  }
  spec.J_tail.assign(max_d + 2, 0.0);
  for (const auto& tail : tails)
    for (std::size_t r = 0; r < tail.size(); ++r)
      spec.J_tail[r] = std::max(spec.J_tail[r], tail[r]);
  // Summability gate: the coupling tail must drop below the threshold inside
  // the patch, the computable stand-in for J0 < infinity on the full graph.
  // The table ends with a sentinel zero past the last observed distance; the
  // gate looks at the last real entry (tail at the patch's max distance).
  const double last_real_tail =
      spec.J_tail.size() >= 2 ? spec.J_tail[spec.J_tail.size() - 2] : 0.0;
  if (!(last_real_tail < longrange_summability_gate)) {
    std::ostringstream msg;
    msg << "build_longrange_spec: coupling tail at the patch boundary is "
        << last_real_tail << ", not below " << longrange_summability_gate
        << "; the finite-J0 condition cannot be certified on this patch";
    throw std::invalid_argument(msg.str());
  }
  spec.trunc_radius = static_cast<int>(spec.J_tail.size()) - 1;
  for (int r = 0; r < static_cast<int>(spec.J_tail.size()); ++r)
    if (spec.J_tail[r] < longrange_pair_cut_ratio * std::max(spec.J0, 1e-300)) {
      spec.trunc_radius = r;
      break;
    }
  spec.omitted_weight =
      spec.trunc_radius < static_cast<int>(spec.J_tail.size())
          ? spec.J_tail[spec.trunc_radius]
          : 0.0;
  return spec;
}

// ---- truncation ladder ----

struct TruncationBound {
  int l = 0;
  int n_l = 0;
  double r_used = 0.0;   // l / n_l
  double J_r_used = 0.0; // J_tail at that radius
  double J0 = 0.0;

  // beta J_{l/n_l} sum_{k=1..n_l} (beta J0)^{k-1}; geometric sum in log space
  // once the terms get big.
  double g(double beta) const {
    if (!(beta > 0.0)) throw std::invalid_argument("TruncationBound::g: beta > 0");
    if (J_r_used <= 0.0) return 0.0;
    const double a = beta * J0;
    double series;
    if (n_l <= 1) {
      series = 1.0;
    } else if (a <= 0.0) {
      series = 1.0;
    } else if ((n_l - 1) * std::log(std::max(a, 1e-300)) < 600.0) {
      series = 0.0;
      double term = 1.0;
      for (int k = 1; k <= n_l; ++k) {
        series += term;
        term *= a;
      }
    } else {
      // log-space: series ~ a^{n_l - 1} * (1 - a^{-n_l}) / (1 - 1/a), a > 1
      const double log_a = std::log(a);
      const double log_series =
          (n_l - 1) * log_a +
          std::log(-std::expm1(-n_l * log_a)) - std::log(-std::expm1(-log_a));
      return std::exp(std::log(beta) + std::log(J_r_used) + log_series);
    }
    return beta * J_r_used * series;
  }
  double f(double beta, double h) const {
    if (!(h > 0.0)) throw std::invalid_argument("TruncationBound::f: h > 0");
    return g(beta) + std::exp(-static_cast<double>(n_l) * h);
  }
};

inline double truncation_K_n(double J0, int n) {
  double series = 0.0, term = 1.0;
  for (int k = 1; k <= n; ++k) {
    series += term;
    term *= n * J0;
    if (!std::isfinite(series + term)) return std::numeric_limits<double>::infinity();
  }
  return n * series;
}

// L_n = smallest L with J_{L/n} K_n <= 1/n^2; capped by the patch tail table.
inline int truncation_L_n(const LongRangeSpec& spec, int n) {
  const double kn = truncation_K_n(spec.J0, n);
  const double target = 1.0 / (static_cast<double>(n) * n);
  const int max_l = static_cast<int>(spec.J_tail.size()) * n + n;
  for (int L = 1; L <= max_l; ++L)
    if (spec.tail_at(static_cast<double>(L) / n) * kn <= target) return L;
  return -1;  // not certifiable within the patch
}

inline TruncationBound truncation_bound(const LongRangeSpec& spec, int l) {
  if (l < 1) throw std::invalid_argument("truncation_bound: l >= 1");
  TruncationBound tb;
  tb.l = l;
  tb.J0 = spec.J0;
  int best = 0;
  for (int n = 1; n <= l; ++n) {
    const int ln = truncation_L_n(spec, n);
    if (ln > 0 && ln <= l) best = n;
  }
  if (best == 0) {
    std::ostringstream msg;
    msg << "truncation_bound: no n with L_n <= " << l
        << " is certifiable for this kernel (volume too small)";
    throw std::invalid_argument(msg.str());
  }
  tb.n_l = best;
  tb.r_used = static_cast<double>(l) / best;
  tb.J_r_used = spec.tail_at(tb.r_used);
  return tb;
}

// ---- realized pair tables ----

struct LongRangePair {
  int u = 0;
  int v = 0;
  double J = 0.0;
  bool oriented = false;  // oriented: usable from u toward v only
};

struct LongRangeVolume {
  FiniteVolume base;
  std::shared_ptr<const LongRangeSpec> spec;
  std::vector<LongRangePair> pairs;
  std::vector<std::int64_t> arc_start;  // arcs usable FROM each local vertex
  std::vector<int> arc_to;
  std::vector<std::int64_t> arc_pair;
  int max_out_degree = 0;

  std::int64_t pair_count() const {
    return static_cast<std::int64_t>(pairs.size());
  }
  std::vector<double> pair_probs(double beta) const {
    if (!(beta > 0.0))
      throw std::invalid_argument("pair_probs: beta must be > 0");
    std::vector<double> p(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i)
      p[i] = -std::expm1(-beta * pairs[i].J);
    return p;
  }
};

// Sorts the pair table canonically and rebuilds the usable-arc lists:
// unoriented pairs give an arc at both endpoints, oriented ones only at the
// source.
inline void finalize_longrange_arcs(LongRangeVolume& lr) {
  const int n = lr.base.vertex_count();
  std::sort(lr.pairs.begin(), lr.pairs.end(),
            [](const LongRangePair& a, const LongRangePair& b) {
              if (a.u != b.u) return a.u < b.u;
              if (a.v != b.v) return a.v < b.v;
              return a.oriented < b.oriented;
            });
  std::vector<int> deg(n, 0);
  for (const auto& pr : lr.pairs) {
    ++deg[pr.u];
    if (!pr.oriented) ++deg[pr.v];
  }
  lr.arc_start.assign(n + 1, 0);
  for (int v = 0; v < n; ++v) lr.arc_start[v + 1] = lr.arc_start[v] + deg[v];
  lr.arc_to.assign(lr.arc_start[n], 0);
  lr.arc_pair.assign(lr.arc_start[n], 0);
  std::vector<std::int64_t> cursor(lr.arc_start.begin(), lr.arc_start.end() - 1);
  for (std::int64_t i = 0; i < lr.pair_count(); ++i) {
    const auto& pr = lr.pairs[i];
    lr.arc_to[cursor[pr.u]] = pr.v;
    lr.arc_pair[cursor[pr.u]++] = i;
    if (!pr.oriented) {
      lr.arc_to[cursor[pr.v]] = pr.u;
      lr.arc_pair[cursor[pr.v]++] = i;
    }
  }
  lr.max_out_degree = 0;
  for (int v = 0; v < n; ++v) lr.max_out_degree = std::max(lr.max_out_degree, deg[v]);
}

inline LongRangeVolume build_longrange_volume(
    std::shared_ptr<const LongRangeSpec> spec, int l) {
  if (!spec) throw std::invalid_argument("build_longrange_volume: null spec");
  LongRangeVolume lr;
  lr.base = finite_volume(spec->patch, l);
  lr.spec = spec;
  const GraphPatch& patch = *spec->patch;
  const int n = lr.base.vertex_count();
  const int reach = std::max(0, spec->trunc_radius - 1);
  for (int ul = 0; ul < n; ++ul) {
    const int ug = lr.base.vertices[ul];
    const auto dist = distances_from(patch, {ug}, reach);
    for (int vl = 0; vl < n; ++vl) {
      if (vl == ul) continue;
      const int vg = lr.base.vertices[vl];
      const int d = dist[vg];
      if (d == infinite_distance || d > reach) continue;
      const int ou = patch.orbit_label[ug], ov = patch.orbit_label[vg];
      if (vl > ul) {
        const double ju = spec->unoriented.eval(ou, ov, d);
        if (ju > 0.0) lr.pairs.push_back({ul, vl, ju, false});
      }
      const double jo = spec->oriented.eval(ou, ov, d);
      if (jo > 0.0) lr.pairs.push_back({ul, vl, jo, true});
    }
  }
  finalize_longrange_arcs(lr);
  return lr;
}

// ---- sampling and clusters ----

struct DirectedConfiguration {
  std::vector<std::int64_t> open_pairs;  // indices into LongRangeVolume::pairs
};

inline DirectedConfiguration sample_longrange(const LongRangeVolume& lr,
                                              double beta, const SeedSpec& seed) {
  const auto probs = lr.pair_probs(beta);
  DirectedConfiguration c;
  for (std::int64_t i = 0; i < lr.pair_count(); ++i)
    if (u01(seed, static_cast<std::uint64_t>(i)) < probs[i]) c.open_pairs.push_back(i);
  return c;
}

template <class OpenFn>
std::int64_t grow_longrange(const LongRangeVolume& lr, int x, OpenFn&& open,
                            std::int64_t cap, ClusterScratch& sc) {
  sc.prepare(lr.base.vertex_count());
  sc.mark[x] = sc.epoch;
  sc.queue.push_back(x);
  std::int64_t size = 1;
  if (cap > 0 && size >= cap) return size;
  std::size_t head = 0;
  while (head < sc.queue.size()) {
    const int u = sc.queue[head++];
    for (std::int64_t a = lr.arc_start[u]; a < lr.arc_start[u + 1]; ++a) {
      const int v = lr.arc_to[a];
      if (sc.mark[v] == sc.epoch) continue;
      if (!open(lr.arc_pair[a])) continue;
      sc.mark[v] = sc.epoch;
      sc.queue.push_back(v);
      ++size;
      if (cap > 0 && size >= cap) return size;
    }
  }
  return size;
}

inline std::int64_t longrange_cluster_size(const LongRangeVolume& lr, int x,
                                           const std::vector<double>& probs,
                                           const SeedSpec& seed,
                                           std::int64_t cap,
                                           ClusterScratch& sc) {
  auto open = [&](std::int64_t pair) {
    return u01(seed, static_cast<std::uint64_t>(pair)) < probs[pair];
  };
  return grow_longrange(lr, x, open, cap, sc);
}

// Forward reachability closure of x under an explicit configuration.
inline std::vector<int> oriented_cluster_of(const LongRangeVolume& lr,
                                            const DirectedConfiguration& config,
                                            int x) {
  if (x < 0 || x >= lr.base.vertex_count())
    throw std::out_of_range("oriented_cluster_of: vertex out of range");
  std::vector<char> open(lr.pairs.size(), 0);
  for (std::int64_t i : config.open_pairs) open[i] = 1;
  ClusterScratch sc;
  auto is_open = [&](std::int64_t pair) { return open[pair] != 0; };
  grow_longrange(lr, x, is_open, 0, sc);
  std::vector<int> out(sc.queue.begin(), sc.queue.end());
  std::sort(out.begin(), out.end());
  return out;
}

inline ClusterSizeDistribution longrange_cluster_distribution_mc(
    const LongRangeVolume& lr, double beta, int x, std::uint64_t replicas,
    SeedSpec seed, std::int64_t size_cap = 0) {
  const auto probs = lr.pair_probs(beta);
  using Counts = std::map<std::int64_t, std::uint64_t>;
  auto partials = map_chunks<Counts>(
      replicas, [&](std::size_t, std::uint64_t b, std::uint64_t e) {
        Counts local;
        ClusterScratch sc;
        SeedSpec s = seed;
        for (std::uint64_t r = b; r < e; ++r) {
          s.replica_index = seed.replica_index + r;
          ++local[longrange_cluster_size(lr, x, probs, s, size_cap, sc)];
        }
        return local;
      });
  ClusterSizeDistribution d;
  d.kind = Kind::bond;  // pair percolation; site marks play no role
  d.mode = DistMode::empirical;
  d.replicas = replicas;
  d.size_cap = size_cap;
  d.beta = beta;
  d.p = 0.0;  // heterogeneous pair probabilities; beta is the parameter
  Counts merged;
  for (const auto& part : partials)
    for (const auto& [n, c] : part) merged[n] += c;
  for (const auto& [n, c] : merged) d.mass[n] = static_cast<double>(c);
  return d;
}

// ---- lemma checks ----

struct LongModelBoundReport {
  int l = 0;
  int k = 0;
  int n_l = 0;
  double beta = 0.0;
  double g_l = 0.0;
  int worst_x = -1;            // patch-global fundamental vertex of worst slack
  double lhs = 0.0, lhs_se = 0.0;  // full-graph surrogate tail at worst x
  double rhs = 0.0, rhs_se = 0.0;  // volume tail + g_l at worst x
  double slack = 0.0, slack_se = 0.0;
  double omitted_allowance = 0.0;  // honesty term from dropped far pairs
  bool pass = false;
};

// Tail of the capped cluster-size law: P(|C_x| >= k).
inline Estimate longrange_tail_mc(const LongRangeVolume& lr, double beta, int x,
                                  std::int64_t k, std::uint64_t replicas,
                                  SeedSpec seed) {
  const auto probs = lr.pair_probs(beta);
  auto partials = map_chunks<std::uint64_t>(
      replicas, [&](std::size_t, std::uint64_t b, std::uint64_t e) {
        std::uint64_t hits = 0;
        ClusterScratch sc;
        SeedSpec s = seed;
        for (std::uint64_t r = b; r < e; ++r) {
          s.replica_index = seed.replica_index + r;
          if (longrange_cluster_size(lr, x, probs, s, k, sc) >= k) ++hits;
        }
        return hits;
      });
  std::uint64_t hits = 0;
  for (auto hh : partials) hits += hh;
  const double q = static_cast<double>(hits) / static_cast<double>(replicas);
  return {q, std::sqrt(q * (1.0 - q) / static_cast<double>(replicas))};
}

// P(|C_x| >= k) <= P(|C_x^{Lambda_l}| >= k) + g_l(beta) for k <= n_l.
// `full` is the certified stand-in for the infinite graph: a size-k cluster
// walks at most k links of length < trunc_radius, so its law is exact (up to
// the declared omitted-pair allowance) once full.base.l covers that reach.
inline LongModelBoundReport check_long_model_bound(const LongRangeVolume& full,
                                                   const LongRangeVolume& small,
                                                   double beta, int k,
                                                   std::uint64_t replicas,
                                                   SeedSpec seed) {
  if (full.spec != small.spec)
    throw std::invalid_argument("check_long_model_bound: volumes share one spec");
  const LongRangeSpec& spec = *full.spec;
  const TruncationBound tb = truncation_bound(spec, small.base.l);
  if (k < 1 || k > tb.n_l) {
    std::ostringstream msg;
    msg << "check_long_model_bound: k=" << k << " outside 1..n_l=" << tb.n_l;
    throw std::invalid_argument(msg.str());
  }
  const int needed = k * std::max(1, spec.trunc_radius - 1);
  if (full.base.l < needed) {
    std::ostringstream msg;
    msg << "check_long_model_bound: full-graph surrogate needs l >= " << needed
        << " (k * max link length), got " << full.base.l;
    throw std::invalid_argument(msg.str());
  }
  LongModelBoundReport rep;
  rep.l = small.base.l;
  rep.k = k;
  rep.n_l = tb.n_l;
  rep.beta = beta;
  rep.g_l = tb.g(beta);
  rep.omitted_allowance = beta * k * spec.omitted_weight;
  rep.slack = std::numeric_limits<double>::infinity();
  for (std::size_t xi = 0; xi < full.base.f_local.size(); ++xi) {
    SeedSpec s_full = seed;
    s_full.replica_index = seed.replica_index + (2 * xi) * replicas;
    SeedSpec s_small = seed;
    s_small.replica_index = seed.replica_index + (2 * xi + 1) * replicas;
    const Estimate lhs =
        longrange_tail_mc(full, beta, full.base.f_local[xi], k, replicas, s_full);
    const Estimate rhs_tail = longrange_tail_mc(
        small, beta, small.base.f_local[xi], k, replicas, s_small);
    const double slack = rhs_tail.value + rep.g_l - lhs.value;
    const double se = std::sqrt(lhs.std_err * lhs.std_err +
                                rhs_tail.std_err * rhs_tail.std_err);
    if (rep.worst_x < 0 || slack < rep.slack) {
      rep.slack = slack;
      rep.slack_se = se;
      rep.lhs = lhs.value;
      rep.lhs_se = lhs.std_err;
      rep.rhs = rhs_tail.value + rep.g_l;
      rep.rhs_se = rhs_tail.std_err;
      rep.worst_x = full.base.vertices[full.base.f_local[xi]];
    }
  }
  rep.pass = rep.slack - rep.omitted_allowance >= -3.0 * rep.slack_se;
  return rep;
}

struct LongModificationReport {
  int y = 0;  // local vertex in the volume
  int x = 0;  // its fundamental representative (local)
  int l = 0;
  int n_l = 0;
  double beta = 0.0, h = 0.0;
  double g_l = 0.0, f_l = 0.0;
  double M_y = 0.0, M_x = 0.0;
  double slack = 0.0, std_err = 0.0;
  bool pass = false;
};

// M_y^{Lambda_l} <= M_x^{Lambda_l} + f_l(beta, h), measured with paired
// replicas (same pair uniforms for both roots).
inline LongModificationReport check_long_range_modification(
    const LongRangeVolume& lr, double beta, double h, int y,
    std::uint64_t replicas, SeedSpec seed) {
  if (y < 0 || y >= lr.base.vertex_count())
    throw std::out_of_range("check_long_range_modification: vertex out of range");
  const TruncationBound tb = truncation_bound(*lr.spec, lr.base.l);
  LongModificationReport rep;
  rep.y = y;
  rep.x = orbit_representative_local(lr.base, y);
  rep.l = lr.base.l;
  rep.n_l = tb.n_l;
  rep.beta = beta;
  rep.h = h;
  rep.g_l = tb.g(beta);
  rep.f_l = tb.f(beta, h);
  const auto probs = lr.pair_probs(beta);
  const std::int64_t cap = default_size_cap(lr.base, h);
  struct Sums {
    double d = 0, d2 = 0, ty = 0, tx = 0;
  };
  auto partials = map_chunks<Sums>(
      replicas, [&](std::size_t, std::uint64_t b, std::uint64_t e) {
        Sums s{};
        ClusterScratch sc;
        SeedSpec sd = seed;
        for (std::uint64_t r = b; r < e; ++r) {
          sd.replica_index = seed.replica_index + r;
          const double ty = std::exp(
              -h * static_cast<double>(
                       longrange_cluster_size(lr, rep.y, probs, sd, cap, sc)));
          const double tx = std::exp(
              -h * static_cast<double>(
                       longrange_cluster_size(lr, rep.x, probs, sd, cap, sc)));
          const double d = ty - tx;
          s.d += d;
          s.d2 += d * d;
          s.ty += ty;
          s.tx += tx;
        }
        return s;
      });
  Sums s{};
  for (const auto& part : partials) {
    s.d += part.d;
    s.d2 += part.d2;
    s.ty += part.ty;
    s.tx += part.tx;
  }
  const double R = static_cast<double>(replicas);
  const double mean_d = s.d / R;
  const double var_d = std::max(0.0, s.d2 / R - mean_d * mean_d);
  rep.M_y = 1.0 - s.ty / R;
  rep.M_x = 1.0 - s.tx / R;
  rep.slack = rep.f_l + mean_d;  // M_y - M_x = -mean_d
  rep.std_err = std::sqrt(var_d / R);
  rep.pass = rep.slack >= -3.0 * rep.std_err;
  return rep;
}

// CRN sweep for the long-range differential inequalities; mirrors
// measure_inequality_point with per-pair probabilities.
inline IneqMeasurement measure_longrange_inequality_point(
    const LongRangeVolume& lr, double beta, double h, std::uint64_t replicas,
    SeedSpec seed, double delta_beta = 0.0) {
  if (!(beta > 0.0) || !(h > 0.0))
    throw std::invalid_argument("measure_longrange_inequality_point: beta, h > 0");
  if (delta_beta <= 0.0) delta_beta = default_delta_beta(beta);
  if (!(beta - delta_beta > 0.0))
    throw std::invalid_argument(
        "measure_longrange_inequality_point: beta - delta_beta <= 0");
  IneqMeasurement m;
  m.kind = Kind::bond;
  m.beta = beta;
  m.h = h;
  m.delta_beta = delta_beta;
  m.l = lr.base.l;
  m.replicas = replicas;
  const auto p_lo = lr.pair_probs(beta - delta_beta);
  const auto p_0 = lr.pair_probs(beta);
  const auto p_hi = lr.pair_probs(beta + delta_beta);
  const std::int64_t cap = default_size_cap(lr.base, h);
  const double R = static_cast<double>(replicas);
  struct Sums {
    double t0 = 0, t0_2 = 0, u0 = 0, u0_2 = 0, t0u0 = 0;
    double d = 0, d2 = 0, dt0 = 0, du0 = 0, c = 0, c2 = 0;
  };
  for (std::size_t xi = 0; xi < lr.base.f_local.size(); ++xi) {
    const int x = lr.base.f_local[xi];
    auto partials = map_chunks<Sums>(
        replicas, [&](std::size_t, std::uint64_t b, std::uint64_t e) {
          Sums s{};
          ClusterScratch sc;
          SeedSpec sd = seed;
          for (std::uint64_t r = b; r < e; ++r) {
            sd.replica_index = seed.replica_index + xi * replicas + r;
            const std::int64_t n_lo =
                longrange_cluster_size(lr, x, p_lo, sd, cap, sc);
            const std::int64_t n_0 =
                longrange_cluster_size(lr, x, p_0, sd, cap, sc);
            const std::int64_t n_hi =
                longrange_cluster_size(lr, x, p_hi, sd, cap, sc);
            const double t_lo = std::exp(-h * static_cast<double>(n_lo));
            const double t_0 = std::exp(-h * static_cast<double>(n_0));
            const double t_hi = std::exp(-h * static_cast<double>(n_hi));
            const double u_0 = static_cast<double>(n_0) * t_0;
            const double d = (t_lo - t_hi) / (2.0 * delta_beta);
            const double c2nd =
                -(t_hi - 2.0 * t_0 + t_lo) / (delta_beta * delta_beta);
            s.t0 += t_0;
            s.t0_2 += t_0 * t_0;
            s.u0 += u_0;
            s.u0_2 += u_0 * u_0;
            s.t0u0 += t_0 * u_0;
            s.d += d;
            s.d2 += d * d;
            s.dt0 += d * t_0;
            s.du0 += d * u_0;
            s.c += c2nd;
            s.c2 += c2nd * c2nd;
          }
          return s;
        });
    Sums s{};
    for (const auto& part : partials) {
      s.t0 += part.t0;
      s.t0_2 += part.t0_2;
      s.u0 += part.u0;
      s.u0_2 += part.u0_2;
      s.t0u0 += part.t0u0;
      s.d += part.d;
      s.d2 += part.d2;
      s.dt0 += part.dt0;
      s.du0 += part.du0;
      s.c += part.c;
      s.c2 += part.c2;
    }
    const double mt = s.t0 / R, mu = s.u0 / R, md = s.d / R, mc2 = s.c / R;
    m.M += 1.0 - mt;
    m.dMdh += mu;
    m.dMdbeta += md;
    m.curvature += mc2;
    const double var_t = std::max(0.0, s.t0_2 / R - mt * mt);
    const double var_u = std::max(0.0, s.u0_2 / R - mu * mu);
    const double var_d = std::max(0.0, s.d2 / R - md * md);
    const double var_c = std::max(0.0, s.c2 / R - mc2 * mc2);
    m.M_se = std::sqrt(m.M_se * m.M_se + var_t / R);
    m.dMdh_se = std::sqrt(m.dMdh_se * m.dMdh_se + var_u / R);
    m.dMdbeta_se = std::sqrt(m.dMdbeta_se * m.dMdbeta_se + var_d / R);
    m.curvature_se = std::sqrt(m.curvature_se * m.curvature_se + var_c / R);
    m.cov_M_dMdh += -(s.t0u0 / R - mt * mu) / R;
    m.cov_M_dMdbeta += -(s.dt0 / R - md * mt) / R;
    m.cov_dMdh_dMdbeta += (s.du0 / R - md * mu) / R;
  }
  const double bias_proxy =
      std::abs(m.curvature) * delta_beta * delta_beta / 6.0;
  m.step_ok = bias_proxy <= 3.0 * m.dMdbeta_se + 1e-12;
  return m;
}

// Long-range analogues of the two bond inequalities, with f_l(beta, h) in
// place of e^{-lh} and K taken from the realized pair graph (the largest
// number of usable arcs at any vertex of the truncated volume).
inline DiffIneqReport check_longrange_inequality(IneqVariant variant,
                                                 const LongRangeVolume& lr,
                                                 double beta, double h,
                                                 std::uint64_t replicas,
                                                 SeedSpec seed) {
  if (variant != IneqVariant::bond1 && variant != IneqVariant::bond2)
    throw std::invalid_argument(
        "check_longrange_inequality: only the bond-form variants apply");
  const TruncationBound tb = truncation_bound(*lr.spec, lr.base.l);
  const IneqMeasurement m =
      measure_longrange_inequality_point(lr, beta, h, replicas, seed);
  return report_from_measurement(variant, m, lr.max_out_degree,
                                 tb.f(beta, h));
}

}  // namespace perc
