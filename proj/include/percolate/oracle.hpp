#pragma once
// Exhaustive enumeration over every configuration of a tiny volume. Event
// probabilities come out as integer-coefficient polynomials in p (counts of
// in-event configurations per number of open elements), which makes
// downstream identities checkable to 1e-12 in plain doubles.

#include <bit>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "percolate/engine.hpp"
#include "percolate/graph.hpp"
#include "percolate/parallel.hpp"
#include "percolate/rng.hpp"

namespace perc {

constexpr int enumeration_cap_bits = 24;
constexpr int bk_support_cap = 20;

struct EventPolynomial {
  int total_sites = 0;                 // m: size of the enumerated element set
  std::vector<std::uint64_t> counts;   // a_0..a_m, in-event configs per open count

  bool operator==(const EventPolynomial&) const = default;

  double prob(double p) const {
    double acc = 0.0;
    for (int k = 0; k <= total_sites; ++k)
      if (counts[k])
        acc += static_cast<double>(counts[k]) * std::pow(p, k) *
               std::pow(1.0 - p, total_sites - k);
    return acc;
  }
  // d/dp of prob, term-wise: a_k (k p^{k-1} q^{m-k} - (m-k) p^k q^{m-k-1}).
  double dprob(double p) const {
    const int m = total_sites;
    double acc = 0.0;
    for (int k = 0; k <= m; ++k) {
      if (!counts[k]) continue;
      const double a = static_cast<double>(counts[k]);
      if (k > 0) acc += a * k * std::pow(p, k - 1) * std::pow(1.0 - p, m - k);
      if (m - k > 0)
        acc -= a * (m - k) * std::pow(p, k) * std::pow(1.0 - p, m - k - 1);
    }
    return acc;
  }
};

inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

struct EventPredicate {
  std::vector<int> dependency;  // sorted element indices the decision may read
  std::function<bool(const Configuration&)> decide;
};

inline int element_count(const FiniteVolume& vol, Kind kind) {
  return kind == Kind::bond ? static_cast<int>(vol.edges.size())
                            : vol.vertex_count();
}

namespace detail {

// Randomized probe: the decision must not change when bits outside the
// declared dependency set are scrambled.
inline void probe_dependency(const FiniteVolume& vol, Kind kind,
                             const EventPredicate& event, int trials = 32) {
  const int m = element_count(vol, kind);
  std::vector<char> in_dep(m, 0);
  for (int d : event.dependency) {
    if (d < 0 || d >= m)
      throw std::out_of_range("EventPredicate: dependency index out of range");
    in_dep[d] = 1;
  }
  const SeedSpec probe_seed{0x9e3779b97f4a7c15ULL, 0, Stream::bootstrap};
  Configuration c;
  c.kind = kind;
  c.bits.resize(m);
  SeedSpec s = probe_seed;
  for (int t = 0; t < trials; ++t) {
    s.replica_index = static_cast<std::uint64_t>(2 * t);
    for (int i = 0; i < m; ++i) c.bits[i] = u01(s, i) < 0.5;
    const bool base = event.decide(c);
    s.replica_index = static_cast<std::uint64_t>(2 * t + 1);
    for (int i = 0; i < m; ++i)
      if (!in_dep[i]) c.bits[i] = u01(s, i) < 0.5;
    if (event.decide(c) != base)
      throw std::logic_error(
          "EventPredicate: decision depends on elements outside the declared "
          "dependency set");
  }
}

}  // namespace detail

// Exact counts a_k over all 2^|dependency| assignments; bits outside the
// dependency set are held closed (the probe above certifies they are inert).
inline EventPolynomial enumerate_event(const FiniteVolume& vol, Kind kind,
                                       const EventPredicate& event) {
  const int m = static_cast<int>(event.dependency.size());
  if (m > enumeration_cap_bits) {
    std::ostringstream msg;
    msg << "enumerate_event: dependency set has " << m
        << " elements, enumeration cap is " << enumeration_cap_bits;
    throw std::invalid_argument(msg.str());
  }
  detail::probe_dependency(vol, kind, event);
  EventPolynomial poly;
  poly.total_sites = m;
  poly.counts.assign(m + 1, 0);
  Configuration c;
  c.kind = kind;
  c.bits.assign(element_count(vol, kind), 0);
  const std::uint64_t total = 1ULL << m;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    for (int i = 0; i < m; ++i)
      c.bits[event.dependency[i]] = (mask >> i) & 1u;
    if (event.decide(c)) ++poly.counts[std::popcount(mask)];
  }
  return poly;
}

// Membership table over the dependency-set masks, for the heavier checks.
inline std::vector<char> membership_table(const FiniteVolume& vol, Kind kind,
                                          const EventPredicate& event) {
  const int m = static_cast<int>(event.dependency.size());
  if (m > enumeration_cap_bits)
    throw std::invalid_argument("membership_table: enumeration cap exceeded");
  detail::probe_dependency(vol, kind, event);
  std::vector<char> in(1ULL << m, 0);
  Configuration c;
  c.kind = kind;
  c.bits.assign(element_count(vol, kind), 0);
  for (std::uint64_t mask = 0; mask < in.size(); ++mask) {
    for (int i = 0; i < m; ++i)
      c.bits[event.dependency[i]] = (mask >> i) & 1u;
    in[mask] = event.decide(c);
  }
  return in;
}

inline bool table_is_increasing(const std::vector<char>& in, int m) {
  for (std::uint64_t mask = 0; mask < in.size(); ++mask) {
    if (!in[mask]) continue;
    for (int i = 0; i < m; ++i)
      if (!in[mask | (1ULL << i)]) return false;
  }
  return true;
}

inline EventPolynomial polynomial_from_table(const std::vector<char>& in,
                                             int m) {
  EventPolynomial poly;
  poly.total_sites = m;
  poly.counts.assign(m + 1, 0);
  for (std::uint64_t mask = 0; mask < in.size(); ++mask)
    if (in[mask]) ++poly.counts[std::popcount(mask)];
  return poly;
}

// -------- cluster-size enumeration --------

namespace detail {

// Cluster size of x under the mask over ALL elements (bond: edges, site:
// vertices). Site mode uses the modified cluster unless modified=false.
inline std::int64_t mask_cluster_size(const FiniteVolume& vol, Kind kind,
                                      int x, std::uint64_t mask, bool modified,
                                      ClusterScratch& sc) {
  if (kind == Kind::site && !modified && !((mask >> x) & 1u)) return 0;
  auto open = [&](int i) { return ((mask >> i) & 1u) != 0; };
  return grow_cluster(vol, kind, x, open, 0, nullptr, sc).size;
}

}  // namespace detail

// One polynomial per cluster size; coefficient-wise they sum to the constant
// one (every configuration lands in exactly one size class).
inline std::map<std::int64_t, EventPolynomial> exact_cluster_distribution(
    const FiniteVolume& vol, Kind kind, int x, bool modified = true) {
  const int m = element_count(vol, kind);
  if (m > enumeration_cap_bits) {
    std::ostringstream msg;
    msg << "exact_cluster_distribution: volume has " << m
        << " elements, enumeration cap is " << enumeration_cap_bits;
    throw std::invalid_argument(msg.str());
  }
  if (x < 0 || x >= vol.vertex_count())
    throw std::out_of_range("exact_cluster_distribution: vertex out of range");
  const std::uint64_t total = 1ULL << m;
  using SizeCounts = std::map<std::int64_t, std::vector<std::uint64_t>>;
  auto partials = map_chunks<SizeCounts>(
      total,
      [&](std::size_t, std::uint64_t b, std::uint64_t e) {
        SizeCounts local;
        ClusterScratch sc;
        for (std::uint64_t mask = b; mask < e; ++mask) {
          const std::int64_t n =
              detail::mask_cluster_size(vol, kind, x, mask, modified, sc);
          auto& a = local[n];
          if (a.empty()) a.assign(m + 1, 0);
          ++a[std::popcount(mask)];
        }
        return local;
      },
      1ULL << 16);
  std::map<std::int64_t, EventPolynomial> out;
  for (const auto& part : partials)
    for (const auto& [n, a] : part) {
      auto& poly = out[n];
      if (poly.counts.empty()) {
        poly.total_sites = m;
        poly.counts.assign(m + 1, 0);
      }
      for (int k = 0; k <= m; ++k) poly.counts[k] += a[k];
    }
  return out;
}

inline ClusterSizeDistribution exact_distribution_at(
    const std::map<std::int64_t, EventPolynomial>& polys, Kind kind,
    double beta, bool modified = true) {
  ClusterSizeDistribution d;
  d.kind = kind;
  d.mode = DistMode::exact;
  d.modified_site = modified;
  d.beta = beta;
  d.p = p_of_beta(beta);
  for (const auto& [n, poly] : polys) d.mass[n] = poly.prob(d.p);
  return d;
}

// Exact P(x reaches a blue vertex): sum over configurations of
// weight * (1 - e^{-h * |C_x|}), the blue marks integrated out in closed form
// (each of the |C_x| cluster vertices is independently non-blue w.p. e^{-h}).
inline double exact_blue_M(const FiniteVolume& vol, Kind kind, int x, double p,
                           double h) {
  const int m = element_count(vol, kind);
  if (m > enumeration_cap_bits)
    throw std::invalid_argument("exact_blue_M: enumeration cap exceeded");
  if (!(h > 0.0)) throw std::invalid_argument("exact_blue_M: h must be > 0");
  ClusterScratch sc;
  double acc = 0.0;
  for (std::uint64_t mask = 0; mask < (1ULL << m); ++mask) {
    const std::int64_t n = detail::mask_cluster_size(vol, kind, x, mask, true, sc);
    const int k = std::popcount(mask);
    acc += std::pow(p, k) * std::pow(1.0 - p, m - k) *
           (1.0 - std::exp(-h * static_cast<double>(n)));
  }
  return acc;
}

// -------- the three fundamental-tool checks --------

// Compares the analytic dP/dp with the pivotal-element sum; both exact.
inline double russo_check(const FiniteVolume& vol, Kind kind,
                          const EventPredicate& event,
                          const std::vector<double>& p_grid) {
  const int m = static_cast<int>(event.dependency.size());
  const auto in = membership_table(vol, kind, event);
  if (!table_is_increasing(in, m))
    throw std::invalid_argument("russo_check: event is not increasing");
  const auto poly = polynomial_from_table(in, m);
  // Pivotality of element i in mask: flip changes membership; independent of
  // the mask's own bit i, so count each mask once with its own open count.
  std::vector<EventPolynomial> pivotal(m);
  for (int i = 0; i < m; ++i) {
    pivotal[i].total_sites = m;
    pivotal[i].counts.assign(m + 1, 0);
  }
  for (std::uint64_t mask = 0; mask < in.size(); ++mask) {
    const int k = std::popcount(mask);
    for (int i = 0; i < m; ++i) {
      const bool with = in[mask | (1ULL << i)];
      const bool without = in[mask & ~(1ULL << i)];
      if (with && !without) ++pivotal[i].counts[k];
    }
  }
  double worst = 0.0;
  for (double p : p_grid) {
    double pivotal_sum = 0.0;
    for (int i = 0; i < m; ++i) pivotal_sum += pivotal[i].prob(p);
    worst = std::max(worst, std::abs(poly.dprob(p) - pivotal_sum));
  }
  return worst;
}

// Min over the grid of P(A1 and A2) - P(A1) P(A2); nonnegative for
// increasing events.
inline double fkg_check(const FiniteVolume& vol, Kind kind,
                        const EventPredicate& a1, const EventPredicate& a2,
                        const std::vector<double>& p_grid) {
  std::vector<int> dep = a1.dependency;
  dep.insert(dep.end(), a2.dependency.begin(), a2.dependency.end());
  std::sort(dep.begin(), dep.end());
  dep.erase(std::unique(dep.begin(), dep.end()), dep.end());
  EventPredicate joint{dep, [&](const Configuration& c) {
                         return a1.decide(c) && a2.decide(c);
                       }};
  EventPredicate e1{dep, a1.decide};
  EventPredicate e2{dep, a2.decide};
  const int m = static_cast<int>(dep.size());
  const auto t1 = membership_table(vol, kind, e1);
  const auto t2 = membership_table(vol, kind, e2);
  if (!table_is_increasing(t1, m) || !table_is_increasing(t2, m))
    throw std::invalid_argument("fkg_check: both events must be increasing");
  std::vector<char> tj(t1.size());
  for (std::size_t i = 0; i < t1.size(); ++i) tj[i] = t1[i] && t2[i];
  const auto p1 = polynomial_from_table(t1, m);
  const auto p2 = polynomial_from_table(t2, m);
  const auto pj = polynomial_from_table(tj, m);
  double min_slack = std::numeric_limits<double>::infinity();
  for (double p : p_grid)
    min_slack = std::min(min_slack, pj.prob(p) - p1.prob(p) * p2.prob(p));
  return min_slack;
}

// A configuration is in A1 ∘ A2 when some subset S1 of its open elements
// certifies A1 (S1 open, everything else closed, still in A1) while the
// remaining open elements certify A2. For increasing events this matches the
// disjoint-witness definition.
inline double bk_check(const FiniteVolume& vol, Kind kind,
                       const EventPredicate& a1, const EventPredicate& a2,
                       const std::vector<double>& p_grid) {
  std::vector<int> dep = a1.dependency;
  dep.insert(dep.end(), a2.dependency.begin(), a2.dependency.end());
  std::sort(dep.begin(), dep.end());
  dep.erase(std::unique(dep.begin(), dep.end()), dep.end());
  const int m = static_cast<int>(dep.size());
  EventPredicate e1{dep, a1.decide};
  EventPredicate e2{dep, a2.decide};
  const auto t1 = membership_table(vol, kind, e1);
  const auto t2 = membership_table(vol, kind, e2);
  if (!table_is_increasing(t1, m) || !table_is_increasing(t2, m))
    throw std::invalid_argument("bk_check: both events must be increasing");
  std::vector<char> tdo(t1.size(), 0);
  for (std::uint64_t mask = 0; mask < t1.size(); ++mask) {
    if (!t1[mask] || !t2[mask]) continue;  // A1∘A2 ⊆ A1 ∩ A2 (increasing)
    if (std::popcount(mask) > bk_support_cap) {
      std::ostringstream msg;
      msg << "bk_check: candidate configuration has support "
          << std::popcount(mask) << ", certificate-search cap is "
          << bk_support_cap;
      throw std::invalid_argument(msg.str());
    }
    // Walk all submasks s1 of mask, including 0 and mask itself.
    std::uint64_t s1 = mask;
    for (;;) {
      if (t1[s1] && t2[mask & ~s1]) {
        tdo[mask] = 1;
        break;
      }
      if (s1 == 0) break;
      s1 = (s1 - 1) & mask;
    }
  }
  const auto p1 = polynomial_from_table(t1, m);
  const auto p2 = polynomial_from_table(t2, m);
  const auto pdo = polynomial_from_table(tdo, m);
  double min_slack = std::numeric_limits<double>::infinity();
  for (double p : p_grid)
    min_slack = std::min(min_slack, p1.prob(p) * p2.prob(p) - pdo.prob(p));
  return min_slack;
}

// -------- predicate builders --------

inline std::vector<int> all_elements(const FiniteVolume& vol, Kind kind) {
  std::vector<int> dep(element_count(vol, kind));
  std::iota(dep.begin(), dep.end(), 0);
  return dep;
}

// {x <-> y}: bond mode connects through open edges; site mode requires every
// path vertex open, endpoints included (x == y degenerates to {x open}).
inline EventPredicate connection_event(const FiniteVolume& vol, Kind kind,
                                       int x, int y) {
  if (x < 0 || y < 0 || x >= vol.vertex_count() || y >= vol.vertex_count())
    throw std::out_of_range("connection_event: vertex out of range");
  auto decide = [&vol, kind, x, y](const Configuration& c) {
    if (kind == Kind::site && (!c.bits[x] || !c.bits[y])) return false;
    if (x == y) return true;
    std::vector<char> seen(vol.vertex_count(), 0);
    std::vector<int> stack = {x};
    seen[x] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (std::int64_t a = vol.arc_start[u]; a < vol.arc_start[u + 1]; ++a) {
        const int v = vol.arc_to[a];
        if (seen[v]) continue;
        const bool ok = kind == Kind::bond
                            ? static_cast<bool>(c.bits[vol.arc_edge[a]])
                            : static_cast<bool>(c.bits[v]);
        if (!ok) continue;
        if (v == y) return true;
        seen[v] = 1;
        stack.push_back(v);
      }
    }
    return false;
  };
  return {all_elements(vol, kind), decide};
}

// {|C_x| >= n}; site mode uses the modified cluster, which is increasing.
inline EventPredicate cluster_size_at_least(const FiniteVolume& vol, Kind kind,
                                            int x, std::int64_t n) {
  auto decide = [&vol, kind, x, n](const Configuration& c) {
    if (n <= 1) return true;  // x always belongs (bond / modified site)
    auto open = [&](int i) { return static_cast<bool>(c.bits[i]); };
    thread_local ClusterScratch sc;
    return grow_cluster(vol, kind, x, open, n, nullptr, sc).size >= n;
  };
  return {all_elements(vol, kind), decide};
}

inline EventPredicate certain_event() {
  return {{}, [](const Configuration&) { return true; }};
}

inline EventPredicate empty_event() {
  return {{}, [](const Configuration&) { return false; }};
}

}  // namespace perc
