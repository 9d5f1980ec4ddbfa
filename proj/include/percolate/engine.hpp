#pragma once
// Sampling core. Configurations are never materialized on the hot path:
// the openness of edge/vertex e in replica r is a pure function
// u01(master, r, stream, e) < p, so a BFS can ask for exactly the bits it
// touches. The same uniforms thresholded at several p give the monotone
// coupling used for common-random-number finite differences.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "percolate/graph.hpp"
#include "percolate/parallel.hpp"
#include "percolate/rng.hpp"

namespace perc {

enum class Kind { bond, site };

inline const char* kind_name(Kind k) { return k == Kind::bond ? "bond" : "site"; }

struct Estimate {
  double value = 0.0;
  double std_err = 0.0;
};

// -------- materialized configurations (reference path) --------

struct Configuration {
  Kind kind = Kind::bond;
  std::vector<char> bits;  // per edge (bond) or per local vertex (site)
  std::vector<int> support() const {
    std::vector<int> s;
    for (int i = 0; i < static_cast<int>(bits.size()); ++i)
      if (bits[i]) s.push_back(i);
    return s;
  }
};

inline Configuration sample_bond(const FiniteVolume& vol, double beta,
                                 const SeedSpec& seed) {
  if (!(beta > 0.0))
    throw std::invalid_argument("sample_bond: beta must be > 0");
  const double p = p_of_beta(beta);
  Configuration c;
  c.kind = Kind::bond;
  c.bits.resize(vol.edges.size());
  for (std::size_t e = 0; e < vol.edges.size(); ++e)
    c.bits[e] = u01(seed, e) < p;
  return c;
}

inline Configuration sample_site(const FiniteVolume& vol, double beta,
                                 const SeedSpec& seed) {
  if (!(beta > 0.0))
    throw std::invalid_argument("sample_site: beta must be > 0");
  const double p = p_of_beta(beta);
  Configuration c;
  c.kind = Kind::site;
  c.bits.resize(vol.vertices.size());
  for (std::size_t v = 0; v < vol.vertices.size(); ++v)
    c.bits[v] = u01(seed, v) < p;
  return c;
}

// Site mode defaults to the modified cluster: x belongs no matter its own
// state, and the cluster continues only through open vertices. With
// modified=false a closed x has an empty cluster.
inline std::vector<int> cluster_of(const FiniteVolume& vol,
                                   const Configuration& config, int x,
                                   bool modified = true) {
  if (x < 0 || x >= vol.vertex_count())
    throw std::out_of_range("cluster_of: vertex out of range");
  std::vector<int> out;
  std::vector<char> seen(vol.vertex_count(), 0);
  std::vector<int> stack;
  if (config.kind == Kind::site && !modified && !config.bits[x]) return out;
  seen[x] = 1;
  stack.push_back(x);
  out.push_back(x);
  // Site mode: only open vertices are ever enqueued past x, so every popped
  // vertex is allowed to spread; x spreads regardless of its own state.
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (std::int64_t a = vol.arc_start[u]; a < vol.arc_start[u + 1]; ++a) {
      const int v = vol.arc_to[a];
      if (seen[v]) continue;
      const bool step_open = config.kind == Kind::bond
                                 ? static_cast<bool>(config.bits[vol.arc_edge[a]])
                                 : static_cast<bool>(config.bits[v]);
      if (!step_open) continue;
      seen[v] = 1;
      out.push_back(v);
      stack.push_back(v);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Union-find cross-check for cluster extraction, and the bulk path when one
// replica needs every vertex's cluster at once.
struct UnionFind {
  std::vector<int> parent;
  std::vector<int> size;
  explicit UnionFind(int n) : parent(n), size(n, 1) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size[a] < size[b]) std::swap(a, b);
    parent[b] = a;
    size[a] += size[b];
  }
};

// Connected components of the open subgraph. Bond: all vertices participate.
// Site: only open vertices are joined; closed vertices keep themselves as
// singleton roots (callers handle the modified-cluster rule on top).
inline UnionFind open_components(const FiniteVolume& vol,
                                 const Configuration& config) {
  UnionFind uf(vol.vertex_count());
  for (int e = 0; e < static_cast<int>(vol.edges.size()); ++e) {
    const auto [u, v] = vol.edges[e];
    if (config.kind == Kind::bond) {
      if (config.bits[e]) uf.unite(u, v);
    } else {
      if (config.bits[u] && config.bits[v]) uf.unite(u, v);
    }
  }
  return uf;
}

// Modified-cluster size of x computed from the union-find of a site
// configuration: either x's own open component, or 1 + the open components
// hanging off x's open neighbors (distinct roots counted once).
inline std::int64_t modified_cluster_size_from_uf(const FiniteVolume& vol,
                                                  const Configuration& config,
                                                  UnionFind& uf, int x,
                                                  std::vector<int>& root_buf) {
  if (config.bits[x]) return uf.size[uf.find(x)];
  root_buf.clear();
  std::int64_t total = 1;
  for (std::int64_t a = vol.arc_start[x]; a < vol.arc_start[x + 1]; ++a) {
    const int v = vol.arc_to[a];
    if (!config.bits[v]) continue;
    const int r = uf.find(v);
    bool dup = false;
    for (int seen : root_buf) dup = dup || (seen == r);
    if (!dup) {
      root_buf.push_back(r);
      total += uf.size[r];
    }
  }
  return total;
}

// -------- lazy cluster growth --------

struct ClusterScratch {
  std::vector<std::uint32_t> mark;
  std::uint32_t epoch = 0;
  std::vector<int> queue;
  void prepare(int n) {
    if (static_cast<int>(mark.size()) != n) {
      mark.assign(n, 0);
      epoch = 0;
    }
    if (++epoch == 0) {  // wrapped: clear and restart
      std::fill(mark.begin(), mark.end(), 0);
      epoch = 1;
    }
    queue.clear();
  }
};

struct ClusterStats {
  std::int64_t size = 0;
  int max_dist = 0;   // max over members of dist_x (graph distance), if given
  bool capped = false;
};

// open(element) is queried lazily: element = edge index (bond) or local
// vertex index (site). cap = 0 means unbounded. dist_x may be null.
template <class OpenFn>
ClusterStats grow_cluster(const FiniteVolume& vol, Kind kind, int x,
                          OpenFn&& open, std::int64_t cap, const int* dist_x,
                          ClusterScratch& sc) {
  sc.prepare(vol.vertex_count());
  ClusterStats st;
  sc.mark[x] = sc.epoch;
  sc.queue.push_back(x);
  st.size = 1;
  if (dist_x) st.max_dist = dist_x[x];
  if (cap > 0 && st.size >= cap) {
    st.capped = true;
    return st;
  }
  // Site mode gives the modified cluster: x is enqueued unconditionally and
  // spreads even when closed; everything else must be open to enter.
  std::size_t head = 0;
  while (head < sc.queue.size()) {
    const int u = sc.queue[head++];
    for (std::int64_t a = vol.arc_start[u]; a < vol.arc_start[u + 1]; ++a) {
      const int v = vol.arc_to[a];
      if (sc.mark[v] == sc.epoch) continue;
      const bool step_open =
          (kind == Kind::bond) ? open(vol.arc_edge[a]) : open(v);
      if (!step_open) continue;
      sc.mark[v] = sc.epoch;
      sc.queue.push_back(v);
      ++st.size;
      if (dist_x && dist_x[v] > st.max_dist) st.max_dist = dist_x[v];
      if (cap > 0 && st.size >= cap) {
        st.capped = true;
        return st;
      }
    }
  }
  return st;
}

inline std::int64_t bond_cluster_size(const FiniteVolume& vol, int x, double p,
                                      const SeedSpec& seed, std::int64_t cap,
                                      ClusterScratch& sc) {
  auto open = [&](int e) { return u01(seed, e) < p; };
  return grow_cluster(vol, Kind::bond, x, open, cap, nullptr, sc).size;
}

inline std::int64_t site_cluster_size(const FiniteVolume& vol, int x, double p,
                                      const SeedSpec& seed, std::int64_t cap,
                                      ClusterScratch& sc) {
  auto open = [&](int v) { return u01(seed, v) < p; };
  return grow_cluster(vol, Kind::site, x, open, cap, nullptr, sc).size;
}

// -------- empirical / exact distributions --------

enum class DistMode { exact, empirical };

struct ClusterSizeDistribution {
  Kind kind = Kind::bond;
  DistMode mode = DistMode::empirical;
  bool modified_site = true;
  std::map<std::int64_t, double> mass;  // size -> probability or count
  std::uint64_t replicas = 0;           // empirical only
  std::int64_t size_cap = 0;            // >0: mass at cap pools sizes >= cap
  double beta = 0.0;
  double p = 0.0;

  std::int64_t max_observed() const {
    std::int64_t m = -1;
    for (const auto& [n, w] : mass)
      if (w > 0.0) m = std::max(m, n);
    return m;
  }
  double prob(std::int64_t n) const {
    const auto it = mass.find(n);
    if (it == mass.end()) return 0.0;
    return mode == DistMode::exact ? it->second
                                   : it->second / static_cast<double>(replicas);
  }
  // P(size >= n); pooled mass at the cap stays in every tail below it.
  double tail(std::int64_t n) const {
    double acc = 0.0;
    for (auto it = mass.lower_bound(n); it != mass.end(); ++it)
      acc += it->second;
    return mode == DistMode::exact ? acc : acc / static_cast<double>(replicas);
  }
  double total_mass() const {
    double acc = 0.0;
    for (const auto& [n, w] : mass) acc += w;
    return acc;
  }
};

// In every Monte Carlo routine below, seed.replica_index is a base offset:
// the call consumes replica indices [base, base + replicas) (times the number
// of fundamental-domain blocks where noted), letting callers compose
// independent batches under one master seed.
inline ClusterSizeDistribution cluster_size_distribution_mc(
    const FiniteVolume& vol, Kind kind, double beta, int x,
    std::uint64_t replicas, SeedSpec seed, std::int64_t size_cap = 0) {
  if (replicas < 1)
    throw std::invalid_argument("cluster_size_distribution_mc: replicas >= 1");
  if (!(beta > 0.0))
    throw std::invalid_argument("cluster_size_distribution_mc: beta must be > 0");
  if (x < 0 || x >= vol.vertex_count())
    throw std::out_of_range("cluster_size_distribution_mc: vertex out of range");
  const double p = p_of_beta(beta);
  using Counts = std::map<std::int64_t, std::uint64_t>;
  auto partials = map_chunks<Counts>(replicas, [&](std::size_t, std::uint64_t b,
                                                   std::uint64_t e) {
    Counts local;
    ClusterScratch sc;
    SeedSpec s = seed;
    for (std::uint64_t r = b; r < e; ++r) {
      s.replica_index = seed.replica_index + r;
      const std::int64_t n = (kind == Kind::bond)
                                 ? bond_cluster_size(vol, x, p, s, size_cap, sc)
                                 : site_cluster_size(vol, x, p, s, size_cap, sc);
      ++local[n];
    }
    return local;
  });
  ClusterSizeDistribution d;
  d.kind = kind;
  d.mode = DistMode::empirical;
  d.replicas = replicas;
  d.size_cap = size_cap;
  d.beta = beta;
  d.p = p;
  Counts merged;
  for (const auto& part : partials)
    for (const auto& [n, c] : part) merged[n] += c;
  for (const auto& [n, c] : merged) d.mass[n] = static_cast<double>(c);
  return d;
}

inline Estimate radius_reach_probability_mc(const FiniteVolume& vol, Kind kind,
                                            double beta, int x, int n,
                                            std::uint64_t replicas,
                                            SeedSpec seed) {
  if (n < 0 || n > vol.l)
    throw std::invalid_argument(
        "radius_reach_probability_mc: need 0 <= n <= volume's l");
  if (!(beta > 0.0))
    throw std::invalid_argument("radius_reach_probability_mc: beta must be > 0");
  if (n == 0) return {1.0, 0.0};
  const double p = p_of_beta(beta);
  // Graph distances from x inside the volume; the cluster meets the sphere
  // S(x, n) iff its farthest member is at distance >= n (distance along any
  // cluster path changes by steps of 1).
  std::vector<int> dist(vol.vertex_count(), infinite_distance);
  {
    std::vector<int> q = {x};
    dist[x] = 0;
    std::size_t head = 0;
    while (head < q.size()) {
      const int u = q[head++];
      for (std::int64_t a = vol.arc_start[u]; a < vol.arc_start[u + 1]; ++a)
        if (dist[vol.arc_to[a]] == infinite_distance) {
          dist[vol.arc_to[a]] = dist[u] + 1;
          q.push_back(vol.arc_to[a]);
        }
    }
    for (int& dv : dist)
      if (dv == infinite_distance) dv = -1;  // unreachable: never counts
  }
  auto partials = map_chunks<std::uint64_t>(
      replicas, [&](std::size_t, std::uint64_t b, std::uint64_t e) {
        std::uint64_t hits = 0;
        ClusterScratch sc;
        SeedSpec s = seed;
        for (std::uint64_t r = b; r < e; ++r) {
          s.replica_index = seed.replica_index + r;
          ClusterStats st;
          if (kind == Kind::bond) {
            auto open = [&](int ed) { return u01(s, ed) < p; };
            st = grow_cluster(vol, Kind::bond, x, open, 0, dist.data(), sc);
          } else {
            auto open = [&](int v) { return u01(s, v) < p; };
            st = grow_cluster(vol, Kind::site, x, open, 0, dist.data(), sc);
          }
          if (st.max_dist >= n) ++hits;
        }
        return hits;
      });
  std::uint64_t hits = 0;
  for (auto h : partials) hits += h;
  const double q = static_cast<double>(hits) / static_cast<double>(replicas);
  const double se = std::sqrt(q * (1.0 - q) / static_cast<double>(replicas));
  return {q, se};
}

}  // namespace perc
