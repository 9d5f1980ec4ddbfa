#pragma once
// Finite patches of quasi-transitive graphs. A patch carries adjacency, a
// per-vertex orbit label, a chosen fundamental domain (one vertex per orbit),
// and a certified exact_radius: every ball B(x, exact_radius) around a
// fundamental-domain vertex lies inside the patch with exact graph distances,
// so probability statements about events confined to such balls are not
// polluted by the boundary.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace perc {

constexpr int infinite_distance = std::numeric_limits<int>::max();

struct GraphPatch {
  std::string family;
  std::vector<int> orbit_label;           // size N
  int orbit_count = 1;
  std::vector<std::int64_t> adj_start;    // size N+1, CSR offsets
  std::vector<int> adj;                   // neighbor lists, each sorted
  std::vector<int> fundamental_domain;    // one vertex per orbit, sorted
  int exact_radius = 0;

  int vertex_count() const { return static_cast<int>(orbit_label.size()); }
  std::int64_t edge_count() const {
    return static_cast<std::int64_t>(adj.size()) / 2;
  }
  int degree(int v) const {
    return static_cast<int>(adj_start[v + 1] - adj_start[v]);
  }
  const int* neighbors_begin(int v) const { return adj.data() + adj_start[v]; }
  const int* neighbors_end(int v) const {
    return adj.data() + adj_start[v + 1];
  }
  int max_degree() const {
    int k = 0;
    for (int v = 0; v < vertex_count(); ++v) k = std::max(k, degree(v));
    return k;
  }
};

namespace detail {

// Build CSR adjacency from a simple edge list; neighbor lists come out sorted.
inline void fill_adjacency(GraphPatch& g,
                           const std::vector<std::pair<int, int>>& edges) {
  const int n = g.vertex_count();
  std::vector<int> deg(n, 0);
  for (const auto& e : edges) {
    ++deg[e.first];
    ++deg[e.second];
  }
  g.adj_start.assign(n + 1, 0);
  for (int v = 0; v < n; ++v) g.adj_start[v + 1] = g.adj_start[v] + deg[v];
  g.adj.assign(g.adj_start[n], 0);
  std::vector<std::int64_t> cursor(g.adj_start.begin(), g.adj_start.end() - 1);
  for (const auto& e : edges) {
    g.adj[cursor[e.first]++] = e.second;
    g.adj[cursor[e.second]++] = e.first;
  }
  for (int v = 0; v < n; ++v)
    std::sort(g.adj.begin() + g.adj_start[v], g.adj.begin() + g.adj_start[v + 1]);
}

}  // namespace detail

// Distances from a source set, capped at max_depth (-1 = unlimited).
// Unreached vertices get infinite_distance.
inline std::vector<int> distances_from(const GraphPatch& g,
                                       const std::vector<int>& sources,
                                       int max_depth = -1) {
  std::vector<int> dist(g.vertex_count(), infinite_distance);
  std::queue<int> q;
  for (int s : sources) {
    if (s < 0 || s >= g.vertex_count())
      throw std::out_of_range("distances_from: source vertex out of range");
    if (dist[s] != 0) {
      dist[s] = 0;
      q.push(s);
    }
  }
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    if (max_depth >= 0 && dist[u] == max_depth) continue;
    for (const int* it = g.neighbors_begin(u); it != g.neighbors_end(u); ++it) {
      if (dist[*it] == infinite_distance) {
        dist[*it] = dist[u] + 1;
        q.push(*it);
      }
    }
  }
  return dist;
}

inline int distance(const GraphPatch& g, int x, int y) {
  if (x < 0 || x >= g.vertex_count() || y < 0 || y >= g.vertex_count())
    throw std::out_of_range("distance: vertex out of range");
  if (x == y) return 0;
  return distances_from(g, {x})[y];
}

namespace detail {

inline int eccentricity_of_domain(const GraphPatch& g) {
  const auto dist = distances_from(g, g.fundamental_domain);
  int ecc = 0;
  for (int d : dist) {
    if (d == infinite_distance)
      throw std::invalid_argument("eccentricity_of_domain: patch is disconnected");
    ecc = std::max(ecc, d);
  }
  return ecc;
}

}  // namespace detail

// -------- builders --------

inline GraphPatch build_square_lattice(int half_width) {
  if (half_width < 1)
    throw std::invalid_argument("build_square_lattice: half_width must be >= 1");
  const int w = half_width;
  const int side = 2 * w + 1;
  GraphPatch g;
  g.family = "square_lattice";
  g.orbit_label.assign(static_cast<std::size_t>(side) * side, 0);
  g.orbit_count = 1;
  auto id = [&](int x, int y) { return (x + w) * side + (y + w); };
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<std::size_t>(2) * side * (side - 1));
  for (int x = -w; x <= w; ++x)
    for (int y = -w; y <= w; ++y) {
      if (x < w) edges.emplace_back(id(x, y), id(x + 1, y));
      if (y < w) edges.emplace_back(id(x, y), id(x, y + 1));
    }
  detail::fill_adjacency(g, edges);
  g.fundamental_domain = {id(0, 0)};
  g.exact_radius = w;
  return g;
}

// Z^2 with every edge split by a midpoint vertex. Orbit 0 = original
// degree-4 vertices, orbit 1 = degree-2 midpoints. Fundamental domain is the
// origin plus the midpoint of the edge toward (1,0).
inline GraphPatch build_subdivided_square_lattice(int half_width) {
  if (half_width < 1)
    throw std::invalid_argument(
        "build_subdivided_square_lattice: half_width must be >= 1");
  const int w = half_width;
  const int side = 2 * w + 1;
  const int n_grid = side * side;
  auto id = [&](int x, int y) { return (x + w) * side + (y + w); };
  GraphPatch g;
  g.family = "subdivided_square";
  g.orbit_count = 2;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> labels(n_grid, 0);
  int next = n_grid;
  int origin_mid = -1;
  for (int x = -w; x <= w; ++x)
    for (int y = -w; y <= w; ++y) {
      if (x < w) {
        const int m = next++;
        labels.push_back(1);
        edges.emplace_back(id(x, y), m);
        edges.emplace_back(m, id(x + 1, y));
        if (x == 0 && y == 0) origin_mid = m;
      }
      if (y < w) {
        const int m = next++;
        labels.push_back(1);
        edges.emplace_back(id(x, y), m);
        edges.emplace_back(m, id(x, y + 1));
      }
    }
  g.orbit_label = std::move(labels);
  detail::fill_adjacency(g, edges);
  g.fundamental_domain = {id(0, 0), origin_mid};
  std::sort(g.fundamental_domain.begin(), g.fundamental_domain.end());
  g.exact_radius = 2 * w;
  return g;
}

inline GraphPatch build_regular_tree(int degree, int depth) {
  if (degree < 3)
    throw std::invalid_argument("build_regular_tree: degree must be >= 3");
  if (depth < 1)
    throw std::invalid_argument("build_regular_tree: depth must be >= 1");
  GraphPatch g;
  g.family = "regular_tree";
  g.orbit_count = 1;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> frontier = {0};
  int next = 1;
  for (int level = 1; level <= depth; ++level) {
    std::vector<int> new_frontier;
    for (int v : frontier) {
      const int children = (v == 0) ? degree : degree - 1;
      for (int c = 0; c < children; ++c) {
        edges.emplace_back(v, next);
        new_frontier.push_back(next);
        ++next;
      }
    }
    frontier = std::move(new_frontier);
  }
  g.orbit_label.assign(next, 0);
  detail::fill_adjacency(g, edges);
  g.fundamental_domain = {0};
  g.exact_radius = depth;
  return g;
}

// Small complete graphs for exact enumeration. Their exact_radius is the
// eccentricity of the fundamental domain plus one, so max_volume() spans the
// whole graph.
namespace tiny {

inline GraphPatch from_edges(std::string family, int n,
                             std::vector<std::pair<int, int>> edges,
                             std::vector<int> orbit_label = {},
                             std::vector<int> domain = {0}) {
  for (const auto& e : edges)
    if (e.first < 0 || e.first >= n || e.second < 0 || e.second >= n ||
        e.first == e.second)
      throw std::out_of_range("tiny::from_edges: edge endpoint out of range");
  GraphPatch g;
  g.family = std::move(family);
  if (orbit_label.empty()) orbit_label.assign(n, 0);
  g.orbit_label = std::move(orbit_label);
  g.orbit_count = 1 + *std::max_element(g.orbit_label.begin(), g.orbit_label.end());
  detail::fill_adjacency(g, edges);
  g.fundamental_domain = std::move(domain);
  g.exact_radius = detail::eccentricity_of_domain(g) + 1;
  return g;
}

inline GraphPatch k2() { return from_edges("k2", 2, {{0, 1}}); }
inline GraphPatch path3() { return from_edges("path3", 3, {{0, 1}, {1, 2}}); }
inline GraphPatch triangle() {
  return from_edges("triangle", 3, {{0, 1}, {1, 2}, {0, 2}});
}
inline GraphPatch cycle4() {
  return from_edges("cycle4", 4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
}
inline GraphPatch grid2x3() {
  // 2 rows x 3 columns, vertex = row*3 + col
  return from_edges("grid2x3", 6,
                    {{0, 1}, {1, 2}, {3, 4}, {4, 5}, {0, 3}, {1, 4}, {2, 5}});
}
inline GraphPatch subdivided_square() {
  // 4-cycle with each edge split: even indices are corners, odd are midpoints
  return from_edges("subdivided_square8", 8,
                    {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}, {0, 7}},
                    {0, 1, 0, 1, 0, 1, 0, 1}, {0, 1});
}

}  // namespace tiny

// -------- finite volumes --------

// Induced subgraph on the union of balls B(x, l) over the fundamental domain.
// Local vertex ids are ranks in the sorted list of global ids, so everything
// downstream (edge order, CSV rows) is deterministic.
struct FiniteVolume {
  std::shared_ptr<const GraphPatch> patch;
  int l = 0;
  std::vector<int> vertices;                 // sorted global ids
  std::vector<int> local_of;                 // global -> local, -1 if absent
  std::vector<std::pair<int, int>> edges;    // local (u, v) with u < v, sorted
  std::vector<std::int64_t> arc_start;       // local CSR offsets
  std::vector<int> arc_to;                   // local neighbor
  std::vector<int> arc_edge;                 // index into edges for this arc
  std::vector<int> f_local;                  // fundamental domain, local ids
  std::vector<int> dist_to_domain;           // per local vertex

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  std::int64_t edge_count() const {
    return static_cast<std::int64_t>(edges.size());
  }
  int orbit_of(int local) const { return patch->orbit_label[vertices[local]]; }
  int degree(int local) const {
    return static_cast<int>(arc_start[local + 1] - arc_start[local]);
  }
};

inline FiniteVolume finite_volume(std::shared_ptr<const GraphPatch> patch,
                                  int l) {
  if (!patch) throw std::invalid_argument("finite_volume: null patch");
  if (l < 1 || l > patch->exact_radius - 1) {
    std::ostringstream msg;
    msg << "finite_volume: l=" << l << " out of range; this patch requires 1 <= l <= "
        << patch->exact_radius - 1 << " (exact_radius = " << patch->exact_radius
        << ")";
    throw std::invalid_argument(msg.str());
  }
  FiniteVolume vol;
  vol.patch = patch;
  vol.l = l;
  const auto dist = distances_from(*patch, patch->fundamental_domain, l);
  for (int v = 0; v < patch->vertex_count(); ++v)
    if (dist[v] <= l) vol.vertices.push_back(v);
  vol.local_of.assign(patch->vertex_count(), -1);
  for (int i = 0; i < static_cast<int>(vol.vertices.size()); ++i)
    vol.local_of[vol.vertices[i]] = i;
  for (int i = 0; i < static_cast<int>(vol.vertices.size()); ++i) {
    const int g = vol.vertices[i];
    for (const int* it = patch->neighbors_begin(g); it != patch->neighbors_end(g);
         ++it) {
      const int j = vol.local_of[*it];
      if (j > i) vol.edges.emplace_back(i, j);
    }
  }
  std::sort(vol.edges.begin(), vol.edges.end());
  const int n = vol.vertex_count();
  std::vector<int> deg(n, 0);
  for (const auto& e : vol.edges) {
    ++deg[e.first];
    ++deg[e.second];
  }
  vol.arc_start.assign(n + 1, 0);
  for (int v = 0; v < n; ++v) vol.arc_start[v + 1] = vol.arc_start[v] + deg[v];
  vol.arc_to.assign(vol.arc_start[n], 0);
  vol.arc_edge.assign(vol.arc_start[n], 0);
  std::vector<std::int64_t> cursor(vol.arc_start.begin(), vol.arc_start.end() - 1);
  for (int e = 0; e < static_cast<int>(vol.edges.size()); ++e) {
    const auto [u, v] = vol.edges[e];
    vol.arc_to[cursor[u]] = v;
    vol.arc_edge[cursor[u]++] = e;
    vol.arc_to[cursor[v]] = u;
    vol.arc_edge[cursor[v]++] = e;
  }
  for (int x : patch->fundamental_domain) vol.f_local.push_back(vol.local_of[x]);
  vol.dist_to_domain.resize(n);
  for (int i = 0; i < n; ++i) vol.dist_to_domain[i] = dist[vol.vertices[i]];
  return vol;
}

// Largest volume the patch certifies.
inline FiniteVolume max_volume(std::shared_ptr<const GraphPatch> patch) {
  return finite_volume(patch, patch->exact_radius - 1);
}

inline FiniteVolume max_volume(const GraphPatch& patch) {
  return max_volume(std::make_shared<GraphPatch>(patch));
}

// -------- text serialization --------

inline std::string to_text(const GraphPatch& g) {
  std::ostringstream out;
  out << "vertices " << g.vertex_count() << " orbits " << g.orbit_count << "\n";
  for (int v = 0; v < g.vertex_count(); ++v)
    out << "v " << g.orbit_label[v] << "\n";
  for (int u = 0; u < g.vertex_count(); ++u)
    for (const int* it = g.neighbors_begin(u); it != g.neighbors_end(u); ++it)
      if (*it > u) out << "e " << u << " " << *it << "\n";
  return out.str();
}

inline GraphPatch from_text(const std::string& text) {
  std::istringstream in(text);
  std::string tag;
  int n = 0, orbits = 0;
  std::string orbits_word;
  if (!(in >> tag >> n >> orbits_word >> orbits) || tag != "vertices" ||
      orbits_word != "orbits" || n <= 0 || orbits <= 0)
    throw std::invalid_argument("from_text: bad header, expected 'vertices N orbits K'");
  GraphPatch g;
  g.family = "from_text";
  g.orbit_count = orbits;
  g.orbit_label.reserve(n);
  std::vector<std::pair<int, int>> edges;
  while (in >> tag) {
    if (tag == "v") {
      int lab;
      if (!(in >> lab) || lab < 0 || lab >= orbits)
        throw std::invalid_argument("from_text: bad vertex line");
      g.orbit_label.push_back(lab);
    } else if (tag == "e") {
      int u, v;
      if (!(in >> u >> v) || u < 0 || v < 0 || u >= n || v >= n || u == v)
        throw std::invalid_argument("from_text: bad edge line");
      edges.emplace_back(std::min(u, v), std::max(u, v));
    } else {
      throw std::invalid_argument("from_text: unknown line tag '" + tag + "'");
    }
  }
  if (static_cast<int>(g.orbit_label.size()) != n)
    throw std::invalid_argument("from_text: vertex line count mismatch");
  detail::fill_adjacency(g, edges);
  // Fundamental domain: lowest-index vertex of each orbit.
  g.fundamental_domain.assign(orbits, -1);
  for (int v = 0; v < n; ++v)
    if (g.fundamental_domain[g.orbit_label[v]] < 0)
      g.fundamental_domain[g.orbit_label[v]] = v;
  for (int x : g.fundamental_domain)
    if (x < 0) throw std::invalid_argument("from_text: empty orbit");
  g.exact_radius = detail::eccentricity_of_domain(g) + 1;
  return g;
}

}  // namespace perc
