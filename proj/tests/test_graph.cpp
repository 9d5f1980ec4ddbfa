#include <catch2/catch_amalgamated.hpp>

#include <memory>
#include <set>

#include "percolate/graph.hpp"

using namespace perc;

TEST_CASE("square lattice patch has grid counts and one orbit") {
  const GraphPatch g = build_square_lattice(3);
  REQUIRE(g.vertex_count() == 49);
  REQUIRE(g.orbit_count == 1);
  REQUIRE(g.fundamental_domain.size() == 1);
  REQUIRE(g.exact_radius == 3);
  REQUIRE(g.max_degree() == 4);
  // interior vertex degrees are 4, corners are 2
  int deg4 = 0, deg2 = 0;
  for (int v = 0; v < g.vertex_count(); ++v) {
    const int d = g.degree(v);
    if (d == 4) ++deg4;
    if (d == 2) ++deg2;
  }
  REQUIRE(deg4 == 25);
  REQUIRE(deg2 == 4);
}

TEST_CASE("subdivided square lattice alternates two orbits") {
  const GraphPatch g = build_subdivided_square_lattice(3);
  REQUIRE(g.orbit_count == 2);
  REQUIRE(g.fundamental_domain.size() == 2);
  // midpoint vertices always have degree 2 when not clipped
  const int mid = g.fundamental_domain[1];
  REQUIRE(g.orbit_label[mid] == 1);
  REQUIRE(g.degree(mid) == 2);
  // original vertices keep degree 4 in the interior
  const int orig = g.fundamental_domain[0];
  REQUIRE(g.orbit_label[orig] == 0);
  REQUIRE(g.degree(orig) == 4);
  REQUIRE(g.exact_radius == 2 * 3);
}

TEST_CASE("regular tree patch") {
  const GraphPatch g = build_regular_tree(3, 4);
  // 3-regular tree truncated at depth 4: 1 + 3 + 6 + 12 + 24
  REQUIRE(g.vertex_count() == 46);
  REQUIRE(g.orbit_count == 1);
  REQUIRE(g.exact_radius == 4);
  REQUIRE(g.max_degree() == 3);
  REQUIRE_THROWS_AS(build_regular_tree(1, 3), std::invalid_argument);
  REQUIRE_THROWS_AS(build_regular_tree(3, 0), std::invalid_argument);
}

TEST_CASE("finite volume bounds and contents") {
  auto patch = std::make_shared<GraphPatch>(build_square_lattice(4));
  const FiniteVolume v2 = finite_volume(patch, 2);
  REQUIRE(v2.l == 2);
  REQUIRE(v2.vertex_count() == 13);  // |B(0,2)| in Z^2
  REQUIRE(v2.edges.size() == 16);
  REQUIRE(v2.f_local.size() == 1);
  // distances are to the fundamental domain
  for (int v = 0; v < v2.vertex_count(); ++v)
    REQUIRE(v2.dist_to_domain[v] <= 2);
  REQUIRE_THROWS_AS(finite_volume(patch, 0), std::invalid_argument);
  REQUIRE_THROWS_AS(finite_volume(patch, patch->exact_radius),
                    std::invalid_argument);
  const FiniteVolume vm = max_volume(patch);
  REQUIRE(vm.l == patch->exact_radius - 1);
}

TEST_CASE("volume vertex ids are sorted and distances certified") {
  auto patch = std::make_shared<GraphPatch>(build_square_lattice(5));
  const FiniteVolume v = finite_volume(patch, 4);
  // local ids are ranks of sorted global ids: deterministic row order
  for (int i = 1; i < v.vertex_count(); ++i)
    REQUIRE(v.vertices[i - 1] < v.vertices[i]);
  for (int i = 0; i < v.vertex_count(); ++i) {
    REQUIRE(v.dist_to_domain[i] >= 0);
    REQUIRE(v.dist_to_domain[i] <= v.l);
    REQUIRE(v.local_of[v.vertices[i]] == i);
  }
  // edges are (u, v) with u < v, lexicographically sorted
  for (std::size_t e = 0; e < v.edges.size(); ++e) {
    REQUIRE(v.edges[e].first < v.edges[e].second);
    if (e > 0) REQUIRE(v.edges[e - 1] < v.edges[e]);
  }
}

TEST_CASE("text serialization round-trips") {
  const GraphPatch g = build_subdivided_square_lattice(2);
  const std::string text = to_text(g);
  const GraphPatch h = from_text(text);
  // family is construction metadata and not part of the text format
  REQUIRE(h.family == "from_text");
  REQUIRE(h.vertex_count() == g.vertex_count());
  REQUIRE(h.orbit_label == g.orbit_label);
  // the text format carries no domain: the parser picks the lowest-index
  // representative per orbit and recertifies the radius from there
  REQUIRE(h.fundamental_domain.size() == g.fundamental_domain.size());
  for (std::size_t k = 0; k < h.fundamental_domain.size(); ++k) {
    const int rep = h.fundamental_domain[k];
    REQUIRE(h.orbit_label[rep] == static_cast<int>(k));
    for (int v = 0; v < rep; ++v) REQUIRE(h.orbit_label[v] != static_cast<int>(k));
  }
  REQUIRE(h.exact_radius >= 1);
  REQUIRE(h.adj_start == g.adj_start);
  REQUIRE(h.adj == g.adj);
  REQUIRE(to_text(h) == text);
}

TEST_CASE("from_text rejects malformed input") {
  REQUIRE_THROWS_AS(from_text("garbage"), std::invalid_argument);
  const GraphPatch g = tiny::path3();
  std::string text = to_text(g);
  // truncating the adjacency section must not silently parse
  text = text.substr(0, text.size() / 2);
  REQUIRE_THROWS(from_text(text));
}

TEST_CASE("tiny graphs are consistent") {
  for (const GraphPatch& g :
       {tiny::k2(), tiny::path3(), tiny::triangle(), tiny::cycle4(),
        tiny::grid2x3(), tiny::subdivided_square()}) {
    REQUIRE(g.vertex_count() >= 2);
    REQUIRE(g.exact_radius >= 1);
    // adjacency is symmetric
    for (int v = 0; v < g.vertex_count(); ++v)
      for (const int* it = g.neighbors_begin(v); it != g.neighbors_end(v); ++it)
        REQUIRE(std::find(g.neighbors_begin(*it), g.neighbors_end(*it), v) !=
                g.neighbors_end(*it));
    // every orbit has exactly one fundamental-domain representative
    std::set<int> orbits;
    for (int v : g.fundamental_domain) orbits.insert(g.orbit_label[v]);
    REQUIRE(static_cast<int>(orbits.size()) == g.orbit_count);
  }
}

TEST_CASE("tiny from_edges validates") {
  REQUIRE_THROWS_AS(tiny::from_edges("bad", 3, {{0, 1}}),
                    std::invalid_argument);  // disconnected
  REQUIRE_THROWS_AS(tiny::from_edges("bad", 2, {{0, 2}}),
                    std::out_of_range);
}
