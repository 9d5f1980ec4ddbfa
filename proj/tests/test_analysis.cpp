#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "percolate/analysis.hpp"
#include "percolate/graph.hpp"
#include "percolate/parallel.hpp"

using namespace perc;

namespace {
const SeedSpec test_seed{777, 0, Stream::bond_layer};

TailCurve geometric_curve(int n_max, double scale) {
  TailCurve c;
  for (int n = 1; n <= n_max; ++n) {
    c.n.push_back(static_cast<double>(n));
    c.tail.push_back(std::pow(2.0, -n));
    c.count.push_back(scale * std::pow(2.0, -n));
  }
  return c;
}
}  // namespace

TEST_CASE("exponential fit recovers a synthetic geometric tail exactly") {
  const TailCurve c = geometric_curve(15, 1e9);
  const DecayFit f = fit_exponential_tail(c, 1, 15);
  REQUIRE(f.alpha == Catch::Approx(std::log(2.0)).margin(1e-10));
  REQUIRE(f.intercept == Catch::Approx(0.0).margin(1e-9));
  REQUIRE(f.r_squared == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(f.alpha_se < 1e-8);
  REQUIRE(f.bins_used == 15);
  REQUIRE(f.n_min == 1.0);
  REQUIRE(f.n_max == 15.0);
}

TEST_CASE("fit skips undersampled, saturated, and empty bins") {
  TailCurve c = geometric_curve(15, 1e9);
  // starve the deep bins below the count floor
  for (std::size_t i = 0; i < c.n.size(); ++i)
    if (c.n[i] > 8) c.count[i] = decay_fit_min_count - 1;
  // saturate one bin and empty another inside the window
  c.tail[1] = 1.0;
  c.tail[4] = 0.0;
  const DecayFit f = fit_exponential_tail(c, 1, 15);
  REQUIRE(f.bins_used == 6);  // n in {1, 3, 4, 6, 7, 8} survive
  REQUIRE(f.n_max == 8.0);
  REQUIRE(f.alpha == Catch::Approx(std::log(2.0)).margin(1e-9));
}

TEST_CASE("fit refuses a window with fewer than four usable bins") {
  const TailCurve c = geometric_curve(15, 1e9);
  REQUIRE_THROWS_WITH(fit_exponential_tail(c, 3, 5),
                      Catch::Matchers::ContainsSubstring("usable bins"));
  REQUIRE_THROWS_AS(fit_exponential_tail(c, 20, 30), std::invalid_argument);
}

TEST_CASE("size tail curve mirrors the distribution tails") {
  ClusterSizeDistribution d;
  d.kind = Kind::bond;
  d.mode = DistMode::empirical;
  d.replicas = 1000;
  d.mass = {{1, 600.0}, {2, 250.0}, {3, 150.0}};
  const TailCurve c = size_tail_curve(d);
  REQUIRE(c.n == std::vector<double>{1.0, 2.0, 3.0});
  REQUIRE(c.tail[0] == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(c.tail[1] == Catch::Approx(0.4).margin(1e-12));
  REQUIRE(c.tail[2] == Catch::Approx(0.15).margin(1e-12));
  for (std::size_t i = 0; i < c.n.size(); ++i)
    REQUIRE(c.count[i] == Catch::Approx(c.tail[i] * 1000.0).margin(1e-9));
}

TEST_CASE("radius tail curve starts at the one-step reach probability") {
  auto patch = std::make_shared<GraphPatch>(build_square_lattice(8));
  const FiniteVolume vol = finite_volume(patch, 6);
  const double p = 0.3;
  const std::uint64_t R = 20000;
  const TailCurve c =
      radius_tail_curve(vol, Kind::bond, beta_of_p(p), vol.f_local.front(), R,
                        test_seed);
  REQUIRE(c.n.size() == 6);
  for (std::size_t i = 1; i < c.tail.size(); ++i)
    REQUIRE(c.tail[i] <= c.tail[i - 1]);
  // reach >= 1 needs an open incident edge: 1 - (1-p)^4
  const double q1 = 1.0 - std::pow(1.0 - p, 4.0);
  const double se = std::sqrt(q1 * (1.0 - q1) / static_cast<double>(R));
  REQUIRE(std::abs(c.tail[0] - q1) < 4 * se);
  for (std::size_t i = 0; i < c.n.size(); ++i)
    REQUIRE(c.count[i] ==
            Catch::Approx(c.tail[i] * static_cast<double>(R)).margin(1e-9));
  REQUIRE_THROWS_AS(radius_tail_curve(vol, Kind::bond, -1.0, 0, 10, test_seed),
                    std::invalid_argument);
}

TEST_CASE("bracket arithmetic") {
  const Bracket b{0.4, 0.5};
  REQUIRE(b.center() == Catch::Approx(0.45).margin(1e-15));
  REQUIRE(b.half_width() == Catch::Approx(0.05).margin(1e-15));
  REQUIRE(b.contains(0.4));
  REQUIRE(b.contains(0.45));
  REQUIRE(b.contains(0.5));
  REQUIRE(!b.contains(0.39));
  REQUIRE(interval_gap({0.4, 0.5}, {0.55, 0.6}) ==
          Catch::Approx(0.05).margin(1e-15));
  REQUIRE(interval_gap({0.55, 0.6}, {0.4, 0.5}) ==
          Catch::Approx(0.05).margin(1e-15));
  REQUIRE(interval_gap({0.4, 0.5}, {0.45, 0.6}) == 0.0);
  REQUIRE(interval_gap({0.4, 0.5}, {0.5, 0.6}) == 0.0);
}

TEST_CASE("scan rejects malformed grids") {
  auto patch = std::make_shared<GraphPatch>(build_square_lattice(9));
  const std::vector<double> grid{0.3, 0.4, 0.5};
  REQUIRE_THROWS_AS(
      scan_critical(patch, Kind::bond, grid, {4}, 100, test_seed),
      std::invalid_argument);
  REQUIRE_THROWS_AS(
      scan_critical(patch, Kind::bond, grid, {4, 4, 8}, 100, test_seed),
      std::invalid_argument);
  REQUIRE_THROWS_AS(
      scan_critical(patch, Kind::bond, {0.3, 0.4}, {2, 4, 8}, 100, test_seed),
      std::invalid_argument);
  REQUIRE_THROWS_AS(scan_critical(patch, Kind::bond, {0.3, 0.2, 0.5},
                                  {2, 4, 8}, 100, test_seed),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(scan_critical(patch, Kind::bond, {0.0, 0.4, 0.5},
                                  {2, 4, 8}, 100, test_seed),
                    std::invalid_argument);
}

TEST_CASE("scan demands a grid that actually straddles the transition") {
  auto patch = std::make_shared<GraphPatch>(build_square_lattice(9));
  REQUIRE_THROWS_WITH(scan_critical(patch, Kind::bond, {0.05, 0.10, 0.15},
                                    {2, 4, 8}, 2000, test_seed),
                      Catch::Matchers::ContainsSubstring("refine"));
}

TEST_CASE("scan output is structured, plausible, and thread-count independent") {
  auto patch = std::make_shared<GraphPatch>(build_square_lattice(9));
  const std::vector<double> grid{0.10, 0.15, 0.20, 0.25, 0.30, 0.35,
                                 0.40, 0.45, 0.50, 0.55, 0.60, 0.65};
  const std::vector<int> sizes{2, 4, 8};
  thread_override() = 1;
  const CriticalScanResult a =
      scan_critical(patch, Kind::bond, grid, sizes, 3000, test_seed);
  thread_override() = 3;
  const CriticalScanResult b =
      scan_critical(patch, Kind::bond, grid, sizes, 3000, test_seed);
  thread_override() = 0;

  REQUIRE(a.cells.size() == grid.size() * sizes.size());
  std::size_t idx = 0;
  for (int l : sizes)
    for (double p : grid) {
      REQUIRE(a.cells[idx].l == l);
      REQUIRE(a.cells[idx].p == p);
      ++idx;
    }
  REQUIRE(a.growth_crossings.size() == sizes.size() - 1);
  REQUIRE(a.theta_crossings.size() == sizes.size());
  // small volumes bias the estimates, but they stay near the transition
  REQUIRE(a.p_T_estimate > 0.35);
  REQUIRE(a.p_T_estimate < 0.55);
  REQUIRE(a.p_H_estimate > 0.40);
  REQUIRE(a.p_H_estimate < 0.65);
  REQUIRE(a.p_T_bracket.contains(a.p_T_estimate));
  REQUIRE(a.p_H_bracket.contains(a.p_H_estimate));
  REQUIRE(a.verdict_gap ==
          Catch::Approx(interval_gap(a.p_T_bracket, a.p_H_bracket))
              .margin(1e-15));

  REQUIRE(a.p_T_estimate == b.p_T_estimate);
  REQUIRE(a.p_H_estimate == b.p_H_estimate);
  REQUIRE(a.p_T_bracket.lo == b.p_T_bracket.lo);
  REQUIRE(a.p_T_bracket.hi == b.p_T_bracket.hi);
  REQUIRE(a.p_H_bracket.lo == b.p_H_bracket.lo);
  REQUIRE(a.p_H_bracket.hi == b.p_H_bracket.hi);
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    REQUIRE(a.cells[i].mean_size == b.cells[i].mean_size);
    REQUIRE(a.cells[i].reach == b.cells[i].reach);
    REQUIRE(a.cells[i].divergent == b.cells[i].divergent);
  }
}
