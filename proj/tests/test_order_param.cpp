#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "percolate/graph.hpp"
#include "percolate/oracle.hpp"
#include "percolate/order_param.hpp"

using namespace perc;

namespace {
const SeedSpec test_seed{2718, 0, Stream::bond_layer};
}

TEST_CASE("k2 order parameter, closed form") {
  auto patch = std::make_shared<GraphPatch>(tiny::k2());
  const FiniteVolume vol = max_volume(patch);
  const double p = 0.5, h = std::log(2.0);
  const auto d = exact_distribution_at(
      exact_cluster_distribution(vol, Kind::bond, 0), Kind::bond,
      beta_of_p(p));
  const Estimate M = M_from_distribution(d, h);
  // M = 1 - [(1-p) e^{-h} + p e^{-2h}] = 1 - (1/4 + 1/8) = 5/8
  REQUIRE(M.value == Catch::Approx(0.625).margin(1e-14));
  const OrderParameterPoint pt =
      finite_volume_M_exact(vol, Kind::bond, beta_of_p(p), h);
  REQUIRE(pt.M == Catch::Approx(0.625).margin(1e-12));
  // dM/dh = (1-p) e^{-h} + 2 p e^{-2h} = 1/4 + 1/4 = 1/2
  REQUIRE(pt.dMdh == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("blue-site Monte Carlo agrees with the series form") {
  auto patch = std::make_shared<GraphPatch>(tiny::grid2x3());
  const FiniteVolume vol = max_volume(patch);
  const int x = vol.f_local.front();
  const std::uint64_t R = 100000;
  for (Kind kind : {Kind::bond, Kind::site}) {
    for (double p : {0.3, 0.7}) {
      for (double h : {0.2, 1.0}) {
        const double beta = beta_of_p(p);
        const auto d = exact_distribution_at(
            exact_cluster_distribution(vol, kind, x), kind, beta);
        const double series = M_from_distribution(d, h).value;
        const Estimate blue = M_blue_mc(vol, kind, beta, h, x, R, test_seed);
        REQUIRE(blue.std_err > 0.0);
        REQUIRE(std::abs(blue.value - series) < 4 * blue.std_err);
      }
    }
  }
}

TEST_CASE("order parameter is monotone in h and in p") {
  auto patch = std::make_shared<GraphPatch>(tiny::cycle4());
  const FiniteVolume vol = max_volume(patch);
  const auto M_at = [&](double p, double h) {
    const auto d = exact_distribution_at(
        exact_cluster_distribution(vol, Kind::bond, 0), Kind::bond,
        beta_of_p(p));
    return M_from_distribution(d, h).value;
  };
  REQUIRE(M_at(0.4, 0.5) < M_at(0.4, 1.0));
  REQUIRE(M_at(0.2, 0.5) < M_at(0.6, 0.5));
  // h -> infinity saturates at 1, h -> 0 vanishes
  REQUIRE(M_at(0.5, 40.0) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(M_at(0.5, 1e-9) == Catch::Approx(0.0).margin(1e-6));
}

TEST_CASE("finite-volume estimator matches the exact point on small volumes") {
  auto patch = std::make_shared<GraphPatch>(tiny::subdivided_square());
  const FiniteVolume vol = max_volume(patch);
  const double beta = beta_of_p(0.55), h = 0.4;
  const OrderParameterPoint ex = finite_volume_M_exact(vol, Kind::bond, beta, h);
  const OrderParameterPoint mc =
      finite_volume_M(vol, Kind::bond, beta, h, 100000, test_seed);
  REQUIRE(std::abs(mc.M - ex.M) < 4 * mc.M_std_err);
  REQUIRE(std::abs(mc.dMdh - ex.dMdh) < 5 * mc.dMdh_std_err);
  // every orbit contributes a per-vertex estimate
  REQUIRE(mc.per_vertex_M.size() == vol.f_local.size());
}

TEST_CASE("modification bound holds exactly on enumerable volumes") {
  auto patch = std::make_shared<GraphPatch>(build_square_lattice(3));
  const FiniteVolume vol = finite_volume(patch, 2);
  REQUIRE(element_count(vol, Kind::bond) <= enumeration_cap_bits);
  for (double p : {0.3, 0.6}) {
    for (double h : {0.3, 1.0}) {
      for (int y = 0; y < vol.vertex_count(); ++y) {
        const ModificationCheck mc = check_basic_modification(
            vol, Kind::bond, beta_of_p(p), h, y);
        REQUIRE(mc.exact);
        REQUIRE(mc.pass);
        REQUIRE(mc.slack >= -1e-12);
        // bound is e^{-l h} with l the volume radius
        REQUIRE(mc.bound == Catch::Approx(std::exp(-2 * h)).margin(1e-14));
      }
    }
  }
}

TEST_CASE("modification bound via Monte Carlo on a larger volume") {
  auto patch = std::make_shared<GraphPatch>(build_square_lattice(4));
  const FiniteVolume vol = finite_volume(patch, 3);
  const auto checks = check_basic_modification_all(vol, Kind::site,
                                                   beta_of_p(0.5), 0.5, 40000,
                                                   test_seed);
  REQUIRE(checks.size() == static_cast<std::size_t>(vol.vertex_count()));
  for (const auto& mc : checks) {
    REQUIRE_FALSE(mc.exact);
    REQUIRE(mc.pass);
  }
}

TEST_CASE("convergence scan is weakly increasing in volume") {
  auto patch = std::make_shared<GraphPatch>(build_square_lattice(9));
  const auto pts = convergence_scan(patch, Kind::bond, beta_of_p(0.45), 0.6,
                                    {2, 4, 8}, 30000, test_seed);
  REQUIRE(pts.size() == 3);
  // growing l only adds ways to reach a blue vertex; allow MC noise
  REQUIRE(pts[1].M >= pts[0].M - 4 * (pts[0].M_std_err + pts[1].M_std_err));
  REQUIRE(pts[2].M >= pts[1].M - 4 * (pts[1].M_std_err + pts[2].M_std_err));
}

TEST_CASE("default size cap scales with the field") {
  // |B(0,11)| = 265 in Z^2, so both caps below bind
  auto patch = std::make_shared<GraphPatch>(build_square_lattice(12));
  const FiniteVolume vol = finite_volume(patch, 11);
  REQUIRE(vol.vertex_count() == 265);
  REQUIRE(default_size_cap(vol, 1.0) == 24);
  REQUIRE(default_size_cap(vol, 0.1) == 240);
  // 0 = uncapped: the cap would not truncate anything below the volume size
  REQUIRE(default_size_cap(vol, 0.05) == 0);
  REQUIRE_THROWS_AS(default_size_cap(vol, 0.0), std::invalid_argument);
}
