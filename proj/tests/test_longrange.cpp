#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "percolate/engine.hpp"
#include "percolate/graph.hpp"
#include "percolate/longrange.hpp"

using namespace perc;

namespace {
const SeedSpec test_seed{60221, 0, Stream::pair_layer};

std::shared_ptr<LongRangeSpec> rate3_spec(int half_width) {
  auto patch = std::make_shared<GraphPatch>(build_square_lattice(half_width));
  KernelSpec k;
  k.family = KernelSpec::Family::exponential;
  k.rate = 3.0;
  return std::make_shared<LongRangeSpec>(build_longrange_spec(patch, k));
}

// rate-3 exponential over Z^2 plus a one-step oriented layer
std::shared_ptr<LongRangeSpec> mixed_spec(int half_width) {
  auto patch = std::make_shared<GraphPatch>(build_square_lattice(half_width));
  KernelSpec un;
  un.family = KernelSpec::Family::exponential;
  un.rate = 3.0;
  KernelSpec ori;
  ori.family = KernelSpec::Family::finite_range;
  ori.range = 1;
  ori.weights = {0.7};
  return std::make_shared<LongRangeSpec>(
      build_longrange_spec(patch, un, ori));
}
}  // namespace

TEST_CASE("exponential kernel spec is pinned") {
  auto spec = rate3_spec(13);
  // sum over Z^2 of e^{-3 d}: 4 e^{-3} / (1 - e^{-3})^2
  REQUIRE(spec->J0 == Catch::Approx(0.22056402200823905).margin(1e-12));
  REQUIRE(spec->trunc_radius == 11);
  REQUIRE(spec->omitted_weight > 0.0);
  REQUIRE(spec->omitted_weight < 1e-12);
  REQUIRE(spec->J_tail[1] == Catch::Approx(spec->J0).margin(1e-15));
  REQUIRE(spec->J_tail[2] ==
          Catch::Approx(0.021415748536783283).margin(1e-12));
  // tail at a real radius rounds the distance up
  REQUIRE(spec->tail_at(1.0) == spec->J_tail[1]);
  REQUIRE(spec->tail_at(1.5) == spec->J_tail[2]);
  REQUIRE(spec->tail_at(2.0) == spec->J_tail[2]);
  REQUIRE(spec->tail_at(0.0) == spec->J_tail[0]);
  REQUIRE(spec->tail_at(1000.0) == 0.0);
}

TEST_CASE("truncation ladder is pinned for the rate-3 kernel") {
  auto spec = rate3_spec(13);
  REQUIRE(truncation_K_n(spec->J0, 1) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(truncation_K_n(spec->J0, 2) == Catch::Approx(2.882256).margin(1e-4));
  REQUIRE(truncation_K_n(spec->J0, 3) == Catch::Approx(6.29859).margin(1e-4));
  REQUIRE(truncation_K_n(spec->J0, 4) == Catch::Approx(13.3894).margin(1e-3));
  REQUIRE(truncation_L_n(*spec, 1) == 1);
  REQUIRE(truncation_L_n(*spec, 2) == 3);
  REQUIRE(truncation_L_n(*spec, 3) == 7);
  REQUIRE(truncation_L_n(*spec, 4) == 9);
  REQUIRE(truncation_L_n(*spec, 5) == 16);
  REQUIRE(truncation_bound(*spec, 2).n_l == 1);
  REQUIRE(truncation_bound(*spec, 4).n_l == 2);
  REQUIRE(truncation_bound(*spec, 8).n_l == 3);
  REQUIRE(truncation_bound(*spec, 12).n_l == 4);
  REQUIRE_THROWS_AS(truncation_bound(*spec, 0), std::invalid_argument);
}

TEST_CASE("n_l grows with l and g_l obeys the certified rate") {
  auto spec = rate3_spec(16);
  int prev_n = 0;
  for (int l : {2, 4, 8, 12, 15}) {
    const TruncationBound tb = truncation_bound(*spec, l);
    REQUIRE(tb.n_l >= prev_n);
    prev_n = tb.n_l;
    const double g = tb.g(1.0);
    REQUIRE(g > 0.0);
    // at beta = 1 the ladder guarantees g_l <= J_{L_n/n} K_n / n <= 1/n^3
    const double n3 = std::pow(static_cast<double>(tb.n_l), 3.0);
    REQUIRE(g <= 1.0 / n3 + 1e-12);
  }
  REQUIRE(prev_n == 4);
  // f adds the ghost escape term and decreases in h
  const TruncationBound tb = truncation_bound(*spec, 8);
  REQUIRE(tb.f(1.0, 0.5) > tb.g(1.0));
  REQUIRE(tb.f(1.0, 0.5) > tb.f(1.0, 2.0));
  REQUIRE(tb.f(1.0, 0.5) ==
          Catch::Approx(tb.g(1.0) + std::exp(-tb.n_l * 0.5)).margin(1e-15));
  REQUIRE_THROWS_AS(tb.g(0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(tb.f(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("pair tables respect orientation when building arcs") {
  auto spec = mixed_spec(8);
  const LongRangeVolume vol = build_longrange_volume(spec, 3);
  REQUIRE(vol.pair_count() == 372);
  int oriented = 0;
  for (const auto& pr : vol.pairs) {
    REQUIRE(pr.u != pr.v);
    REQUIRE(pr.J > 0.0);
    if (pr.oriented) ++oriented;
  }
  // one oriented pair per ordered adjacent pair: twice the edge count
  REQUIRE(oriented == 2 * static_cast<int>(vol.base.edges.size()));
  // unoriented pairs are usable from both endpoints, oriented from the source
  std::int64_t arcs = 0;
  for (int v = 0; v < vol.base.vertex_count(); ++v)
    arcs += vol.arc_start[v + 1] - vol.arc_start[v];
  REQUIRE(arcs == 2 * (vol.pair_count() - oriented) + oriented);
  REQUIRE(vol.max_out_degree == 28);
}

TEST_CASE("pair probabilities follow 1 - exp(-beta J)") {
  auto spec = rate3_spec(13);
  const LongRangeVolume vol = build_longrange_volume(spec, 3);
  const auto probs = vol.pair_probs(1.3);
  REQUIRE(probs.size() == vol.pairs.size());
  for (std::size_t i = 0; i < probs.size(); ++i)
    REQUIRE(probs[i] ==
            Catch::Approx(1.0 - std::exp(-1.3 * vol.pairs[i].J)).margin(1e-14));
  REQUIRE_THROWS_AS(vol.pair_probs(0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(vol.pair_probs(-0.5), std::invalid_argument);
}

TEST_CASE("oriented reachability is one-way") {
  auto spec = mixed_spec(8);
  const LongRangeVolume vol = build_longrange_volume(spec, 3);
  std::int64_t pick = -1;
  for (std::int64_t i = 0; i < vol.pair_count(); ++i)
    if (vol.pairs[i].oriented) {
      pick = i;
      break;
    }
  REQUIRE(pick >= 0);
  DirectedConfiguration only_pick;
  only_pick.open_pairs = {pick};
  const int u = vol.pairs[pick].u, v = vol.pairs[pick].v;
  const auto from_u = oriented_cluster_of(vol, only_pick, u);
  const auto from_v = oriented_cluster_of(vol, only_pick, v);
  REQUIRE(from_u == std::vector<int>{std::min(u, v), std::max(u, v)});
  REQUIRE(from_v == std::vector<int>{v});
  REQUIRE_THROWS_AS(oriented_cluster_of(vol, only_pick, -1), std::out_of_range);
}

TEST_CASE("degenerate nearest-neighbour kernel matches the bond engine") {
  auto patch = std::make_shared<GraphPatch>(build_square_lattice(6));
  KernelSpec k;
  k.family = KernelSpec::Family::finite_range;
  k.range = 1;
  k.weights = {1.0};
  auto spec = std::make_shared<LongRangeSpec>(build_longrange_spec(patch, k));
  // J0 sums unit weights over the four neighbours
  REQUIRE(spec->J0 == Catch::Approx(4.0).margin(1e-12));
  REQUIRE(spec->trunc_radius == 2);
  const LongRangeVolume vol = build_longrange_volume(spec, 3);
  REQUIRE(vol.pair_count() ==
          static_cast<std::int64_t>(vol.base.edges.size()));
  REQUIRE(vol.max_out_degree == 4);
  const double beta = 0.8;
  const std::uint64_t R = 60000;
  const int x = vol.base.f_local.front();
  const auto d_lr =
      longrange_cluster_distribution_mc(vol, beta, x, R, test_seed);
  SeedSpec other = test_seed;
  other.replica_index = R;
  const auto d_nn =
      cluster_size_distribution_mc(vol.base, Kind::bond, beta, x, R, other);
  for (std::int64_t n = 1; n <= 8; ++n) {
    const double a = d_lr.prob(n), b = d_nn.prob(n);
    const double se =
        std::sqrt((a * (1 - a) + b * (1 - b)) / static_cast<double>(R));
    if (se > 0.0) REQUIRE(std::abs(a - b) < 4 * se);
  }
}

TEST_CASE("heavy power-law tails fail the summability gate") {
  auto patch = std::make_shared<GraphPatch>(build_square_lattice(8));
  KernelSpec k;
  k.family = KernelSpec::Family::power;
  k.exponent = 1.0;
  REQUIRE_THROWS_WITH(build_longrange_spec(patch, k),
                      Catch::Matchers::ContainsSubstring("not below"));
  // a steep power law decays inside the same patch
  k.exponent = 9.0;
  REQUIRE_NOTHROW(build_longrange_spec(patch, k));
}

TEST_CASE("tail-bound surrogate must certify enough radius") {
  auto spec = rate3_spec(13);
  const LongRangeVolume small = build_longrange_volume(spec, 4);
  const LongRangeVolume shallow = build_longrange_volume(spec, 6);
  const LongRangeVolume full = build_longrange_volume(spec, 12);
  // k = 2 clusters can walk 2 * (trunc_radius - 1) = 20 steps; l = 6 is short
  REQUIRE_THROWS_AS(
      check_long_model_bound(shallow, small, 1.0, 2, 1000, test_seed),
      std::invalid_argument);
  // k beyond the certified ladder height n_l = 2
  REQUIRE_THROWS_AS(
      check_long_model_bound(full, small, 1.0, 5, 1000, test_seed),
      std::invalid_argument);
  // volumes must be built from one spec object
  auto other = rate3_spec(13);
  const LongRangeVolume foreign = build_longrange_volume(other, 12);
  REQUIRE_THROWS_AS(
      check_long_model_bound(foreign, small, 1.0, 1, 1000, test_seed),
      std::invalid_argument);
}

TEST_CASE("tail bound and modification hold at moderate coupling") {
  auto spec = rate3_spec(25);
  const LongRangeVolume small = build_longrange_volume(spec, 4);
  const LongRangeVolume full = build_longrange_volume(spec, 24);
  const double beta = 0.3 / spec->J0;
  for (int k = 1; k <= 2; ++k) {
    const auto rep =
        check_long_model_bound(full, small, beta, k, 8000, test_seed);
    REQUIRE(rep.n_l == 2);
    REQUIRE(rep.pass);
    if (k == 1) {
      // P(|C| >= 1) = 1 on both sides, so the slack is exactly g_l
      REQUIRE(rep.slack == Catch::Approx(rep.g_l).margin(1e-12));
      REQUIRE(rep.slack_se == 0.0);
    }
  }
  int y = 0;
  for (int v = 0; v < small.base.vertex_count(); ++v)
    if (small.base.dist_to_domain[v] > small.base.dist_to_domain[y]) y = v;
  const auto mod =
      check_long_range_modification(small, beta, 0.5, y, 8000, test_seed);
  REQUIRE(mod.pass);
  REQUIRE(mod.f_l == Catch::Approx(mod.g_l + std::exp(-mod.n_l * 0.5))
                         .margin(1e-12));
  REQUIRE_THROWS_AS(
      check_long_range_modification(small, beta, 0.5, -3, 100, test_seed),
      std::out_of_range);
}

TEST_CASE("long-range inequalities use the kernel escape term") {
  auto spec = rate3_spec(25);
  const LongRangeVolume vol = build_longrange_volume(spec, 4);
  const double beta = 0.4 / spec->J0;
  for (IneqVariant v : {IneqVariant::bond1, IneqVariant::bond2}) {
    const DiffIneqReport r =
        check_longrange_inequality(v, vol, beta, 0.5, 30000, test_seed);
    REQUIRE(r.pass);
    REQUIRE(r.K == vol.max_out_degree);
    REQUIRE(r.K == 40);
  }
  // the site forms have no pair-graph analogue here
  REQUIRE_THROWS_AS(
      check_longrange_inequality(IneqVariant::site1, vol, beta, 0.5, 100,
                                 test_seed),
      std::invalid_argument);
  REQUIRE_THROWS_AS(
      check_longrange_inequality(IneqVariant::site2, vol, beta, 0.5, 100,
                                 test_seed),
      std::invalid_argument);
}

TEST_CASE("open pair counts match the independent-coupling law") {
  auto spec = rate3_spec(25);
  const LongRangeVolume vol = build_longrange_volume(spec, 4);
  const auto probs = vol.pair_probs(1.0);
  double expect = 0.0, var = 0.0;
  for (double q : probs) {
    expect += q;
    var += q * (1 - q);
  }
  const std::uint64_t R = 4000;
  double mean = 0.0;
  for (std::uint64_t r = 0; r < R; ++r) {
    SeedSpec s = test_seed;
    s.replica_index = r;
    mean += static_cast<double>(sample_longrange(vol, 1.0, s).open_pairs.size());
  }
  mean /= static_cast<double>(R);
  const double se = std::sqrt(var / static_cast<double>(R));
  REQUIRE(std::abs(mean - expect) < 4 * se);
}
