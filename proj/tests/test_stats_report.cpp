#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "percolate/report.hpp"
#include "percolate/stats.hpp"

using namespace perc;

TEST_CASE("weighted least squares reproduces a hand-solved system") {
  // x = {0,1,2}, y = {0,1,3}, w = {1,1,2}: normal equations give
  // slope 17/11, intercept -2/11, ss_res 2/11, ss_tot 27/4
  const std::vector<double> x{0, 1, 2}, y{0, 1, 3}, w{1, 1, 2};
  const LinFit f = weighted_least_squares(x, y, w);
  REQUIRE(f.slope == Catch::Approx(17.0 / 11.0).margin(1e-12));
  REQUIRE(f.intercept == Catch::Approx(-2.0 / 11.0).margin(1e-12));
  REQUIRE(f.r_squared ==
          Catch::Approx(1.0 - (2.0 / 11.0) / 6.75).margin(1e-12));
  REQUIRE(f.slope_se ==
          Catch::Approx(std::sqrt(8.0 / 121.0)).margin(1e-12));
  REQUIRE(f.intercept_se ==
          Catch::Approx(std::sqrt(18.0 / 121.0)).margin(1e-12));
  REQUIRE(f.n_points == 3);
}

TEST_CASE("least squares is exact on a perfect line") {
  const std::vector<double> x{1, 2, 3, 4}, w{5, 1, 2, 9};
  std::vector<double> y;
  for (double v : x) y.push_back(1.0 + 2.0 * v);
  const LinFit f = weighted_least_squares(x, y, w);
  REQUIRE(f.slope == Catch::Approx(2.0).margin(1e-12));
  REQUIRE(f.intercept == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(f.r_squared == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(f.slope_se == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("least squares rejects malformed input") {
  REQUIRE_THROWS_AS(weighted_least_squares({1}, {1}, {1}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(weighted_least_squares({1, 2}, {1}, {1, 1}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(weighted_least_squares({1, 2}, {1, 2}, {1, 0}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(weighted_least_squares({3, 3, 3}, {1, 2, 3}, {1, 1, 1}),
                    std::invalid_argument);
}

TEST_CASE("quantile interpolates linearly") {
  const std::vector<double> v{4, 1, 3, 2};  // sorted: 1 2 3 4
  REQUIRE(quantile(v, 0.0) == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(quantile(v, 1.0) == Catch::Approx(4.0).margin(1e-15));
  REQUIRE(quantile(v, 0.5) == Catch::Approx(2.5).margin(1e-15));
  REQUIRE(quantile(v, 0.25) == Catch::Approx(1.75).margin(1e-15));
  REQUIRE(quantile({7.0}, 0.9) == Catch::Approx(7.0).margin(1e-15));
  REQUIRE_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
}

TEST_CASE("bootstrap resamples are deterministic and conserve mass") {
  const std::map<std::int64_t, double> mass{{1, 700.0}, {2, 200.0}, {5, 100.0}};
  const SeedSpec seed{99, 0, Stream::bootstrap};
  const auto a = bootstrap_counts(mass, 5000, seed, 3);
  const auto b = bootstrap_counts(mass, 5000, seed, 3);
  REQUIRE(a == b);
  std::uint64_t total = 0;
  for (const auto& [n, c] : a) {
    total += c;
    REQUIRE(mass.count(n) == 1);
  }
  REQUIRE(total == 5000);
  // resampled frequencies track the source within a few sigma
  const double p1 = static_cast<double>(a.at(1)) / 5000.0;
  REQUIRE(std::abs(p1 - 0.7) < 4.0 * std::sqrt(0.7 * 0.3 / 5000.0));
  const auto c = bootstrap_counts(mass, 5000, seed, 4);
  REQUIRE(a != c);
  REQUIRE_THROWS_AS(bootstrap_counts({}, 10, seed, 0), std::invalid_argument);
}

TEST_CASE("double formatting round-trips exactly") {
  for (double v : {0.5, 0.1, 1.0 / 3.0, 1e-300, 6.02214076e23,
                   123456789.123456, -2.5e-7, 0.0}) {
    const std::string s = fmt_double(v);
    REQUIRE(std::strtod(s.c_str(), nullptr) == v);
  }
  REQUIRE(fmt_double(0.5) == "0.5");
  REQUIRE(fmt_int(0) == "0");
  REQUIRE(fmt_int(-17) == "-17");
  REQUIRE(fmt_int(9007199254740993LL) == "9007199254740993");
}

TEST_CASE("csv tables serialize with trailing newline") {
  CsvTable t;
  t.header = "a,b";
  t.rows = {"1,2", "3,4"};
  REQUIRE(t.to_string() == "a,b\n1,2\n3,4\n");
  CsvTable empty;
  empty.header = "x";
  REQUIRE(empty.to_string() == "x\n");
}

TEST_CASE("summary entries carry the fixed key set in order") {
  ordered_json params;
  params["beta"] = 0.5;
  const ordered_json j = summary_entry("demo/check", params, 1.5, 0.25, true);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  REQUIRE(keys == std::vector<std::string>{"check", "params", "value",
                                           "stderr", "pass"});
  REQUIRE(j["check"] == "demo/check");
  REQUIRE(j["params"]["beta"] == 0.5);
  REQUIRE(j["value"] == 1.5);
  REQUIRE(j["stderr"] == 0.25);
  REQUIRE(j["pass"] == true);
}

TEST_CASE("distribution tables write counts or probabilities by mode") {
  ClusterSizeDistribution d;
  d.kind = Kind::bond;
  d.mode = DistMode::empirical;
  d.replicas = 100;
  d.mass = {{1, 60.0}, {3, 40.0}};
  const CsvTable emp = distribution_csv(d);
  REQUIRE(emp.header == "n,count");
  REQUIRE(emp.rows == std::vector<std::string>{"1,60", "3,40"});

  ClusterSizeDistribution e;
  e.kind = Kind::site;
  e.mode = DistMode::exact;
  e.mass = {{1, 0.25}, {2, 0.75}};
  const CsvTable ex = distribution_csv(e);
  REQUIRE(ex.header == "n,prob");
  REQUIRE(ex.rows == std::vector<std::string>{"1,0.25", "2,0.75"});

  const ordered_json side = distribution_sidecar(d, "square l=4", 42);
  REQUIRE(side["volume"] == "square l=4");
  REQUIRE(side["kind"] == "bond");
  REQUIRE(side["mode"] == "empirical");
  REQUIRE(side["replicas"] == 100);
  REQUIRE(side["master_seed"] == 42);
}

TEST_CASE("scan summary gates the verdict gap at 0.04") {
  CriticalScanResult res;
  res.p_T_bracket = {0.45, 0.49};
  res.p_H_bracket = {0.50, 0.55};
  res.p_T_estimate = 0.47;
  res.p_H_estimate = 0.52;
  res.verdict_gap = interval_gap(res.p_T_bracket, res.p_H_bracket);
  const ordered_json ok = scan_summary(res, "square", Kind::bond);
  REQUIRE(ok["check"] == "critical-scan/verdict-gap");
  REQUIRE(ok["value"].get<double>() == Catch::Approx(0.01).margin(1e-12));
  REQUIRE(ok["pass"] == true);
  REQUIRE(ok["params"]["family"] == "square");
  REQUIRE(ok["params"]["p_T_lo"] == 0.45);

  res.p_H_bracket = {0.54, 0.60};
  res.verdict_gap = interval_gap(res.p_T_bracket, res.p_H_bracket);
  const ordered_json bad = scan_summary(res, "square", Kind::bond);
  REQUIRE(bad["value"].get<double>() == Catch::Approx(0.05).margin(1e-12));
  REQUIRE(bad["pass"] == false);
}

TEST_CASE("table headers are stable") {
  REQUIRE(tail_csv({}).header == "n,tail,count");
  REQUIRE(order_param_csv({}).header ==
          "beta,h,l,M,M_stderr,dMdh,dMdh_stderr");
  REQUIRE(diffineq_csv({}).header ==
          "variant,beta,h,l,lhs,lhs_se,rhs,rhs_se,slack,pass");
  CriticalScanResult res;
  REQUIRE(scan_csv(res, "square", Kind::bond).header ==
          "family,kind,p,l,mean_size,mean_size_se,reach,reach_se,divergent");
}

TEST_CASE("decay fit summary carries the fit window") {
  DecayFit f;
  f.alpha = 0.4;
  f.alpha_se = 0.01;
  f.intercept = 0.3;
  f.r_squared = 0.99;
  f.n_min = 5;
  f.n_max = 40;
  f.bins_used = 12;
  ordered_json params;
  params["p"] = 0.3;
  const ordered_json j = decay_fit_summary(f, params);
  REQUIRE(j["check"] == "decay-fit/alpha");
  REQUIRE(j["value"] == 0.4);
  REQUIRE(j["pass"] == true);
  REQUIRE(j["params"]["bins_used"] == 12);
  f.alpha = -0.1;
  REQUIRE(decay_fit_summary(f, params)["pass"] == false);
}

TEST_CASE("long-range spec text names both kernels") {
  LongRangeSpec spec;
  spec.unoriented.family = KernelSpec::Family::exponential;
  spec.unoriented.rate = 3.0;
  spec.oriented.family = KernelSpec::Family::finite_range;
  spec.oriented.range = 2;
  spec.oriented.weights = {0.5, 0.25};
  spec.J0 = 1.25;
  spec.trunc_radius = 7;
  const std::string text = longrange_spec_text(spec);
  REQUIRE(text.find("unoriented exponential rate 3") != std::string::npos);
  REQUIRE(text.find("oriented finite_range range 2 weights 0.5 0.25") !=
          std::string::npos);
  REQUIRE(text.find("J0 1.25") != std::string::npos);
  REQUIRE(text.find("trunc_radius 7") != std::string::npos);
}

TEST_CASE("file writers are atomic enough to trust round trips") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "perc_report_test";
  fs::create_directories(dir);
  const fs::path path = dir / "t.csv";
  CsvTable t;
  t.header = "n,count";
  t.rows = {"1,2"};
  write_csv(path.string(), t);
  std::ifstream in(path, std::ios::binary);
  std::string body((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  REQUIRE(body == t.to_string());
  REQUIRE_THROWS_AS(
      write_text_file((dir / "missing" / "x.txt").string(), "y"),
      std::runtime_error);
  fs::remove_all(dir);
}
