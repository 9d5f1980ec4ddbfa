#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

std::string perc_binary() {
  if (const char* env = std::getenv("PERC_BIN")) return env;
  for (const char* guess : {"./perc", "../perc", "./tools/perc"})
    if (fs::exists(guess)) return fs::absolute(guess).string();
  FAIL("perc binary not found; set PERC_BIN");
  return {};
}

int run(const std::string& args) {
  const std::string cmd = perc_binary() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("perc_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string sub(const std::string& name) const {
    return (path / name).string();
  }
};

}  // namespace

TEST_CASE("graph command emits a loadable patch") {
  TempDir tmp;
  const std::string out = tmp.sub("g1");
  REQUIRE(run("graph --family square --half-width 3 --out " + out) == 0);
  REQUIRE(fs::exists(out + "/graph.txt"));
  REQUIRE(fs::exists(out + "/summary.json"));
  const std::string text = slurp(out + "/graph.txt");
  REQUIRE(!text.empty());
  // feeding the emitted file back reproduces it byte for byte
  const std::string out2 = tmp.sub("g2");
  REQUIRE(run("graph --input " + out + "/graph.txt --out " + out2) == 0);
  REQUIRE(slurp(out2 + "/graph.txt") == text);
  const auto summary = nlohmann::json::parse(slurp(out + "/summary.json"));
  bool saw_build = false;
  for (const auto& row : summary)
    if (row["check"] == "graph/build") {
      REQUIRE(row["value"] == 49);
      REQUIRE(row["params"]["max_degree"] == 4);
      saw_build = true;
    }
  REQUIRE(saw_build);
}

TEST_CASE("sampling is reproducible for a fixed seed") {
  TempDir tmp;
  const std::string base =
      "sample --family square --half-width 4 --l 3 --p 0.45 --replicas 2000";
  const std::string a = tmp.sub("a"), b = tmp.sub("b"), c = tmp.sub("c");
  REQUIRE(run(base + " --seed 5 --out " + a) == 0);
  REQUIRE(run(base + " --seed 5 --out " + b) == 0);
  REQUIRE(run(base + " --seed 6 --out " + c) == 0);
  REQUIRE(slurp(a + "/distribution.csv") == slurp(b + "/distribution.csv"));
  REQUIRE(slurp(a + "/distribution.csv") != slurp(c + "/distribution.csv"));
  REQUIRE(fs::exists(a + "/distribution.json"));
  REQUIRE(fs::exists(a + "/summary.json"));
}

TEST_CASE("worker count does not change the emitted bytes") {
  TempDir tmp;
  const std::string base =
      "sample --family square --half-width 4 --l 3 --p 0.45 --replicas 3000 "
      "--seed 11";
  const std::string a = tmp.sub("t1"), b = tmp.sub("t4");
  REQUIRE(run(base + " --threads 1 --out " + a) == 0);
  REQUIRE(run(base + " --threads 4 --out " + b) == 0);
  REQUIRE(slurp(a + "/distribution.csv") == slurp(b + "/distribution.csv"));
}

TEST_CASE("config file stands in for command-line flags") {
  TempDir tmp;
  const std::string cfg = tmp.sub("run.ini");
  {
    std::ofstream f(cfg);
    f << "seed=77\nreplicas=500\n[sample]\nfamily=square\nhalf-width=4\n"
         "l=2\np=0.6\n";
  }
  const std::string a = tmp.sub("from_cfg"), b = tmp.sub("from_flags");
  REQUIRE(run("--config " + cfg + " sample --out " + a) == 0);
  REQUIRE(run("--seed 77 --replicas 500 sample --family square "
              "--half-width 4 --l 2 --p 0.6 --out " +
              b) == 0);
  REQUIRE(slurp(a + "/distribution.csv") == slurp(b + "/distribution.csv"));
}

TEST_CASE("malformed configs abort before any output is written") {
  TempDir tmp;
  const std::string cfg = tmp.sub("bad.ini");
  {
    std::ofstream f(cfg);
    f << "[sample\nreplicas=10\n";  // unclosed section header
  }
  const std::string out = tmp.sub("never");
  REQUIRE(run("--config " + cfg + " sample --family square --half-width 4 "
              "--l 2 --p 0.5 --out " +
              out) != 0);
  REQUIRE(!fs::exists(out));
  // unknown keys are rejected, not ignored
  const std::string cfg2 = tmp.sub("unknown.ini");
  {
    std::ofstream f(cfg2);
    f << "replicazz=10\n";
  }
  REQUIRE(run("--config " + cfg2 + " sample --family square --half-width 4 "
              "--l 2 --p 0.5 --out " +
              out) != 0);
  REQUIRE(!fs::exists(out));
  // missing config file
  REQUIRE(run("--config " + tmp.sub("absent.ini") + " sample --family square "
              "--half-width 4 --l 2 --p 0.5 --out " +
              out) != 0);
  REQUIRE(!fs::exists(out));
}

TEST_CASE("usage errors exit nonzero") {
  TempDir tmp;
  REQUIRE(run("") != 0);                       // subcommand required
  REQUIRE(run("--no-such-flag") != 0);
  REQUIRE(run("sample --family nowhere --out " + tmp.sub("x")) != 0);
  REQUIRE(run("sample --family square --half-width 4 --l 2 --p 1.5 --out " +
              tmp.sub("y")) != 0);  // p outside (0,1)
  REQUIRE(run("--help") == 0);
  REQUIRE(run("sample --help") == 0);
  REQUIRE(run("longrange --help") == 0);
}

TEST_CASE("exact command certifies the tiny graphs") {
  TempDir tmp;
  const std::string out = tmp.sub("exact");
  REQUIRE(run("exact --family path3 --p 0.5 --out " + out) == 0);
  REQUIRE(fs::exists(out + "/exact_distribution.csv"));
  REQUIRE(fs::exists(out + "/event_polynomial.csv"));
  const std::string dist = slurp(out + "/exact_distribution.csv");
  REQUIRE(dist.rfind("n,prob\n", 0) == 0);
  const auto checks = nlohmann::json::parse(slurp(out + "/checks.json"));
  REQUIRE(!checks.empty());
  for (const auto& row : checks) REQUIRE(row["pass"] == true);
}

TEST_CASE("decay fit exits cleanly on a subcritical volume") {
  TempDir tmp;
  const std::string out = tmp.sub("decay");
  REQUIRE(run("decay-fit --family square --half-width 12 --l 10 --p 0.3 "
              "--mode size --n-min 3 --n-max 25 --replicas 20000 --out " +
              out) == 0);
  REQUIRE(fs::exists(out + "/tail.csv"));
  const auto summary = nlohmann::json::parse(slurp(out + "/summary.json"));
  bool saw_alpha = false;
  for (const auto& row : summary)
    if (row["check"] == "decay-fit/alpha") {
      REQUIRE(row["value"].get<double>() > 0.0);
      REQUIRE(row["pass"] == true);
      saw_alpha = true;
    }
  REQUIRE(saw_alpha);
}
