#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <loctime/experiments.hpp>

using namespace loctime;
namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;

namespace {

// A fresh per-case scratch directory; wiped up front so reruns start clean.
fs::path scratch(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / "lab_exp_tests" / tag;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& body) {
  std::ofstream os(p, std::ios::binary);
  REQUIRE(os.good());
  os << body;
}

fs::path shipped(const std::string& rel) {
  return fs::path(LAB_SOURCE_DIR) / rel;
}

// Column `col` (0-based) of a CSV with one header line.
std::vector<double> csv_column(const fs::path& p, std::size_t col) {
  std::ifstream is(p);
  REQUIRE(is.good());
  std::string line;
  std::getline(is, line);  // header
  std::vector<double> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    for (std::size_t i = 0; i <= col; ++i) REQUIRE(std::getline(row, cell, ','));
    out.push_back(std::stod(cell));
  }
  return out;
}

}  // namespace

TEST_CASE("kernel specs parse into the built-in shapes", "[experiments]") {
  REQUIRE(parse_kernel("box:0.5:1").mass() == Catch::Approx(1.0));
  REQUIRE(parse_kernel("box:0.5:1").name() == "box");
  REQUIRE(parse_kernel("triangle:2:0.5").mass() == Catch::Approx(1.0));
  REQUIRE(parse_kernel("gaussian:1:0.5").mass() ==
          Catch::Approx(0.5 * std::sqrt(2.0 * std::acos(-1.0))));
  REQUIRE(parse_kernel("zero").mass() == 0.0);
  // one parameter fills the first slot, the second keeps its default
  REQUIRE(parse_kernel("box:2").mass() == Catch::Approx(4.0));
  REQUIRE(parse_kernel("box").mass() == Catch::Approx(2.0));

  REQUIRE_THROWS_AS(parse_kernel("mesa:1:1"), ValidationError);
  REQUIRE_THROWS_WITH(parse_kernel("mesa:1:1"),
                      ContainsSubstring("unknown shape"));
  REQUIRE_THROWS_WITH(parse_kernel("box:tall:1"),
                      ContainsSubstring("must be numbers"));
  REQUIRE_THROWS_AS(parse_kernel("box:-1:1"), ValidationError);
}

TEST_CASE("configs round-trip through json without loss", "[experiments]") {
  ExperimentConfig c;
  c.experiment = "mechanisms";
  c.a = -1.2345678901234567;
  c.b = 0.1 + 0.2;  // 0.30000000000000004, exercises the 17-digit path
  c.kernel = "gaussian:3:0.07";
  c.gamma = 1.0 / 3.0;
  c.lambdas = {0.5, 1.0 / 7.0};
  c.epsilons = {0.2, 0.1 / 3.0};
  c.h = 1e-3;
  c.t_end = 0.75;
  c.dt = 1.0 / 3000.0;
  c.times = {1.0, 1.5, 2.25};
  c.paths = 12345;
  c.mc_dt = 1e-4;
  c.mc_delta = 0.0625;
  c.bridge = false;
  c.out_dir = "out/elsewhere";
  c.seed = 0x9E3779B97F4A7C15ull;

  const nlohmann::json j = c;
  const auto back = j.get<ExperimentConfig>();
  const nlohmann::json j2 = back;
  REQUIRE(j == j2);

  REQUIRE(back.a == c.a);
  REQUIRE(back.b == c.b);
  REQUIRE(back.gamma == c.gamma);
  REQUIRE(back.lambdas == c.lambdas);
  REQUIRE(back.epsilons == c.epsilons);
  REQUIRE(back.dt == c.dt);
  REQUIRE(back.times == c.times);
  REQUIRE(back.paths == c.paths);
  REQUIRE(back.mc_delta == c.mc_delta);
  REQUIRE(back.bridge == c.bridge);
  REQUIRE(back.seed == c.seed);

  // missing groups fall back to defaults instead of throwing
  const auto sparse = nlohmann::json{{"experiment", "law"}}
                          .get<ExperimentConfig>();
  REQUIRE(sparse.experiment == "law");
  REQUIRE(sparse.b == 1.0);
  REQUIRE(sparse.paths == 20000);
}

TEST_CASE("bad configs are rejected with field-level messages",
          "[experiments]") {
  const fs::path dir = scratch("bad_configs");

  REQUIRE_THROWS_WITH(run_experiment("/nonexistent/lab config.json"),
                      ContainsSubstring("not found"));

  const fs::path broken = dir / "broken.json";
  spit(broken, "{ \"experiment\": ");
  REQUIRE_THROWS_WITH(run_experiment(broken.string()),
                      ContainsSubstring("parse failure"));

  ExperimentConfig c;
  c.b = -1.0;
  REQUIRE_THROWS_WITH(c.validate(), ContainsSubstring("interval.b"));
  c = ExperimentConfig{};
  c.experiment = "frobnicate";
  REQUIRE_THROWS_WITH(c.validate(), ContainsSubstring("unknown name"));
  c = ExperimentConfig{};
  c.lambdas = {1.0, -0.5};
  REQUIRE_THROWS_WITH(c.validate(), ContainsSubstring("lambdas"));
  c = ExperimentConfig{};
  c.paths = 1;
  REQUIRE_THROWS_WITH(c.validate(), ContainsSubstring("mc.paths"));
  c = ExperimentConfig{};
  c.kernel = "mesa:1:1";
  REQUIRE_THROWS_AS(c.validate(), ValidationError);

  // the convergence runner insists gamma equals the kernel mass
  const fs::path mism = dir / "mismatch.json";
  c = ExperimentConfig{};
  c.gamma = 2.0;
  c.out_dir = (dir / "mismatch_out").string();
  spit(mism, nlohmann::json(c).dump(2));
  REQUIRE_THROWS_WITH(run_experiment(mism.string()),
                      ContainsSubstring("kernel mass"));
}

TEST_CASE("the shipped convergence study runs and reruns byte-identically",
          "[experiments]") {
  const fs::path dir_a = scratch("conv_a");
  const fs::path dir_b = scratch("conv_b");
  const std::string cfg = shipped("configs/convergence.json").string();

  REQUIRE(run_experiment(cfg, dir_a.string()) == 0);
  REQUIRE(run_experiment(cfg, dir_b.string()) == 0);

  const auto errs = csv_column(dir_a / "convergence.csv", 1);
  REQUIRE(errs.size() == 3);
  REQUIRE(errs[0] > errs[1]);
  REQUIRE(errs[1] > errs[2]);
  REQUIRE(errs[2] <= 0.5 * errs[0]);

  // artifact bodies carry no timestamps or host paths, so reruns match bitwise
  REQUIRE(slurp(dir_a / "convergence.csv") == slurp(dir_b / "convergence.csv"));
  REQUIRE(slurp(dir_a / "convergence_summary.json") ==
          slurp(dir_b / "convergence_summary.json"));

  // manifests differ only in wall time, timestamp, and artifact locations
  const auto man_a = nlohmann::json::parse(slurp(dir_a / "manifest.json"));
  const auto man_b = nlohmann::json::parse(slurp(dir_b / "manifest.json"));
  REQUIRE(man_a["summary"] == man_b["summary"]);
  REQUIRE(man_a["checks"] == man_b["checks"]);
  REQUIRE(man_a["experiment"] == "convergence");
  for (const auto& chk : man_a["checks"])
    REQUIRE(chk["pass"].get<bool>());

  SECTION("the report renders the pass verdicts") {
    const std::string report =
        render_report((dir_a / "manifest.json").string());
    REQUIRE_THAT(report, ContainsSubstring("monotone decrease: PASS"));
    REQUIRE_THAT(report, ContainsSubstring("eps"));
    REQUIRE_THAT(report, ContainsSubstring("ratio"));
  }

  SECTION("missing artifacts are refused before any rendering") {
    fs::remove(dir_b / "convergence.csv");
    REQUIRE_THROWS_WITH(render_report((dir_b / "manifest.json").string()),
                        ContainsSubstring("missing artifact"));
    REQUIRE_THROWS_WITH(render_report("/nonexistent/manifest.json"),
                        ContainsSubstring("manifest not found"));
  }
}

TEST_CASE("the shipped locality config drives the sampled law",
          "[experiments]") {
  const auto j =
      nlohmann::json::parse(slurp(shipped("configs/locality.json")));
  auto cfg = j.get<ExperimentConfig>();
  cfg.validate();
  REQUIRE(cfg.experiment == "law");
  REQUIRE(cfg.paths == 20000);
  REQUIRE(cfg.mc_dt == 1e-5);
  REQUIRE(cfg.gamma == 0.0);
  REQUIRE(cfg.seed == 20260819);

  // a thinned copy keeps the test quick; the shipped sizes are for the CLI
  const fs::path dir = scratch("law_run");
  auto thin = j;
  thin["mc"]["paths"] = 2000;
  thin["mc"]["dt"] = 1e-4;
  const fs::path thin_path = dir / "thin.json";
  spit(thin_path, thin.dump(2));

  REQUIRE(run_experiment(thin_path.string(), (dir / "out").string()) == 0);
  const auto man =
      nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  REQUIRE(man["summary"]["n"] == 2000);
  REQUIRE(man["summary"]["target"] == 1.0);
  const auto samples = csv_column(dir / "out" / "law_samples.csv", 0);
  REQUIRE(samples.size() == 2000);
  const std::string report =
      render_report((dir / "out" / "manifest.json").string());
  REQUIRE_THAT(report, ContainsSubstring("mean"));
  REQUIRE_THAT(report, ContainsSubstring("PASS"));
}

TEST_CASE("a failing numerical check reports through the exit code",
          "[experiments]") {
  // lambda stops far from zero, so the small-lambda tolerance cannot hold;
  // the run must still write its manifest and then signal failure
  const fs::path dir = scratch("lambda_fail");
  ExperimentConfig c;
  c.experiment = "lambda-limit";
  c.lambdas = {1.0, 0.9};
  const fs::path cfg = dir / "stalled.json";
  spit(cfg, nlohmann::json(c).dump(2));

  REQUIRE(run_experiment(cfg.string(), (dir / "out").string()) == 3);

  const auto man =
      nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  bool saw_fail = false, saw_pass = false;
  for (const auto& chk : man["checks"]) {
    saw_fail = saw_fail || !chk["pass"].get<bool>();
    saw_pass = saw_pass || chk["pass"].get<bool>();
  }
  REQUIRE(saw_fail);
  REQUIRE(saw_pass);  // the error still shrank; only the tolerance failed
  const std::string report =
      render_report((dir / "out" / "manifest.json").string());
  REQUIRE_THAT(report, ContainsSubstring("FAIL"));
}

TEST_CASE("the command line front end maps failures to exit codes",
          "[experiments][cli]") {
  const fs::path labcli = fs::path(LAB_BINARY_DIR) / "labcli";
  REQUIRE(fs::exists(labcli));
  const fs::path dir = scratch("cli");
  const std::string quiet = " > /dev/null 2> /dev/null";

  auto run = [&](const std::string& args) {
    const int raw = std::system((labcli.string() + " " + args + quiet).c_str());
    REQUIRE(raw != -1);
    return WEXITSTATUS(raw);
  };

  REQUIRE(run("run /nonexistent/config.json") == 2);
  REQUIRE(run("resolvent --lambda -3") == 2);
  REQUIRE(run("--help") == 0);

  // identical invocations must leave identical artifacts behind
  REQUIRE(run("closedform --what kstar --gamma 1 --out " +
              (dir / "one").string()) == 0);
  REQUIRE(run("closedform --what kstar --gamma 1 --out " +
              (dir / "two").string()) == 0);
  REQUIRE(slurp(dir / "one" / "closedform_kstar.csv") ==
          slurp(dir / "two" / "closedform_kstar.csv"));

  // a config whose numerical check fails surfaces as the numerical code
  ExperimentConfig c;
  c.experiment = "lambda-limit";
  c.lambdas = {1.0, 0.9};
  const fs::path cfg = dir / "stalled.json";
  spit(cfg, nlohmann::json(c).dump(2));
  REQUIRE(run("run " + cfg.string() + " --out " + (dir / "out").string()) ==
          3);
}
