// End-to-end checks of the command line surface: exit codes, argument
// validation, and output schemas. The binary path comes from CVXREG_CLI_BIN.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cvxreg/estimators.hpp"
#include "cvxreg/io.hpp"
#include "cvxreg/tuning.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

std::string cli_bin() {
  const char* bin = std::getenv("CVXREG_CLI_BIN");
  REQUIRE(bin != nullptr);
  return bin;
}

RunResult run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + cli_bin() + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult result;
  char buf[512];
  while (fgets(buf, sizeof(buf), pipe) != nullptr) result.out += buf;
  const int status = pclose(pipe);
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "cvxreg_cli_tests";
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path path = scratch_dir() / name;
  std::ofstream out(path);
  out << text;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("help exits zero on every subcommand") {
  CHECK(run("--help").code == 0);
  for (const char* sub : {"fit", "predict", "tune", "experiment"})
    CHECK(run(std::string(sub) + " --help").code == 0);
}

TEST_CASE("fit on interpolatable data") {
  const auto data = write_file("two.csv", "x1,y\n0,0\n1,1\n");
  const auto out = scratch_dir() / "two_model.json";
  const auto r = run("fit --data " + data.string() + " --estimator cr --out " + out.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("sse: ") != std::string::npos);
  CHECK(r.out.find("seed: 0") != std::string::npos);
  CHECK(r.out.find("optimal") != std::string::npos);
  CHECK(fs::exists(out));
  CHECK(slurp(out).find("cvxreg-model/1") != std::string::npos);
}

TEST_CASE("argument validation exits 2") {
  const auto data = write_file("three.csv", "x1,y\n0,0\n1,1\n2,0\n");
  CHECK(run("fit --data " + data.string() + " --estimator wrcr").code == 2);
  CHECK(run("fit --data " + data.string() + " --estimator bogus").code == 2);
  CHECK(run("fit --data " + data.string() + " --estimator pcr").code == 2);  // missing lambda
  CHECK(run("experiment --preset nonsense").code == 2);
  CHECK(run("nonsense").code == 2);
}

TEST_CASE("data errors exit 3") {
  CHECK(run("fit --data /nonexistent.csv --estimator cr").code == 3);
  const auto bad = write_file("bad.csv", "x1,y\n1,oops\n");
  const auto r = run("fit --data " + bad.string() + " --estimator cr");
  CHECK(r.code == 3);
  CHECK(r.out.find("oops") != std::string::npos);
  CHECK(run("experiment --preset frontier-fixture --fixture /missing.csv").code == 3);
}

TEST_CASE("wrcr with q derives percentile bounds") {
  const auto data =
      write_file("q.csv", "x1,y\n0,0.1\n1,0.9\n2,2.1\n3,3.2\n4,3.9\n5,5.1\n");
  const auto out = scratch_dir() / "wq.json";
  const auto r = run("fit --data " + data.string() + " --estimator wrcr --q 0.1 --out " +
                     out.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("derived bounds from cr subgradient percentiles") != std::string::npos);
  CHECK(r.out.find("l0 = [") != std::string::npos);
  CHECK(slurp(out).find("\"wrcr\"") != std::string::npos);

  // The derived bounds must equal percentile_bounds of the CR fit's
  // subgradients on the same data.
  const auto loaded = cvxreg::load_model(out.string());
  const auto dataset = cvxreg::read_dataset_csv(data.string());
  const auto cr = cvxreg::fit(dataset, cvxreg::EstimatorConfig::cr());
  const auto [lo, hi] = cvxreg::percentile_bounds(cvxreg::subgradient_matrix(cr), 0.1);
  CHECK(loaded.config.lower[0] == doctest::Approx(lo[0]).epsilon(1e-12));
  CHECK(loaded.config.upper[0] == doctest::Approx(hi[0]).epsilon(1e-12));
}

TEST_CASE("predict adds yhat and subgradient columns") {
  const auto data = write_file("p.csv", "x1,y\n0,0\n1,1\n2,0\n");
  const auto model = scratch_dir() / "p_model.json";
  REQUIRE(run("fit --data " + data.string() + " --estimator cr --out " + model.string()).code ==
          0);
  const auto out = scratch_dir() / "pred.csv";
  const auto r = run("predict --model " + model.string() + " --data " + data.string() +
                     " --out " + out.string() + " --subgradients");
  CHECK(r.code == 0);
  const std::string csv = slurp(out);
  CHECK(csv.rfind("x1,y,yhat,beta1", 0) == 0);
  // anchor prediction equals the stored fitted value (1/3 here)
  CHECK(csv.find("0.33333333") != std::string::npos);

  const auto wide = write_file("wide.csv", "x1,x2,y\n0,0,0\n1,1,1\n");
  CHECK(run("predict --model " + model.string() + " --data " + wide.string() + " --out " +
            out.string())
            .code == 3);
}

TEST_CASE("tune reports grids and chosen values") {
  const auto grid = write_file("zero.json", R"({"parameter":"lambda","values":[0.0]})");
  std::string rows = "x1,y\n";
  for (int i = 0; i < 12; ++i)
    rows += std::to_string(i) + "," + std::to_string(0.25 * i * i) + "\n";
  const auto data = write_file("tune.csv", rows);
  const auto out = scratch_dir() / "cv.json";
  const auto r = run("tune --data " + data.string() + " --estimator pcr --grid file:" +
                     grid.string() + " --out " + out.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("chosen lambda: 0") != std::string::npos);
  CHECK(slurp(out).find("cvxreg-cv/1") != std::string::npos);

  const auto rq = run("tune --data " + data.string() + " --estimator wrcr --grid paper6");
  CHECK(rq.code == 0);
  CHECK(rq.out.find("grid: q, 49 values from 0.01 to 0.49") != std::string::npos);

  const auto ra = run("tune --data " + data.string() + " --estimator alcr --grid paper7");
  CHECK(ra.code == 0);
  CHECK(ra.out.find("grid: L0, 50 values from 1 to 500") != std::string::npos);
}

TEST_CASE("boundary preset writes reports") {
  const auto out_dir = scratch_dir() / "boundary_out";
  const auto r =
      run("experiment --preset boundary --n 30 --reps 3 --seed 1 --jobs 2 --out " +
          out_dir.string());
  CHECK(r.code == 0);
  const std::string report = slurp(out_dir / "report.json");
  CHECK(report.find("max_function_error[n=30]") != std::string::npos);
  CHECK(report.find("max_subgradient_error[n=30]") != std::string::npos);
  const std::string csv = slurp(out_dir / "boundary.csv");
  CHECK(csv.rfind("n,replication,max_function_error,max_subgradient_error", 0) == 0);
}

TEST_CASE("table2 preset row-count contract") {
  const auto out_dir = scratch_dir() / "table2_out";
  const auto r = run(
      "experiment --preset table2 --n 16 --reps 2 --estimators cr,alcr --seed 4 --jobs 2 "
      "--out " +
      out_dir.string());
  CHECK(r.code == 0);
  const std::string csv = slurp(out_dir / "results.csv");
  int lines = 0;
  for (char c : csv)
    if (c == '\n') ++lines;
  CHECK(lines == 1 + 2 * 2);  // header + estimators x replications
}

TEST_CASE("experiment output is identical for repeated seeded runs") {
  const auto out_a = scratch_dir() / "det_a";
  const auto out_b = scratch_dir() / "det_b";
  const std::string args = "experiment --preset boundary --n 25 --reps 3 --seed 9 --out ";
  REQUIRE(run(args + out_a.string() + " --jobs 1").code == 0);
  REQUIRE(run(args + out_b.string() + " --jobs 2").code == 0);
  CHECK(slurp(out_a / "boundary.csv") == slurp(out_b / "boundary.csv"));
}

TEST_CASE("log level error silences info output") {
  const auto data = write_file("quiet.csv", "x1,y\n0,0\n1,1\n");
  const auto r = run("fit --data " + data.string() + " --estimator cr",
                     "CVXREG_LOG=error ");
  CHECK(r.code == 0);
  CHECK(r.out.empty());
}

TEST_CASE("config file fills defaults but flags win") {
  const auto data = write_file("cfg_data.csv", "x1,y\n0,0\n1,1\n2,4\n");
  const auto cfg = write_file("cfg.json", R"({"lambda": 0.5, "monotone": true})");
  const auto r = run("fit --data " + data.string() + " --estimator pcr --config " +
                     cfg.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("(monotone)") != std::string::npos);
  // flag overrides the config's lambda; nothing to observe numerically other
  // than a successful parse with both present
  const auto r2 = run("fit --data " + data.string() + " --estimator pcr --lambda 0 --config " +
                      cfg.string());
  CHECK(r2.code == 0);
}
