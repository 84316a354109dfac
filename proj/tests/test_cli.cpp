#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "durations/design.hpp"
#include "durations/rng.hpp"
#include "durations/scenarios.hpp"

using namespace durations;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int status = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd =
      std::string("\"") + DURATIONS_CLI_PATH + "\" " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  char buf[4096];
  size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int rc = pclose(pipe);
  r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return r;
}

fs::path scratch_root() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "durations_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path fresh_dir(const char* tag) {
  const fs::path d = scratch_root() / tag;
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string field;
  while (std::getline(in, field, ',')) out.push_back(field);
  return out;
}

fs::path write_scenario_csv(const char* name, uint64_t tag,
                            bool extra_column = false) {
  RngStream rng = RngStream::from_words({tag, 1});
  const TrialDataset data =
      generate_dataset(1, TrialDesign::default_design(), rng);
  const fs::path p = scratch_root() / name;
  std::ofstream f(p);
  f << (extra_column ? "duration,cure,site\n" : "duration,cure\n");
  for (const TrialRecord& r : data.records) {
    f << r.duration << ',' << r.cure;
    if (extra_column) f << ",x";
    f << '\n';
  }
  return p;
}

}  // namespace

TEST_CASE("version flag prints the release number") {
  const RunResult r = run_cli("--version");
  CHECK(r.status == 0);
  CHECK(r.output.find("1.0.0") != std::string::npos);
}

TEST_CASE("usage mistakes exit with status 2") {
  CHECK(run_cli("").status == 2);
  CHECK(run_cli("frobnicate").status == 2);
  CHECK(run_cli("simulate --no-such-flag").status == 2);
  CHECK(run_cli("scenarios --emit truth --scenarios 9-3").status == 2);
  CHECK(run_cli("scenarios --emit bogus").status == 2);
  CHECK(run_cli("simulate --scenarios 1 --reps 2 --workers 1 "
                "--target bogus:0.1").status == 2);
  CHECK(run_cli("simulate --scenarios 1 --reps 2 --workers 1 "
                "--methods delta --target risk-ratio:0.9").status == 2);
}

TEST_CASE("truth export tabulates every scenario on the default grid") {
  const fs::path dir = fresh_dir("truth");
  const RunResult r =
      run_cli("scenarios --emit truth --out " + dir.string());
  REQUIRE(r.status == 0);
  CHECK(r.output.find("wrote") != std::string::npos);

  const auto lines = lines_of(slurp(dir / "scenario_truth.csv"));
  REQUIRE(lines.size() == 1 + 16 * 121);
  CHECK(lines[0] == "scenario,d,pi");
  CHECK(lines[1] == "1,8,0.7005671425");
  CHECK(lines[121].rfind("1,20,", 0) == 0);
  CHECK(lines[122].rfind("2,8,", 0) == 0);
}

TEST_CASE("optima export matches the known minima") {
  const fs::path dir = fresh_dir("optima");
  const RunResult r = run_cli(
      "scenarios --emit optima --target risk-diff:0.10 --out " + dir.string());
  REQUIRE(r.status == 0);

  const auto lines = lines_of(slurp(dir / "scenario_optima.csv"));
  REQUIRE(lines.size() == 17);
  CHECK(lines[0] == "scenario,d_star,d_star_continuous,d_star_integer");
  const auto s1 = split_csv(lines[1]);
  REQUIRE(s1.size() == 4);
  CHECK(s1[0] == "1");
  CHECK(std::stod(s1[1]) == doctest::Approx(13.0821).epsilon(1e-3));
  CHECK(s1[3] == "14");
  const auto s4 = split_csv(lines[4]);
  CHECK(s4[1] == "8");
  CHECK(s4[3] == "8");
}

TEST_CASE("a gradient optimum can be out of reach") {
  const fs::path dir = fresh_dir("optima_grad");
  const RunResult r = run_cli(
      "scenarios --emit optima --scenarios 14 --target max-grad:0.02 --out " +
      dir.string());
  REQUIRE(r.status == 0);
  const auto lines = lines_of(slurp(dir / "scenario_optima.csv"));
  REQUIRE(lines.size() == 2);
  CHECK(lines[1] == "14,not-attained,not-attained,none");
}

TEST_CASE("simulation output is identical across worker counts") {
  const fs::path da = fresh_dir("sim_a");
  const fs::path db = fresh_dir("sim_b");
  const std::string base =
      "simulate --scenarios 1,4 --methods conf-bands --target risk-diff:0.10 "
      "--reps 4 --seed 33 ";
  const RunResult ra = run_cli(base + "--workers 1 --out " + da.string());
  const RunResult rb = run_cli(base + "--workers 2 --out " + db.string());
  REQUIRE(ra.status == 0);
  REQUIRE(rb.status == 0);
  CHECK(ra.output.find("wrote") != std::string::npos);

  const std::string csv_a = slurp(da / "summary.csv");
  CHECK(csv_a == slurp(db / "summary.csv"));
  CHECK(slurp(da / "summary.json") == slurp(db / "summary.json"));
  CHECK(csv_a.rfind("scenario,method,target,reps,", 0) == 0);
  CHECK(fs::exists(da / "config.json"));
}

TEST_CASE("config files supply defaults that explicit flags override") {
  const fs::path dir = fresh_dir("config");
  const fs::path cfg = dir / "defaults.json";
  {
    std::ofstream f(cfg);
    f << "{\"reps\": 3, \"seed\": 9}\n";
  }
  const std::string base =
      "simulate --scenarios 1 --methods delta --target risk-diff:0.10 "
      "--workers 1 --config " + cfg.string();

  const fs::path d1 = fresh_dir("config_run1");
  REQUIRE(run_cli(base + " --out " + d1.string()).status == 0);
  auto fields = split_csv(lines_of(slurp(d1 / "summary.csv"))[1]);
  REQUIRE(fields.size() == 16);
  CHECK(fields[3] == "3");    // reps from the config file
  CHECK(fields[13] == "9");   // seed from the config file

  const fs::path d2 = fresh_dir("config_run2");
  REQUIRE(run_cli(base + " --seed 11 --out " + d2.string()).status == 0);
  fields = split_csv(lines_of(slurp(d2 / "summary.csv"))[1]);
  CHECK(fields[3] == "3");
  CHECK(fields[13] == "11");  // the explicit flag wins

  CHECK(run_cli("--config " + cfg.string() + " simulate --scenarios 1")
            .status == 2);
}

TEST_CASE("analyze writes a reproducible report") {
  const fs::path data = write_scenario_csv("analyze.csv", 61);
  const fs::path d1 = fresh_dir("an_a");
  const fs::path d2 = fresh_dir("an_b");
  const std::string base = "analyze --data " + data.string() +
                           " --method conf-bands --target risk-diff:0.10 "
                           "--out ";
  const RunResult r1 = run_cli(base + d1.string());
  REQUIRE(r1.status == 0);
  CHECK(r1.output.find("recommended_duration=") != std::string::npos);
  CHECK(fs::exists(d1 / "report.json"));
  CHECK(fs::exists(d1 / "curve.csv"));

  const RunResult r2 = run_cli(base + d2.string());
  REQUIRE(r2.status == 0);
  CHECK(slurp(d1 / "report.json") == slurp(d2 / "report.json"));
  CHECK(slurp(d1 / "curve.csv") == slurp(d2 / "curve.csv"));
}

TEST_CASE("analyze surfaces data problems with their row") {
  const fs::path bad = scratch_root() / "bad.csv";
  {
    std::ofstream f(bad);
    f << "duration,cure\n8,1\n8,2\n";
  }
  const RunResult r = run_cli("analyze --data " + bad.string());
  CHECK(r.status == 2);
  CHECK(r.output.find("row 3") != std::string::npos);

  const fs::path one_arm = scratch_root() / "one_arm.csv";
  {
    std::ofstream f(one_arm);
    f << "duration,cure\n";
    for (int i = 0; i < 40; ++i) f << "10," << i % 2 << "\n";
  }
  CHECK(run_cli("analyze --data " + one_arm.string()).status == 4);
}

TEST_CASE("extra dataset columns are an opt-in") {
  const fs::path wide = write_scenario_csv("wide.csv", 62, true);
  const fs::path dir = fresh_dir("lax");
  const std::string base = "analyze --data " + wide.string() + " --out " +
                           dir.string();
  const RunResult strict = run_cli(base);
  CHECK(strict.status == 2);
  CHECK(strict.output.find("lax") != std::string::npos);
  CHECK(run_cli(base + " --lax").status == 0);
}
