#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <cstdlib>
#include <string>

#include <json.hpp>

#include "kercoup/io.hpp"

#ifndef KERCOUP_CLI_BIN
#error "KERCOUP_CLI_BIN must point at the CLI binary"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(KERCOUP_CLI_BIN) + " " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t got;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("kercoup_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name, const std::string& content) const {
    const fs::path p = path / name;
    std::ofstream(p) << content;
    return p.string();
  }
  std::string read(const std::string& name) const {
    return kercoup::read_text_file((path / name).string());
  }
};

const char* kProblem = R"({
  "states": ["1", "2"],
  "proposal": [["1/2", "1/2"], ["1/2", "1/2"]],
  "target": ["1/3", "2/3"],
  "acceptance": {"rule": "mh"}
})";

const char* kPbarPaper = R"({
  "pair": ["1", "2"],
  "orientation": "paper",
  "matrix": [["0", "1/4"], ["1/2", "1/4"]]
})";

const char* kNonmaxProblem = R"({
  "states": ["1", "2", "3"],
  "proposal": [["0", "1/2", "1/2"], ["1/2", "0", "1/2"], ["0", "1", "0"]],
  "target": ["2/5", "2/5", "1/5"],
  "acceptance": {"rule": "mh"}
})";

}  // namespace

TEST_CASE("cli decompose writes the expected artifacts") {
  TempDir tmp;
  const auto problem = tmp.file("problem.json", kProblem);
  const auto coupling = tmp.file("pbar.json", kPbarPaper);
  const auto r = run_cli("decompose --problem " + problem + " --coupling " + coupling + " --out " +
                         (tmp.path / "out").string());
  CHECK(r.exit_code == 0);

  const json qbar = json::parse(tmp.read("out/qbar.json"));
  CHECK(qbar["entries"]["(1,1)"] == "1/6");
  CHECK(qbar["entries"]["(2,1)"] == "1/3");
  CHECK(qbar["entries"]["(1,2)"] == "1/3");
  CHECK(qbar["entries"]["(2,2)"] == "1/6");

  const json report = json::parse(tmp.read("out/report.json"));
  CHECK(report["round_trip"] == "exact");
  CHECK(report["verify_cam"]["ok"] == true);
  CHECK(report["marginal_acceptance"]["ok"] == true);

  const json acc = json::parse(tmp.read("out/acceptance.json"));
  CHECK(acc["cells"]["(2,1)"]["p"][0] == "3/4");
}

TEST_CASE("cli decompose exit codes") {
  TempDir tmp;
  const auto problem = tmp.file("problem.json", kProblem);

  SUBCASE("parse error is exit 2") {
    const auto bad = tmp.file("bad.json", "{ not json");
    CHECK(run_cli("decompose --problem " + problem + " --coupling " + bad).exit_code == 2);
    const auto badp = tmp.file("badp.json", R"({"states": []})");
    CHECK(run_cli("decompose --problem " + badp + " --coupling " + bad).exit_code == 2);
  }

  SUBCASE("marginal violation is exit 3") {
    const auto off = tmp.file("off.json", R"({
      "pair": ["1", "2"],
      "matrix": [["1/4", "1/4"], ["1/4", "1/4"]]
    })");
    CHECK(run_cli("decompose --problem " + problem + " --coupling " + off).exit_code == 3);
  }
}

TEST_CASE("cli verify-maximal") {
  TempDir tmp;
  const auto problem = tmp.file("problem.json", kProblem);
  const auto coupling = tmp.file("pbar.json", kPbarPaper);

  const auto r = run_cli("--json verify-maximal --problem " + problem + " --coupling " + coupling +
                         " --via both");
  CHECK(r.exit_code == 0);
  const json v = json::parse(r.out);
  CHECK(v["hahn"]["maximal"] == false);
  CHECK(v["hahn"]["diagonal_deficit"] == "1/2");
  CHECK(v["conditions"]["maximal"] == false);

  SUBCASE("built maximal couplings verify as maximal on both routes") {
    const auto built = (tmp.path / "max.json").string();
    CHECK(run_cli("build-maximal --problem " + problem + " --pair 1,2 --out " + built).exit_code == 0);
    const auto v2 = run_cli("--json verify-maximal --problem " + problem + " --coupling " + built +
                            " --via both");
    CHECK(v2.exit_code == 0);
    const json j2 = json::parse(v2.out);
    CHECK(j2["hahn"]["maximal"] == true);
    CHECK(j2["conditions"]["maximal"] == true);
  }
}

TEST_CASE("cli build-maximal golden outputs") {
  TempDir tmp;
  const auto problem = tmp.file("problem.json", kProblem);
  const auto out = (tmp.path / "max.json").string();
  REQUIRE(run_cli("build-maximal --problem " + problem + " --pair 1,2 --out " + out).exit_code == 0);
  const json j = json::parse(kercoup::read_text_file(out));
  CHECK(j["entries"]["(1,1)"] == "1/4");
  CHECK(j["entries"]["(2,2)"] == "1/2");
  CHECK(j["entries"]["(1,2)"] == "1/4");

  SUBCASE("three-state problem yields its unique maximal coupling") {
    const auto p3 = tmp.file("nonmax.json", kNonmaxProblem);
    const auto out3 = (tmp.path / "max3.json").string();
    REQUIRE(run_cli("build-maximal --problem " + p3 + " --pair 1,2 --out " + out3).exit_code == 0);
    const json j3 = json::parse(kercoup::read_text_file(out3));
    CHECK(j3["entries"]["(1,1)"] == "1/2");
    CHECK(j3["entries"]["(2,3)"] == "1/2");
    CHECK(j3["entries"].size() == 2);
  }

  SUBCASE("equal rows couple diagonally") {
    const auto out2 = (tmp.path / "diag.json").string();
    REQUIRE(run_cli("build-maximal --problem " + problem + " --pair 1,1 --out " + out2).exit_code == 0);
    const json j2 = json::parse(kercoup::read_text_file(out2));
    CHECK(j2["entries"]["(1,1)"] == "1/2");
    CHECK(j2["entries"]["(2,2)"] == "1/2");
  }
}

TEST_CASE("cli chained workflow on the three-state problem") {
  // build-maximal output feeds decompose and verify-maximal directly.
  TempDir tmp;
  const auto problem = tmp.file("nonmax.json", kNonmaxProblem);
  const auto max_file = (tmp.path / "pmax.json").string();
  REQUIRE(run_cli("build-maximal --problem " + problem + " --pair 1,2 --out " + max_file)
              .exit_code == 0);
  REQUIRE(run_cli("decompose --problem " + problem + " --coupling " + max_file + " --out " +
                  (tmp.path / "dec").string())
              .exit_code == 0);
  const json report = json::parse(tmp.read("dec/report.json"));
  CHECK(report["round_trip"] == "exact");
  const auto v = run_cli("--json verify-maximal --problem " + problem + " --coupling " + max_file +
                         " --via both");
  CHECK(v.exit_code == 0);
  const json j = json::parse(v.out);
  CHECK(j["hahn"]["maximal"] == true);
  CHECK(j["conditions"]["maximal"] == true);
}

TEST_CASE("cli certify-nonmax") {
  const auto r = run_cli("--json certify-nonmax");
  CHECK(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j["required_mass"] == "1/2");
  CHECK(j["available_mass"] == "0");
  CHECK(j["extreme_points"] == 1);
  CHECK(j["alternative_regenerates"] == true);
}

TEST_CASE("cli simulate finite mode is byte-deterministic") {
  TempDir tmp;
  const auto problem = tmp.file("problem.json", kProblem);
  const auto csv1 = (tmp.path / "a.csv").string();
  const auto csv2 = (tmp.path / "b.csv").string();
  const std::string args = "--quiet simulate --problem " + problem +
                           " --pair 1,2 --coupling maximal --steps 50 --replicates 300 --seed 99 "
                           "--threads 2 --out ";
  REQUIRE(run_cli(args + csv1).exit_code == 0);
  REQUIRE(run_cli(args + csv2).exit_code == 0);
  const auto a = kercoup::read_text_file(csv1);
  CHECK(a == kercoup::read_text_file(csv2));
  CHECK(a.rfind("replicate,meeting_time,met,horizon\n", 0) == 0);
  // The maximal kernel coupling meets fast from (1,2).
  CHECK(a.find(",1,1,50") != std::string::npos);
}

TEST_CASE("cli simulate reports zero bound violations on the finite problem") {
  TempDir tmp;
  const auto problem = tmp.file("problem.json", kProblem);
  const auto r = run_cli("--json simulate --problem " + problem +
                         " --pair 1,2 --coupling maximal --steps 100 --replicates 2000 --seed 7");
  CHECK(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j["bound_violations"] == 0);
  CHECK(j["fraction_met"].get<double>() > 0.99);
}

TEST_CASE("cli simulate continuous crn never meets") {
  TempDir tmp;
  const auto csv = (tmp.path / "crn.csv").string();
  const auto r = run_cli(
      "--quiet simulate --target normal --algorithm rwm --proposal-scale 1.5 --coupling crn "
      "--steps 40 --replicates 50 --seed 5 --out " + csv);
  CHECK(r.exit_code == 0);
  std::istringstream lines(kercoup::read_text_file(csv));
  std::string line;
  std::getline(lines, line);  // header
  while (std::getline(lines, line)) {
    CHECK(line.find(",-1,0,40") != std::string::npos);  // met column all zero
  }
}

TEST_CASE("cli simulate trajectory dump is valid json-lines") {
  TempDir tmp;
  const auto jsonl = (tmp.path / "steps.jsonl").string();
  const auto r = run_cli(
      "--quiet simulate --target normal --algorithm mala --proposal-scale 0.25 --coupling maximal "
      "--steps 20 --replicates 2 --seed 11 --trajectories " + jsonl);
  CHECK(r.exit_code == 0);
  std::istringstream lines(kercoup::read_text_file(jsonl));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const json rec = json::parse(line);
    CHECK(rec.contains("replicate"));
    CHECK(rec.contains("x"));
    CHECK(rec.contains("b_x"));
    ++count;
  }
  CHECK(count == 40);  // two replicates, twenty steps each
}

TEST_CASE("cli decompose honors --check-exhaustive and all-accept problems") {
  TempDir tmp;
  const auto identity = tmp.file("identity.json", R"({
    "states": ["1", "2"],
    "proposal": [["1/2", "1/2"], ["1/2", "1/2"]],
    "acceptance": {"rule": "explicit", "matrix": [["1", "1"], ["1", "1"]]}
  })");
  // With every proposal accepted, P = Q and the proposal coupling equals
  // the input transition coupling.
  const auto coupling = tmp.file("pbar.json", R"({
    "pair": ["1", "2"],
    "matrix": [["1/8", "3/8"], ["3/8", "1/8"]]
  })");
  const auto r = run_cli("decompose --problem " + identity + " --coupling " + coupling +
                         " --check-exhaustive --out " + (tmp.path / "out").string());
  CHECK(r.exit_code == 0);
  const json qbar = json::parse(tmp.read("out/qbar.json"));
  CHECK(qbar["entries"]["(1,1)"] == "1/8");
  CHECK(qbar["entries"]["(2,1)"] == "3/8");
}

TEST_CASE("cli simulate seed defaults to KERCOUP_SEED") {
  TempDir tmp;
  const auto problem = tmp.file("problem.json", kProblem);
  const auto env_csv = (tmp.path / "env.csv").string();
  const auto flag_csv = (tmp.path / "flag.csv").string();
  const std::string common = std::string(KERCOUP_CLI_BIN) +
                             " --quiet simulate --problem " + problem +
                             " --pair 1,2 --coupling crn --steps 30 --replicates 100 --out ";
  REQUIRE(std::system(("KERCOUP_SEED=4242 " + common + env_csv + " 2>/dev/null").c_str()) == 0);
  REQUIRE(std::system((common + flag_csv + " --seed 4242 2>/dev/null").c_str()) == 0);
  CHECK(kercoup::read_text_file(env_csv) == kercoup::read_text_file(flag_csv));
}

TEST_CASE("cli rejects unknown configuration with exit 2") {
  TempDir tmp;
  const auto problem = tmp.file("problem.json", kProblem);
  CHECK(run_cli("simulate --target normal --coupling warp --steps 5 --replicates 2").exit_code == 2);
  CHECK(run_cli("simulate --problem " + problem + " --coupling maximal --steps 5 --replicates 2")
            .exit_code == 2);  // missing --pair
  CHECK(run_cli("simulate --target normal --algorithm mala --coupling reflection --steps 5 "
                "--replicates 2")
            .exit_code == 2);  // reflection needs a symmetric proposal
}
