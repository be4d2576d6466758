#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "random_panels.hpp"
#include "sdid_event/cli.hpp"
#include "sdid_event/estimators.hpp"
#include "sdid_event/inference.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"sdid_event"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code =
      sdid::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Unique temp path; files are small and cleaned up by the fixture owner.
std::string temp_path(const std::string& name) {
  static int counter = 0;
  static const auto pid = std::to_string(::getpid());
  return (fs::temp_directory_path() /
          ("sdid_event_test_" + pid + "_" + std::to_string(++counter) + "_" + name))
      .string();
}

std::string write_panel_fixture(std::uint64_t seed) {
  const auto gen = testsupport::random_panel(seed);
  const std::string path = temp_path("panel.csv");
  std::ofstream file(path);
  sdid::write_panel_csv(gen.panel, file);
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("estimate prints the ATT and event-study table") {
  const std::string csv = write_panel_fixture(42);
  const auto r = run_cli({"estimate", "--input", csv, "--vce", "none"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("ATT") != std::string::npos);
  CHECK(r.out.find("Effect_1") != std::string::npos);
  CHECK(r.out.find("vce: none") != std::string::npos);
  CHECK(r.out.find("Placebo") == std::string::npos);

  // SE and CI cells stay empty under --vce none: the ATT line has exactly
  // one numeric field (the estimate).
  std::istringstream lines(r.out);
  std::string line;
  while (std::getline(lines, line) && line.find("ATT") == std::string::npos) {
  }
  std::istringstream fields(line);
  std::string name, first, rest;
  fields >> name >> first;
  CHECK_FALSE(first.empty());
  const bool has_more = static_cast<bool>(fields >> rest);
  CHECK_FALSE(has_more);
  fs::remove(csv);
}

TEST_CASE("disag appends the cohort-level table") {
  const std::string csv = write_panel_fixture(43);
  const auto without = run_cli({"estimate", "--input", csv, "--vce", "none"});
  const auto with = run_cli({"estimate", "--input", csv, "--vce", "none", "--disag"});
  REQUIRE(with.code == 0);
  CHECK(without.out.find("cohort-level estimates") == std::string::npos);
  CHECK(with.out.find("cohort-level estimates") != std::string::npos);
  CHECK(with.out.find("tau") != std::string::npos);
  fs::remove(csv);
}

TEST_CASE("placebo rows appear on request") {
  const std::string csv = write_panel_fixture(44);
  const auto all = run_cli(
      {"estimate", "--input", csv, "--vce", "none", "--placebo", "all"});
  REQUIRE(all.code == 0);
  CHECK(all.out.find("Placebo_0") != std::string::npos);

  const auto one = run_cli(
      {"estimate", "--input", csv, "--vce", "none", "--placebo", "1"});
  REQUIRE(one.code == 0);
  CHECK(one.out.find("Placebo_0") != std::string::npos);
  CHECK(one.out.find("Placebo_-1") == std::string::npos);

  const auto bad = run_cli(
      {"estimate", "--input", csv, "--vce", "none", "--placebo", "soon"});
  CHECK(bad.code == 1);
  const auto trailing = run_cli(
      {"estimate", "--input", csv, "--vce", "none", "--placebo", "3x"});
  CHECK(trailing.code == 1);
  fs::remove(csv);
}

TEST_CASE("malformed input exits 2 and names the row") {
  const std::string path = temp_path("bad.csv");
  {
    std::ofstream file(path);
    file << "unit,time,outcome,treatment\n"
            "A,1,1,0\nA,2,1,0\nB,1,x,0\nB,2,2,1\n";
  }
  const auto r = run_cli({"estimate", "--input", path, "--vce", "none"});
  CHECK(r.code == 2);
  CHECK(r.err.find("row 4") != std::string::npos);
  fs::remove(path);

  const auto missing = run_cli({"estimate", "--input", "/nonexistent.csv"});
  CHECK(missing.code == 2);
}

TEST_CASE("usage errors exit 1") {
  CHECK(run_cli({"estimate"}).code == 1);                       // --input required
  CHECK(run_cli({"estimate", "--input", "x", "--vce", "zzz"}).code == 1);
  CHECK(run_cli({"frobnicate"}).code == 1);
  CHECK(run_cli({}).code == 1);
  CHECK(run_cli({"--help"}).code == 0);
}

TEST_CASE("json output carries the full result and matches the library") {
  const auto gen = testsupport::random_panel(45);
  const std::string csv = temp_path("panel.csv");
  {
    std::ofstream file(csv);
    sdid::write_panel_csv(gen.panel, file);
  }
  const auto r = run_cli({"estimate", "--input", csv, "--vce", "bootstrap",
                          "--brep", "16", "--seed", "7", "--format", "json"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);

  const auto expected = sdid::estimate(gen.panel);
  const auto variance = sdid::bootstrap_se(gen.panel, {}, 16, 7, 1);

  CHECK(j["att"]["estimate"].get<double>() == expected.att);
  CHECK(j["att"]["se"].get<double>() == variance.se_att);
  REQUIRE(j["event"].size() == expected.event.size());
  for (std::size_t i = 0; i < expected.event.size(); ++i) {
    CHECK(j["event"][i]["ell"].get<int>() == expected.event[i].ell);
    CHECK(j["event"][i]["estimate"].get<double>() == expected.event[i].tau);
    CHECK(j["event"][i]["n_tr"].get<int>() == expected.event[i].n_tr);
  }
  CHECK(j["placebo"].size() == expected.placebo.size());
  REQUIRE(j["cohorts"].size() == expected.cohorts.size());
  for (std::size_t k = 0; k < expected.cohorts.size(); ++k) {
    CHECK(j["cohorts"][k]["tau"].get<double>() == expected.cohorts[k].tau);
    const auto& omega = j["cohorts"][k]["weights"]["omega"];
    double sum = 0.0;
    for (const auto& entry : omega) sum += entry["value"].get<double>();
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-8));
  }
  CHECK(j["inference"]["method"] == "bootstrap");
  CHECK(j["inference"]["reps"] == 16);
  CHECK(j.contains("conventions"));  // event-time origin and placebo centering
  fs::remove(csv);
}

TEST_CASE("text and json report the same numbers") {
  const std::string csv = write_panel_fixture(46);
  const auto text = run_cli({"estimate", "--input", csv, "--vce", "none"});
  const auto as_json = run_cli(
      {"estimate", "--input", csv, "--vce", "none", "--format", "json"});
  REQUIRE(text.code == 0);
  REQUIRE(as_json.code == 0);

  const double att = json::parse(as_json.out)["att"]["estimate"].get<double>();
  char expected[32];
  std::snprintf(expected, sizeof expected, "%.6g", att);
  CHECK(text.out.find(expected) != std::string::npos);
  fs::remove(csv);
}

TEST_CASE("output is byte-identical across runs and thread counts") {
  const std::string csv = write_panel_fixture(47);
  const std::vector<std::string> base{"estimate", "--input", csv,
                                      "--vce",    "bootstrap", "--brep", "12",
                                      "--seed",   "3",         "--format", "json"};
  auto with_threads = [&](const char* n) {
    auto args = base;
    args.push_back("--threads");
    args.push_back(n);
    return run_cli(args);
  };
  const auto a = with_threads("1");
  const auto b = with_threads("2");
  const auto c = with_threads("2");
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(b.out == c.out);
  fs::remove(csv);
}

TEST_CASE("csv format and output redirection") {
  const std::string csv = write_panel_fixture(48);
  const std::string out_path = temp_path("result.csv");
  const auto r = run_cli({"estimate", "--input", csv, "--vce", "none", "--format",
                          "csv", "--disag", "--output", out_path});
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  const std::string text = slurp(out_path);
  CHECK(text.find("row,estimate,se,ci_lower,ci_upper,n_tr") == 0);
  CHECK(text.find("ATT,") != std::string::npos);
  CHECK(text.find("cohort,n_tr,row,estimate") != std::string::npos);
  fs::remove(csv);
  fs::remove(out_path);
}

TEST_CASE("dump-weights writes an audit csv with simplex weights") {
  const std::string csv = write_panel_fixture(49);
  const std::string dump = temp_path("weights.csv");
  const auto r = run_cli({"estimate", "--input", csv, "--vce", "none",
                          "--dump-weights", dump});
  REQUIRE(r.code == 0);
  const std::string text = slurp(dump);
  CHECK(text.find("cohort,component,key,value") == 0);
  CHECK(text.find(",omega,") != std::string::npos);
  CHECK(text.find(",lambda,") != std::string::npos);
  CHECK(text.find(",zeta,") != std::string::npos);
  fs::remove(csv);
  fs::remove(dump);
}

TEST_CASE("uniform weights match plain DiD on a single cohort") {
  sdid::DGPSpec spec;
  spec.n_controls = 4;
  spec.cohorts = {{3, 2, {1.5, 1.5, 1.5}}};
  spec.n_periods = 5;
  spec.sd_unit = 0.5;
  spec.sd_noise = 0.2;
  spec.seed = 9;
  const auto gen = sdid::generate(spec);
  const std::string csv = temp_path("panel.csv");
  {
    std::ofstream file(csv);
    sdid::write_panel_csv(gen.panel, file);
  }
  const auto r = run_cli({"estimate", "--input", csv, "--vce", "none",
                          "--uniform-weights", "--format", "json"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  sdid::EstimationOptions uniform;
  uniform.uniform_weights = true;
  CHECK(j["att"]["estimate"].get<double>() ==
        sdid::estimate(gen.panel, uniform).att);
  fs::remove(csv);
}

TEST_CASE("a starved solver exits 3") {
  // With a single pairwise step the time-weight solve on this seeded panel
  // cannot certify its duality gap; the CLI reports solver failure.
  const auto gen = testsupport::random_panel(186);
  sdid::EstimationOptions starved;
  starved.solver.max_iter = 1;
  const auto probe = sdid::estimate(gen.panel, starved);
  bool any_unconverged = false;
  for (const auto& c : probe.cohorts)
    any_unconverged |= !c.weights.lambda_diagnostics.converged ||
                       !c.weights.omega_diagnostics.converged;
  REQUIRE(any_unconverged);  // precondition for the exit-code check

  const std::string csv = temp_path("panel.csv");
  {
    std::ofstream file(csv);
    sdid::write_panel_csv(gen.panel, file);
  }
  const auto r = run_cli({"estimate", "--input", csv, "--vce", "none",
                          "--max-iter", "1"});
  CHECK(r.code == 3);
  CHECK(r.err.find("converge") != std::string::npos);

  // the same panel converges with the default budget
  const auto fine = run_cli({"estimate", "--input", csv, "--vce", "none"});
  CHECK(fine.code == 0);
  fs::remove(csv);
}

TEST_CASE("generate writes the panel and the true-effects sidecar") {
  const std::string spec_path = temp_path("spec.json");
  {
    std::ofstream file(spec_path);
    file << R"({
      "n_controls": 4,
      "n_periods": 6,
      "cohorts": [
        {"adoption": 3, "size": 2, "delta": [1.0, 0.5, 0.25, 0.0]},
        {"adoption": 5, "size": 1, "delta": [2.0, 1.0]}
      ],
      "sd_unit": 0.5, "sd_time": 0.2, "sd_noise": 0.1, "seed": 11
    })";
  }
  const std::string csv = temp_path("gen.csv");
  const std::string effects = temp_path("effects.json");
  const auto r = run_cli({"generate", "--spec", spec_path, "--output", csv,
                          "--effects", effects});
  REQUIRE(r.code == 0);

  std::ifstream panel_file(csv);
  const auto panel = sdid::load_panel(panel_file);
  CHECK(panel.n_units() == 7);
  CHECK(panel.n_periods() == 6);

  const json sidecar = json::parse(slurp(effects));
  CHECK(sidecar["cohorts"].size() == 2);
  CHECK(sidecar["tau_ell"].size() == 4);
  // att = (2*1.75 + 1*3) / (2*4 + 1*2)
  CHECK(sidecar["att"].get<double>() == doctest::Approx(6.5 / 10).epsilon(1e-12));

  // seed override changes the bytes, same seed reproduces them
  const std::string csv2 = temp_path("gen2.csv");
  run_cli({"generate", "--spec", spec_path, "--output", csv2, "--seed", "12"});
  CHECK(slurp(csv) != slurp(csv2));
  const std::string csv3 = temp_path("gen3.csv");
  run_cli({"generate", "--spec", spec_path, "--output", csv3, "--seed", "11"});
  CHECK(slurp(csv) == slurp(csv3));

  for (const auto& p : {spec_path, csv, effects, csv2, csv3}) fs::remove(p);
}

TEST_CASE("generate rejects a bad spec with exit 2") {
  const std::string spec_path = temp_path("bad_spec.json");
  {
    std::ofstream file(spec_path);
    file << R"({"n_controls": 0, "n_periods": 4, "cohorts": [{"adoption": 2, "size": 1}]})";
  }
  const std::string csv = temp_path("out.csv");
  const auto r = run_cli({"generate", "--spec", spec_path, "--output", csv});
  CHECK(r.code == 2);
  CHECK(r.err.find("error") != std::string::npos);
  fs::remove(spec_path);
}

TEST_SUITE_END();
