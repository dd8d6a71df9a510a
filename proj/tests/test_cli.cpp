#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "levyid/cli.hpp"

namespace fs = std::filesystem;
using levyid::cli::run;
using json = nlohmann::ordered_json;

namespace {

const std::string kConfigs = LEVYID_CONFIG_DIR;

struct Outcome {
  int code = 0;
  std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "levyid");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("levyid_test_" + name); }

fs::path write_temp(const std::string& name, const std::string& text) {
  const auto p = temp_file(name);
  std::ofstream(p) << text;
  return p;
}

json read(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string small_poisson() {
  return R"({"process": {"family": "poisson", "lambda": 1},
             "identity": {"a": 1},
             "grid": [0.5, 1, 2],
             "panel": [{"alphas": [1], "times": [1]}, {"alphas": [0.5, 0.5], "times": [0.5, 2]}],
             "mc": {"N": 4000, "B": 100, "z_crit": 3},
             "seed": 3})";
}

}  // namespace

TEST(Cli, IsonatOnShippedPoissonConfig) {
  const auto out = temp_file("isonat.json");
  const auto r = invoke({"verify-isonat", "--config", kConfigs + "/poisson.json", "--seed", "7", "--out", out.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  const json doc = read(out);
  EXPECT_EQ(doc["schema"], "levy-id/1");
  EXPECT_EQ(doc["seed"], 7);
  EXPECT_EQ(doc["config"]["process"]["family"], "poisson");
  const auto& entries = doc["results"][0]["entries"];
  ASSERT_EQ(entries.size(), 6u);
  for (const auto& e : entries) EXPECT_TRUE(e.contains("z"));
  EXPECT_TRUE(doc["runtime"].contains("timestamp"));
}

TEST(Cli, MalformedJsonExitsTwo) {
  const auto p = write_temp("bad.json", "{ \"process\": ");
  const auto r = invoke({"verify-isonat", "--config", p.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("config error"), std::string::npos);
}

TEST(Cli, InvalidConfigsExitTwo) {
  const std::vector<std::string> bad{
      R"({"identity": {"a": 1}})",                                                         // no process
      R"({"process": {"family": "gaussian"}})",                                            // unknown family
      R"({"process": {"family": "poisson", "lambda": -1}})",                               // invalid parameter
      R"({"process": {"family": "poisson"}, "mc": {"N": 100, "Bootstrap": 10}})",         // unknown key
      R"({"process": {"family": "poisson"}, "identity": {"a": 0.7}})",                     // a off the grid
      R"({"process": {"family": "poisson"}, "panel": [{"alphas": [1], "times": [9]}]})",  // panel time off the grid
      R"({"process": {"family": "poisson"}, "seed": -4})",
      R"([1, 2, 3])",
  };
  for (std::size_t i = 0; i < bad.size(); ++i) {
    const auto p = write_temp("invalid" + std::to_string(i) + ".json", bad[i]);
    EXPECT_EQ(invoke({"verify-isonat", "--config", p.string()}).code, 2) << bad[i];
  }
  EXPECT_EQ(invoke({"verify-isonat", "--config", "/nonexistent/levyid.json"}).code, 2);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"frobnicate", "--config", "x.json"}).code, 2);
  EXPECT_EQ(invoke({"suite"}).code, 2);
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST(Cli, CommandFamilyMismatchExitsTwo) {
  EXPECT_EQ(invoke({"verify-isonat", "--config", kConfigs + "/permanental.json"}).code, 2);
  EXPECT_EQ(invoke({"permanental", "--config", kConfigs + "/poisson.json"}).code, 2);
  EXPECT_EQ(invoke({"verify-isonat", "--config", kConfigs + "/all.json"}).code, 2);
}

TEST(Cli, VerificationFailureExitsOne) {
  // An impossibly small critical value makes the z-tests fail.
  auto cfg = json::parse(small_poisson());
  cfg["mc"]["z_crit"] = 1e-6;
  const auto p = write_temp("strict.json", cfg.dump());
  const auto r = invoke({"verify-isonat", "--config", p.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("FAIL"), std::string::npos);
  EXPECT_FALSE(json::parse(r.out)["pass"].get<bool>());
}

TEST(Cli, SeedFlagOverridesConfig) {
  const auto p = write_temp("seeded.json", small_poisson());
  const auto a = json::parse(invoke({"verify-isonat", "--config", p.string()}).out);
  const auto b = json::parse(invoke({"verify-isonat", "--config", p.string(), "--seed", "11"}).out);
  EXPECT_EQ(a["seed"], 3);
  EXPECT_EQ(b["seed"], 11);
  EXPECT_EQ(b["config"]["seed"], 11);
  EXPECT_NE(a["results"], b["results"]);
}

TEST(Cli, ReportsAreByteIdenticalAcrossRunsAndWorkers) {
  const auto p = write_temp("det.json", small_poisson());
  std::string first;
  for (const char* workers : {"1", "3", "1"}) {
    auto doc = json::parse(invoke({"levy-check", "--config", p.string(), "--workers", workers}).out);
    const std::string text = levyid::report::without_runtime(doc).dump(2);
    if (first.empty())
      first = text;
    else
      EXPECT_EQ(text, first);
  }
}

TEST(Cli, ResolvedConfigFillsDefaults) {
  const auto p = write_temp("minimal.json", R"({"process": {"family": "tempered_stable"}, "mc": {"N": 2000, "B": 50}})");
  const auto r = invoke({"verify-condition", "--config", p.string()});
  ASSERT_NE(r.code, 2) << r.err;
  const auto cfg = json::parse(r.out)["config"];
  EXPECT_EQ(cfg["process"]["alpha"], 0.5);
  EXPECT_EQ(cfg["identity"]["a"], 1.0);
  EXPECT_EQ(cfg["grid"].size(), 5u);
  EXPECT_EQ(cfg["panel"].size(), 1u);
  EXPECT_EQ(cfg["mc"]["z_crit"], 3.0);
  EXPECT_EQ(cfg["seed"], 1);
}

TEST(Cli, ResolvedConfigRoundTrips) {
  const auto p = write_temp("round.json", small_poisson());
  const auto first = json::parse(invoke({"verify-isonat", "--config", p.string()}).out);
  const auto q = write_temp("round2.json", first["config"].dump());
  const auto second = json::parse(invoke({"verify-isonat", "--config", q.string()}).out);
  EXPECT_EQ(levyid::report::without_runtime(first).dump(), levyid::report::without_runtime(second).dump());
}

TEST(Cli, CsvHasOneRowPerEntry) {
  const auto p = write_temp("csv.json", small_poisson());
  const auto csv = temp_file("rows.csv");
  ASSERT_EQ(invoke({"verify-isonat", "--config", p.string(), "--csv", csv.string()}).code, 0);
  std::ifstream in(csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "check,label,lhs,lhs_se,rhs,rhs_se,z,pass");
}

TEST(Cli, SimulateWritesPathsAndChecksMeans) {
  auto cfg = json::parse(small_poisson());
  cfg["mc"]["N"] = 500;
  const auto p = write_temp("sim.json", cfg.dump());
  const auto csv = temp_file("paths.csv");
  const auto r = invoke({"simulate", "--config", p.string(), "--csv", csv.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  std::ifstream in(csv);
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  EXPECT_EQ(line, "y(0.5),y(1),y(2)");
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 500u);
}

TEST(Cli, PermanentalCommand) {
  auto cfg = read(kConfigs + "/permanental.json");
  cfg["mc"]["N"] = 20000;
  const auto p = write_temp("perm.json", cfg.dump());
  const auto r = invoke({"permanental", "--config", p.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  ASSERT_EQ(doc["results"].size(), 2u);
  EXPECT_EQ(doc["results"][0]["identity"], "permanental");
  EXPECT_EQ(doc["results"][1]["entries"].size(), 3u);
}

TEST(Cli, LimitCommandReportsLadder) {
  auto cfg = read(kConfigs + "/limit_poisson.json");
  cfg["mc"]["N"] = 2000;
  cfg["identity"]["deltas"] = {1.0, 0.3};
  const auto p = write_temp("limit.json", cfg.dump());
  const auto r = invoke({"limit", "--config", p.string()});
  ASSERT_NE(r.code, 2) << r.err;
  const auto doc = json::parse(r.out);
  const auto& steps = doc["results"][0]["steps"];
  ASSERT_EQ(steps.size(), 2u);
  EXPECT_EQ(steps[1]["N"], 6667);
  EXPECT_TRUE(doc["results"][0].contains("monotone"));
}

TEST(Cli, SuiteCoversEveryShippedFamily) {
  auto cfg = read(kConfigs + "/all.json");
  cfg["mc"]["N"] = 3000;
  cfg["mc"]["B"] = 60;
  const auto p = write_temp("suite.json", cfg.dump());
  const auto r = invoke({"suite", "--config", p.string()});
  ASSERT_NE(r.code, 2) << r.err;
  const auto doc = json::parse(r.out);
  std::set<std::string> families;
  for (const auto& res : doc["results"])
    if (res.contains("family")) families.insert(res["family"].get<std::string>());
  EXPECT_EQ(families, (std::set<std::string>{"poisson", "tempered_stable", "sato", "convolution", "permanental"}));
  EXPECT_EQ(doc["config"]["runs"].size(), 5u);
}

TEST(Cli, ShippedConfigsParse) {
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(levyid::config::parse_suite(levyid::config::read_json(entry.path().string()))) << entry.path();
  }
}
