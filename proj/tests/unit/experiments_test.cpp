#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rcmlab/errors.hpp"
#include "rcmlab/experiments.hpp"

namespace rcm {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

Scenario Small(json stats = nullptr) {
  json j = json::parse(R"({
    "name": "small", "dim": 2, "beta": 1.0,
    "phi": {"kind": "gilbert", "r": 1.0},
    "window": {"shape": "box", "extents": [2, 3]},
    "statistics": [{"kind": "points"}, {"kind": "count_class", "class": "vertex"},
                   {"kind": "total_components"}],
    "replicates": 40, "seed_base": 5, "budgets": {"mc_samples": 20000},
    "standardization": {"source": "analytic", "pilot_replicates": 30}
  })");
  if (!stats.is_null()) j["statistics"] = stats;
  return ParseScenario(j);
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path TempDir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("rcmlab-test-" + name);
  fs::remove_all(p);
  return p;
}

TEST(Experiments, CommandNames) {
  for (auto c : {Command::kSample, Command::kCensus, Command::kExpectation, Command::kCovariance, Command::kClt,
                 Command::kBounds, Command::kTotal}) {
    EXPECT_EQ(ParseCommand(ToString(c)), c);
  }
  EXPECT_THROW(ParseCommand("plot"), ConfigError);
}

TEST(Experiments, CensusRecordsCarryProvenance) {
  Scenario s = Small();
  ExperimentResult r = RunExperiment(s, Command::kCensus);
  EXPECT_EQ(r.scenario_hash, s.Hash());
  EXPECT_EQ(r.seed_base, 5u);
  EXPECT_FALSE(r.version.empty());
  ASSERT_EQ(r.rungs.size(), 2u);
  EXPECT_EQ(r.rungs[0].values.size(), 40u);
  EXPECT_EQ(r.rungs[0].summaries.size(), 3u);
}

TEST(Experiments, ThreadCountDoesNotChangeResults) {
  Scenario s = Small();
  auto a = ToJson(RunExperiment(s, Command::kClt, {1})).dump();
  auto b = ToJson(RunExperiment(s, Command::kClt, {4})).dump();
  EXPECT_EQ(a, b);
}

TEST(Experiments, JsonRoundTrip) {
  ExperimentResult r = RunExperiment(Small(), Command::kExpectation);
  json j = ToJson(r);
  EXPECT_EQ(ToJson(ResultFromJson(json::parse(j.dump()))), j);
}

TEST(Experiments, EmitLayoutAndDeterminism) {
  Scenario s = Small();
  fs::path d1 = TempDir("a"), d2 = TempDir("b");
  std::string root = Emit(RunExperiment(s, Command::kClt), d1.string());
  Emit(RunExperiment(s, Command::kClt), d2.string());
  EXPECT_EQ(fs::path(root), d1 / s.Hash());
  for (const char* rung : {"rung-00", "rung-01"}) {
    for (const char* f : {"census.csv", "moments.json", "distances.csv", "summary.json"}) {
      fs::path a = d1 / s.Hash() / rung / f, b = d2 / s.Hash() / rung / f;
      ASSERT_TRUE(fs::exists(a)) << a;
      EXPECT_EQ(Slurp(a), Slurp(b)) << f;
    }
  }
  std::string census = Slurp(d1 / s.Hash() / "rung-00" / "census.csv");
  EXPECT_EQ(census.substr(0, census.find('\n')), "replicate,seed,statistic,value,boundary_touching,oversize");
}

TEST(Experiments, EmptyStatisticListGivesEmptySummary) {
  Scenario s = Small(json::array());
  fs::path d = TempDir("empty");
  Emit(RunExperiment(s, Command::kClt), d.string());
  json summary = json::parse(Slurp(d / s.Hash() / "rung-00" / "summary.json"));
  EXPECT_TRUE(summary["summaries"].empty());
  std::string census = Slurp(d / s.Hash() / "rung-00" / "census.csv");
  EXPECT_EQ(std::count(census.begin(), census.end(), '\n'), 1);
}

TEST(Experiments, PointCountStandardizationSources) {
  json stats = json::array({{{"kind", "points"}}});
  Scenario s = Small(stats);
  auto r = RunExperiment(s, Command::kClt);
  EXPECT_EQ(r.rungs[0].standardization[0].source, "analytic");
  EXPECT_DOUBLE_EQ(r.rungs[0].standardization[0].mean, s.WindowAt(0).Volume());
  Scenario p = s;
  p.standardization = "pilot";
  auto rp = RunExperiment(p, Command::kClt);
  EXPECT_EQ(rp.rungs[0].standardization[0].source, "pilot");
  EXPECT_EQ(rp.rungs[0].standardization[0].pilot_replicates, 30u);
}

TEST(Experiments, CovarianceNeedsEnoughReplicates) {
  Scenario s = Small();
  s.replicates = 3;
  EXPECT_THROW(RunExperiment(s, Command::kCovariance), PreconditionError);
}

TEST(Experiments, TotalNeedsTotalStatistic) {
  json stats = json::array({{{"kind", "points"}}});
  EXPECT_THROW(RunExperiment(Small(stats), Command::kTotal), ConfigError);
}

TEST(Experiments, SampleStoresOneGraph) {
  auto r = RunExperiment(Small(), Command::kSample);
  EXPECT_EQ(r.rungs[0].values.size(), 1u);
  EXPECT_FALSE(r.rungs[0].sample_points.empty());
  EXPECT_EQ(r.rungs[0].sample_edges.size() % 2, 0u);
}

TEST(Experiments, FormatNumberKeepsSeventeenDigits) {
  EXPECT_EQ(FormatNumber(0.1), "0.10000000000000001");
  EXPECT_EQ(FormatNumber(3.0), "3");
}

}  // namespace
}  // namespace rcm
