#include <gtest/gtest.h>

#include <string>

#include "rcmlab/errors.hpp"
#include "rcmlab/scenario.hpp"

namespace rcm {
namespace {

using nlohmann::json;

json Base() {
  return json::parse(R"({
    "name": "base", "dim": 2, "beta": 1.0,
    "phi": {"kind": "gilbert", "r": 1.0},
    "window": {"shape": "box", "extents": [2, 4]},
    "statistics": [{"kind": "count_class", "class": "edge"}],
    "replicates": 10, "seed_base": 3
  })");
}

std::string ErrorOf(const json& j) {
  try {
    ParseScenario(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Scenario, ParsesBaseConfig) {
  Scenario s = ParseScenario(Base());
  EXPECT_EQ(s.dim, 2);
  EXPECT_EQ(s.extents.size(), 2u);
  EXPECT_EQ(s.statistics.size(), 1u);
  EXPECT_EQ(s.statistics[0].statistic.classes.front(), GraphClass::Edge());
  EXPECT_DOUBLE_EQ(s.WindowAt(1).extent(), 4.0);
  EXPECT_EQ(s.CensusOrder(), 2);
  EXPECT_EQ(s.Hash().size(), 16u);
}

TEST(Scenario, ErrorsNameTheField) {
  auto j = Base();
  j["window"]["extents"] = {4, 2};
  EXPECT_NE(ErrorOf(j).find("window.extents"), std::string::npos) << ErrorOf(j);

  j = Base();
  j["statistics"][0]["kind"] = "hexagons";
  EXPECT_NE(ErrorOf(j).find("statistics[0].kind"), std::string::npos) << ErrorOf(j);

  j = Base();
  j["replicates"] = 1;
  EXPECT_NE(ErrorOf(j).find("replicates"), std::string::npos);

  j = Base();
  j["colour"] = "blue";
  EXPECT_NE(ErrorOf(j).find("colour"), std::string::npos);

  j = Base();
  j["psi"] = {{"kind", "gilbert"}, {"r", 2.0}};
  EXPECT_NE(ErrorOf(j).find("psi"), std::string::npos);

  EXPECT_THROW(ParseScenarioText("{not json"), ConfigError);
  EXPECT_THROW(LoadScenario("/nonexistent/file.json"), ConfigError);
}

TEST(Scenario, DegenerateConnectionIsPrecondition) {
  auto j = Base();
  j["phi"]["r"] = 0.0;
  EXPECT_THROW(ParseScenario(j), PreconditionError);
}

TEST(Scenario, HashTracksContentAndSeed) {
  Scenario a = ParseScenario(Base()), b = ParseScenario(Base());
  EXPECT_EQ(a.Hash(), b.Hash());
  OverrideSeed(b, 99);
  EXPECT_EQ(b.seed_base, 99u);
  EXPECT_NE(a.Hash(), b.Hash());
  EXPECT_EQ(Fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Scenario, ConnectionFunctionJsonRoundTrip) {
  for (const auto& phi : {ConnectionFunction::Gilbert(1.5), ConnectionFunction::ScaledIndicator(0.5, 2.0),
                          ConnectionFunction::Exponential(0.3), ConnectionFunction::Gaussian(1.1)}) {
    EXPECT_EQ(ParseConnectionFunction(ConnectionFunctionToJson(phi)), phi);
  }
}

TEST(Scenario, PsiStatisticsNeedPsi) {
  auto j = Base();
  j["statistics"][0]["model"] = "psi";
  EXPECT_THROW(ParseScenario(j), ConfigError);
  j["psi"] = {{"kind", "scaled_indicator"}, {"p", 0.5}, {"r", 1.0}};
  Scenario s = ParseScenario(j);
  EXPECT_TRUE(s.statistics[0].on_psi);
}

}  // namespace
}  // namespace rcm
