#include <gtest/gtest.h>

#include <cstring>
#include <string>
#include <vector>

#include "rcmlab/rcmlab.h"

namespace {

const char* kConfig = R"({
  "name": "capi", "dim": 2, "beta": 1.0,
  "phi": {"kind": "gilbert", "r": 1.0},
  "window": {"shape": "box", "extents": [2]},
  "statistics": [{"kind": "count_order", "order": 1}],
  "replicates": 20, "seed_base": 1
})";

TEST(CApi, ScenarioLifecycleAndHash) {
  rcm_scenario* s = nullptr;
  ASSERT_EQ(rcm_scenario_parse(kConfig, &s), RCM_OK) << rcm_last_error();
  char h1[17], h2[17];
  ASSERT_EQ(rcm_scenario_hash(s, h1), RCM_OK);
  ASSERT_EQ(rcm_scenario_set_seed(s, 77), RCM_OK);
  ASSERT_EQ(rcm_scenario_hash(s, h2), RCM_OK);
  EXPECT_EQ(std::strlen(h1), 16u);
  EXPECT_STRNE(h1, h2);
  rcm_scenario_free(s);
}

TEST(CApi, StatusCodes) {
  rcm_scenario* s = nullptr;
  EXPECT_EQ(rcm_scenario_parse("{", &s), RCM_CONFIG);
  EXPECT_NE(std::string(rcm_last_error()), "");
  std::string degenerate = kConfig;
  degenerate.replace(degenerate.find("\"r\": 1.0"), 8, "\"r\": 0.0");
  EXPECT_EQ(rcm_scenario_parse(degenerate.c_str(), &s), RCM_NUMERIC) << rcm_last_error();
  EXPECT_EQ(rcm_scenario_parse(nullptr, &s), RCM_INVALID_ARGUMENT);
  ASSERT_EQ(rcm_scenario_parse(kConfig, &s), RCM_OK);
  EXPECT_STREQ(rcm_last_error(), "");
  rcm_result* r = nullptr;
  EXPECT_EQ(rcm_run(s, "draw", 1, &r), RCM_CONFIG);
  rcm_scenario_free(s);
}

TEST(CApi, RunAndSerialize) {
  rcm_scenario* s = nullptr;
  ASSERT_EQ(rcm_scenario_parse(kConfig, &s), RCM_OK);
  rcm_result* r = nullptr;
  ASSERT_EQ(rcm_run(s, "census", 2, &r), RCM_OK) << rcm_last_error();
  char* json = nullptr;
  ASSERT_EQ(rcm_result_json(r, &json), RCM_OK);
  EXPECT_NE(std::string(json).find("\"scenario_hash\""), std::string::npos);
  rcm_string_free(json);
  rcm_result_free(r);
  rcm_scenario_free(s);
}

TEST(CApi, GraphAccessors) {
  rcm_scenario* s = nullptr;
  ASSERT_EQ(rcm_scenario_parse(kConfig, &s), RCM_OK);
  rcm_graph* g = nullptr;
  ASSERT_EQ(rcm_graph_sample(s, 0, 3, &g), RCM_OK);
  EXPECT_EQ(rcm_graph_sample(s, 5, 3, &g), RCM_INVALID_ARGUMENT);
  EXPECT_EQ(rcm_graph_dim(g), 2);
  const size_t n = rcm_graph_size(g);
  std::vector<double> coords(rcm_graph_coords(g, nullptr, 0));
  EXPECT_EQ(coords.size(), 2 * n);
  rcm_graph_coords(g, coords.data(), coords.size());
  std::vector<int64_t> edges(2 * rcm_graph_edges(g, nullptr, 0));
  rcm_graph_edges(g, edges.data(), edges.size() / 2);
  for (size_t e = 0; e < edges.size(); e += 2) {
    double dx = coords[2 * edges[e]] - coords[2 * edges[e + 1]];
    double dy = coords[2 * edges[e] + 1] - coords[2 * edges[e + 1] + 1];
    EXPECT_LE(dx * dx + dy * dy, 1.0);
  }
  char* census = nullptr;
  ASSERT_EQ(rcm_graph_census_json(g, &census), RCM_OK);
  EXPECT_NE(std::string(census).find("lexmin_by_order"), std::string::npos);
  rcm_string_free(census);
  rcm_graph_free(g);
  rcm_scenario_free(s);
}

}  // namespace
