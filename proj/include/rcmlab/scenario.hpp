#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcmlab/analysis.hpp"
#include "rcmlab/core.hpp"

namespace rcm {

struct StatisticConfig {
  Statistic statistic;
  // Count on the psi graph of the coupled pair instead of the phi graph.
  bool on_psi = false;

  std::string Label() const { return on_psi ? "psi/" + statistic.Name() : statistic.Name(); }
};

struct BoundsConfig {
  // Subset of poincare, birth_time, fourth_moment, gamma, difference.
  std::vector<std::string> terms{"poincare"};
  AnalysisBudget budget;
  // Random (sample, x) and (sample, x, y) draws for the difference bounds.
  std::uint64_t draws = 10000;
};

struct Scenario {
  std::string name;
  int dim = 2;
  double beta = 1.0;
  ConnectionFunction phi = ConnectionFunction::Gilbert(1.0);
  std::optional<ConnectionFunction> psi;
  WindowShape shape = WindowShape::kBox;
  // Inradii of the window ladder, strictly increasing.
  std::vector<double> extents;
  std::vector<StatisticConfig> statistics;
  std::uint64_t replicates = 100;
  std::uint64_t seed_base = 1;
  std::uint64_t mc_samples = 1'000'000;
  double eps_trunc = kDefaultTruncation;
  // "analytic" falls back to a pilot run when no closed form applies.
  std::string standardization = "analytic";
  std::uint64_t pilot_replicates = 500;
  // Largest m for the total-count partial sums.
  int partial_sums = 3;
  BoundsConfig bounds;

  // Normalized config document; the hash is taken over its dump.
  nlohmann::json document;

  Window WindowAt(std::size_t rung) const;
  int CensusOrder() const;
  double Padding() const { return DefaultPadding(phi, CensusOrder(), eps_trunc); }
  // 16 hex digits of FNV-1a over the normalized document.
  std::string Hash() const;
};

// Errors name the offending field, e.g. "statistics[1].kind: ...".
Scenario ParseScenario(const nlohmann::json& config);
Scenario ParseScenarioText(const std::string& text);
Scenario LoadScenario(const std::string& path);

// Replaces seed_base and refreshes the document.
void OverrideSeed(Scenario& s, std::uint64_t seed);

ConnectionFunction ParseConnectionFunction(const nlohmann::json& j, const std::string& path = "phi");
nlohmann::json ConnectionFunctionToJson(const ConnectionFunction& phi);

std::uint64_t Fnv1a64(const std::string& bytes);

}  // namespace rcm
