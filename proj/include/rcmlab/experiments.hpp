#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcmlab/scenario.hpp"

namespace rcm {

enum class Command { kSample, kCensus, kExpectation, kCovariance, kClt, kBounds, kTotal };

std::string ToString(Command c);
Command ParseCommand(const std::string& text);

struct StatSummary {
  std::string statistic;
  double mean = 0.0;
  double variance = 0.0;
  double mean_se = 0.0;
  double variance_se = 0.0;
};

struct StandardizationRecord {
  std::string statistic;
  std::string source;  // analytic or pilot
  double mean = 0.0;
  double sd = 1.0;
  std::uint64_t pilot_replicates = 0;
};

struct DistanceRecord {
  std::string statistic;
  std::uint64_t n = 0;
  double kolmogorov = 0.0;
  double wasserstein = 0.0;
  // 99% DKW radius at this n.
  double dkw99 = 0.0;
};

// An analytic or numerical value next to its empirical counterpart.
struct MomentRecord {
  std::string quantity;
  std::string statistic;
  std::string other;
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t n_samples = 0;
  double truncation_radius = 0.0;
  std::string method;
  double empirical = 0.0;
  double empirical_se = 0.0;
  bool agrees = true;
};

struct BoundRecord {
  std::string term;
  std::string statistic;
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t budget = 0;
  double truncation_radius = 0.0;
  double empirical = 0.0;
  double empirical_se = 0.0;
  bool holds = true;
  std::string scenario_id;
};

struct RungResult {
  int index = 0;
  int dim = 0;
  double extent = 0.0;
  double volume = 0.0;
  std::uint64_t replicates = 0;
  std::vector<std::string> statistics;
  std::vector<std::uint64_t> seeds;
  // values[replicate][statistic]
  std::vector<std::vector<double>> values;
  std::vector<std::uint64_t> boundary_touching;
  std::vector<std::uint64_t> oversize;
  bool truncated = false;
  std::vector<StatSummary> summaries;
  // Empirical covariance of the statistics divided by vol(W).
  std::vector<std::vector<double>> covariance;
  std::vector<std::vector<double>> covariance_se;
  double min_eigenvalue = 0.0;
  std::vector<StandardizationRecord> standardization;
  std::vector<DistanceRecord> distances;
  std::vector<MomentRecord> moments;
  std::vector<BoundRecord> bounds;
  // `sample` command: replicate 0 as flat coordinates and id pairs.
  std::vector<double> sample_points;
  std::vector<std::int64_t> sample_edges;
};

struct RateFit {
  std::string statistic;
  int rungs = 0;
  double intercept = 0.0;
  double slope = 0.0;
  double slope_se = 0.0;
  double slope_ci_low = 0.0;
  double slope_ci_high = 0.0;
};

struct ExperimentResult {
  std::string command;
  std::string scenario_hash;
  std::string scenario_name;
  std::string version;
  std::uint64_t seed_base = 0;
  std::vector<RungResult> rungs;
  std::vector<RateFit> rate_fits;
  std::vector<MomentRecord> moments;
  std::vector<std::vector<double>> analytic_covariance;
  std::vector<std::vector<double>> analytic_covariance_se;
};

nlohmann::json ToJson(const ExperimentResult& r);
ExperimentResult ResultFromJson(const nlohmann::json& j);

struct RunOptions {
  int threads = 1;
};

ExperimentResult RunExperiment(const Scenario& s, Command command, const RunOptions& options = {});

// Writes <dir>/<hash>/<rung>/{census.csv, moments.json, distances.csv,
// summary.json} plus <dir>/<hash>/result.json; returns <dir>/<hash>.
std::string Emit(const ExperimentResult& r, const std::string& dir);

// "%.17g".
std::string FormatNumber(double v);

}  // namespace rcm
