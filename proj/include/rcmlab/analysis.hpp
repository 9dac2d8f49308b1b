#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rcmlab/census.hpp"
#include "rcmlab/core.hpp"
#include "rcmlab/stats.hpp"

namespace rcm {

enum class StatisticKind { kPoints, kCountClass, kCountOrder, kWeighted, kTotalComponents };

// A component statistic over W. kPoints is eta(W); kTotalComponents counts
// components with every vertex in W.
struct Statistic {
  StatisticKind kind = StatisticKind::kPoints;
  CountMode mode = CountMode::kLexmin;
  int order = 1;                    // kCountOrder
  std::vector<GraphClass> classes;  // kCountClass (one entry), kWeighted
  std::vector<double> weights;      // kWeighted

  static Statistic Points();
  static Statistic TotalComponents();
  static Statistic CountClass(const GraphClass& g, CountMode mode = CountMode::kLexmin);
  static Statistic CountOrder(int k, CountMode mode = CountMode::kLexmin);
  static Statistic Weighted(std::vector<double> a, std::vector<GraphClass> classes,
                            CountMode mode = CountMode::kLexmin);

  // Largest component order the statistic looks at; 1 for points and totals.
  int MaxOrder() const;
  // Hop radius outside of which an added point cannot change the value.
  int Hops() const { return MaxOrder(); }
  // True when the value only sees components of order <= MaxOrder().
  bool Local() const { return kind != StatisticKind::kTotalComponents && kind != StatisticKind::kPoints; }
  std::string Name() const;
};

double Evaluate(const Statistic& s, const CensusReport& report);

struct FunctionalSpec {
  Statistic statistic;
  Window window = Window::Box(2, 1.0);
  ConnectionFunction phi = ConnectionFunction::Gilbert(1.0);
  double beta = 1.0;
  double eps_trunc = kDefaultTruncation;
  // F = (raw - mean) / sd.
  double mean = 0.0;
  double sd = 1.0;

  double Padding() const { return DefaultPadding(phi, statistic.MaxOrder(), eps_trunc); }
  double Reach() const { return phi.Range(eps_trunc); }
  bool Standardized() const { return mean != 0.0 || sd != 1.0; }
  // Sample and graph for one seed.
  RcmGraph Sample(std::uint64_t seed) const;
};

// F on a graph, plus F after inserting fresh points. Added point i gets id
// ids[i], by default -(i + 1); its marks come from the graph's mark source.
class LocalFunctional {
 public:
  LocalFunctional(const FunctionalSpec& spec, const RcmGraph& graph);

  double Value() const { return Scale(base_); }
  double ValueWith(std::span<const double> added, std::span<const std::int64_t> ids = {}) const;
  double Difference(std::span<const double> x) const { return ValueWith(x) - Value(); }

  // deg(added point `which`) in the graph with all `added` points inserted.
  int AddedDegree(std::span<const double> added, int which, std::span<const std::int64_t> ids = {}) const;
  // Some vertex of W (possibly the added point itself) is within `hops` edges
  // of added point `which`.
  bool ReachesWindow(std::span<const double> added, int which, int hops,
                     std::span<const std::int64_t> ids = {}) const;
  // Added points `from` and `to` are joined by a path of <= hops edges.
  bool Joined(std::span<const double> added, int from, int to, int hops,
              std::span<const std::int64_t> ids = {}) const;

 private:
  double Scale(double raw) const { return (raw - spec_.mean) / spec_.sd; }
  double RawWith(std::span<const double> added, std::span<const std::int64_t> ids) const;

  FunctionalSpec spec_;
  const RcmGraph& graph_;
  std::vector<int> comp_of_;
  std::vector<std::vector<int>> blocks_;
  std::vector<double> contribution_;
  double base_ = 0.0;
};

struct DifferenceSample {
  double f = 0.0, fx = 0.0, fy = 0.0, fxy = 0.0;

  double DeltaX() const { return fx - f; }
  double DeltaY() const { return fy - f; }
  double Delta2() const { return fxy - fx - fy + f; }
};

// Throws PreconditionError if x duplicates a sample point.
double Difference(const FunctionalSpec& spec, const RcmGraph& graph, std::span<const double> x);
// Throws PreconditionError if x == y.
DifferenceSample SecondDifference(const FunctionalSpec& spec, const RcmGraph& graph, std::span<const double> x,
                                  std::span<const double> y);

struct BoundCheck {
  double value = 0.0;
  double bound = 0.0;
  bool holds = true;
};

// Per-sample difference bounds for weighted lexmin counts, k = MaxOrder():
//   |D_x S|     <= |a| (deg(x) + 1) 1{x ~k~ W}
//   |D2_{x,y} S| <= |a| (2 deg(y) + 3) 1{x ~(k+1)~ y} 1{x ~k~ W or y ~k~ W}
BoundCheck CheckFirstDifferenceBound(const FunctionalSpec& spec, const RcmGraph& graph, std::span<const double> x);
BoundCheck CheckSecondDifferenceBound(const FunctionalSpec& spec, const RcmGraph& graph, std::span<const double> x,
                                      std::span<const double> y);

struct AnalysisBudget {
  std::uint64_t outer = 2000;
  // Draws of x per sampled configuration (first-order integrals).
  int points = 8;
  // Inner replicates for nested expectations; split into two halves.
  int inner = 16;
  int threads = 1;
};

// beta int E (D_x F)^2 dx.
MomentEstimate PoincareBound(const FunctionalSpec& spec, const AnalysisBudget& budget, std::uint64_t seed);

// Largest window volume accepted by BirthTimeVariance.
inline constexpr double kBirthTimeVolumeCap = 27.0;

// Variance through the birth-time representation, by nested Monte Carlo.
MomentEstimate BirthTimeVariance(const FunctionalSpec& spec, const AnalysisBudget& budget, std::uint64_t seed);

struct GammaTerms {
  std::array<MomentEstimate, 6> gamma;  // gamma[0] is gamma_1
  double fourth_moment = 0.0;           // E F^4 used by gamma_4
};

// `fourth_moment` is E F^4 of the standardized statistic (empirical).
GammaTerms ComputeGammaTerms(const FunctionalSpec& spec, const AnalysisBudget& budget, double fourth_moment,
                             std::uint64_t seed);

// max{256 [beta int sqrt(E (D_x F)^4)]^2, 4 beta int E (D_x F)^4 + 2}.
MomentEstimate FourthMomentBound(const FunctionalSpec& spec, const AnalysisBudget& budget, std::uint64_t seed);

// E (D_x F)^4 at x = center + (extent + d) e_1 for each d.
std::vector<MomentEstimate> FourthMomentProfile(const FunctionalSpec& spec, std::span<const double> distances,
                                                std::uint64_t samples, std::uint64_t seed, int threads = 1);

struct ClusterTailEstimate {
  MomentEstimate lower;
  MomentEstimate upper;
  std::uint64_t unresolved = 0;
};

// Bounds on P(total order of the components joined to an added origin >= m).
ClusterTailEstimate ClusterTail(const ConnectionFunction& phi, double beta, int dim, int m, std::uint64_t samples,
                                std::uint64_t seed, int threads = 1, double eps_trunc = kDefaultTruncation);

// (1 / vol W) int Dominator(d(x, W))^alpha dx.
double DominatorWindowRatio(const ConnectionFunction& phi, const Window& w, double alpha);

}  // namespace rcm
