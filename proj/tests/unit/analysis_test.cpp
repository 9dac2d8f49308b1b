#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "rcmlab/analysis.hpp"
#include "rcmlab/errors.hpp"

namespace rcm {
namespace {

FunctionalSpec SpecFor(Statistic s, ConnectionFunction phi = ConnectionFunction::Gilbert(1.0), double half = 3.0) {
  FunctionalSpec spec;
  spec.statistic = std::move(s);
  spec.window = Window::Box(2, half);
  spec.phi = phi;
  spec.beta = 1.0;
  return spec;
}

// F evaluated from scratch on the sample plus extra points with the given ids.
double Rebuilt(const FunctionalSpec& spec, const RcmGraph& g, std::vector<double> extra,
               std::vector<std::int64_t> extra_ids) {
  const PointSet& p = g.points();
  std::vector<double> coords = p.coords();
  std::vector<std::int64_t> ids;
  for (std::size_t i = 0; i < p.size(); ++i) ids.push_back(p.id(i));
  coords.insert(coords.end(), extra.begin(), extra.end());
  ids.insert(ids.end(), extra_ids.begin(), extra_ids.end());
  PointSet q(p.dim(), coords, p.region(), p.beta(), p.seed(), ids);
  RcmGraph h = BuildRcm(q, spec.phi, g.marks(), BuildOptions{spec.eps_trunc});
  return (Evaluate(spec.statistic, Census(h, spec.window, spec.statistic.MaxOrder())) - spec.mean) / spec.sd;
}

std::vector<Statistic> Statistics() {
  return {Statistic::Points(),
          Statistic::TotalComponents(),
          Statistic::CountClass(GraphClass::Vertex()),
          Statistic::CountClass(GraphClass::Path(3), CountMode::kInside),
          Statistic::CountOrder(2),
          Statistic::Weighted({1.0, -2.0}, {GraphClass::Vertex(), GraphClass::Edge()})};
}

TEST(Difference, MatchesRecomputation) {
  for (const auto& stat : Statistics()) {
    FunctionalSpec spec = SpecFor(stat);
    Engine rng = MakeEngine(4);
    const Window near = spec.window.Padded(1.0);
    for (std::uint64_t s = 0; s < 40; ++s) {
      RcmGraph g = spec.Sample(s);
      std::vector<double> x(2), y(2);
      near.SampleUniform(rng, x);
      near.SampleUniform(rng, y);
      const double f = Rebuilt(spec, g, {}, {});
      LocalFunctional lf(spec, g);
      ASSERT_DOUBLE_EQ(lf.Value(), f) << stat.Name();
      EXPECT_DOUBLE_EQ(Difference(spec, g, x), Rebuilt(spec, g, x, {-1}) - f) << stat.Name();
      DifferenceSample d = SecondDifference(spec, g, x, y);
      EXPECT_DOUBLE_EQ(d.fxy, Rebuilt(spec, g, {x[0], x[1], y[0], y[1]}, {-1, -2})) << stat.Name();
      EXPECT_DOUBLE_EQ(d.fy, Rebuilt(spec, g, y, {-2})) << stat.Name();
    }
  }
}

TEST(Difference, RejectsCoincidentPoints) {
  FunctionalSpec spec = SpecFor(Statistic::CountClass(GraphClass::Vertex()));
  RcmGraph g = spec.Sample(1);
  ASSERT_GT(g.size(), 0u);
  std::vector<double> x(g.points()[0].begin(), g.points()[0].end());
  EXPECT_THROW(Difference(spec, g, x), PreconditionError);
  std::vector<double> y{0.1, 0.2};
  EXPECT_THROW(SecondDifference(spec, g, y, y), PreconditionError);
}

TEST(DifferenceBounds, HoldOnRandomDraws) {
  for (const auto& phi : {ConnectionFunction::Gilbert(1.0), ConnectionFunction::Gaussian(0.8)}) {
    for (const auto& stat : {Statistic::CountClass(GraphClass::Edge()), Statistic::CountOrder(3),
                             Statistic::Weighted({1.0, 0.5}, {GraphClass::Vertex(), GraphClass::Path(3)})}) {
      FunctionalSpec spec = SpecFor(stat, phi, 2.0);
      Engine rng = MakeEngine(9);
      const double reach = spec.Reach();
      const int k = stat.MaxOrder();
      for (std::uint64_t s = 0; s < 150; ++s) {
        RcmGraph g = spec.Sample(s);
        std::vector<double> x(2), y(2);
        spec.window.Padded((k + 1) * reach).SampleUniform(rng, x);
        Window::Ball(x, (k + 2) * reach).SampleUniform(rng, y);
        EXPECT_TRUE(CheckFirstDifferenceBound(spec, g, x).holds);
        EXPECT_TRUE(CheckSecondDifferenceBound(spec, g, x, y).holds);
      }
    }
  }
}

TEST(DifferenceBounds, FarPointsHaveZeroDifference) {
  FunctionalSpec spec = SpecFor(Statistic::CountOrder(2));
  RcmGraph g = spec.Sample(3);
  std::vector<double> far{spec.window.extent() + 3.5, 0.0};
  auto b = CheckFirstDifferenceBound(spec, g, far);
  EXPECT_EQ(b.bound, 0.0);
  EXPECT_EQ(b.value, 0.0);
}

TEST(PoincareBound, PointCountIsExact) {
  FunctionalSpec spec = SpecFor(Statistic::Points());
  AnalysisBudget budget;
  budget.outer = 200;
  auto e = PoincareBound(spec, budget, 5);
  EXPECT_NEAR(e.value, spec.window.Volume(), 1e-9 * spec.window.Volume() + 4 * e.std_error);
}

// D_x eta(W) = 1{x in W}; with a non-compact phi the sampling mixture has two
// distinct components, so this checks its weights.
TEST(PoincareBound, MixtureWeightsAreUnbiased) {
  FunctionalSpec spec = SpecFor(Statistic::Points(), ConnectionFunction::Gaussian(0.8), 2.0);
  AnalysisBudget budget;
  budget.outer = 4000;
  auto e = PoincareBound(spec, budget, 8);
  EXPECT_GT(e.std_error, 0.0);
  EXPECT_NEAR(e.value, spec.window.Volume(), 4 * e.std_error);
}

TEST(BirthTimeVariance, PointCountVariance) {
  FunctionalSpec spec = SpecFor(Statistic::Points(), ConnectionFunction::Gilbert(1.0), 1.0);
  AnalysisBudget budget;
  budget.outer = 300;
  auto e = BirthTimeVariance(spec, budget, 6);
  EXPECT_NEAR(e.value, spec.window.Volume(), 4 * e.std_error + 1e-9);
}

TEST(BirthTimeVariance, Preconditions) {
  AnalysisBudget budget;
  EXPECT_THROW(BirthTimeVariance(SpecFor(Statistic::Points(), ConnectionFunction::Gilbert(1.0), 3.0), budget, 1),
               ConfigError);
  budget.inner = 2;
  EXPECT_THROW(BirthTimeVariance(SpecFor(Statistic::Points(), ConnectionFunction::Gilbert(1.0), 1.0), budget, 1),
               ConfigError);
}

TEST(GammaTerms, RequireStandardizedSpec) {
  AnalysisBudget budget;
  budget.outer = 10;
  EXPECT_THROW(ComputeGammaTerms(SpecFor(Statistic::CountOrder(1)), budget, 3.0, 1), PreconditionError);
}

TEST(GammaTerms, FiniteAndNonNegative) {
  FunctionalSpec spec = SpecFor(Statistic::CountClass(GraphClass::Vertex()), ConnectionFunction::Gilbert(1.0), 2.0);
  spec.mean = 1.0;
  spec.sd = 1.5;
  AnalysisBudget budget;
  budget.outer = 60;
  GammaTerms g = ComputeGammaTerms(spec, budget, 3.0, 2);
  for (const auto& t : g.gamma) {
    EXPECT_TRUE(std::isfinite(t.value));
    EXPECT_GE(t.value, -4 * t.std_error);
  }
}

// Second differences of a non-compact phi are concentrated near the diagonal;
// gamma_1 and gamma_2 must still be resolved above their noise.
TEST(GammaTerms, ResolvedForGaussianConnection) {
  FunctionalSpec spec = SpecFor(Statistic::CountOrder(1), ConnectionFunction::Gaussian(0.8), 1.5);
  spec.mean = 1.0;
  spec.sd = 1.1;
  AnalysisBudget budget;
  budget.outer = 300;
  GammaTerms g = ComputeGammaTerms(spec, budget, 3.0, 5);
  EXPECT_GT(g.gamma[0].value, 2 * g.gamma[0].std_error);
  EXPECT_GT(g.gamma[1].value, 2 * g.gamma[1].std_error);
}

TEST(FourthMomentProfile, VanishesBeyondCompactReach) {
  FunctionalSpec spec = SpecFor(Statistic::CountOrder(2), ConnectionFunction::Gilbert(1.0), 2.0);
  std::vector<double> d{0.5, 2.5, 4.0};
  auto prof = FourthMomentProfile(spec, d, 400, 3);
  EXPECT_GT(prof[0].value, 0.0);
  EXPECT_EQ(prof[1].value, 0.0);
  EXPECT_EQ(prof[2].value, 0.0);
}

// m = 1 asks whether the origin has a neighbour: 1 - exp(-beta pi r^2).
TEST(ClusterTail, SmallOrders) {
  auto phi = ConnectionFunction::Gilbert(1.0);
  const double beta = 0.5;
  auto one = ClusterTail(phi, beta, 2, 1, 20000, 3);
  const double truth = 1 - std::exp(-beta * std::numbers::pi);
  EXPECT_DOUBLE_EQ(one.lower.value, one.upper.value);
  EXPECT_NEAR(one.lower.value, truth, 4 * one.lower.std_error);
  auto two = ClusterTail(phi, beta, 2, 2, 20000, 3);
  EXPECT_LE(two.lower.value, two.upper.value);
  EXPECT_LT(two.upper.value, one.lower.value);
  auto three = ClusterTail(phi, beta, 2, 3, 20000, 3);
  EXPECT_LE(three.upper.value, two.upper.value);
}

// Indicator profiles: the ratio is vol(W + r B) / vol(W) for any alpha.
TEST(DominatorWindowRatio, SteinerFormulaForBox) {
  const double a = 2.0, r = 1.0;
  const double truth = (4 * a * a + 8 * a * r + std::numbers::pi * r * r) / (4 * a * a);
  EXPECT_NEAR(DominatorWindowRatio(ConnectionFunction::Gilbert(r), Window::Box(2, a), 0.5), truth, 1e-8);
  EXPECT_NEAR(DominatorWindowRatio(ConnectionFunction::Gilbert(r), Window::Box(2, a), 2.0), truth, 1e-8);
}

TEST(Statistic, NamesAndOrders) {
  EXPECT_EQ(Statistic::Points().Name(), "points");
  EXPECT_EQ(Statistic::CountOrder(3).MaxOrder(), 3);
  EXPECT_EQ(Statistic::Weighted({1, 1}, {GraphClass::Vertex(), GraphClass::Path(4)}).MaxOrder(), 4);
  EXPECT_FALSE(Statistic::TotalComponents().Local());
  EXPECT_TRUE(Statistic::CountClass(GraphClass::Edge()).Local());
}

}  // namespace
}  // namespace rcm
