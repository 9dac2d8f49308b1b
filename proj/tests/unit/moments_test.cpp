#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "rcmlab/errors.hpp"
#include "rcmlab/moments.hpp"

namespace rcm {
namespace {

constexpr double kPi = std::numbers::pi;

McOptions Budget(std::uint64_t samples, std::uint64_t seed = 11) {
  McOptions mc;
  mc.samples = samples;
  mc.seed = seed;
  return mc;
}

void ExpectWithin(const MomentEstimate& e, double truth, double rel = 1e-9) {
  EXPECT_NEAR(e.value, truth, 4 * e.std_error + rel * std::abs(truth)) << "se=" << e.std_error;
}

TEST(PairProbabilities, ThreePointsOnALine) {
  std::vector<double> c{0.0, 0.5, 2.0};
  auto p = PairProbabilities(1, c, ConnectionFunction::Gilbert(1.0));
  EXPECT_EQ(p[PairBit(3, 0, 1)], 1.0);
  EXPECT_EQ(p[PairBit(3, 0, 2)], 0.0);
  EXPECT_EQ(p[PairBit(3, 1, 2)], 0.0);
}

TEST(ClassDistribution, EqualProbabilitiesOnThreeVertices) {
  const double p = 0.3;
  std::vector<double> probs(3, p);
  EXPECT_NEAR(ClassProbability(3, probs, GraphClass::Path(3)), 3 * p * p * (1 - p), 1e-15);
  EXPECT_NEAR(ClassProbability(3, probs, GraphClass::Complete(3)), p * p * p, 1e-15);
  EXPECT_NEAR(ConnectedProbability(3, probs), 3 * p * p * (1 - p) + p * p * p, 1e-15);
  double total = 0;
  for (double q : ClassDistribution(3, probs)) total += q;
  EXPECT_NEAR(total, ConnectedProbability(3, probs), 1e-15);
}

TEST(ClassDistribution, JointLawOfCoupledEdge) {
  std::vector<double> phi{0.8}, psi{0.3};
  auto e = GraphClass::Edge();
  EXPECT_NEAR(JointClassProbability(2, phi, psi, e, e), 0.3, 1e-15);
}

TEST(InnerExponent, SingleSiteAndTwoDiskUnion) {
  auto phi = ConnectionFunction::Gilbert(1.0);
  std::vector<double> one{0.0, 0.0};
  EXPECT_NEAR(InnerExponent(2, one, phi, 2.0), -2.0 * kPi, 1e-12);
  // union of two unit disks at distance d
  const double d = 0.8;
  const double lens = 2 * std::acos(d / 2) - d / 2 * std::sqrt(4 - d * d);
  std::vector<double> two{0.0, 0.0, d, 0.0};
  EXPECT_NEAR(InnerExponent(2, two, phi, 1.0), -(2 * kPi - lens), 1e-9);
  const ConnectionFunction* fns[] = {&phi, &phi};
  EXPECT_NEAR(InnerExponentQuadrature(2, two, fns, 1.0), -(2 * kPi - lens), 1e-3);
}

TEST(InnerExponent, QuadratureAgreesWithExactGaussian) {
  auto g = ConnectionFunction::Gaussian(1.0);
  std::vector<double> pts{0.0, 0.0, 0.5, 0.3, -0.4, 0.9};
  const ConnectionFunction* fns[] = {&g, &g, &g};
  EXPECT_NEAR(InnerExponentQuadrature(2, pts, fns, 1.0), InnerExponent(2, pts, g, 1.0), 1e-4);
}

TEST(SetCovariance, Box) {
  std::vector<double> v{1.0, -0.5};
  EXPECT_NEAR(SetCovariance(Window::Box(2, 2.0), v), 3.0 * 3.5, 1e-12);
}

TEST(ExpectedCountIntensity, IsolatedVertexClosedForm) {
  auto phi = ConnectionFunction::Gilbert(1.0);
  auto e = ExpectedCountIntensity(GraphClass::Vertex(), phi, 1.0, 2, Budget(1000));
  EXPECT_NEAR(e.value, std::exp(-kPi), 1e-12);
}

// d = 1 gilbert: rho_edge = beta e^{-2 beta r} (1 - e^{-beta r}).
TEST(ExpectedCountIntensity, EdgeOnTheLine) {
  const double beta = 0.8, r = 1.0;
  auto e = ExpectedCountIntensity(GraphClass::Edge(), ConnectionFunction::Gilbert(r), beta, 1, Budget(200000));
  ExpectWithin(e, beta * std::exp(-2 * beta * r) * (1 - std::exp(-beta * r)), 1e-6);
}

// d = 1 gilbert, vertex with vertex:
// sigma = b e^{-2br} + 2b e^{-3br} - 2b e^{-4br} - 4 b^2 r e^{-4br}.
TEST(AsyCov, IsolatedVerticesOnTheLine) {
  const double b = 0.7, r = 1.0;
  auto phi = ConnectionFunction::Gilbert(r);
  auto e = AsyCov(GraphClass::Vertex(), GraphClass::Vertex(), phi, phi, b, 1, Budget(400000));
  const double truth = b * std::exp(-2 * b * r) + 2 * b * std::exp(-3 * b * r) - 2 * b * std::exp(-4 * b * r) -
                       4 * b * b * r * std::exp(-4 * b * r);
  ExpectWithin(e, truth, 1e-3);
  auto s = SigmaTotalPartial(1, phi, b, 1, Budget(400000));
  ASSERT_EQ(s.size(), 1u);
  ExpectWithin(s[0], truth, 1e-3);
}

TEST(AsyCov, MatrixIsSymmetricAndPositive) {
  auto phi = ConnectionFunction::Gilbert(1.0);
  std::vector<ClusterSpec> specs{ClusterSpec::Of(GraphClass::Vertex()), ClusterSpec::Of(GraphClass::Edge())};
  auto m = AsyCovMatrix(specs, phi, 1.0, 2, Budget(100000));
  EXPECT_EQ(m.value[0][1], m.value[1][0]);
  auto ev = MinEigenvalue(m);
  EXPECT_GT(ev.value, 0.0);
  CovarianceMatrix one{{{2.5}}, {{0.1}}};
  EXPECT_DOUBLE_EQ(MinEigenvalue(one).value, 2.5);
}

TEST(AsyCov, RequiresDomination) {
  auto phi = ConnectionFunction::Gilbert(1.0);
  EXPECT_THROW(AsyCov(GraphClass::Vertex(), GraphClass::Vertex(), ConnectionFunction::Gilbert(0.5), phi, 1.0, 2,
                      Budget(100)),
               PreconditionError);
}

// Finite-window variance of the isolated-vertex count approaches sigma * vol.
TEST(FiniteWindowCovariance, ScalesWithVolume) {
  auto phi = ConnectionFunction::Gilbert(1.0);
  auto v = ClusterSpec::Of(GraphClass::Vertex());
  auto w = Window::Box(1, 50.0);
  auto fin = FiniteWindowCovariance(v, v, phi, phi, w, 0.7, Budget(200000));
  auto asy = AsyCov(GraphClass::Vertex(), GraphClass::Vertex(), phi, phi, 0.7, 1, Budget(200000));
  EXPECT_NEAR(fin.value / w.Volume(), asy.value, 0.05 * asy.value);
}

}  // namespace
}  // namespace rcm
