#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "rcmlab/core.hpp"
#include "rcmlab/errors.hpp"

namespace rcm {
namespace {

TEST(ConnectionFunction, ProfilesAndRanges) {
  auto g = ConnectionFunction::Gilbert(2.0);
  EXPECT_EQ(g(1.999), 1.0);
  EXPECT_EQ(g(2.001), 0.0);
  EXPECT_EQ(g.Range(), 2.0);

  auto s = ConnectionFunction::ScaledIndicator(0.3, 1.5);
  EXPECT_DOUBLE_EQ(s(1.0), 0.3);
  EXPECT_EQ(s(1.6), 0.0);

  auto e = ConnectionFunction::Exponential(2.0);
  EXPECT_NEAR(e(1.0), std::exp(-0.5), 1e-15);
  EXPECT_FALSE(e.SupportRadius().has_value());
  EXPECT_LE(e(e.Range(1e-6)), 1e-6 * (1 + 1e-9));

  auto ga = ConnectionFunction::Gaussian(0.5);
  EXPECT_NEAR(ga(1.0), std::exp(-4.0), 1e-15);
}

TEST(ConnectionFunction, DegenerateParametersArePreconditionErrors) {
  EXPECT_THROW(ConnectionFunction::Gilbert(0.0), PreconditionError);
  EXPECT_THROW(ConnectionFunction::Gaussian(0.0), PreconditionError);
  EXPECT_THROW(ConnectionFunction::ScaledIndicator(0.0, 1.0), PreconditionError);
  EXPECT_THROW(ConnectionFunction::ScaledIndicator(1.5, 1.0), ConfigError);
  EXPECT_THROW(ConnectionFunction::Gilbert(-1.0), ConfigError);
}

TEST(ConnectionFunction, Domination) {
  auto phi = ConnectionFunction::Gilbert(1.0);
  EXPECT_TRUE(phi.Dominates(ConnectionFunction::ScaledIndicator(0.5, 1.0)));
  EXPECT_TRUE(phi.Dominates(ConnectionFunction::Gilbert(0.5)));
  EXPECT_FALSE(phi.Dominates(ConnectionFunction::Gilbert(1.5)));
  EXPECT_FALSE(phi.Dominates(ConnectionFunction::Gaussian(0.1)));
  EXPECT_TRUE(ConnectionFunction::Gaussian(1.0).Dominates(ConnectionFunction::Gaussian(0.5)));
}

TEST(ConnectionFunction, MassClosedFormMatchesQuadrature) {
  for (int d = 1; d <= 3; ++d) {
    for (const auto& phi : {ConnectionFunction::Gilbert(1.3), ConnectionFunction::ScaledIndicator(0.4, 0.8),
                            ConnectionFunction::Exponential(1.7), ConnectionFunction::Gaussian(0.6)}) {
      double a = MPhi(phi, d), b = MPhiRadialQuadrature(phi, d);
      EXPECT_NEAR(a, b, 1e-8 * a) << phi.Describe() << " d=" << d;
    }
  }
  EXPECT_NEAR(MPhi(ConnectionFunction::Gilbert(1.0), 2), std::numbers::pi, 1e-14);
  // int exp(-|x|^2) over R^2 = pi
  EXPECT_NEAR(MPhiRadialQuadrature(ConnectionFunction::Gaussian(1.0), 2), std::numbers::pi, 1e-8);
}

TEST(Window, VolumeDepthAndContainment) {
  auto box = Window::Box(2, 3.0);
  EXPECT_DOUBLE_EQ(box.Volume(), 36.0);
  std::vector<double> x{2.0, 0.5};
  EXPECT_TRUE(box.Contains(x));
  EXPECT_DOUBLE_EQ(box.Depth(x), 1.0);
  std::vector<double> out{5.0, 7.0};
  EXPECT_DOUBLE_EQ(box.DistanceTo(out), std::hypot(2.0, 4.0));
  EXPECT_DOUBLE_EQ(box.Depth(out), 0.0);

  auto ball = Window::Ball(3, 2.0);
  EXPECT_NEAR(ball.Volume(), 4.0 / 3.0 * std::numbers::pi * 8.0, 1e-12);
  EXPECT_DOUBLE_EQ(ball.Padded(1.0).extent(), 3.0);
  EXPECT_THROW(Window::Box(2, -1.0), ConfigError);
}

TEST(Window, UniformSamplesStayInside) {
  Engine rng = MakeEngine(3);
  for (const auto& w : {Window::Box(3, 1.5), Window::Ball(2, 2.0), Window::Ball(std::vector<double>{4, 4}, 1.0)}) {
    std::vector<double> x(static_cast<std::size_t>(w.dim()));
    for (int i = 0; i < 2000; ++i) {
      w.SampleUniform(rng, x);
      ASSERT_TRUE(w.Contains(x));
    }
  }
}

TEST(PointSet, PoissonCountHasMeanAndVarianceBetaVolume) {
  auto w = Window::Box(2, 2.5);
  const double beta = 1.7, lambda = beta * w.Volume();
  double sum = 0, sum2 = 0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    double c = static_cast<double>(SamplePoisson(w, 0.0, beta, 1000 + i).size());
    sum += c;
    sum2 += c * c;
  }
  double mean = sum / n, var = sum2 / n - mean * mean;
  EXPECT_NEAR(mean, lambda, 4 * std::sqrt(lambda / n));
  EXPECT_NEAR(var / lambda, 1.0, 0.1);
}

TEST(PointSet, SortedAndDeterministic) {
  auto w = Window::Ball(2, 4.0);
  PointSet a = SamplePoisson(w, 1.0, 2.0, 99), b = SamplePoisson(w, 1.0, 2.0, 99);
  EXPECT_EQ(a.coords(), b.coords());
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_TRUE(LexLess(a[i - 1], a[i]));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(a.region().DistanceTo(a[i]), 1e-12);
}

TEST(PointSet, IdsFollowPointsThroughSort) {
  PointSet p(1, {3.0, 1.0, 2.0}, Window::Box(1, 5.0), 1.0, 0, {30, 10, 20});
  EXPECT_EQ(p[0][0], 1.0);
  EXPECT_EQ(p.id(0), 10);
  EXPECT_EQ(p.id(2), 30);
  EXPECT_THROW(PointSet(1, {1.0, 2.0}, Window::Box(1, 5.0), 1.0, 0, {1}), ConfigError);
  EXPECT_THROW(PointSet(1, {1.0, 1.0}, Window::Box(1, 5.0), 1.0, 0), PreconditionError);
}

TEST(PairMarks, SymmetricUniformAndFreshStreams) {
  PairMarkSource m(42);
  EXPECT_EQ(m(3, 7), m(7, 3));
  double sum = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double u = m(i, i + 1);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
  auto f = m.WithFreshFrom(10, 5);
  EXPECT_EQ(f(1, 2), m(1, 2));
  EXPECT_NE(f(1, 12), m(1, 12));
}

// Edge set rebuilt by brute force from the mark rule.
TEST(BuildRcm, MatchesBruteForce) {
  for (const auto& phi : {ConnectionFunction::Gilbert(1.0), ConnectionFunction::Exponential(2.0),
                          ConnectionFunction::ScaledIndicator(0.5, 1.2)}) {
    auto pts = SamplePoisson(Window::Box(2, 4.0), 1.0, 1.5, 17);
    auto marks = MarksForSeed(17);
    BuildOptions opts{1e-6};
    RcmGraph g = BuildRcm(pts, phi, marks, opts);
    std::set<std::pair<int, int>> got, want;
    for (std::size_t v = 0; v < g.size(); ++v) {
      for (int u : g.neighbors(v)) {
        if (static_cast<std::size_t>(u) > v) got.insert({static_cast<int>(v), u});
      }
    }
    const double reach = phi.Range(opts.eps_trunc);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        double d = std::hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]);
        if (d > reach) continue;
        if (marks(pts.id(i), pts.id(j)) < phi(d)) want.insert({static_cast<int>(i), static_cast<int>(j)});
      }
    }
    EXPECT_EQ(got, want) << phi.Describe();
    EXPECT_EQ(g.num_edges(), want.size());
  }
}

TEST(BuildCoupled, PsiEdgesAreSubsetOfPhiEdges) {
  auto phi = ConnectionFunction::Gilbert(1.0), psi = ConnectionFunction::ScaledIndicator(0.5, 1.0);
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto pts = SamplePoisson(Window::Box(2, 5.0), 1.0, 1.0, s);
    auto [gp, gs] = BuildCoupled(pts, phi, psi, MarksForSeed(s));
    for (std::size_t v = 0; v < gs.size(); ++v) {
      for (int u : gs.neighbors(v)) EXPECT_TRUE(gp.HasEdge(static_cast<int>(v), u));
    }
  }
  auto pts = SamplePoisson(Window::Box(2, 2.0), 1.0, 1.0, 1);
  EXPECT_THROW(BuildCoupled(pts, psi, phi, MarksForSeed(1)), PreconditionError);
}

}  // namespace
}  // namespace rcm
