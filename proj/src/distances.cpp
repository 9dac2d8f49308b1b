#include "rcmlab/distances.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "rcmlab/errors.hpp"

namespace rcm {

namespace {

std::vector<double> Sorted(std::span<const double> samples) {
  if (samples.empty()) throw ConfigError("empirical distance needs samples");
  if (samples.size() < 2) throw PreconditionError("empirical distance needs at least two samples");
  std::vector<double> xs(samples.begin(), samples.end());
  for (double x : xs) {
    if (!std::isfinite(x)) throw PreconditionError("non-finite sample");
  }
  std::sort(xs.begin(), xs.end());
  return xs;
}

const boost::math::normal kStd;

// -phi(Phi^{-1}(u)), an antiderivative of Phi^{-1}; zero at both ends.
double QuantileIntegral(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return -boost::math::pdf(kStd, boost::math::quantile(kStd, u));
}

}  // namespace

double KolmogorovDistance(std::span<const double> samples) {
  auto xs = Sorted(samples);
  const double n = static_cast<double>(xs.size());
  double best = 0.0;
  std::size_t i = 0;
  while (i < xs.size()) {
    std::size_t j = i;
    while (j < xs.size() && xs[j] == xs[i]) ++j;
    // The empirical CDF jumps from i/n to j/n at a tie block.
    double phi = boost::math::cdf(kStd, xs[i]);
    best = std::max({best, std::abs(phi - static_cast<double>(i) / n), std::abs(static_cast<double>(j) / n - phi)});
    i = j;
  }
  return best;
}

double WassersteinDistance(std::span<const double> samples) {
  auto xs = Sorted(samples);
  const double n = static_cast<double>(xs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double c = xs[i];
    const double a = static_cast<double>(i) / n, b = static_cast<double>(i + 1) / n;
    // Phi^{-1} < c on (a, m), > c on (m, b).
    const double m = std::clamp(boost::math::cdf(kStd, c), a, b);
    const double ga = QuantileIntegral(a), gm = QuantileIntegral(m), gb = QuantileIntegral(b);
    total += c * (m - a) - (gm - ga);
    total += (gb - gm) - c * (b - m);
  }
  return total;
}

double EmpiricalDistance(std::span<const double> samples, DistanceKind kind) {
  return kind == DistanceKind::kKolmogorov ? KolmogorovDistance(samples) : WassersteinDistance(samples);
}

DistanceKind ParseDistanceKind(const std::string& text) {
  if (text == "kolmogorov") return DistanceKind::kKolmogorov;
  if (text == "wasserstein") return DistanceKind::kWasserstein;
  throw ConfigError("unknown distance kind: " + text);
}

double DkwRadius(std::size_t n, double alpha) {
  if (n == 0 || !(alpha > 0.0 && alpha < 1.0)) throw ConfigError("DKW radius needs n > 0 and alpha in (0, 1)");
  return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n)));
}

}  // namespace rcm
