#include "rcmlab/stats.hpp"

#include <boost/math/distributions/students_t.hpp>

#include "rcmlab/errors.hpp"

namespace rcm {

std::string ToString(Method method) {
  switch (method) {
    case Method::kClosedForm: return "closed_form";
    case Method::kQuadrature: return "quadrature";
    case Method::kMonteCarlo: return "monte_carlo";
  }
  return "unknown";
}

Method ParseMethod(const std::string& text) {
  if (text == "closed_form") return Method::kClosedForm;
  if (text == "quadrature") return Method::kQuadrature;
  if (text == "monte_carlo") return Method::kMonteCarlo;
  throw ConfigError("unknown method '" + text + "'");
}

MomentEstimate operator+(const MomentEstimate& a, const MomentEstimate& b) {
  MomentEstimate out;
  out.value = a.value + b.value;
  out.std_error = std::hypot(a.std_error, b.std_error);
  out.n_samples = a.n_samples + b.n_samples;
  out.truncation_radius = std::max(a.truncation_radius, b.truncation_radius);
  out.method = std::max(a.method, b.method);
  return out;
}

MomentEstimate operator*(double c, const MomentEstimate& a) {
  MomentEstimate out = a;
  out.value *= c;
  out.std_error *= std::abs(c);
  return out;
}

void RunningStats::Merge(const RunningStats& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(n_), nb = static_cast<double>(other.n_);
  const double delta = other.mean_ - mean_;
  const double n = na + nb;
  mean_ += delta * nb / n;
  m2_ += other.m2_ + delta * delta * na * nb / n;
  n_ += other.n_;
}

SampleSummary Summarize(std::span<const double> xs) {
  SampleSummary s;
  const std::size_t n = xs.size();
  if (n == 0) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(n);
  if (n < 2) return s;
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    double d = (x - s.mean) * (x - s.mean);
    m2 += d;
    m4 += d * d;
  }
  const double dn = static_cast<double>(n);
  s.variance = m2 / (dn - 1.0);
  s.mean_se = std::sqrt(s.variance / dn);
  m4 /= dn;
  double var_of_var = (m4 - s.variance * s.variance * (dn - 3.0) / (dn - 1.0)) / dn;
  s.variance_se = std::sqrt(std::max(0.0, var_of_var));
  return s;
}

CovarianceSummary SampleCovariance(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ConfigError("covariance inputs differ in length");
  const std::size_t n = xs.size();
  CovarianceSummary out;
  if (n < 2) return out;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  RunningStats prod;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double p = (xs[i] - mx) * (ys[i] - my);
    s += p;
    prod.Add(p);
  }
  out.value = s / static_cast<double>(n - 1);
  out.std_error = std::sqrt(prod.variance() / static_cast<double>(n));
  return out;
}

LinearFit FitLine(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("line fit needs at least two paired values");
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw ConfigError("line fit needs distinct x values");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = y[i] - fit.intercept - fit.slope * x[i];
      rss += r * r;
    }
    fit.slope_se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    boost::math::students_t dist(static_cast<double>(n - 2));
    double t = boost::math::quantile(boost::math::complement(dist, 0.025));
    fit.slope_ci_low = fit.slope - t * fit.slope_se;
    fit.slope_ci_high = fit.slope + t * fit.slope_se;
  } else {
    fit.slope_ci_low = fit.slope_ci_high = fit.slope;
  }
  return fit;
}

}  // namespace rcm
