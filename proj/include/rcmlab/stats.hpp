#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rcm {

enum class Method { kClosedForm, kQuadrature, kMonteCarlo };

std::string ToString(Method method);
Method ParseMethod(const std::string& text);

struct MomentEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t n_samples = 0;
  double truncation_radius = 0.0;
  Method method = Method::kClosedForm;

  static MomentEstimate Exact(double v) { return {v, 0.0, 0, 0.0, Method::kClosedForm}; }
};

// Sum of independent estimates; errors add in quadrature.
MomentEstimate operator+(const MomentEstimate& a, const MomentEstimate& b);
MomentEstimate operator*(double c, const MomentEstimate& a);

// Welford accumulator; Merge is Chan's parallel update.
class RunningStats {
 public:
  void Add(double x) {
    ++n_;
    double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }
  void Merge(const RunningStats& other);

  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  // Unbiased sample variance; 0 for fewer than two values.
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double std_error() const { return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct SampleSummary {
  double mean = 0.0;
  double variance = 0.0;
  // Standard errors of the mean and of the sample variance (fourth-moment based).
  double mean_se = 0.0;
  double variance_se = 0.0;
};

SampleSummary Summarize(std::span<const double> xs);

// Unbiased sample covariance and a standard error from the variance of the
// centered products.
struct CovarianceSummary {
  double value = 0.0;
  double std_error = 0.0;
};
CovarianceSummary SampleCovariance(std::span<const double> xs, std::span<const double> ys);

// Ordinary least squares y = a + b x, with the standard error of b.
struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_se = 0.0;
  double slope_ci_low = 0.0;
  double slope_ci_high = 0.0;
};
LinearFit FitLine(std::span<const double> x, std::span<const double> y);

}  // namespace rcm
