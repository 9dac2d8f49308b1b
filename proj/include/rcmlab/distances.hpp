#pragma once

#include <span>
#include <string>

namespace rcm {

enum class DistanceKind { kKolmogorov, kWasserstein };

// sup_t |F_n(t) - Phi(t)| over the jump points of the empirical CDF.
double KolmogorovDistance(std::span<const double> samples);
// int_0^1 |F_n^{-1}(u) - Phi^{-1}(u)| du, evaluated in closed form per order
// statistic.
double WassersteinDistance(std::span<const double> samples);

double EmpiricalDistance(std::span<const double> samples, DistanceKind kind);
DistanceKind ParseDistanceKind(const std::string& text);

// Dvoretzky-Kiefer-Wolfowitz radius: sqrt(ln(2 / alpha) / (2 n)).
double DkwRadius(std::size_t n, double alpha);

}  // namespace rcm
