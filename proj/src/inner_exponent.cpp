// beta * int (prod_i (1 - f_i(y - x_i)) - 1) dy for small point clouds.

#include <algorithm>
#include <bit>
#include <limits>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "rcmlab/errors.hpp"
#include "rcmlab/moments.hpp"

namespace rcm {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxGaussianSites = 14;

using Fns = std::span<const ConnectionFunction* const>;

double Dist2(const double* a, const double* b, int dim) {
  double s = 0.0;
  for (int c = 0; c < dim; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
  return s;
}

// Inclusion-exclusion over site subsets; every product of gaussians
// integrates in closed form:
//   int exp(-sum_S w_i |y - x_i|^2) dy = (pi / a)^{d/2} exp(-sum_{i<j in S} w_i w_j |x_i - x_j|^2 / a),
// with a = sum_S w_i.
double GaussianExact(int dim, std::span<const double> coords, Fns fns) {
  const int n = static_cast<int>(fns.size());
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double s = fns[static_cast<std::size_t>(i)]->params()[0];
    w[static_cast<std::size_t>(i)] = 1.0 / (s * s);
  }
  std::vector<double> d2(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      d2[static_cast<std::size_t>(i * n + j)] = Dist2(&coords[static_cast<std::size_t>(i * dim)],
                                                      &coords[static_cast<std::size_t>(j * dim)], dim);
    }
  }
  double total = 0.0;
  for (std::uint32_t s = 1; s < (1u << n); ++s) {
    double a = 0.0, cross = 0.0;
    for (int i = 0; i < n; ++i) {
      if (!(s & (1u << i))) continue;
      a += w[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < n; ++j) {
        if (s & (1u << j)) {
          cross += w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(j)] * d2[static_cast<std::size_t>(i * n + j)];
        }
      }
    }
    double term = std::pow(kPi / a, 0.5 * dim) * std::exp(-cross / a);
    total += (std::popcount(s) % 2 == 1) ? term : -term;
  }
  // total = int (1 - prod(1 - f_i)).
  return -total;
}

double Intervals1D(std::span<const double> coords, Fns fns) {
  const std::size_t n = fns.size();
  std::vector<double> cuts;
  for (std::size_t i = 0; i < n; ++i) {
    double r = *fns[i]->SupportRadius();
    cuts.push_back(coords[i] - r);
    cuts.push_back(coords[i] + r);
  }
  std::sort(cuts.begin(), cuts.end());
  double covered = 0.0;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    double a = cuts[c], b = cuts[c + 1];
    if (!(b > a)) continue;
    double mid = 0.5 * (a + b), keep = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(mid - coords[i]) <= *fns[i]->SupportRadius()) keep *= 1.0 - fns[i]->Height();
    }
    covered += (1.0 - keep) * (b - a);
  }
  return -covered;
}

struct Disk {
  double x, y, r, p;
};

// f = 1 - prod(1 - p_i 1_{D_i}) is piecewise constant; by Green's theorem
// int f = sum over boundary arcs of (jump of f across the arc) * 1/2 oint (x dy - y dx).
double Disks2D(std::span<const double> coords, Fns fns) {
  std::vector<Disk> disks;
  for (std::size_t i = 0; i < fns.size(); ++i) {
    Disk d{coords[2 * i], coords[2 * i + 1], *fns[i]->SupportRadius(), fns[i]->Height()};
    auto same = std::find_if(disks.begin(), disks.end(),
                             [&](const Disk& e) { return e.x == d.x && e.y == d.y && e.r == d.r; });
    if (same != disks.end()) {
      same->p = 1.0 - (1.0 - same->p) * (1.0 - d.p);
    } else {
      disks.push_back(d);
    }
  }
  const std::size_t n = disks.size();
  double covered = 0.0;
  std::vector<double> angles;
  for (std::size_t i = 0; i < n; ++i) {
    const Disk& a = disks[i];
    angles.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Disk& b = disks[j];
      double dx = b.x - a.x, dy = b.y - a.y;
      double d = std::hypot(dx, dy);
      if (d >= a.r + b.r || d <= std::abs(a.r - b.r)) continue;
      double base = std::atan2(dy, dx);
      double cosv = std::clamp((a.r * a.r + d * d - b.r * b.r) / (2.0 * a.r * d), -1.0, 1.0);
      double half = std::acos(cosv);
      for (double t : {base - half, base + half}) {
        t = std::fmod(t, 2.0 * kPi);
        if (t < 0.0) t += 2.0 * kPi;
        angles.push_back(t);
      }
    }
    std::sort(angles.begin(), angles.end());
    std::vector<std::pair<double, double>> arcs;
    if (angles.empty()) {
      arcs.emplace_back(0.0, 2.0 * kPi);
    } else {
      for (std::size_t m = 0; m + 1 < angles.size(); ++m) arcs.emplace_back(angles[m], angles[m + 1]);
      arcs.emplace_back(angles.back(), angles.front() + 2.0 * kPi);
    }
    for (auto [lo, hi] : arcs) {
      if (!(hi > lo)) continue;
      double mid = 0.5 * (lo + hi);
      double mx = a.x + a.r * std::cos(mid), my = a.y + a.r * std::sin(mid);
      double jump = a.p;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const Disk& b = disks[j];
        if (std::hypot(mx - b.x, my - b.y) < b.r) jump *= 1.0 - b.p;
      }
      double contour = 0.5 * (a.r * a.r * (hi - lo) + a.r * a.x * (std::sin(hi) - std::sin(lo)) -
                              a.r * a.y * (std::cos(hi) - std::cos(lo)));
      covered += jump * contour;
    }
  }
  return -covered;
}

// Radius beyond which f_i is below double resolution.
double OuterRadius(const ConnectionFunction& f) {
  if (auto r = f.SupportRadius()) return *r;
  return f.Range(1e-17);
}

double Scale(const ConnectionFunction& f) {
  if (auto r = f.SupportRadius()) return *r;
  return f.params()[0];
}

// Telescoping: 1 - prod(1 - a_i) = sum_i a_i prod_{j<i} (1 - a_j). Each term
// is integrated in polar coordinates around its own site.
double PolarQuadrature(int dim, std::span<const double> coords, Fns fns, const QuadratureOptions& options) {
  const std::size_t n = fns.size();
  const std::size_t d = static_cast<std::size_t>(dim);
  double spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      spread = std::max(spread, std::sqrt(Dist2(&coords[i * d], &coords[j * d], dim)));
    }
  }
  double panel = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (OuterRadius(*fns[i]) + spread > options.hard_cap) {
      throw ConfigError("inner exponent truncation radius exceeds the hard cap");
    }
    panel = std::min(panel, Scale(*fns[i]));
  }

  double covered = 0.0;
  std::vector<double> cuts;
  for (std::size_t i = 0; i < n; ++i) {
    const ConnectionFunction& fi = *fns[i];
    const double* xi = &coords[i * d];
    const double outer = OuterRadius(fi);

    // Radial integral along direction w.
    auto radial = [&](const double* w) {
      cuts.assign({0.0, outer});
      for (std::size_t j = 0; j < i; ++j) {
        auto rj = fns[j]->SupportRadius();
        if (!rj) continue;
        const double* xj = &coords[j * d];
        double b = 0.0, c = -(*rj) * (*rj);
        for (std::size_t k = 0; k < d; ++k) {
          b += w[k] * (xi[k] - xj[k]);
          c += (xi[k] - xj[k]) * (xi[k] - xj[k]);
        }
        double disc = b * b - c;
        if (disc <= 0.0) continue;
        for (double t : {-b - std::sqrt(disc), -b + std::sqrt(disc)}) {
          if (t > 0.0 && t < outer) cuts.push_back(t);
        }
      }
      std::sort(cuts.begin(), cuts.end());
      auto integrand = [&](double t) {
        double v = std::pow(t, dim - 1) * fi(t);
        for (std::size_t j = 0; j < i && v != 0.0; ++j) {
          const double* xj = &coords[j * d];
          double s = 0.0;
          for (std::size_t k = 0; k < d; ++k) {
            double delta = xi[k] + t * w[k] - xj[k];
            s += delta * delta;
          }
          v *= fns[j]->Complement(std::sqrt(s));
        }
        return v;
      };
      double sum = 0.0;
      for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        double a = cuts[c], b = cuts[c + 1];
        if (!(b > a)) continue;
        int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / panel)));
        for (int p = 0; p < pieces; ++p) {
          double lo = a + (b - a) * p / pieces, hi = a + (b - a) * (p + 1) / pieces;
          sum += boost::math::quadrature::gauss<double, 20>::integrate(integrand, lo, hi);
        }
      }
      return sum;
    };

    double term = 0.0;
    if (dim == 1) {
      double plus = 1.0, minus = -1.0;
      term = radial(&plus) + radial(&minus);
    } else if (dim == 2) {
      const int m = options.directions;
      for (int a = 0; a < m; ++a) {
        double th = 2.0 * kPi * (a + 0.5) / m;
        double w[2] = {std::cos(th), std::sin(th)};
        term += radial(w);
      }
      term *= 2.0 * kPi / m;
    } else {
      const int m = options.directions;
      auto ring = [&](double mu) {
        double s = std::sqrt(std::max(0.0, 1.0 - mu * mu)), acc = 0.0;
        for (int a = 0; a < m; ++a) {
          double ph = 2.0 * kPi * (a + 0.5) / m;
          double w[3] = {s * std::cos(ph), s * std::sin(ph), mu};
          acc += radial(w);
        }
        return acc * 2.0 * kPi / m;
      };
      term = boost::math::quadrature::gauss<double, 30>::integrate(ring, -1.0, 1.0);
    }
    covered += term;
  }
  return -covered;
}

void CheckSites(int dim, std::span<const double> coords, Fns fns) {
  if (dim < 1) throw ConfigError("dimension must be >= 1");
  if (coords.size() != fns.size() * static_cast<std::size_t>(dim)) {
    throw ConfigError("inner exponent: coordinate count does not match the site count");
  }
  for (const auto* f : fns) {
    if (f == nullptr) throw ConfigError("inner exponent: null connection function");
  }
}

}  // namespace

double InnerExponentQuadrature(int dim, std::span<const double> coords, Fns fns, double beta,
                               const QuadratureOptions& options) {
  CheckSites(dim, coords, fns);
  if (fns.empty()) return 0.0;
  if (dim > 3) throw PreconditionError("inner exponent quadrature supports d <= 3");
  return beta * PolarQuadrature(dim, coords, fns, options);
}

double InnerExponent(int dim, std::span<const double> coords, Fns fns, double beta, const QuadratureOptions& options) {
  CheckSites(dim, coords, fns);
  if (fns.empty()) return 0.0;
  if (fns.size() == 1) return -beta * MPhi(*fns[0], dim);
  bool gaussian = true, indicator = true;
  for (const auto* f : fns) {
    gaussian = gaussian && f->kind() == ConnectionKind::kGaussian;
    indicator = indicator && f->IsIndicator();
  }
  if (gaussian && fns.size() <= kMaxGaussianSites) return beta * GaussianExact(dim, coords, fns);
  if (indicator && dim == 1) return beta * Intervals1D(coords, fns);
  if (indicator && dim == 2) return beta * Disks2D(coords, fns);
  return InnerExponentQuadrature(dim, coords, fns, beta, options);
}

double InnerExponent(int dim, std::span<const double> coords, const ConnectionFunction& phi, double beta,
                     const QuadratureOptions& options) {
  std::vector<const ConnectionFunction*> fns(coords.size() / static_cast<std::size_t>(std::max(dim, 1)), &phi);
  return InnerExponent(dim, coords, fns, beta, options);
}

}  // namespace rcm
