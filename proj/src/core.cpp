#include "rcmlab/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "rcmlab/errors.hpp"

namespace rcm {

namespace {

constexpr double kPi = 3.14159265358979323846;

void CheckDim(int dim) {
  if (dim < 1) throw ConfigError("dimension must be >= 1");
}

// Rejects NaN, infinities and negatives; zero is left to the caller since it
// usually means a degenerate (m_phi = 0) model rather than a malformed value.
void CheckParam(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0) {
    throw ConfigError(std::string("connection parameter '") + name + "' must be a finite value >= 0");
  }
}

}  // namespace

double UnitBallVolume(int dim) {
  CheckDim(dim);
  return std::pow(kPi, 0.5 * dim) / std::tgamma(0.5 * dim + 1.0);
}

double UnitSphereArea(int dim) {
  return dim * UnitBallVolume(dim);
}

bool LexLess(std::span<const double> a, std::span<const double> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// ---------------------------------------------------------------- Window

Window::Window(WindowShape shape, std::vector<double> center, double extent)
    : shape_(shape), center_(std::move(center)), extent_(extent) {
  CheckDim(static_cast<int>(center_.size()));
  if (!std::isfinite(extent_) || extent_ < 0.0) throw ConfigError("window extent must be finite and >= 0");
  for (double c : center_) {
    if (!std::isfinite(c)) throw ConfigError("window center must be finite");
  }
}

Window Window::Box(int dim, double half_side) {
  CheckDim(dim);
  return Window(WindowShape::kBox, std::vector<double>(static_cast<std::size_t>(dim), 0.0), half_side);
}
Window Window::Box(std::vector<double> center, double half_side) {
  return Window(WindowShape::kBox, std::move(center), half_side);
}
Window Window::Ball(int dim, double radius) {
  CheckDim(dim);
  return Window(WindowShape::kBall, std::vector<double>(static_cast<std::size_t>(dim), 0.0), radius);
}
Window Window::Ball(std::vector<double> center, double radius) {
  return Window(WindowShape::kBall, std::move(center), radius);
}

double Window::Volume() const {
  if (shape_ == WindowShape::kBox) return std::pow(2.0 * extent_, dim());
  return UnitBallVolume(dim()) * std::pow(extent_, dim());
}

Window Window::Padded(double padding) const {
  if (!std::isfinite(padding) || padding < 0.0) throw ConfigError("padding must be finite and >= 0");
  return Window(shape_, center_, extent_ + padding);
}

bool Window::Contains(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim()) throw ConfigError("point dimension does not match window");
  if (shape_ == WindowShape::kBox) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (std::abs(x[i] - center_[i]) > extent_) return false;
    }
    return true;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - center_[i]) * (x[i] - center_[i]);
  return s <= extent_ * extent_;
}

double Window::DistanceTo(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim()) throw ConfigError("point dimension does not match window");
  double s = 0.0;
  if (shape_ == WindowShape::kBox) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      double excess = std::abs(x[i] - center_[i]) - extent_;
      if (excess > 0.0) s += excess * excess;
    }
    return std::sqrt(s);
  }
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - center_[i]) * (x[i] - center_[i]);
  return std::max(0.0, std::sqrt(s) - extent_);
}

double Window::Depth(std::span<const double> x) const {
  if (!Contains(x)) return 0.0;
  if (shape_ == WindowShape::kBox) {
    double depth = extent_;
    for (std::size_t i = 0; i < x.size(); ++i) depth = std::min(depth, extent_ - std::abs(x[i] - center_[i]));
    return depth;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - center_[i]) * (x[i] - center_[i]);
  return extent_ - std::sqrt(s);
}

void Window::SampleUniform(Engine& rng, std::span<double> out) const {
  const std::size_t d = center_.size();
  if (shape_ == WindowShape::kBox) {
    for (std::size_t i = 0; i < d; ++i) out[i] = center_[i] + extent_ * (2.0 * Uniform01(rng) - 1.0);
    return;
  }
  std::normal_distribution<double> normal;
  double norm = 0.0;
  do {
    norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      out[i] = normal(rng);
      norm += out[i] * out[i];
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  double radius = extent_ * std::pow(Uniform01(rng), 1.0 / static_cast<double>(d));
  for (std::size_t i = 0; i < d; ++i) out[i] = center_[i] + radius * out[i] / norm;
}

// ---------------------------------------------------------- connections

std::string ToString(ConnectionKind kind) {
  switch (kind) {
    case ConnectionKind::kGilbert: return "gilbert";
    case ConnectionKind::kScaledIndicator: return "scaled_indicator";
    case ConnectionKind::kExponential: return "exponential";
    case ConnectionKind::kGaussian: return "gaussian";
  }
  return "unknown";
}

ConnectionFunction::ConnectionFunction(ConnectionKind kind, std::vector<double> params)
    : kind_(kind), params_(std::move(params)) {}

ConnectionFunction ConnectionFunction::Gilbert(double r) {
  CheckParam(r, "r");
  if (r == 0.0) throw PreconditionError("gilbert(r=0) has m_phi = 0");
  return ConnectionFunction(ConnectionKind::kGilbert, {r});
}

ConnectionFunction ConnectionFunction::ScaledIndicator(double p, double r) {
  CheckParam(p, "p");
  CheckParam(r, "r");
  if (p > 1.0) throw ConfigError("scaled_indicator requires p <= 1");
  if (p == 0.0 || r == 0.0) throw PreconditionError("scaled_indicator with p = 0 or r = 0 has m_phi = 0");
  return ConnectionFunction(ConnectionKind::kScaledIndicator, {p, r});
}

ConnectionFunction ConnectionFunction::Exponential(double theta) {
  CheckParam(theta, "theta");
  if (theta == 0.0) throw PreconditionError("exponential(theta=0) has m_phi = 0");
  return ConnectionFunction(ConnectionKind::kExponential, {theta});
}

ConnectionFunction ConnectionFunction::Gaussian(double s) {
  CheckParam(s, "s");
  if (s == 0.0) throw PreconditionError("gaussian(s=0) has m_phi = 0");
  return ConnectionFunction(ConnectionKind::kGaussian, {s});
}

double ConnectionFunction::operator()(double t) const {
  switch (kind_) {
    case ConnectionKind::kGilbert: return t <= params_[0] ? 1.0 : 0.0;
    case ConnectionKind::kScaledIndicator: return t <= params_[1] ? params_[0] : 0.0;
    case ConnectionKind::kExponential: return std::exp(-t / params_[0]);
    case ConnectionKind::kGaussian: return std::exp(-(t * t) / (params_[0] * params_[0]));
  }
  return 0.0;
}

double ConnectionFunction::Eval(std::span<const double> displacement) const {
  double s = 0.0;
  for (double v : displacement) s += v * v;
  return (*this)(std::sqrt(s));
}

double ConnectionFunction::Height() const {
  switch (kind_) {
    case ConnectionKind::kGilbert: return 1.0;
    case ConnectionKind::kScaledIndicator: return params_[0];
    default: return 1.0;
  }
}

std::optional<double> ConnectionFunction::SupportRadius() const {
  switch (kind_) {
    case ConnectionKind::kGilbert: return params_[0];
    case ConnectionKind::kScaledIndicator: return params_[1];
    default: return std::nullopt;
  }
}

double ConnectionFunction::Range(double eps) const {
  if (auto r = SupportRadius()) return *r;
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("truncation epsilon must lie in (0, 1)");
  if (kind_ == ConnectionKind::kExponential) return params_[0] * std::log(1.0 / eps);
  return params_[0] * std::sqrt(std::log(1.0 / eps));
}

bool ConnectionFunction::Dominates(const ConnectionFunction& psi) const {
  bool analytic = false;
  if (psi.IsIndicator()) {
    double rp = *psi.SupportRadius();
    if (IsIndicator()) {
      analytic = psi.Height() <= Height() && rp <= *SupportRadius();
    } else {
      analytic = psi.Height() <= (*this)(rp);
    }
  } else if (psi.kind_ == kind_) {
    analytic = psi.params_[0] <= params_[0];
  }
  if (!analytic) return false;

  // Probe grid, including both sides of every jump.
  double top = 1.5 * std::max(Range(1e-12), psi.Range(1e-12));
  std::vector<double> probes;
  constexpr int kProbes = 4096;
  for (int i = 0; i <= kProbes; ++i) probes.push_back(top * i / kProbes);
  for (const ConnectionFunction* f : {this, &psi}) {
    if (auto r = f->SupportRadius()) {
      probes.push_back(*r);
      probes.push_back(std::nextafter(*r, 0.0));
      probes.push_back(std::nextafter(*r, top));
    }
  }
  for (double t : probes) {
    if (psi(t) > (*this)(t) + 1e-15) return false;
  }
  return true;
}

std::string ConnectionFunction::Describe() const {
  char buf[128];
  switch (kind_) {
    case ConnectionKind::kGilbert: std::snprintf(buf, sizeof buf, "gilbert(r=%.17g)", params_[0]); break;
    case ConnectionKind::kScaledIndicator:
      std::snprintf(buf, sizeof buf, "scaled_indicator(p=%.17g, r=%.17g)", params_[0], params_[1]);
      break;
    case ConnectionKind::kExponential: std::snprintf(buf, sizeof buf, "exponential(theta=%.17g)", params_[0]); break;
    case ConnectionKind::kGaussian: std::snprintf(buf, sizeof buf, "gaussian(s=%.17g)", params_[0]); break;
  }
  return buf;
}

double MPhi(const ConnectionFunction& phi, int dim) {
  CheckDim(dim);
  const auto& p = phi.params();
  switch (phi.kind()) {
    case ConnectionKind::kGilbert: return UnitBallVolume(dim) * std::pow(p[0], dim);
    case ConnectionKind::kScaledIndicator: return p[0] * UnitBallVolume(dim) * std::pow(p[1], dim);
    case ConnectionKind::kExponential:
      return UnitSphereArea(dim) * std::tgamma(static_cast<double>(dim)) * std::pow(p[0], dim);
    case ConnectionKind::kGaussian: return std::pow(kPi * p[0] * p[0], 0.5 * dim);
  }
  return 0.0;
}

double MPhiRadialQuadrature(const ConnectionFunction& phi, int dim) {
  CheckDim(dim);
  using boost::math::quadrature::gauss_kronrod;
  auto f = [&](double t) { return std::pow(t, dim - 1) * phi(t); };
  double upper = phi.SupportRadius() ? *phi.SupportRadius() : std::numeric_limits<double>::infinity();
  double err = 0.0;
  double integral = gauss_kronrod<double, 61>::integrate(f, 0.0, upper, 15, 1e-13, &err);
  return UnitSphereArea(dim) * integral;
}

double DefaultPadding(const ConnectionFunction& phi, int k_max, double eps) {
  if (k_max < 1) throw ConfigError("k_max must be >= 1");
  return (k_max + 1) * phi.Range(eps);
}

// -------------------------------------------------------------- points

PointSet::PointSet(int dim, std::vector<double> coords, Window region, double beta, std::uint64_t seed,
                   std::vector<std::int64_t> ids)
    : dim_(dim), region_(std::move(region)), beta_(beta), seed_(seed) {
  CheckDim(dim);
  if (region_.dim() != dim) throw ConfigError("point set dimension does not match its region");
  if (coords.size() % static_cast<std::size_t>(dim) != 0) throw ConfigError("coordinate count is not a multiple of dim");
  for (double c : coords) {
    if (!std::isfinite(c)) throw ConfigError("non-finite coordinate");
  }
  const std::size_t n = coords.size() / static_cast<std::size_t>(dim);
  const std::size_t d = static_cast<std::size_t>(dim);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto at = [&](std::size_t i) { return std::span<const double>(coords.data() + i * d, d); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return LexLess(at(a), at(b)); });
  coords_.resize(coords.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(coords.data() + order[i] * d, d, coords_.data() + i * d);
  }
  if (!ids.empty()) {
    if (ids.size() != n) throw ConfigError("id count does not match point count");
    ids_.resize(n);
    for (std::size_t i = 0; i < n; ++i) ids_[i] = ids[order[i]];
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (std::equal(coords_.begin() + (i - 1) * d, coords_.begin() + i * d, coords_.begin() + i * d)) {
      throw PreconditionError("duplicate point in sample");
    }
  }
}

PointSet SamplePoisson(const Window& window, double padding, double beta, std::uint64_t seed) {
  if (!std::isfinite(beta) || beta <= 0.0) throw ConfigError("beta must be finite and > 0");
  Window region = window.Padded(padding);
  Engine rng = MakeEngine(DeriveSeed(seed, 0x706f696e7473ULL));
  double mean = beta * region.Volume();
  std::size_t n = 0;
  if (mean > 0.0) {
    std::poisson_distribution<long long> count(mean);
    n = static_cast<std::size_t>(count(rng));
  }
  const std::size_t d = static_cast<std::size_t>(region.dim());
  std::vector<double> coords(n * d);
  for (std::size_t i = 0; i < n; ++i) region.SampleUniform(rng, std::span<double>(coords.data() + i * d, d));
  return PointSet(region.dim(), std::move(coords), region, beta, seed);
}

// --------------------------------------------------------------- marks

double PairMarkSource::operator()(std::int64_t i, std::int64_t j) const {
  std::int64_t lo = std::min(i, j);
  std::int64_t hi = std::max(i, j);
  std::uint64_t key = seed_;
  if (fresh_ && hi >= fresh_->first) key = fresh_->second;
  return ToUnit(HashCombine(HashCombine(key, static_cast<std::uint64_t>(lo)), static_cast<std::uint64_t>(hi)));
}

PairMarkSource PairMarkSource::WithFreshFrom(std::int64_t first_fresh_id, std::uint64_t fresh_seed) const {
  PairMarkSource out(seed_);
  out.fresh_ = std::make_pair(first_fresh_id, fresh_seed);
  return out;
}

// --------------------------------------------------------------- graph

RcmGraph::RcmGraph(std::shared_ptr<const PointSet> points, ConnectionFunction phi, PairMarkSource marks,
                   std::vector<std::size_t> offsets, std::vector<int> targets, double reach)
    : points_(std::move(points)),
      phi_(std::move(phi)),
      marks_(marks),
      offsets_(std::move(offsets)),
      targets_(std::move(targets)),
      reach_(reach) {}

bool RcmGraph::HasEdge(int u, int v) const {
  auto nb = neighbors(static_cast<std::size_t>(u));
  return std::binary_search(nb.begin(), nb.end(), v);
}

namespace {

// Edges in (i ascending, j ascending) order, i < j.
std::vector<std::pair<int, int>> SweepEdges(const PointSet& pts, const ConnectionFunction& phi,
                                            const PairMarkSource& marks, double reach) {
  std::vector<std::pair<int, int>> edges;
  const std::size_t n = pts.size();
  const int d = pts.dim();
  const double reach2 = reach * reach;
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = pts[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      auto xj = pts[j];
      if (xj[0] - xi[0] > reach) break;
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += (xj[c] - xi[c]) * (xj[c] - xi[c]);
      if (s > reach2) continue;
      double p = phi(std::sqrt(s));
      if (p <= 0.0) continue;
      if (p >= 1.0 || marks(pts.id(i), pts.id(j)) < p) {
        edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
    }
  }
  return edges;
}

RcmGraph Assemble(std::shared_ptr<const PointSet> pts, const ConnectionFunction& phi, const PairMarkSource& marks,
                  double reach, const std::vector<std::pair<int, int>>& edges) {
  const std::size_t n = pts->size();
  std::vector<std::size_t> offsets(n + 1, 0);
  for (auto [a, b] : edges) {
    ++offsets[static_cast<std::size_t>(a) + 1];
    ++offsets[static_cast<std::size_t>(b) + 1];
  }
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  std::vector<int> targets(offsets[n]);
  std::vector<std::size_t> fill(offsets.begin(), offsets.end() - 1);
  // Generation order keeps every adjacency list sorted.
  for (auto [a, b] : edges) {
    targets[fill[static_cast<std::size_t>(a)]++] = b;
    targets[fill[static_cast<std::size_t>(b)]++] = a;
  }
  return RcmGraph(std::move(pts), phi, marks, std::move(offsets), std::move(targets), reach);
}

}  // namespace

RcmGraph BuildRcm(std::shared_ptr<const PointSet> points, const ConnectionFunction& phi, const PairMarkSource& marks,
                  const BuildOptions& options) {
  double reach = phi.Range(options.eps_trunc);
  auto edges = SweepEdges(*points, phi, marks, reach);
  return Assemble(std::move(points), phi, marks, reach, edges);
}

RcmGraph BuildRcm(const PointSet& points, const ConnectionFunction& phi, const PairMarkSource& marks,
                  const BuildOptions& options) {
  return BuildRcm(std::make_shared<const PointSet>(points), phi, marks, options);
}

std::pair<RcmGraph, RcmGraph> BuildCoupled(const PointSet& points, const ConnectionFunction& phi,
                                           const ConnectionFunction& psi, const PairMarkSource& marks,
                                           const BuildOptions& options) {
  if (!phi.Dominates(psi)) {
    throw PreconditionError("coupling requires psi <= phi: " + psi.Describe() + " vs " + phi.Describe());
  }
  auto shared = std::make_shared<const PointSet>(points);
  return {BuildRcm(shared, phi, marks, options), BuildRcm(shared, psi, marks, options)};
}

}  // namespace rcm
