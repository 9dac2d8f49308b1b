#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rcmlab/random.hpp"

namespace rcm {

inline constexpr double kDefaultTruncation = 1e-6;

double UnitBallVolume(int dim);
double UnitSphereArea(int dim);

// Lexicographic order on R^d: first differing coordinate decides.
bool LexLess(std::span<const double> a, std::span<const double> b);

enum class WindowShape { kBox, kBall };

// Observation region. `extent` is the half side (box) or the radius (ball);
// either way it equals the inradius.
class Window {
 public:
  static Window Box(int dim, double half_side);
  static Window Box(std::vector<double> center, double half_side);
  static Window Ball(int dim, double radius);
  static Window Ball(std::vector<double> center, double radius);

  WindowShape shape() const { return shape_; }
  int dim() const { return static_cast<int>(center_.size()); }
  double extent() const { return extent_; }
  const std::vector<double>& center() const { return center_; }

  double Inradius() const { return extent_; }
  double Volume() const;
  Window Padded(double padding) const;

  bool Contains(std::span<const double> x) const;
  // d(x, W); zero for points of W.
  double DistanceTo(std::span<const double> x) const;
  // Distance from x to the boundary measured inwards; zero outside W.
  double Depth(std::span<const double> x) const;

  void SampleUniform(Engine& rng, std::span<double> out) const;

 private:
  Window(WindowShape shape, std::vector<double> center, double extent);

  WindowShape shape_;
  std::vector<double> center_;
  double extent_;
};

enum class ConnectionKind { kGilbert, kScaledIndicator, kExponential, kGaussian };

std::string ToString(ConnectionKind kind);

// Isotropic, translation-invariant connection function phi(x) = profile(|x|).
class ConnectionFunction {
 public:
  static ConnectionFunction Gilbert(double r);
  static ConnectionFunction ScaledIndicator(double p, double r);
  static ConnectionFunction Exponential(double theta);
  static ConnectionFunction Gaussian(double s);

  ConnectionKind kind() const { return kind_; }
  // (r) for gilbert, (p, r) for scaled_indicator, (theta) / (s) otherwise.
  const std::vector<double>& params() const { return params_; }

  double operator()(double distance) const;
  double Eval(std::span<const double> displacement) const;
  double Complement(double distance) const { return 1.0 - (*this)(distance); }

  // Monotone radial dominator; the built-in kinds are radial and monotone,
  // so the dominator coincides with the profile.
  double Dominator(double t) const { return (*this)(t); }

  bool IsIndicator() const {
    return kind_ == ConnectionKind::kGilbert || kind_ == ConnectionKind::kScaledIndicator;
  }
  // Height of an indicator kind (1 for gilbert, p for scaled_indicator).
  double Height() const;
  std::optional<double> SupportRadius() const;
  // Support radius for compact kinds, otherwise the smallest R with
  // Dominator(R) <= eps.
  double Range(double eps = kDefaultTruncation) const;

  // psi <= phi pointwise, checked analytically per kind pair and on a probe grid.
  bool Dominates(const ConnectionFunction& psi) const;

  std::string Describe() const;

  friend bool operator==(const ConnectionFunction&, const ConnectionFunction&) = default;

 private:
  ConnectionFunction(ConnectionKind kind, std::vector<double> params);

  ConnectionKind kind_;
  std::vector<double> params_;
};

// Integral of phi over R^d, closed form.
double MPhi(const ConnectionFunction& phi, int dim);
// Same integral by adaptive radial quadrature (Gauss-Kronrod on [0, inf)).
double MPhiRadialQuadrature(const ConnectionFunction& phi, int dim);

// Padding that makes the census exact for components of order <= k_max:
// (k_max + 1) times the range of phi.
double DefaultPadding(const ConnectionFunction& phi, int k_max, double eps = kDefaultTruncation);

// Poisson sample, sorted by LexLess. Ids default to the sorted index; explicit
// ids travel with their points through the sort and key the pair marks.
class PointSet {
 public:
  PointSet(int dim, std::vector<double> coords, Window region, double beta, std::uint64_t seed,
           std::vector<std::int64_t> ids = {});

  int dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / static_cast<std::size_t>(dim_); }
  bool empty() const { return coords_.empty(); }
  std::span<const double> operator[](std::size_t i) const {
    return {coords_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  std::int64_t id(std::size_t i) const { return ids_.empty() ? static_cast<std::int64_t>(i) : ids_[i]; }
  const std::vector<double>& coords() const { return coords_; }
  const Window& region() const { return region_; }
  double beta() const { return beta_; }
  std::uint64_t seed() const { return seed_; }

 private:
  int dim_;
  std::vector<double> coords_;
  Window region_;
  double beta_;
  std::uint64_t seed_;
  std::vector<std::int64_t> ids_;
};

PointSet SamplePoisson(const Window& window, double padding, double beta, std::uint64_t seed);

// Uniform [0,1) mark per unordered id pair, computed by hashing
// (seed, min id, max id). Added points use reserved negative ids.
class PairMarkSource {
 public:
  explicit PairMarkSource(std::uint64_t seed) : seed_(seed) {}

  double operator()(std::int64_t i, std::int64_t j) const;
  std::uint64_t seed() const { return seed_; }

  // Marks of pairs touching an id >= first_fresh_id come from fresh_seed.
  PairMarkSource WithFreshFrom(std::int64_t first_fresh_id, std::uint64_t fresh_seed) const;

 private:
  std::uint64_t seed_;
  std::optional<std::pair<std::int64_t, std::uint64_t>> fresh_;
};

struct BuildOptions {
  double eps_trunc = kDefaultTruncation;
};

class RcmGraph {
 public:
  RcmGraph(std::shared_ptr<const PointSet> points, ConnectionFunction phi, PairMarkSource marks,
           std::vector<std::size_t> offsets, std::vector<int> targets, double reach);

  const PointSet& points() const { return *points_; }
  std::shared_ptr<const PointSet> shared_points() const { return points_; }
  const ConnectionFunction& phi() const { return phi_; }
  const PairMarkSource& marks() const { return marks_; }

  std::size_t size() const { return offsets_.size() - 1; }
  std::span<const int> neighbors(std::size_t v) const {
    return {targets_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
  }
  std::size_t degree(std::size_t v) const { return offsets_[v + 1] - offsets_[v]; }
  std::size_t num_edges() const { return targets_.size() / 2; }
  bool HasEdge(int u, int v) const;

  // Pairs further apart than this were never connected.
  double reach() const { return reach_; }
  // True when phi has unbounded support and far pairs were dropped.
  bool truncated() const { return !phi_.SupportRadius().has_value(); }

 private:
  std::shared_ptr<const PointSet> points_;
  ConnectionFunction phi_;
  PairMarkSource marks_;
  std::vector<std::size_t> offsets_;
  std::vector<int> targets_;
  double reach_;
};

RcmGraph BuildRcm(std::shared_ptr<const PointSet> points, const ConnectionFunction& phi,
                  const PairMarkSource& marks, const BuildOptions& options = {});
RcmGraph BuildRcm(const PointSet& points, const ConnectionFunction& phi, const PairMarkSource& marks,
                  const BuildOptions& options = {});

// Two graphs on the same points and marks; requires psi <= phi.
std::pair<RcmGraph, RcmGraph> BuildCoupled(const PointSet& points, const ConnectionFunction& phi,
                                           const ConnectionFunction& psi, const PairMarkSource& marks,
                                           const BuildOptions& options = {});

// Mark stream used for a sample drawn with `seed`.
inline PairMarkSource MarksForSeed(std::uint64_t seed) {
  return PairMarkSource(DeriveSeed(seed, 0x6d61726b73ULL));
}

}  // namespace rcm
