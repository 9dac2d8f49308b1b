#include "rcmlab/moments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>

#include "rcmlab/errors.hpp"
#include "rcmlab/parallel.hpp"
#include "rcmlab/random.hpp"

namespace rcm {

namespace {

constexpr double kPi = std::numbers::pi;

void CheckCloud(int dim, std::span<const double> coords) {
  if (dim < 1) throw ConfigError("dimension must be >= 1");
  if (coords.size() % static_cast<std::size_t>(dim) != 0) throw ConfigError("coordinate count is not a multiple of dim");
}

int UncertainPairs(std::span<const double> pp) {
  return static_cast<int>(std::count_if(pp.begin(), pp.end(), [](double p) { return p > 0.0 && p < 1.0; }));
}

void CheckPairs(int k, std::span<const double> pp) {
  if (k < 1 || k > kMaxOrder) throw ConfigError("cluster order must lie in [1, 8]");
  if (pp.size() != static_cast<std::size_t>(PairCount(k))) throw ConfigError("pair probability count does not match k");
  if (UncertainPairs(pp) > kMaxUncertainPairs) {
    throw ConfigError("exact enumeration is capped at " + std::to_string(kMaxUncertainPairs) + " uncertain pairs");
  }
}

// Index into EnumerateClasses(k), or -1 when the labeled graph is disconnected.
int ClassIndex(int k, std::uint32_t mask) {
  if (k <= 6) return LabeledClassTable(k)[mask];
  AdjRows rows = RowsFromMask(k, mask);
  if (!IsConnected(k, rows)) return -1;
  const auto& classes = EnumerateClasses(k);
  GraphClass g = CanonicalForm(k, rows);
  return static_cast<int>(std::lower_bound(classes.begin(), classes.end(), g) - classes.begin());
}

// Visits every edge set with positive probability.
template <class Leaf>
void EnumerateEdgeSets(std::span<const double> pp, Leaf&& leaf) {
  const int m = static_cast<int>(pp.size());
  auto rec = [&](auto&& self, int e, std::uint32_t mask, double w) -> void {
    if (e == m) {
      leaf(mask, w);
      return;
    }
    double p = pp[static_cast<std::size_t>(e)];
    if (p > 0.0) self(self, e + 1, mask | (1u << e), w * p);
    if (p < 1.0) self(self, e + 1, mask, w * (1.0 - p));
  };
  rec(rec, 0, 0u, 1.0);
}

std::size_t ClassPosition(const GraphClass& g) {
  const auto& classes = EnumerateClasses(g.order());
  auto it = std::lower_bound(classes.begin(), classes.end(), g);
  if (it == classes.end() || *it != g) throw ConfigError("unknown graph class " + g.Id());
  return static_cast<std::size_t>(it - classes.begin());
}

double Factorial(int n) {
  return std::tgamma(n + 1.0);
}

}  // namespace

std::vector<double> PairProbabilities(int dim, std::span<const double> coords, const ConnectionFunction& phi) {
  CheckCloud(dim, coords);
  const int k = static_cast<int>(coords.size() / static_cast<std::size_t>(dim));
  const std::size_t d = static_cast<std::size_t>(dim);
  std::vector<double> pp(static_cast<std::size_t>(PairCount(k)));
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        double delta = coords[static_cast<std::size_t>(i) * d + c] - coords[static_cast<std::size_t>(j) * d + c];
        s += delta * delta;
      }
      pp[static_cast<std::size_t>(PairBit(k, i, j))] = phi(std::sqrt(s));
    }
  }
  return pp;
}

std::vector<double> ClassDistribution(int k, std::span<const double> pp) {
  CheckPairs(k, pp);
  std::vector<double> out(EnumerateClasses(k).size(), 0.0);
  EnumerateEdgeSets(pp, [&](std::uint32_t mask, double w) {
    int idx = ClassIndex(k, mask);
    if (idx >= 0) out[static_cast<std::size_t>(idx)] += w;
  });
  return out;
}

double ClassProbability(int k, std::span<const double> pp, const GraphClass& g) {
  if (g.order() != k) return 0.0;
  if (k == 1) return 1.0;
  CheckPairs(k, pp);
  const int target = static_cast<int>(ClassPosition(g));
  double total = 0.0;
  EnumerateEdgeSets(pp, [&](std::uint32_t mask, double w) {
    if (ClassIndex(k, mask) == target) total += w;
  });
  return total;
}

double ConnectedProbability(int k, std::span<const double> pp) {
  if (k == 1) return 1.0;
  CheckPairs(k, pp);
  double total = 0.0;
  EnumerateEdgeSets(pp, [&](std::uint32_t mask, double w) {
    if (k <= 6 ? LabeledClassTable(k)[mask] >= 0 : IsConnected(k, RowsFromMask(k, mask))) total += w;
  });
  return total;
}

namespace {

// P(G_phi ~ classes[a], G_psi ~ classes[b]) for all a, b.
std::vector<std::vector<double>> JointMatrix(int k, std::span<const double> phi_pp, std::span<const double> psi_pp) {
  if (k > 5) throw ConfigError("joint class probabilities are capped at order 5");
  CheckPairs(k, phi_pp);
  CheckPairs(k, psi_pp);
  const std::size_t n = EnumerateClasses(k).size();
  std::vector<std::vector<double>> out(n, std::vector<double>(n, 0.0));
  const int m = PairCount(k);
  // Bands per pair: mark < psi (edge in both), psi <= mark < phi (phi only), otherwise none.
  auto rec = [&](auto&& self, int e, std::uint32_t phi_mask, std::uint32_t psi_mask, double w) -> void {
    if (w == 0.0) return;
    if (e == m) {
      int a = ClassIndex(k, phi_mask), b = ClassIndex(k, psi_mask);
      if (a >= 0 && b >= 0) out[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] += w;
      return;
    }
    double p = phi_pp[static_cast<std::size_t>(e)], q = psi_pp[static_cast<std::size_t>(e)];
    if (q > p) throw PreconditionError("joint probability requires psi <= phi pairwise");
    const std::uint32_t bit = 1u << e;
    self(self, e + 1, phi_mask | bit, psi_mask | bit, w * q);
    self(self, e + 1, phi_mask | bit, psi_mask, w * (p - q));
    self(self, e + 1, phi_mask, psi_mask, w * (1.0 - p));
  };
  rec(rec, 0, 0u, 0u, 1.0);
  return out;
}

}  // namespace

double JointClassProbability(int k, std::span<const double> phi_pp, std::span<const double> psi_pp,
                             const GraphClass& g, const GraphClass& h) {
  if (g.order() != k || h.order() != k) return 0.0;
  if (k == 1) return 1.0;
  auto joint = JointMatrix(k, phi_pp, psi_pp);
  return joint[ClassPosition(g)][ClassPosition(h)];
}

bool IsLexSorted(int dim, std::span<const double> coords) {
  CheckCloud(dim, coords);
  const std::size_t d = static_cast<std::size_t>(dim);
  for (std::size_t i = d; i < coords.size(); i += d) {
    if (!LexLess(coords.subspan(i - d, d), coords.subspan(i, d))) return false;
  }
  return true;
}

double PPhiG(int dim, std::span<const double> coords, const ConnectionFunction& phi, const GraphClass& g) {
  if (!IsLexSorted(dim, coords)) return 0.0;
  const int k = static_cast<int>(coords.size() / static_cast<std::size_t>(dim));
  if (g.order() != k) throw ConfigError("class order does not match the number of points");
  return ClassProbability(k, PairProbabilities(dim, coords, phi), g);
}

double PPhiK(int dim, std::span<const double> coords, const ConnectionFunction& phi) {
  if (!IsLexSorted(dim, coords)) return 0.0;
  const int k = static_cast<int>(coords.size() / static_cast<std::size_t>(dim));
  return ConnectedProbability(k, PairProbabilities(dim, coords, phi));
}

// ---------------------------------------------------------- q integrand

QklIntegrand::QklIntegrand(int k, int l, ConnectionFunction phi, ConnectionFunction psi, double beta, int dim)
    : k_(k), l_(l), dim_(dim), phi_(std::move(phi)), psi_(std::move(psi)), beta_(beta) {
  if (k < 1 || l < 1) throw ConfigError("cluster orders must be >= 1");
}

double QklIntegrand::operator()(std::span<const double> rest) const {
  std::vector<double> full(static_cast<std::size_t>(dim_), 0.0);
  full.insert(full.end(), rest.begin(), rest.end());
  return Full(full);
}

double QklIntegrand::Full(std::span<const double> coords) const {
  const std::size_t d = static_cast<std::size_t>(dim_);
  const std::size_t k = static_cast<std::size_t>(k_), n = static_cast<std::size_t>(k_ + l_);
  if (coords.size() != n * d) throw ConfigError("q integrand: wrong coordinate count");
  double cross = 1.0;
  for (std::size_t i = 0; i < k && cross != 0.0; ++i) {
    for (std::size_t j = k; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += (coords[i * d + c] - coords[j * d + c]) * (coords[i * d + c] - coords[j * d + c]);
      cross *= phi_.Complement(std::sqrt(s));
    }
  }
  double first = InnerExponent(dim_, coords.first(k * d), phi_, beta_);
  double second = InnerExponent(dim_, coords.subspan(k * d), psi_, beta_);
  double separate = std::exp(first + second);
  if (cross == 0.0) return -separate;
  std::vector<const ConnectionFunction*> fns(n, &psi_);
  std::fill_n(fns.begin(), k, &phi_);
  return cross * std::exp(InnerExponent(dim_, coords, fns, beta_)) - separate;
}

// ------------------------------------------------------------ proposals

namespace {

// Step density on R^d proportional to f~(|v| / scale)^{1/3}.
class StepProposal {
 public:
  StepProposal(const ConnectionFunction& f, int dim, double scale) : kind_(f.kind()), dim_(dim) {
    const double kappa = UnitBallVolume(dim);
    switch (kind_) {
      case ConnectionKind::kGilbert:
      case ConnectionKind::kScaledIndicator:
        length_ = scale * *f.SupportRadius();
        norm_ = 1.0 / (kappa * std::pow(length_, dim));
        break;
      case ConnectionKind::kExponential:
        length_ = 3.0 * scale * f.params()[0];
        norm_ = 1.0 / (dim * kappa * std::tgamma(static_cast<double>(dim)) * std::pow(length_, dim));
        break;
      case ConnectionKind::kGaussian:
        // exp(-|v|^2 / (3 c^2 s^2)) is a normal law with variance 3 c^2 s^2 / 2 per axis.
        length_ = std::sqrt(1.5) * scale * f.params()[0];
        norm_ = std::pow(2.0 * kPi * length_ * length_, -0.5 * dim);
        break;
    }
  }

  void Sample(Engine& rng, double* out) const {
    std::normal_distribution<double> normal;
    if (kind_ == ConnectionKind::kGaussian) {
      for (int c = 0; c < dim_; ++c) out[c] = length_ * normal(rng);
      return;
    }
    double norm = 0.0;
    do {
      norm = 0.0;
      for (int c = 0; c < dim_; ++c) {
        out[c] = normal(rng);
        norm += out[c] * out[c];
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    double t;
    if (kind_ == ConnectionKind::kExponential) {
      t = std::gamma_distribution<double>(static_cast<double>(dim_), length_)(rng);
    } else {
      t = length_ * std::pow(Uniform01(rng), 1.0 / dim_);
    }
    for (int c = 0; c < dim_; ++c) out[c] *= t / norm;
  }

  double Density(const double* v) const {
    double s = 0.0;
    for (int c = 0; c < dim_; ++c) s += v[c] * v[c];
    switch (kind_) {
      case ConnectionKind::kGaussian: return norm_ * std::exp(-s / (2.0 * length_ * length_));
      case ConnectionKind::kExponential: return norm_ * std::exp(-std::sqrt(s) / length_);
      default: return s <= length_ * length_ ? norm_ : 0.0;
    }
  }

 private:
  ConnectionKind kind_;
  int dim_;
  double length_ = 0.0;
  double norm_ = 0.0;
};

// Uniform mixture over the k^{k-2} labeled spanning trees of independent
// tree-edge steps; vertex 0 is the root.
class ClusterProposal {
 public:
  ClusterProposal(int k, int dim, StepProposal step) : k_(k), dim_(dim), step_(step) {}

  // Writes k points starting at `origin`.
  void Sample(Engine& rng, const double* origin, double* out) const {
    const std::size_t d = static_cast<std::size_t>(dim_);
    std::copy_n(origin, d, out);
    if (k_ == 1) return;
    std::vector<int> parent(static_cast<std::size_t>(k_), -1);
    if (k_ == 2) {
      parent[1] = 0;
    } else {
      // Random Pruefer sequence, decoded into a tree.
      std::uniform_int_distribution<int> pick(0, k_ - 1);
      std::vector<int> seq(static_cast<std::size_t>(k_ - 2));
      for (int& s : seq) s = pick(rng);
      std::vector<int> degree(static_cast<std::size_t>(k_), 1);
      for (int s : seq) ++degree[static_cast<std::size_t>(s)];
      std::vector<std::pair<int, int>> edges;
      for (int s : seq) {
        int leaf = 0;
        while (degree[static_cast<std::size_t>(leaf)] != 1) ++leaf;
        edges.emplace_back(leaf, s);
        --degree[static_cast<std::size_t>(leaf)];
        --degree[static_cast<std::size_t>(s)];
      }
      int u = -1, v = -1;
      for (int i = 0; i < k_; ++i) {
        if (degree[static_cast<std::size_t>(i)] == 1) (u < 0 ? u : v) = i;
      }
      edges.emplace_back(u, v);
      // Orient away from vertex 0.
      std::vector<std::vector<int>> adj(static_cast<std::size_t>(k_));
      for (auto [a, b] : edges) {
        adj[static_cast<std::size_t>(a)].push_back(b);
        adj[static_cast<std::size_t>(b)].push_back(a);
      }
      std::vector<int> stack{0};
      parent[0] = 0;
      while (!stack.empty()) {
        int a = stack.back();
        stack.pop_back();
        for (int b : adj[static_cast<std::size_t>(a)]) {
          if (parent[static_cast<std::size_t>(b)] < 0) {
            parent[static_cast<std::size_t>(b)] = a;
            stack.push_back(b);
          }
        }
      }
      parent[0] = -1;
    }
    // Place vertices in BFS order so parents come first.
    std::vector<int> order{0};
    for (std::size_t h = 0; h < order.size(); ++h) {
      for (int b = 1; b < k_; ++b) {
        if (parent[static_cast<std::size_t>(b)] == order[h]) order.push_back(b);
      }
    }
    std::vector<double> step(d);
    for (std::size_t h = 1; h < order.size(); ++h) {
      std::size_t b = static_cast<std::size_t>(order[h]);
      std::size_t a = static_cast<std::size_t>(parent[b]);
      step_.Sample(rng, step.data());
      for (std::size_t c = 0; c < d; ++c) out[b * d + c] = out[a * d + c] + step[c];
    }
  }

  // Density of points 1..k-1 given point 0: by the matrix-tree theorem the
  // sum over trees of the edge-weight products is a reduced Laplacian minor.
  double Density(const double* pts) const {
    if (k_ == 1) return 1.0;
    const std::size_t d = static_cast<std::size_t>(dim_);
    std::vector<double> diff(d);
    auto weight = [&](int a, int b) {
      for (std::size_t c = 0; c < d; ++c) diff[c] = pts[static_cast<std::size_t>(a) * d + c] - pts[static_cast<std::size_t>(b) * d + c];
      return step_.Density(diff.data());
    };
    if (k_ == 2) return weight(0, 1);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxOrder, kMaxOrder> lap(k_, k_);
    lap.setZero();
    for (int a = 0; a < k_; ++a) {
      for (int b = a + 1; b < k_; ++b) {
        double w = weight(a, b);
        lap(a, b) -= w;
        lap(b, a) -= w;
        lap(a, a) += w;
        lap(b, b) += w;
      }
    }
    double trees = lap.bottomRightCorner(k_ - 1, k_ - 1).determinant();
    return std::max(trees, 0.0) / std::pow(static_cast<double>(k_), k_ - 2);
  }

 private:
  int k_, dim_;
  StepProposal step_;
};

// Splits `samples` into fixed shards with their own streams, so the result
// does not depend on the worker count.
template <class Draw>
RunningStats ShardedMean(std::uint64_t samples, std::uint64_t seed, int threads, Draw&& draw) {
  if (samples == 0) throw ConfigError("Monte Carlo budget must be positive");
  const std::uint64_t shards = std::min<std::uint64_t>(samples, 64);
  std::vector<RunningStats> parts(shards);
  ParallelFor(shards, threads, [&](std::size_t s) {
    Engine rng = MakeEngine(DeriveSeed(seed, s));
    std::uint64_t count = samples / shards + (s < samples % shards ? 1 : 0);
    for (std::uint64_t i = 0; i < count; ++i) parts[s].Add(draw(rng));
  });
  RunningStats total;
  for (const auto& p : parts) total.Merge(p);
  return total;
}

MomentEstimate FromStats(const RunningStats& stats, double factor, double radius) {
  MomentEstimate out;
  out.value = factor * stats.mean();
  out.std_error = std::abs(factor) * stats.std_error();
  out.n_samples = stats.count();
  out.truncation_radius = radius;
  out.method = Method::kMonteCarlo;
  return out;
}

void CheckSpec(const ClusterSpec& s) {
  if (s.order < 1 || s.order > kMaxOrder) throw ConfigError("cluster order must lie in [1, 8]");
  if (s.cls && s.cls->order() != s.order) throw ConfigError("cluster class order mismatch");
}

double SpecProbability(const ClusterSpec& s, std::span<const double> pp) {
  return s.cls ? ClassProbability(s.order, pp, *s.cls) : ConnectedProbability(s.order, pp);
}

double SpecJointProbability(const ClusterSpec& g, const ClusterSpec& h, std::span<const double> phi_pp,
                            std::span<const double> psi_pp) {
  const int k = g.order;
  if (k == 1) return 1.0;
  // psi-edges are phi-edges, so a connected psi-graph forces a connected phi-graph.
  if (!g.cls && !h.cls) return ConnectedProbability(k, psi_pp);
  auto joint = JointMatrix(k, phi_pp, psi_pp);
  double total = 0.0;
  for (std::size_t a = 0; a < joint.size(); ++a) {
    if (g.cls && a != ClassPosition(*g.cls)) continue;
    for (std::size_t b = 0; b < joint.size(); ++b) {
      if (h.cls && b != ClassPosition(*h.cls)) continue;
      total += joint[a][b];
    }
  }
  return total;
}

double Radius(const ConnectionFunction& phi, int points, double eps) {
  return points * phi.Range(eps);
}

// Shared estimator for the covariance integrals. With `window` set, the
// cluster-pair integrand is weighted by lambda_d(W cap (W - v)), v the offset
// between the lexicographic minima, and the diagonal by lambda_d(W).
CovarianceParts CovarianceIntegrals(const ClusterSpec& g, const ClusterSpec& h, const ConnectionFunction& phi,
                                    const ConnectionFunction& psi, double beta, int dim, const McOptions& options,
                                    const Window* window) {
  CheckSpec(g);
  CheckSpec(h);
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be finite and > 0");
  if (dim < 1) throw ConfigError("dimension must be >= 1");
  if (!phi.Dominates(psi)) throw PreconditionError("covariance requires psi <= phi");
  const int k = g.order, l = h.order;
  const std::size_t d = static_cast<std::size_t>(dim);
  const std::size_t n = static_cast<std::size_t>(k + l);

  ClusterProposal first(k, dim, StepProposal(phi, dim, 1.0));
  ClusterProposal second(l, dim, StepProposal(psi, dim, 1.0));
  StepProposal offset(phi, dim, static_cast<double>(k + l));
  QklIntegrand q(k, l, phi, psi, beta, dim);

  auto pair_draw = [&](Engine& rng) {
    std::vector<double> x(n * d, 0.0), origin(d, 0.0);
    first.Sample(rng, origin.data(), x.data());
    offset.Sample(rng, origin.data());
    second.Sample(rng, origin.data(), x.data() + static_cast<std::size_t>(k) * d);
    std::span<const double> xs(x);
    double pg = SpecProbability(g, PairProbabilities(dim, xs.first(static_cast<std::size_t>(k) * d), phi));
    if (pg == 0.0) return 0.0;
    double ph = SpecProbability(h, PairProbabilities(dim, xs.subspan(static_cast<std::size_t>(k) * d), psi));
    if (ph == 0.0) return 0.0;
    double density = first.Density(x.data()) * second.Density(x.data() + static_cast<std::size_t>(k) * d) *
                     offset.Density(origin.data());
    double weight = 1.0;
    if (window != nullptr) {
      auto lexmin = [&](std::size_t from, std::size_t count) {
        std::size_t best = from;
        for (std::size_t i = from + 1; i < from + count; ++i) {
          if (LexLess(xs.subspan(i * d, d), xs.subspan(best * d, d))) best = i;
        }
        return best;
      };
      std::size_t a = lexmin(0, static_cast<std::size_t>(k)), b = lexmin(static_cast<std::size_t>(k), static_cast<std::size_t>(l));
      std::vector<double> v(d);
      for (std::size_t c = 0; c < d; ++c) v[c] = x[b * d + c] - x[a * d + c];
      weight = SetCovariance(*window, v);
      if (weight == 0.0) return 0.0;
    }
    return pg * ph * q.Full(xs) * weight / density;
  };

  CovarianceParts parts;
  const double radius = Radius(phi, k + l, options.eps_trunc);
  parts.cluster_pair = FromStats(ShardedMean(options.samples, DeriveSeed(options.seed, 1), options.threads, pair_draw),
                                 std::pow(beta, k + l) / (Factorial(k) * Factorial(l)), radius);

  const double volume = window != nullptr ? window->Volume() : 1.0;
  if (k != l) {
    parts.diagonal = MomentEstimate::Exact(0.0);
  } else if (k == 1) {
    parts.diagonal = MomentEstimate::Exact(volume * beta * std::exp(-beta * MPhi(phi, dim)));
  } else {
    auto diag_draw = [&](Engine& rng) {
      std::vector<double> x(static_cast<std::size_t>(k) * d, 0.0), origin(d, 0.0);
      first.Sample(rng, origin.data(), x.data());
      double p = SpecJointProbability(g, h, PairProbabilities(dim, x, phi), PairProbabilities(dim, x, psi));
      if (p == 0.0) return 0.0;
      return p * std::exp(InnerExponent(dim, x, phi, beta)) / first.Density(x.data());
    };
    parts.diagonal = FromStats(ShardedMean(options.samples, DeriveSeed(options.seed, 2), options.threads, diag_draw),
                               volume * std::pow(beta, k) / Factorial(k), Radius(phi, k, options.eps_trunc));
  }
  parts.total = parts.cluster_pair + parts.diagonal;
  return parts;
}

}  // namespace

MomentEstimate ExpectedCountIntensity(const ClusterSpec& g, const ConnectionFunction& phi, double beta, int dim,
                                      const McOptions& options) {
  CheckSpec(g);
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be finite and > 0");
  const int k = g.order;
  if (k == 1) return MomentEstimate::Exact(beta * std::exp(-beta * MPhi(phi, dim)));
  const std::size_t d = static_cast<std::size_t>(dim);
  ClusterProposal proposal(k, dim, StepProposal(phi, dim, 1.0));
  auto draw = [&](Engine& rng) {
    std::vector<double> x(static_cast<std::size_t>(k) * d, 0.0), origin(d, 0.0);
    proposal.Sample(rng, origin.data(), x.data());
    double p = SpecProbability(g, PairProbabilities(dim, x, phi));
    if (p == 0.0) return 0.0;
    return p * std::exp(InnerExponent(dim, x, phi, beta)) / proposal.Density(x.data());
  };
  return FromStats(ShardedMean(options.samples, options.seed, options.threads, draw), std::pow(beta, k) / Factorial(k),
                   Radius(phi, k, options.eps_trunc));
}

MomentEstimate ExpectedCountIntensity(const GraphClass& g, const ConnectionFunction& phi, double beta, int dim,
                                      const McOptions& options) {
  return ExpectedCountIntensity(ClusterSpec::Of(g), phi, beta, dim, options);
}

CovarianceParts AsyCovParts(const ClusterSpec& g, const ClusterSpec& h, const ConnectionFunction& phi,
                            const ConnectionFunction& psi, double beta, int dim, const McOptions& options) {
  return CovarianceIntegrals(g, h, phi, psi, beta, dim, options, nullptr);
}

MomentEstimate AsyCov(const GraphClass& g, const GraphClass& h, const ConnectionFunction& phi,
                      const ConnectionFunction& psi, double beta, int dim, const McOptions& options) {
  return AsyCovParts(ClusterSpec::Of(g), ClusterSpec::Of(h), phi, psi, beta, dim, options).total;
}

MomentEstimate AsyCovKL(int k, int l, const ConnectionFunction& phi, const ConnectionFunction& psi, double beta,
                        int dim, const McOptions& options) {
  return AsyCovParts(ClusterSpec::Connected(k), ClusterSpec::Connected(l), phi, psi, beta, dim, options).total;
}

double SetCovariance(const Window& w, std::span<const double> v) {
  if (static_cast<int>(v.size()) != w.dim()) throw ConfigError("offset dimension does not match window");
  const double e = w.extent();
  if (w.shape() == WindowShape::kBox) {
    double vol = 1.0;
    for (double c : v) vol *= std::max(0.0, 2.0 * e - std::abs(c));
    return vol;
  }
  double t = 0.0;
  for (double c : v) t += c * c;
  t = std::sqrt(t);
  if (t >= 2.0 * e) return 0.0;
  const int dim = w.dim();
  // Two caps of height e - t/2.
  double x = 1.0 - t * t / (4.0 * e * e);
  return UnitBallVolume(dim) * std::pow(e, dim) * boost::math::ibeta(0.5 * (dim + 1), 0.5, x);
}

MomentEstimate FiniteWindowCrossMoment(const ClusterSpec& g, const ClusterSpec& h, const ConnectionFunction& phi,
                                       const ConnectionFunction& psi, const Window& w, double beta,
                                       const McOptions& options) {
  const int dim = w.dim();
  McOptions sub = options;
  sub.seed = DeriveSeed(options.seed, 10);
  MomentEstimate rg = ExpectedCountIntensity(g, phi, beta, dim, sub);
  sub.seed = DeriveSeed(options.seed, 11);
  MomentEstimate rh = ExpectedCountIntensity(h, psi, beta, dim, sub);
  const double vol = w.Volume();
  MomentEstimate product;
  product.value = vol * vol * rg.value * rh.value;
  product.std_error = vol * vol * std::hypot(rg.value * rh.std_error, rh.value * rg.std_error);
  product.n_samples = rg.n_samples + rh.n_samples;
  product.truncation_radius = std::max(rg.truncation_radius, rh.truncation_radius);
  product.method = std::max(rg.method, rh.method);
  sub.seed = DeriveSeed(options.seed, 12);
  return product + CovarianceIntegrals(g, h, phi, psi, beta, dim, sub, &w).total;
}

MomentEstimate FiniteWindowCovariance(const ClusterSpec& g, const ClusterSpec& h, const ConnectionFunction& phi,
                                      const ConnectionFunction& psi, const Window& w, double beta,
                                      const McOptions& options) {
  McOptions sub = options;
  sub.seed = DeriveSeed(options.seed, 12);
  return CovarianceIntegrals(g, h, phi, psi, beta, w.dim(), sub, &w).total;
}

CovarianceMatrix AsyCovMatrix(std::span<const ClusterSpec> specs, const ConnectionFunction& phi, double beta, int dim,
                              const McOptions& options) {
  const std::size_t m = specs.size();
  CovarianceMatrix out;
  out.value.assign(m, std::vector<double>(m, 0.0));
  out.std_error.assign(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      McOptions sub = options;
      sub.seed = DeriveSeed(options.seed, 1000 * i + j);
      auto est = AsyCovParts(specs[i], specs[j], phi, phi, beta, dim, sub).total;
      out.value[i][j] = out.value[j][i] = est.value;
      out.std_error[i][j] = out.std_error[j][i] = est.std_error;
    }
  }
  return out;
}

MomentEstimate AsyVarQuadratic(std::span<const double> a, std::span<const GraphClass> classes,
                               const ConnectionFunction& phi, double beta, int dim, const McOptions& options) {
  ValidateWeights(a, classes);
  std::vector<ClusterSpec> specs;
  for (const auto& g : classes) specs.push_back(ClusterSpec::Of(g));
  CovarianceMatrix m = AsyCovMatrix(specs, phi, beta, dim, options);
  MomentEstimate out;
  double var = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i; j < a.size(); ++j) {
      double c = (i == j ? 1.0 : 2.0) * a[i] * a[j];
      out.value += c * m.value[i][j];
      var += c * c * m.std_error[i][j] * m.std_error[i][j];
    }
  }
  out.std_error = std::sqrt(var);
  out.n_samples = options.samples * a.size() * (a.size() + 1);
  out.truncation_radius = Radius(phi, 2 * kMaxOrder, options.eps_trunc);
  out.method = Method::kMonteCarlo;
  return out;
}

MomentEstimate MinEigenvalue(const CovarianceMatrix& m) {
  const std::size_t n = m.value.size();
  if (n == 0) throw ConfigError("empty covariance matrix");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m.value[i][j];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  Eigen::VectorXd v = solver.eigenvectors().col(0);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double c = (i == j ? 1.0 : 2.0) * v(static_cast<Eigen::Index>(i)) * v(static_cast<Eigen::Index>(j));
      var += c * c * m.std_error[i][j] * m.std_error[i][j];
    }
  }
  MomentEstimate out;
  out.value = solver.eigenvalues()(0);
  out.std_error = std::sqrt(var);
  out.method = Method::kMonteCarlo;
  return out;
}

std::vector<MomentEstimate> SigmaTotalPartial(int m_max, const ConnectionFunction& phi, double beta, int dim,
                                              const McOptions& options) {
  if (m_max < 1 || m_max > 6) throw ConfigError("partial sums are available for m in [1, 6]");
  std::vector<std::vector<MomentEstimate>> sigma(static_cast<std::size_t>(m_max + 1),
                                                 std::vector<MomentEstimate>(static_cast<std::size_t>(m_max + 1)));
  for (int i = 1; i <= m_max; ++i) {
    for (int j = i; j <= m_max; ++j) {
      McOptions sub = options;
      sub.seed = DeriveSeed(options.seed, static_cast<std::uint64_t>(100 * i + j));
      sigma[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = AsyCovKL(i, j, phi, phi, beta, dim, sub);
    }
  }
  std::vector<MomentEstimate> partial;
  MomentEstimate running = MomentEstimate::Exact(0.0);
  for (int m = 1; m <= m_max; ++m) {
    running = running + sigma[static_cast<std::size_t>(m)][static_cast<std::size_t>(m)];
    for (int i = 1; i < m; ++i) running = running + 2.0 * sigma[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)];
    partial.push_back(running);
  }
  return partial;
}

}  // namespace rcm
