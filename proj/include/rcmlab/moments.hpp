#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rcmlab/census.hpp"
#include "rcmlab/core.hpp"
#include "rcmlab/stats.hpp"

namespace rcm {

// Point clouds are flat coordinate arrays: k points of dimension dim.

// phi(x_i - x_j) for every pair, indexed by PairBit(k, i, j).
std::vector<double> PairProbabilities(int dim, std::span<const double> coords, const ConnectionFunction& phi);

// Pair probabilities equal to 0 or 1 are not branched on, so only the
// uncertain pairs count against this cap.
inline constexpr int kMaxUncertainPairs = 15;

// Law of the isomorphism class of the random graph with the given pair
// probabilities, indexed like EnumerateClasses(k). The mass missing from the
// sum is the probability of being disconnected.
std::vector<double> ClassDistribution(int k, std::span<const double> pair_probs);
double ClassProbability(int k, std::span<const double> pair_probs, const GraphClass& g);
double ConnectedProbability(int k, std::span<const double> pair_probs);

// P(G_phi ~ G, G_psi ~ H) when both graphs threshold the same marks
// (psi <= phi). Each pair falls into one of three bands; capped at k <= 5.
double JointClassProbability(int k, std::span<const double> phi_probs, std::span<const double> psi_probs,
                             const GraphClass& g, const GraphClass& h);

bool IsLexSorted(int dim, std::span<const double> coords);

// 1{x_1 < ... < x_k} P(G_phi({x}) ~ G).
double PPhiG(int dim, std::span<const double> coords, const ConnectionFunction& phi, const GraphClass& g);
// 1{x_1 < ... < x_k} P(G_phi({x}) connected).
double PPhiK(int dim, std::span<const double> coords, const ConnectionFunction& phi);

struct QuadratureOptions {
  // Directions on the circle (d = 2) or azimuths per polar node (d = 3).
  int directions = 128;
  // Largest admissible integration radius.
  double hard_cap = 1e6;
};

// beta * int (prod_i (1 - f_i(y - x_i)) - 1) dy, where site i carries its own
// connection function. Exact for one site, for all-gaussian sites, and for
// indicator sites in d = 1, 2; polar quadrature otherwise (d <= 3).
double InnerExponent(int dim, std::span<const double> coords, std::span<const ConnectionFunction* const> fns,
                     double beta, const QuadratureOptions& options = {});
double InnerExponent(int dim, std::span<const double> coords, const ConnectionFunction& phi, double beta,
                     const QuadratureOptions& options = {});
// Always uses the polar quadrature, even where an exact path exists.
double InnerExponentQuadrature(int dim, std::span<const double> coords, std::span<const ConnectionFunction* const> fns,
                               double beta, const QuadratureOptions& options = {});

// q_{k,l,phi,psi}(x_2, ..., x_{k+l}) with x_1 = 0: the first k points form the
// phi-cluster, the last l the psi-cluster.
class QklIntegrand {
 public:
  QklIntegrand(int k, int l, ConnectionFunction phi, ConnectionFunction psi, double beta, int dim);

  // `rest` holds x_2, ..., x_{k+l}.
  double operator()(std::span<const double> rest) const;
  // Same with all k + l points given explicitly.
  double Full(std::span<const double> coords) const;

 private:
  int k_, l_, dim_;
  ConnectionFunction phi_, psi_;
  double beta_;
};

struct McOptions {
  std::uint64_t samples = 1'000'000;
  std::uint64_t seed = 0x5eedULL;
  double eps_trunc = kDefaultTruncation;
  int threads = 1;
};

// Component selector: a fixed class, or "any connected graph of order k".
struct ClusterSpec {
  int order = 1;
  std::optional<GraphClass> cls;

  static ClusterSpec Of(const GraphClass& g) { return {g.order(), g}; }
  static ClusterSpec Connected(int k) { return {k, std::nullopt}; }
};

// rho_G with E eta_G(W) = rho_G lambda_d(W).
MomentEstimate ExpectedCountIntensity(const ClusterSpec& g, const ConnectionFunction& phi, double beta, int dim,
                                      const McOptions& options = {});
MomentEstimate ExpectedCountIntensity(const GraphClass& g, const ConnectionFunction& phi, double beta, int dim,
                                      const McOptions& options = {});

struct CovarianceParts {
  MomentEstimate cluster_pair;  // integral against q
  MomentEstimate diagonal;      // k = l term, 0 otherwise
  MomentEstimate total;
};

// sigma_{phi,psi}(G, H); requires psi <= phi.
CovarianceParts AsyCovParts(const ClusterSpec& g, const ClusterSpec& h, const ConnectionFunction& phi,
                            const ConnectionFunction& psi, double beta, int dim, const McOptions& options = {});
MomentEstimate AsyCov(const GraphClass& g, const GraphClass& h, const ConnectionFunction& phi,
                      const ConnectionFunction& psi, double beta, int dim, const McOptions& options = {});
// sigma^{(k,l)}_{phi,psi}.
MomentEstimate AsyCovKL(int k, int l, const ConnectionFunction& phi, const ConnectionFunction& psi, double beta,
                        int dim, const McOptions& options = {});

// lambda_d(W cap (W - v)).
double SetCovariance(const Window& w, std::span<const double> v);

// Cov(eta_{phi,G}(W), eta_{psi,H}(W)) for a finite window.
MomentEstimate FiniteWindowCovariance(const ClusterSpec& g, const ClusterSpec& h, const ConnectionFunction& phi,
                                      const ConnectionFunction& psi, const Window& w, double beta,
                                      const McOptions& options = {});

// E eta_{phi,G}(W) eta_{psi,H}(W) for a finite window.
MomentEstimate FiniteWindowCrossMoment(const ClusterSpec& g, const ClusterSpec& h, const ConnectionFunction& phi,
                                       const ConnectionFunction& psi, const Window& w, double beta,
                                       const McOptions& options = {});

// sum a_i a_j sigma_{phi,phi}(G_i, G_j).
MomentEstimate AsyVarQuadratic(std::span<const double> a, std::span<const GraphClass> classes,
                               const ConnectionFunction& phi, double beta, int dim, const McOptions& options = {});

struct CovarianceMatrix {
  std::vector<std::vector<double>> value;
  std::vector<std::vector<double>> std_error;
};

// sigma_{phi,phi}(G_i, G_j) for all pairs; each unordered pair is estimated once.
CovarianceMatrix AsyCovMatrix(std::span<const ClusterSpec> specs, const ConnectionFunction& phi, double beta, int dim,
                              const McOptions& options = {});

// Smallest eigenvalue and a first-order error, var = sum_{i<=j} (c_ij v_i v_j)^2 se_ij^2.
MomentEstimate MinEigenvalue(const CovarianceMatrix& m);

// Partial sums S_m = sum_{i,j <= m} sigma^{(i,j)} for m = 1..m_max.
std::vector<MomentEstimate> SigmaTotalPartial(int m_max, const ConnectionFunction& phi, double beta, int dim,
                                              const McOptions& options = {});

}  // namespace rcm
