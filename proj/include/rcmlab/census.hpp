#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rcmlab/core.hpp"

namespace rcm {

inline constexpr int kMaxOrder = 8;

// Row bitmasks: bit j of rows[i] set iff {i, j} is an edge.
using AdjRows = std::array<std::uint8_t, kMaxOrder>;

// Position of the pair i < j in the row-major upper triangle of a k-vertex graph.
constexpr int PairBit(int k, int i, int j) {
  return i * k - i * (i + 1) / 2 + (j - i - 1);
}
constexpr int PairCount(int k) {
  return k * (k - 1) / 2;
}

// Isomorphism class of a connected graph on k <= 8 vertices, stored as the
// smallest upper-triangle bitset over all vertex relabelings.
class GraphClass {
 public:
  GraphClass() = default;

  int order() const { return order_; }
  std::uint32_t canon() const { return canon_; }
  int EdgeCount() const;
  bool HasEdge(int i, int j) const;
  AdjRows Rows() const;

  // "k<order>:<8 hex digits>".
  std::string Id() const;
  // Accepts Id() output and the names vertex, edge, path3, triangle,
  // path<k>, star<k>, complete<k>.
  static GraphClass Parse(const std::string& text);

  static GraphClass Vertex();
  static GraphClass Edge();
  static GraphClass Path(int k);
  static GraphClass Star(int k);
  static GraphClass Complete(int k);

  friend auto operator<=>(const GraphClass&, const GraphClass&) = default;

 private:
  friend GraphClass CanonicalForm(int k, const AdjRows& rows);
  friend GraphClass CanonicalFromMask(int k, std::uint32_t mask);
  GraphClass(int order, std::uint32_t canon) : order_(order), canon_(canon) {}

  int order_ = 0;
  std::uint32_t canon_ = 0;
};

// Throws ConfigError for k outside [1, kMaxOrder] or a disconnected graph.
GraphClass CanonicalForm(int k, const AdjRows& rows);
// Same, with the edge set given as a PairBit mask.
GraphClass CanonicalFromMask(int k, std::uint32_t mask);

bool IsConnected(int k, const AdjRows& rows);
AdjRows RowsFromMask(int k, std::uint32_t mask);
std::uint32_t MaskFromRows(int k, const AdjRows& rows);

// Connected classes on k vertices sorted by canon.
const std::vector<GraphClass>& EnumerateClasses(int k);

// For k <= 6: class index (into EnumerateClasses(k)) of every labeled edge
// mask, -1 for disconnected masks.
const std::vector<int>& LabeledClassTable(int k);

// Blocks sorted by smallest vertex; vertices ascending inside each block.
std::vector<std::vector<int>> Components(const RcmGraph& graph);

enum class CountMode { kLexmin, kInside };

struct CensusReport {
  int k_max = 0;
  std::map<GraphClass, std::uint64_t> lexmin_by_class;
  std::map<GraphClass, std::uint64_t> inside_by_class;
  // Indexed by order; every order seen is recorded, not only k <= k_max.
  std::vector<std::uint64_t> lexmin_by_order;
  std::vector<std::uint64_t> inside_by_order;
  std::uint64_t total_inside = 0;
  std::uint64_t boundary_touching = 0;
  // Components of order > k_max that count in W under either mode.
  std::uint64_t oversize = 0;
  std::uint64_t points_in_window = 0;
  bool truncated = false;

  std::uint64_t Count(const GraphClass& g, CountMode mode) const;
  std::uint64_t OrderCount(int k, CountMode mode) const;
  // Inside components of order <= m.
  std::uint64_t InsideUpTo(int m) const;
};

struct CensusOptions {
  // Reject graphs whose padding is below DefaultPadding(phi, k_max).
  bool strict = false;
  double eps_trunc = kDefaultTruncation;
};

// Components whose vertices come within reach of the sampling region's
// boundary are excluded from every count and tallied in boundary_touching.
CensusReport Census(const RcmGraph& graph, const Window& window, int k_max, const CensusOptions& options = {});

double WeightedCount(const CensusReport& report, std::span<const double> a, std::span<const GraphClass> classes,
                     CountMode mode = CountMode::kLexmin);

void ValidateWeights(std::span<const double> a, std::span<const GraphClass> classes);

}  // namespace rcm
