#include "rcmlab/census.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <set>

#include "rcmlab/errors.hpp"

namespace rcm {

namespace {

void CheckOrder(int k) {
  if (k < 1 || k > kMaxOrder) throw ConfigError("graph order must lie in [1, " + std::to_string(kMaxOrder) + "]");
}

// Assigns relabeled positions from k-1 downwards. The pairs among positions
// >= m occupy the top bits of the bitset, so a partial assignment fixes a
// prefix of the value and can be pruned against the best so far.
class CanonSearch {
 public:
  CanonSearch(int k, const AdjRows& rows) : k_(k), rows_(rows) {}

  std::uint32_t Run() {
    Dfs(k_ - 1, 0, 0);
    return best_;
  }

 private:
  void Dfs(int pos, std::uint32_t used, std::uint32_t cur) {
    if (pos < 0) {
      best_ = std::min(best_, cur);
      return;
    }
    const int low = pos == k_ - 1 ? 0 : PairBit(k_, pos, pos + 1);
    for (int v = 0; v < k_; ++v) {
      if (used & (1u << v)) continue;
      std::uint32_t next = cur;
      for (int q = pos + 1; q < k_; ++q) {
        if (rows_[static_cast<std::size_t>(v)] & (1u << perm_[static_cast<std::size_t>(q)])) {
          next |= 1u << PairBit(k_, pos, q);
        }
      }
      if (pos < k_ - 1 && (next >> low) > (best_ >> low)) continue;
      perm_[static_cast<std::size_t>(pos)] = v;
      Dfs(pos - 1, used | (1u << v), next);
    }
  }

  int k_;
  const AdjRows& rows_;
  std::array<int, kMaxOrder> perm_{};
  std::uint32_t best_ = std::numeric_limits<std::uint32_t>::max();
};

struct ClassTables {
  std::once_flag once;
  std::vector<GraphClass> classes;
  std::vector<int> labeled;  // k <= 6 only
};

std::array<ClassTables, kMaxOrder + 1>& Tables() {
  static std::array<ClassTables, kMaxOrder + 1> tables;
  return tables;
}

constexpr int kTableOrder = 6;

}  // namespace

bool IsConnected(int k, const AdjRows& rows) {
  std::uint32_t seen = 1, frontier = 1;
  while (frontier) {
    std::uint32_t next = 0;
    for (int v = 0; v < k; ++v) {
      if (frontier & (1u << v)) next |= rows[static_cast<std::size_t>(v)];
    }
    next &= ~seen;
    seen |= next;
    frontier = next;
  }
  return seen == (k == 32 ? ~0u : (1u << k) - 1u);
}

AdjRows RowsFromMask(int k, std::uint32_t mask) {
  AdjRows rows{};
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      if (mask & (1u << PairBit(k, i, j))) {
        rows[static_cast<std::size_t>(i)] |= static_cast<std::uint8_t>(1u << j);
        rows[static_cast<std::size_t>(j)] |= static_cast<std::uint8_t>(1u << i);
      }
    }
  }
  return rows;
}

std::uint32_t MaskFromRows(int k, const AdjRows& rows) {
  std::uint32_t mask = 0;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      if (rows[static_cast<std::size_t>(i)] & (1u << j)) mask |= 1u << PairBit(k, i, j);
    }
  }
  return mask;
}

GraphClass CanonicalForm(int k, const AdjRows& rows) {
  CheckOrder(k);
  for (int i = 0; i < k; ++i) {
    auto r = rows[static_cast<std::size_t>(i)];
    if (r & (1u << i)) throw ConfigError("self-loop in adjacency");
    if (r >> k) throw ConfigError("adjacency refers to a vertex >= k");
    for (int j = 0; j < k; ++j) {
      if (((r >> j) & 1u) != ((rows[static_cast<std::size_t>(j)] >> i) & 1u)) {
        throw ConfigError("adjacency is not symmetric");
      }
    }
  }
  if (!IsConnected(k, rows)) throw ConfigError("canonical form requires a connected graph");
  if (k == 1) return GraphClass(1, 0);
  return GraphClass(k, CanonSearch(k, rows).Run());
}

GraphClass CanonicalFromMask(int k, std::uint32_t mask) {
  CheckOrder(k);
  if (k <= kTableOrder) {
    const auto& table = LabeledClassTable(k);
    if (mask >= table.size()) throw ConfigError("edge mask out of range");
    int idx = table[mask];
    if (idx < 0) throw ConfigError("canonical form requires a connected graph");
    return EnumerateClasses(k)[static_cast<std::size_t>(idx)];
  }
  return CanonicalForm(k, RowsFromMask(k, mask));
}

namespace {

void BuildTables(int k, ClassTables& t) {
  if (k <= kTableOrder) {
    const std::uint32_t n = 1u << PairCount(k);
    std::vector<std::uint32_t> canon(n, std::numeric_limits<std::uint32_t>::max());
    std::set<std::uint32_t> distinct;
    for (std::uint32_t mask = 0; mask < n; ++mask) {
      AdjRows rows = RowsFromMask(k, mask);
      if (!IsConnected(k, rows)) continue;
      canon[mask] = k == 1 ? 0 : CanonSearch(k, rows).Run();
      distinct.insert(canon[mask]);
    }
    std::vector<std::uint32_t> sorted(distinct.begin(), distinct.end());
    for (auto c : sorted) t.classes.push_back(CanonicalForm(k, RowsFromMask(k, c)));
    t.labeled.assign(n, -1);
    for (std::uint32_t mask = 0; mask < n; ++mask) {
      if (canon[mask] == std::numeric_limits<std::uint32_t>::max()) continue;
      t.labeled[mask] = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), canon[mask]) - sorted.begin());
    }
    return;
  }
  // Every connected graph has a vertex whose removal keeps it connected,
  // so extending each (k-1)-class by one vertex reaches every k-class.
  std::set<GraphClass> found;
  for (const GraphClass& g : EnumerateClasses(k - 1)) {
    AdjRows base = g.Rows();
    for (std::uint32_t nb = 1; nb < (1u << (k - 1)); ++nb) {
      AdjRows rows = base;
      rows[static_cast<std::size_t>(k - 1)] = static_cast<std::uint8_t>(nb);
      for (int i = 0; i < k - 1; ++i) {
        if (nb & (1u << i)) rows[static_cast<std::size_t>(i)] |= static_cast<std::uint8_t>(1u << (k - 1));
      }
      found.insert(CanonicalForm(k, rows));
    }
  }
  t.classes.assign(found.begin(), found.end());
}

}  // namespace

const std::vector<GraphClass>& EnumerateClasses(int k) {
  CheckOrder(k);
  auto& t = Tables()[static_cast<std::size_t>(k)];
  std::call_once(t.once, [&] { BuildTables(k, t); });
  return t.classes;
}

const std::vector<int>& LabeledClassTable(int k) {
  if (k < 1 || k > kTableOrder) throw ConfigError("labeled class table is available for orders 1..6");
  auto& t = Tables()[static_cast<std::size_t>(k)];
  std::call_once(t.once, [&] { BuildTables(k, t); });
  return t.labeled;
}

// ---------------------------------------------------------- GraphClass

int GraphClass::EdgeCount() const {
  return std::popcount(canon_);
}

bool GraphClass::HasEdge(int i, int j) const {
  if (i == j) return false;
  if (i > j) std::swap(i, j);
  return (canon_ >> PairBit(order_, i, j)) & 1u;
}

AdjRows GraphClass::Rows() const {
  return RowsFromMask(order_, canon_);
}

std::string GraphClass::Id() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "k%d:%08x", order_, canon_);
  return buf;
}

GraphClass GraphClass::Vertex() {
  return GraphClass(1, 0);
}
GraphClass GraphClass::Edge() {
  return GraphClass(2, 1);
}

GraphClass GraphClass::Path(int k) {
  CheckOrder(k);
  AdjRows rows{};
  for (int i = 0; i + 1 < k; ++i) {
    rows[static_cast<std::size_t>(i)] |= static_cast<std::uint8_t>(1u << (i + 1));
    rows[static_cast<std::size_t>(i + 1)] |= static_cast<std::uint8_t>(1u << i);
  }
  return CanonicalForm(k, rows);
}

GraphClass GraphClass::Star(int k) {
  CheckOrder(k);
  AdjRows rows{};
  for (int i = 1; i < k; ++i) {
    rows[0] |= static_cast<std::uint8_t>(1u << i);
    rows[static_cast<std::size_t>(i)] |= 1u;
  }
  return CanonicalForm(k, rows);
}

GraphClass GraphClass::Complete(int k) {
  CheckOrder(k);
  return CanonicalFromMask(k, (1u << PairCount(k)) - 1u);
}

GraphClass GraphClass::Parse(const std::string& text) {
  if (text == "vertex") return Vertex();
  if (text == "edge") return Edge();
  if (text == "triangle") return Complete(3);
  auto suffix = [&](const std::string& prefix) -> int {
    if (text.rfind(prefix, 0) != 0 || text.size() == prefix.size()) return -1;
    std::string rest = text.substr(prefix.size());
    if (rest.find_first_not_of("0123456789") != std::string::npos || rest.size() > 2) return -1;
    return std::stoi(rest);
  };
  if (int k = suffix("path"); k > 0) return Path(k);
  if (int k = suffix("star"); k > 0) return Star(k);
  if (int k = suffix("complete"); k > 0) return Complete(k);
  int order = 0;
  unsigned canon = 0;
  int used = 0;
  if (std::sscanf(text.c_str(), "k%d:%8x%n", &order, &canon, &used) == 2 && used == static_cast<int>(text.size())) {
    CheckOrder(order);
    if (order < 32 && PairCount(order) < 32 && (canon >> PairCount(order)) != 0) {
      throw ConfigError("graph class id has bits beyond its order: " + text);
    }
    GraphClass g = CanonicalFromMask(order, canon);
    if (g.canon() != canon) throw ConfigError("graph class id is not canonical: " + text);
    return g;
  }
  throw ConfigError("unknown graph class '" + text + "'");
}

// ----------------------------------------------------------- components

namespace {

struct DisjointSets {
  explicit DisjointSets(std::size_t n) : parent(n) {
    for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
  }
  int Find(int v) {
    while (parent[static_cast<std::size_t>(v)] != v) {
      auto& p = parent[static_cast<std::size_t>(v)];
      p = parent[static_cast<std::size_t>(p)];
      v = p;
    }
    return v;
  }
  void Union(int a, int b) {
    a = Find(a);
    b = Find(b);
    if (a == b) return;
    // Smaller index becomes the root.
    if (a > b) std::swap(a, b);
    parent[static_cast<std::size_t>(b)] = a;
  }
  std::vector<int> parent;
};

}  // namespace

std::vector<std::vector<int>> Components(const RcmGraph& graph) {
  const std::size_t n = graph.size();
  DisjointSets sets(n);
  for (std::size_t v = 0; v < n; ++v) {
    for (int w : graph.neighbors(v)) {
      if (static_cast<std::size_t>(w) > v) sets.Union(static_cast<int>(v), w);
    }
  }
  std::vector<int> block_of(n, -1);
  std::vector<std::vector<int>> blocks;
  for (std::size_t v = 0; v < n; ++v) {
    int root = sets.Find(static_cast<int>(v));
    auto& b = block_of[static_cast<std::size_t>(root)];
    if (b < 0) {
      b = static_cast<int>(blocks.size());
      blocks.emplace_back();
    }
    blocks[static_cast<std::size_t>(b)].push_back(static_cast<int>(v));
  }
  return blocks;
}

// ------------------------------------------------------------- census

std::uint64_t CensusReport::Count(const GraphClass& g, CountMode mode) const {
  const auto& m = mode == CountMode::kLexmin ? lexmin_by_class : inside_by_class;
  auto it = m.find(g);
  return it == m.end() ? 0 : it->second;
}

std::uint64_t CensusReport::OrderCount(int k, CountMode mode) const {
  const auto& v = mode == CountMode::kLexmin ? lexmin_by_order : inside_by_order;
  return k >= 0 && static_cast<std::size_t>(k) < v.size() ? v[static_cast<std::size_t>(k)] : 0;
}

std::uint64_t CensusReport::InsideUpTo(int m) const {
  std::uint64_t s = 0;
  for (int k = 1; k <= m; ++k) s += OrderCount(k, CountMode::kInside);
  return s;
}

namespace {

GraphClass ClassifyBlock(const RcmGraph& graph, const std::vector<int>& block) {
  const int k = static_cast<int>(block.size());
  AdjRows rows{};
  for (int a = 0; a < k; ++a) {
    for (int w : graph.neighbors(static_cast<std::size_t>(block[static_cast<std::size_t>(a)]))) {
      auto it = std::lower_bound(block.begin(), block.end(), w);
      rows[static_cast<std::size_t>(a)] |= static_cast<std::uint8_t>(1u << (it - block.begin()));
    }
  }
  return CanonicalFromMask(k, MaskFromRows(k, rows));
}

void Bump(std::vector<std::uint64_t>& v, std::size_t k) {
  if (v.size() <= k) v.resize(k + 1, 0);
  ++v[k];
}

}  // namespace

CensusReport Census(const RcmGraph& graph, const Window& window, int k_max, const CensusOptions& options) {
  CheckOrder(k_max);
  const PointSet& pts = graph.points();
  const Window& region = pts.region();
  if (window.dim() != pts.dim()) throw ConfigError("census window dimension does not match the sample");
  if (options.strict && region.shape() == window.shape() && region.center() == window.center()) {
    double padding = region.extent() - window.extent();
    if (padding + 1e-12 < DefaultPadding(graph.phi(), k_max, options.eps_trunc)) {
      throw ConfigError("strict census needs padding >= " +
                        std::to_string(DefaultPadding(graph.phi(), k_max, options.eps_trunc)));
    }
  }

  CensusReport report;
  report.k_max = k_max;
  report.truncated = graph.truncated();
  const double reach = graph.reach();
  for (std::size_t v = 0; v < pts.size(); ++v) {
    if (window.Contains(pts[v])) ++report.points_in_window;
  }

  for (const auto& block : Components(graph)) {
    bool touching = false, all_inside = true;
    for (int v : block) {
      auto x = pts[static_cast<std::size_t>(v)];
      if (region.Depth(x) < reach) touching = true;
      if (all_inside && !window.Contains(x)) all_inside = false;
    }
    const bool lexmin_inside = window.Contains(pts[static_cast<std::size_t>(block.front())]);
    if (touching) {
      ++report.boundary_touching;
      continue;
    }
    const std::size_t k = block.size();
    if (all_inside) {
      ++report.total_inside;
      Bump(report.inside_by_order, k);
    }
    if (lexmin_inside) Bump(report.lexmin_by_order, k);
    if (!all_inside && !lexmin_inside) continue;
    if (k > static_cast<std::size_t>(k_max)) {
      ++report.oversize;
      continue;
    }
    GraphClass g = ClassifyBlock(graph, block);
    if (all_inside) ++report.inside_by_class[g];
    if (lexmin_inside) ++report.lexmin_by_class[g];
  }
  return report;
}

void ValidateWeights(std::span<const double> a, std::span<const GraphClass> classes) {
  if (a.size() != classes.size()) throw ConfigError("weights and classes differ in length");
  if (a.empty() || std::all_of(a.begin(), a.end(), [](double v) { return v == 0.0; })) {
    throw ConfigError("weight vector must be nonzero");
  }
  for (double v : a) {
    if (!std::isfinite(v)) throw ConfigError("weights must be finite");
  }
  std::set<GraphClass> seen(classes.begin(), classes.end());
  if (seen.size() != classes.size()) throw ConfigError("weighted count requires distinct classes");
}

double WeightedCount(const CensusReport& report, std::span<const double> a, std::span<const GraphClass> classes,
                     CountMode mode) {
  ValidateWeights(a, classes);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * static_cast<double>(report.Count(classes[i], mode));
  return s;
}

}  // namespace rcm
