#include "rcmlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/binomial.hpp>

#include "rcmlab/errors.hpp"
#include "rcmlab/parallel.hpp"

namespace rcm {

// ------------------------------------------------------------- statistic

Statistic Statistic::Points() {
  return Statistic{};
}

Statistic Statistic::TotalComponents() {
  Statistic s;
  s.kind = StatisticKind::kTotalComponents;
  s.mode = CountMode::kInside;
  return s;
}

Statistic Statistic::CountClass(const GraphClass& g, CountMode mode) {
  Statistic s;
  s.kind = StatisticKind::kCountClass;
  s.mode = mode;
  s.order = g.order();
  s.classes = {g};
  s.weights = {1.0};
  return s;
}

Statistic Statistic::CountOrder(int k, CountMode mode) {
  if (k < 1) throw ConfigError("component order must be >= 1");
  Statistic s;
  s.kind = StatisticKind::kCountOrder;
  s.mode = mode;
  s.order = k;
  return s;
}

Statistic Statistic::Weighted(std::vector<double> a, std::vector<GraphClass> classes, CountMode mode) {
  ValidateWeights(a, classes);
  Statistic s;
  s.kind = StatisticKind::kWeighted;
  s.mode = mode;
  s.weights = std::move(a);
  s.classes = std::move(classes);
  s.order = 0;
  for (const auto& g : s.classes) s.order = std::max(s.order, g.order());
  return s;
}

int Statistic::MaxOrder() const {
  switch (kind) {
    case StatisticKind::kPoints:
    case StatisticKind::kTotalComponents:
      return 1;
    default:
      return order;
  }
}

std::string Statistic::Name() const {
  const char* m = mode == CountMode::kLexmin ? "lexmin" : "inside";
  switch (kind) {
    case StatisticKind::kPoints:
      return "points";
    case StatisticKind::kTotalComponents:
      return "total_components";
    case StatisticKind::kCountOrder:
      return std::string("order") + std::to_string(order) + ":" + m;
    case StatisticKind::kCountClass:
      return "class:" + classes.front().Id() + ":" + m;
    case StatisticKind::kWeighted: {
      std::string out = "weighted";
      char buf[64];
      for (std::size_t i = 0; i < classes.size(); ++i) {
        std::snprintf(buf, sizeof buf, ":%.17g*%s", weights[i], classes[i].Id().c_str());
        out += buf;
      }
      return out + ":" + m;
    }
  }
  return "unknown";
}

double Evaluate(const Statistic& s, const CensusReport& report) {
  switch (s.kind) {
    case StatisticKind::kPoints:
      return static_cast<double>(report.points_in_window);
    case StatisticKind::kTotalComponents:
      return static_cast<double>(report.total_inside);
    case StatisticKind::kCountOrder:
      return static_cast<double>(report.OrderCount(s.order, s.mode));
    case StatisticKind::kCountClass:
      return static_cast<double>(report.Count(s.classes.front(), s.mode));
    case StatisticKind::kWeighted:
      return WeightedCount(report, s.weights, s.classes, s.mode);
  }
  return 0.0;
}

RcmGraph FunctionalSpec::Sample(std::uint64_t seed) const {
  auto pts = std::make_shared<const PointSet>(SamplePoisson(window, Padding(), beta, seed));
  return BuildRcm(pts, phi, MarksForSeed(seed), BuildOptions{eps_trunc});
}

// --------------------------------------------------------- local functional

namespace {

// The sample graph with extra points inserted. Vertices 0..n-1 are the sample,
// n + a is added point a.
class AugmentedGraph {
 public:
  AugmentedGraph(const RcmGraph& g, std::span<const double> added, std::span<const std::int64_t> ids = {})
      : g_(g), added_(added) {
    const PointSet& pts = g.points();
    const int d = pts.dim();
    const std::size_t dd = static_cast<std::size_t>(d);
    if (added.size() % dd != 0) throw ConfigError("added coordinates are not a multiple of dim");
    n_ = static_cast<int>(pts.size());
    m_ = static_cast<int>(added.size() / dd);
    if (!ids.empty() && ids.size() != static_cast<std::size_t>(m_)) throw ConfigError("one id per added point");
    auto id_of = [&](int a) { return ids.empty() ? -static_cast<std::int64_t>(a + 1) : ids[static_cast<std::size_t>(a)]; };
    added_nbrs_.resize(static_cast<std::size_t>(m_));
    const double reach = g.reach();
    const double reach2 = reach * reach;
    const auto& phi = g.phi();
    const auto& marks = g.marks();

    auto link = [&](double s, std::int64_t id_a, std::int64_t id_b) {
      if (s > reach2) return false;
      if (s == 0.0) throw PreconditionError("added point coincides with another point");
      double p = phi(std::sqrt(s));
      if (p <= 0.0) return false;
      return p >= 1.0 || marks(id_a, id_b) < p;
    };

    for (int a = 0; a < m_; ++a) {
      auto x = pos(n_ + a);
      const std::int64_t id_a = id_of(a);
      // Points are sorted by their first coordinate.
      int lo = 0, hi = n_;
      while (lo < hi) {
        int mid = (lo + hi) / 2;
        if (pts[static_cast<std::size_t>(mid)][0] < x[0] - reach) lo = mid + 1;
        else hi = mid;
      }
      for (int i = lo; i < n_; ++i) {
        auto y = pts[static_cast<std::size_t>(i)];
        if (y[0] > x[0] + reach) break;
        double s = 0.0;
        for (int c = 0; c < d; ++c) s += (x[c] - y[c]) * (x[c] - y[c]);
        if (link(s, id_a, pts.id(static_cast<std::size_t>(i)))) {
          added_nbrs_[static_cast<std::size_t>(a)].push_back(i);
          extra_[i].push_back(n_ + a);
        }
      }
      for (int b = 0; b < a; ++b) {
        auto y = pos(n_ + b);
        double s = 0.0;
        for (int c = 0; c < d; ++c) s += (x[c] - y[c]) * (x[c] - y[c]);
        if (link(s, id_a, id_of(b))) {
          added_nbrs_[static_cast<std::size_t>(a)].push_back(n_ + b);
          added_nbrs_[static_cast<std::size_t>(b)].push_back(n_ + a);
        }
      }
    }
  }

  int n() const { return n_; }
  int m() const { return m_; }

  std::span<const double> pos(int v) const {
    if (v < n_) return g_.points()[static_cast<std::size_t>(v)];
    const std::size_t d = static_cast<std::size_t>(g_.points().dim());
    return added_.subspan(static_cast<std::size_t>(v - n_) * d, d);
  }

  template <class Fn>
  void ForNeighbors(int v, Fn&& fn) const {
    if (v >= n_) {
      for (int w : added_nbrs_[static_cast<std::size_t>(v - n_)]) fn(w);
      return;
    }
    for (int w : g_.neighbors(static_cast<std::size_t>(v))) fn(w);
    auto it = extra_.find(v);
    if (it != extra_.end()) {
      for (int w : it->second) fn(w);
    }
  }

  int Degree(int v) const {
    int deg = 0;
    ForNeighbors(v, [&](int) { ++deg; });
    return deg;
  }

  const std::vector<int>& AddedNeighbors(int a) const { return added_nbrs_[static_cast<std::size_t>(a)]; }

  // Vertices within `hops` edges of `start`, with their distances.
  std::vector<std::pair<int, int>> Ball(int start, int hops) const {
    std::vector<std::pair<int, int>> seen{{start, 0}};
    std::unordered_map<int, int> dist{{start, 0}};
    for (std::size_t head = 0; head < seen.size(); ++head) {
      auto [v, dv] = seen[head];
      if (dv == hops) continue;
      ForNeighbors(v, [&](int w) {
        if (dist.emplace(w, dv + 1).second) seen.emplace_back(w, dv + 1);
      });
    }
    return seen;
  }

 private:
  const RcmGraph& g_;
  std::span<const double> added_;
  int n_ = 0, m_ = 0;
  std::vector<std::vector<int>> added_nbrs_;
  std::unordered_map<int, std::vector<int>> extra_;
};

std::vector<double> Concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

GraphClass Classify(const AugmentedGraph& ag, std::vector<int> verts) {
  std::sort(verts.begin(), verts.end());
  const int k = static_cast<int>(verts.size());
  AdjRows rows{};
  for (int a = 0; a < k; ++a) {
    ag.ForNeighbors(verts[static_cast<std::size_t>(a)], [&](int w) {
      auto it = std::lower_bound(verts.begin(), verts.end(), w);
      rows[static_cast<std::size_t>(a)] |= static_cast<std::uint8_t>(1u << (it - verts.begin()));
    });
  }
  return CanonicalFromMask(k, MaskFromRows(k, rows));
}

// What one component adds to the raw statistic; mirrors Census.
double Contribution(const FunctionalSpec& spec, const RcmGraph& graph, const AugmentedGraph& ag,
                    const std::vector<int>& verts) {
  const Statistic& s = spec.statistic;
  const Window& w = spec.window;
  if (s.kind == StatisticKind::kPoints) {
    double count = 0.0;
    for (int v : verts) count += w.Contains(ag.pos(v)) ? 1.0 : 0.0;
    return count;
  }
  const Window& region = graph.points().region();
  const double reach = graph.reach();
  bool inside = true;
  int lex = verts.front();
  for (int v : verts) {
    auto x = ag.pos(v);
    if (region.Depth(x) < reach) return 0.0;
    if (inside && !w.Contains(x)) inside = false;
    if (LexLess(x, ag.pos(lex))) lex = v;
  }
  if (s.kind == StatisticKind::kTotalComponents) return inside ? 1.0 : 0.0;
  const bool counted = s.mode == CountMode::kInside ? inside : w.Contains(ag.pos(lex));
  if (!counted) return 0.0;
  const int k = static_cast<int>(verts.size());
  if (s.kind == StatisticKind::kCountOrder) return k == s.order ? 1.0 : 0.0;
  if (k > kMaxOrder) return 0.0;
  if (std::none_of(s.classes.begin(), s.classes.end(), [&](const GraphClass& g) { return g.order() == k; })) {
    return 0.0;
  }
  GraphClass g = Classify(ag, verts);
  for (std::size_t i = 0; i < s.classes.size(); ++i) {
    if (s.classes[i] == g) return s.weights[i];
  }
  return 0.0;
}

void CheckSpec(const FunctionalSpec& spec) {
  if (!(spec.beta > 0.0) || !std::isfinite(spec.beta)) throw ConfigError("beta must be finite and > 0");
  if (!(spec.sd > 0.0) || !std::isfinite(spec.sd) || !std::isfinite(spec.mean)) {
    throw ConfigError("standardization needs a finite mean and sd > 0");
  }
}

}  // namespace

LocalFunctional::LocalFunctional(const FunctionalSpec& spec, const RcmGraph& graph) : spec_(spec), graph_(graph) {
  CheckSpec(spec);
  if (spec.window.dim() != graph.points().dim()) throw ConfigError("window dimension does not match the sample");
  blocks_ = Components(graph);
  comp_of_.assign(graph.size(), -1);
  AugmentedGraph plain(graph, {});
  contribution_.resize(blocks_.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    for (int v : blocks_[b]) comp_of_[static_cast<std::size_t>(v)] = static_cast<int>(b);
    contribution_[b] = Contribution(spec_, graph_, plain, blocks_[b]);
    base_ += contribution_[b];
  }
}

double LocalFunctional::RawWith(std::span<const double> added, std::span<const std::int64_t> ids) const {
  AugmentedGraph ag(graph_, added, ids);
  std::set<int> affected;
  for (int a = 0; a < ag.m(); ++a) {
    for (int w : ag.AddedNeighbors(a)) {
      if (w < ag.n()) affected.insert(comp_of_[static_cast<std::size_t>(w)]);
    }
  }
  double value = base_;
  for (int c : affected) value -= contribution_[static_cast<std::size_t>(c)];

  // New components live on the added points and the affected old blocks.
  std::unordered_map<int, bool> done;
  for (int a = 0; a < ag.m(); ++a) done[ag.n() + a] = false;
  for (int c : affected) {
    for (int v : blocks_[static_cast<std::size_t>(c)]) done[v] = false;
  }
  for (int a = 0; a < ag.m(); ++a) {
    int start = ag.n() + a;
    if (done[start]) continue;
    std::vector<int> comp{start};
    done[start] = true;
    for (std::size_t head = 0; head < comp.size(); ++head) {
      ag.ForNeighbors(comp[head], [&](int w) {
        bool& seen = done[w];
        if (!seen) {
          seen = true;
          comp.push_back(w);
        }
      });
    }
    value += Contribution(spec_, graph_, ag, comp);
  }
  return value;
}

double LocalFunctional::ValueWith(std::span<const double> added, std::span<const std::int64_t> ids) const {
  return Scale(RawWith(added, ids));
}

int LocalFunctional::AddedDegree(std::span<const double> added, int which,
                                 std::span<const std::int64_t> ids) const {
  AugmentedGraph ag(graph_, added, ids);
  return ag.Degree(ag.n() + which);
}

bool LocalFunctional::ReachesWindow(std::span<const double> added, int which, int hops,
                                    std::span<const std::int64_t> ids) const {
  AugmentedGraph ag(graph_, added, ids);
  for (auto [v, dv] : ag.Ball(ag.n() + which, hops)) {
    if (spec_.window.Contains(ag.pos(v))) return true;
  }
  return false;
}

bool LocalFunctional::Joined(std::span<const double> added, int from, int to, int hops,
                             std::span<const std::int64_t> ids) const {
  AugmentedGraph ag(graph_, added, ids);
  for (auto [v, dv] : ag.Ball(ag.n() + from, hops)) {
    if (v == ag.n() + to) return true;
  }
  return false;
}

double Difference(const FunctionalSpec& spec, const RcmGraph& graph, std::span<const double> x) {
  return LocalFunctional(spec, graph).Difference(x);
}

DifferenceSample SecondDifference(const FunctionalSpec& spec, const RcmGraph& graph, std::span<const double> x,
                                  std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("points differ in dimension");
  if (std::equal(x.begin(), x.end(), y.begin())) throw PreconditionError("second difference needs x != y");
  LocalFunctional lf(spec, graph);
  const auto xy = Concat(x, y);
  // x is id -1 and y is id -2 in every evaluation.
  const std::int64_t y_id[] = {-2};
  DifferenceSample out;
  out.f = lf.Value();
  out.fx = lf.ValueWith(x);
  out.fy = lf.ValueWith(y, y_id);
  out.fxy = lf.ValueWith(xy);
  return out;
}

// ------------------------------------------------------------ bound checks

namespace {

double WeightNorm(const Statistic& s) {
  switch (s.kind) {
    case StatisticKind::kCountClass:
    case StatisticKind::kCountOrder:
      break;
    case StatisticKind::kWeighted: {
      double a = 0.0;
      for (double v : s.weights) a = std::max(a, std::abs(v));
      if (s.mode == CountMode::kLexmin) return a;
      break;
    }
    default:
      throw ConfigError("difference bounds apply to component counts only");
  }
  if (s.mode != CountMode::kLexmin) throw ConfigError("difference bounds apply to lexmin counts only");
  return 1.0;
}

bool Within(double value, double bound) {
  return std::abs(value) <= bound + 1e-9 * std::max(1.0, bound);
}

}  // namespace

BoundCheck CheckFirstDifferenceBound(const FunctionalSpec& spec, const RcmGraph& graph, std::span<const double> x) {
  const double a = WeightNorm(spec.statistic) / spec.sd;
  const int k = spec.statistic.MaxOrder();
  LocalFunctional lf(spec, graph);
  BoundCheck out;
  out.value = lf.Difference(x);
  out.bound = lf.ReachesWindow(x, 0, k) ? a * (lf.AddedDegree(x, 0) + 1) : 0.0;
  out.holds = Within(out.value, out.bound);
  return out;
}

BoundCheck CheckSecondDifferenceBound(const FunctionalSpec& spec, const RcmGraph& graph, std::span<const double> x,
                                      std::span<const double> y) {
  const double a = WeightNorm(spec.statistic) / spec.sd;
  const int k = spec.statistic.MaxOrder();
  DifferenceSample ds = SecondDifference(spec, graph, x, y);
  LocalFunctional lf(spec, graph);
  const auto xy = Concat(x, y);
  const std::int64_t y_id[] = {-2};
  BoundCheck out;
  out.value = ds.Delta2();
  const bool joined = lf.Joined(xy, 0, 1, k + 1);
  const bool near = lf.ReachesWindow(x, 0, k) || lf.ReachesWindow(y, 0, k, y_id);
  out.bound = joined && near ? a * (2.0 * lf.AddedDegree(y, 0, y_id) + 3.0) : 0.0;
  out.holds = Within(out.value, out.bound);
  return out;
}

// -------------------------------------------------------------- estimators

namespace {

constexpr std::uint64_t kShards = 64;

// Runs `draws` outer draws in fixed shards and merges K running means in
// shard order, so results do not depend on the worker count.
template <std::size_t K, class Draw>
std::array<RunningStats, K> Sharded(std::uint64_t draws, std::uint64_t seed, int threads, Draw&& draw) {
  if (draws == 0) throw ConfigError("outer budget must be positive");
  const std::uint64_t shards = std::min(draws, kShards);
  std::vector<std::array<RunningStats, K>> parts(shards);
  ParallelFor(shards, threads, [&](std::size_t s) {
    Engine rng = MakeEngine(DeriveSeed(seed, s));
    std::uint64_t count = draws / shards + (s < draws % shards ? 1 : 0);
    for (std::uint64_t i = 0; i < count; ++i) {
      std::array<double, K> v = draw(rng);
      for (std::size_t j = 0; j < K; ++j) parts[s][j].Add(v[j]);
    }
  });
  std::array<RunningStats, K> total;
  for (const auto& p : parts) {
    for (std::size_t j = 0; j < K; ++j) total[j].Merge(p[j]);
  }
  return total;
}

MomentEstimate Scaled(const RunningStats& s, double factor, double radius) {
  MomentEstimate out;
  out.value = factor * s.mean();
  out.std_error = std::abs(factor) * s.std_error();
  out.n_samples = s.count();
  out.truncation_radius = radius;
  out.method = Method::kMonteCarlo;
  return out;
}

// c * e^p with a first-order error.
MomentEstimate Power(const MomentEstimate& e, double p, double c = 1.0) {
  MomentEstimate out = e;
  double v = std::max(e.value, 0.0);
  out.value = c * std::pow(v, p);
  if (v > 0.0) {
    out.std_error = std::abs(c * p * std::pow(v, p - 1.0)) * e.std_error;
  } else {
    out.std_error = std::abs(c) * std::pow(e.std_error, p);
  }
  return out;
}

// Defensive mixture: half the draws uniform on `broad`, half uniform on
// `narrow`. The weight 1/q keeps integrals over `broad` unbiased.
struct Mixture {
  Window broad;
  Window narrow;

  struct Draw {
    std::vector<double> x;
    double weight;
  };

  Draw Sample(Engine& rng) const {
    Draw d{std::vector<double>(static_cast<std::size_t>(broad.dim())), 0.0};
    (Uniform01(rng) < 0.5 ? broad : narrow).SampleUniform(rng, d.x);
    double q = 0.0;
    if (broad.Contains(d.x)) q += 0.5 / broad.Volume();
    if (narrow.Contains(d.x)) q += 0.5 / narrow.Volume();
    d.weight = 1.0 / q;
    return d;
  }
};

// Integration domains. First-order differences vanish outside W + hops * R.
// Second-order ones need the two points within (hops + 1) R of each other
// when the statistic only sees small components. Narrow components use the
// core range of phi instead of the truncation range.
struct Domains {
  Window first;
  Window anchor;
  double partner_radius = 0.0;  // 0: partners are uniform in `first`
  double reach = 0.0;
  double core = 0.0;
  int hops = 1;

  explicit Domains(const FunctionalSpec& spec)
      : first(spec.window.Padded(spec.statistic.Hops() * spec.Reach())),
        anchor(first),
        reach(spec.Reach()),
        core(std::min(spec.Reach(), spec.phi.Range(0.5))),
        hops(spec.statistic.Hops()) {
    if (spec.statistic.Local()) {
      anchor = spec.window.Padded((2 * hops + 1) * reach);
      partner_radius = (hops + 1) * reach;
    }
    narrow_first_ = spec.window.Padded(hops * core);
    narrow_anchor_ = spec.statistic.Local() ? spec.window.Padded((2 * hops + 1) * core) : narrow_first_;
  }

  Mixture First() const { return {first, narrow_first_}; }
  Mixture Anchor() const { return {partner_radius > 0.0 ? anchor : first, narrow_anchor_}; }
  Mixture Partner(std::span<const double> at) const {
    std::vector<double> c(at.begin(), at.end());
    Window near = Window::Ball(c, (hops + 1) * core);
    return {partner_radius > 0.0 ? Window::Ball(std::move(c), partner_radius) : first, near};
  }

 private:
  Window narrow_first_ = first;
  Window narrow_anchor_ = first;
};

void CheckBudget(const AnalysisBudget& b, bool nested) {
  if (b.outer == 0 || b.points < 1) throw ConfigError("analysis budgets must be positive");
  if (nested && b.inner < 4) throw ConfigError("nested estimators need at least 4 inner replicates");
}

void CheckStandardized(const FunctionalSpec& spec) {
  if (!spec.Standardized()) throw PreconditionError("statistic must be standardized (mean, sd)");
}

// Mean over the first and second half of the values.
std::pair<double, double> Halves(const std::vector<double>& v) {
  const std::size_t h = v.size() / 2;
  double a = std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), 0.0) / static_cast<double>(h);
  double b = std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(h), v.end(), 0.0) /
             static_cast<double>(v.size() - h);
  return {a, b};
}

double Mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

MomentEstimate PoincareBound(const FunctionalSpec& spec, const AnalysisBudget& budget, std::uint64_t seed) {
  CheckSpec(spec);
  CheckBudget(budget, false);
  Domains dom(spec);
  auto stats = Sharded<1>(budget.outer, seed, budget.threads, [&](Engine& rng) {
    RcmGraph g = spec.Sample(rng());
    LocalFunctional lf(spec, g);
    double acc = 0.0;
    const Mixture m = dom.First();
    for (int p = 0; p < budget.points; ++p) {
      auto x = m.Sample(rng);
      double d = lf.Difference(x.x);
      acc += x.weight * d * d;
    }
    return std::array<double, 1>{acc / budget.points};
  });
  return Scaled(stats[0], spec.beta, spec.statistic.Hops() * dom.reach);
}

MomentEstimate BirthTimeVariance(const FunctionalSpec& spec, const AnalysisBudget& budget, std::uint64_t seed) {
  CheckSpec(spec);
  CheckBudget(budget, true);
  if (spec.window.Volume() > kBirthTimeVolumeCap) {
    throw ConfigError("birth-time variance is limited to windows of volume <= 27");
  }
  Domains dom(spec);
  const Window region = spec.window.Padded(spec.Padding());
  const int d = spec.window.dim();

  auto poisson = [&](double rate, std::uint64_t s) {
    if (rate <= 0.0) return std::vector<double>{};
    return SamplePoisson(spec.window, spec.Padding(), rate, s).coords();
  };

  auto stats = Sharded<1>(budget.outer, seed, budget.threads, [&](Engine& rng) {
    const auto [x, weight] = dom.First().Sample(rng);
    const double t = 1.0 - Uniform01(rng);  // (0, 1]
    std::vector<double> past = poisson(t * spec.beta, rng());
    const PairMarkSource outer_marks(rng());
    const std::size_t np = past.size() / static_cast<std::size_t>(d);
    std::vector<double> deltas(static_cast<std::size_t>(budget.inner));
    for (auto& delta : deltas) {
      std::vector<double> coords = past;
      std::vector<double> future = poisson((1.0 - t) * spec.beta, rng());
      coords.insert(coords.end(), future.begin(), future.end());
      std::vector<std::int64_t> ids(coords.size() / static_cast<std::size_t>(d));
      std::iota(ids.begin(), ids.end(), std::int64_t{0});
      auto pts = std::make_shared<const PointSet>(d, std::move(coords), region, spec.beta, 0, std::move(ids));
      PairMarkSource marks = outer_marks.WithFreshFrom(static_cast<std::int64_t>(np), rng());
      RcmGraph g = BuildRcm(pts, spec.phi, marks, BuildOptions{spec.eps_trunc});
      delta = LocalFunctional(spec, g).Difference(x);
    }
    auto [a, b] = Halves(deltas);
    return std::array<double, 1>{weight * a * b};
  });
  return Scaled(stats[0], spec.beta, spec.statistic.Hops() * dom.reach);
}

namespace {

// Single-level first-order moments: E|D|^3 and E D^4 integrated over the
// first-order domain.
std::array<MomentEstimate, 2> FirstOrderMoments(const FunctionalSpec& spec, const AnalysisBudget& budget,
                                                std::uint64_t seed, const Domains& dom) {
  auto stats = Sharded<2>(budget.outer, seed, budget.threads, [&](Engine& rng) {
    RcmGraph g = spec.Sample(rng());
    LocalFunctional lf(spec, g);
    double m3 = 0.0, m4 = 0.0;
    const Mixture m = dom.First();
    for (int p = 0; p < budget.points; ++p) {
      auto x = m.Sample(rng);
      double v = std::abs(lf.Difference(x.x));
      m3 += x.weight * v * v * v;
      m4 += x.weight * v * v * v * v;
    }
    return std::array<double, 2>{m3 / budget.points, m4 / budget.points};
  });
  const double f = spec.beta;
  const double radius = spec.statistic.Hops() * dom.reach;
  return {Scaled(stats[0], f, radius), Scaled(stats[1], f, radius)};
}

// Nested: beta int [E D_x^4]^{3/4} and beta int [E D_x^4]^{1/2}; the inner
// square of the mean is replaced by the product of two half means.
std::array<MomentEstimate, 2> NestedFourth(const FunctionalSpec& spec, const AnalysisBudget& budget,
                                           std::uint64_t seed, const Domains& dom) {
  auto stats = Sharded<2>(budget.outer, seed, budget.threads, [&](Engine& rng) {
    const auto [x, weight] = dom.First().Sample(rng);
    std::vector<double> v(static_cast<std::size_t>(budget.inner));
    for (auto& e : v) {
      RcmGraph g = spec.Sample(rng());
      double dx = LocalFunctional(spec, g).Difference(x);
      e = dx * dx * dx * dx;
    }
    auto [a, b] = Halves(v);
    double sq = a * b;
    return std::array<double, 2>{weight * std::pow(sq, 0.375), weight * std::sqrt(sq)};
  });
  const double f = spec.beta;
  const double radius = spec.statistic.Hops() * dom.reach;
  return {Scaled(stats[0], f, radius), Scaled(stats[1], f, radius)};
}

}  // namespace

GammaTerms ComputeGammaTerms(const FunctionalSpec& spec, const AnalysisBudget& budget, double fourth_moment,
                             std::uint64_t seed) {
  CheckSpec(spec);
  CheckStandardized(spec);
  CheckBudget(budget, true);
  if (!(fourth_moment >= 0.0) || !std::isfinite(fourth_moment)) throw ConfigError("E F^4 must be finite");
  Domains dom(spec);
  const double beta = spec.beta;
  const double radius = (2 * spec.statistic.Hops() + 1) * dom.reach;
  GammaTerms out;
  out.fourth_moment = fourth_moment;

  auto first = FirstOrderMoments(spec, budget, DeriveSeed(seed, 3), dom);
  out.gamma[2] = first[0];
  out.gamma[4] = Power(first[1], 0.5);

  auto nested = NestedFourth(spec, budget, DeriveSeed(seed, 4), dom);
  out.gamma[3] = 0.5 * std::pow(fourth_moment, 0.25) * nested[0];

  // gamma_1, gamma_2 over (x1, x2, x3): x3 anchors, x1 and x2 are partners.
  auto triple = Sharded<2>(budget.outer, DeriveSeed(seed, 1), budget.threads, [&](Engine& rng) {
    const auto [x3, w3] = dom.Anchor().Sample(rng);
    const Mixture partner = dom.Partner(x3);
    const auto [x1, w1] = partner.Sample(rng);
    const auto [x2, w2] = partner.Sample(rng);
    const double w = w1 * w2 * w3;
    std::vector<double> u(static_cast<std::size_t>(budget.inner)), v(u.size());
    const auto x13 = Concat(x1, x3), x23 = Concat(x2, x3);
    // x1, x2, x3 carry ids -1, -2, -3 throughout.
    const std::int64_t i2[] = {-2}, i3[] = {-3}, i13[] = {-1, -3}, i23[] = {-2, -3};
    for (std::size_t r = 0; r < u.size(); ++r) {
      RcmGraph g = spec.Sample(rng());
      LocalFunctional lf(spec, g);
      const double f = lf.Value();
      const double f1 = lf.ValueWith(x1), f2 = lf.ValueWith(x2, i2), f3 = lf.ValueWith(x3, i3);
      const double d13 = lf.ValueWith(x13, i13) - f1 - f3 + f;
      const double d23 = lf.ValueWith(x23, i23) - f2 - f3 + f;
      u[r] = (f1 - f) * (f1 - f) * (f2 - f) * (f2 - f);
      v[r] = d13 * d13 * d23 * d23;
    }
    auto [ua, ub] = Halves(u);
    auto [va, vb] = Halves(v);
    (void)ub;
    (void)va;
    return std::array<double, 2>{w * std::sqrt(std::max(ua * vb, 0.0)), w * Mean(v)};
  });
  const double b3 = std::pow(beta, 3);
  out.gamma[0] = Power(Scaled(triple[0], b3, radius), 0.5, 2.0);
  out.gamma[1] = Power(Scaled(triple[1], b3, radius), 0.5);

  // gamma_6 over (x1, x2).
  auto pair = Sharded<1>(budget.outer, DeriveSeed(seed, 2), budget.threads, [&](Engine& rng) {
    const auto [x1, w1] = dom.Anchor().Sample(rng);
    const auto [x2, w2] = dom.Partner(x1).Sample(rng);
    const auto x12 = Concat(x1, x2);
    std::vector<double> a(static_cast<std::size_t>(budget.inner)), b(a.size());
    for (std::size_t r = 0; r < a.size(); ++r) {
      RcmGraph g = spec.Sample(rng());
      LocalFunctional lf(spec, g);
      const std::int64_t i2[] = {-2};
      const double f = lf.Value(), f1 = lf.ValueWith(x1), f2 = lf.ValueWith(x2, i2);
      const double d2 = lf.ValueWith(x12) - f1 - f2 + f;
      a[r] = std::pow(f1 - f, 4);
      b[r] = std::pow(d2, 4);
    }
    auto [aa, ab] = Halves(a);
    auto [ba, bb] = Halves(b);
    (void)ab;
    (void)ba;
    return std::array<double, 1>{w1 * w2 * (6.0 * std::sqrt(aa) * std::sqrt(bb) + 3.0 * Mean(b))};
  });
  out.gamma[5] = Power(Scaled(pair[0], beta * beta, radius), 0.5);
  return out;
}

MomentEstimate FourthMomentBound(const FunctionalSpec& spec, const AnalysisBudget& budget, std::uint64_t seed) {
  CheckSpec(spec);
  CheckStandardized(spec);
  CheckBudget(budget, true);
  Domains dom(spec);
  auto first = FirstOrderMoments(spec, budget, DeriveSeed(seed, 3), dom);
  auto nested = NestedFourth(spec, budget, DeriveSeed(seed, 4), dom);
  MomentEstimate a = Power(nested[1], 2.0, 256.0);
  MomentEstimate b = 4.0 * first[1];
  b.value += 2.0;
  return a.value >= b.value ? a : b;
}

std::vector<MomentEstimate> FourthMomentProfile(const FunctionalSpec& spec, std::span<const double> distances,
                                                std::uint64_t samples, std::uint64_t seed, int threads) {
  CheckSpec(spec);
  std::vector<MomentEstimate> out;
  for (std::size_t j = 0; j < distances.size(); ++j) {
    if (!(distances[j] >= 0.0)) throw ConfigError("profile distances must be >= 0");
    std::vector<double> x = spec.window.center();
    x[0] += spec.window.extent() + distances[j];
    auto stats = Sharded<1>(samples, DeriveSeed(seed, j), threads, [&](Engine& rng) {
      RcmGraph g = spec.Sample(rng());
      return std::array<double, 1>{std::pow(LocalFunctional(spec, g).Difference(x), 4)};
    });
    out.push_back(Scaled(stats[0], 1.0, distances[j]));
  }
  return out;
}

ClusterTailEstimate ClusterTail(const ConnectionFunction& phi, double beta, int dim, int m, std::uint64_t samples,
                                std::uint64_t seed, int threads, double eps_trunc) {
  if (m < 1) throw ConfigError("cluster tail order must be >= 1");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be finite and > 0");
  const double reach = phi.Range(eps_trunc);
  // Attached clusters of total order < m stay within m * reach of the origin.
  const double radius = (m + 1) * reach;
  auto stats = Sharded<3>(samples, seed, threads, [&](Engine& rng) {
    const std::uint64_t s = rng();
    PointSet base = SamplePoisson(Window::Ball(dim, 0.0), radius, beta, s);
    std::vector<double> coords = base.coords();
    coords.resize(coords.size() + static_cast<std::size_t>(dim), 0.0);
    std::vector<std::int64_t> ids(base.size() + 1);
    std::iota(ids.begin(), ids.end(), std::int64_t{0});
    ids.back() = -1;
    auto pts = std::make_shared<const PointSet>(dim, std::move(coords), base.region(), beta, s, std::move(ids));
    RcmGraph g = BuildRcm(pts, phi, MarksForSeed(s), BuildOptions{eps_trunc});
    std::size_t origin = 0;
    while (pts->id(origin) != -1) ++origin;
    std::vector<int> comp{static_cast<int>(origin)};
    std::vector<char> seen(g.size(), 0);
    seen[origin] = 1;
    bool touching = false;
    for (std::size_t head = 0; head < comp.size(); ++head) {
      auto v = static_cast<std::size_t>(comp[head]);
      if (pts->region().Depth((*pts)[v]) < reach) touching = true;
      for (int w : g.neighbors(v)) {
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          comp.push_back(w);
        }
      }
    }
    // The observed order never exceeds the true one, so `big` is decided even
    // when the cluster touches the boundary.
    const bool big = static_cast<int>(comp.size()) - 1 >= m;
    return std::array<double, 3>{big ? 1.0 : 0.0, (touching || big) ? 1.0 : 0.0,
                                 (touching && !big) ? 1.0 : 0.0};
  });
  ClusterTailEstimate out;
  out.lower = Scaled(stats[0], 1.0, radius);
  out.upper = Scaled(stats[1], 1.0, radius);
  out.unresolved = static_cast<std::uint64_t>(std::llround(stats[2].mean() * static_cast<double>(samples)));
  return out;
}

double DominatorWindowRatio(const ConnectionFunction& phi, const Window& w, double alpha) {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
  const int d = w.dim();
  const double a = w.extent();
  // Surface area of the parallel body W + tB.
  auto surface = [&](double t) {
    if (w.shape() == WindowShape::kBall) return UnitSphereArea(d) * std::pow(a + t, d - 1);
    double s = 0.0;
    for (int j = 1; j <= d; ++j) {
      s += j * boost::math::binomial_coefficient<double>(static_cast<unsigned>(d), static_cast<unsigned>(j)) *
           std::pow(2.0 * a, d - j) * UnitBallVolume(j) * std::pow(t, j - 1);
    }
    return s;
  };
  auto f = [&](double t) { return std::pow(phi.Dominator(t), alpha) * surface(t); };
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  double tail = 0.0;
  if (auto r = phi.SupportRadius()) {
    tail = GK::integrate(f, 0.0, *r, 15, 1e-12);
  } else {
    tail = GK::integrate(f, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-12);
  }
  return 1.0 + tail / w.Volume();
}

}  // namespace rcm
