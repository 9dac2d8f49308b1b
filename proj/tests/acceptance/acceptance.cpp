// Prints one PASS/FAIL line per acceptance criterion; optional arguments select
// criteria by number.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rcmlab/analysis.hpp"
#include "rcmlab/census.hpp"
#include "rcmlab/experiments.hpp"
#include "rcmlab/moments.hpp"
#include "rcmlab/parallel.hpp"
#include "rcmlab/rcmlab.h"
#include "rcmlab/scenario.hpp"

namespace {

using namespace rcm;
using nlohmann::json;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int Threads() {
  return ResolveThreads(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
}

std::string Fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

json Gilbert(double r) {
  return {{"kind", "gilbert"}, {"r", r}};
}

json Config(const std::string& name, json phi, double beta, std::vector<double> extents, json stats,
            std::uint64_t replicates, std::uint64_t seed) {
  return {{"name", name},           {"dim", 2},        {"beta", beta},
          {"phi", phi},             {"window", {{"shape", "box"}, {"extents", extents}}},
          {"statistics", stats},    {"replicates", replicates},
          {"seed_base", seed},      {"budgets", {{"mc_samples", 1000000}}}};
}

ExperimentResult Run(const json& config, Command cmd) {
  return RunExperiment(ParseScenario(config), cmd, RunOptions{Threads()});
}

// 1. Isolated-vertex intensity against exp(-pi).
Outcome IsolatedVertexIntensity() {
  json stats = json::array({{{"kind", "count_class"}, {"class", "vertex"}}});
  auto r = Run(Config("c1", Gilbert(1.0), 1.0, {10.0}, stats, 500, 101), Command::kCensus);
  const auto& rung = r.rungs[0];
  const double est = rung.summaries[0].mean / rung.volume, se = rung.summaries[0].mean_se / rung.volume;
  const double truth = std::exp(-std::numbers::pi);
  return {std::abs(est - truth) <= 3 * se,
          Fmt("eta_1/vol = %.6f +- %.6f, exp(-pi) = %.6f, |diff|/se = %.2f", est, se, truth,
              std::abs(est - truth) / se)};
}

// 2. psi-edges are phi-edges on shared marks.
Outcome CouplingMonotonicity() {
  auto phi = ConnectionFunction::Gilbert(1.0), psi = ConnectionFunction::ScaledIndicator(0.5, 1.0);
  std::uint64_t violations = 0, psi_edges = 0, phi_edges = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    auto pts = SamplePoisson(Window::Box(2, 5.0), 2.0, 1.0, DeriveSeed(202, s));
    auto [gp, gs] = BuildCoupled(pts, phi, psi, MarksForSeed(DeriveSeed(202, s)));
    phi_edges += gp.num_edges();
    psi_edges += gs.num_edges();
    for (std::size_t v = 0; v < gs.size(); ++v) {
      for (int u : gs.neighbors(v)) violations += gp.HasEdge(static_cast<int>(v), u) ? 0 : 1;
    }
  }
  return {violations == 0, Fmt("violations = %.0f over 1000 samples (psi edges %.0f, phi edges %.0f)",
                               static_cast<double>(violations), static_cast<double>(psi_edges),
                               static_cast<double>(phi_edges))};
}

// 3. Canonical form against a brute-force minimum over permutations.
Outcome CensusOracle() {
  std::size_t mismatches = 0;
  std::string counts;
  for (int k = 1; k <= 5; ++k) {
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::set<std::uint32_t> brute_classes;
    std::set<GraphClass> classes;
    for (std::uint32_t mask = 0; mask < (1u << PairCount(k)); ++mask) {
      if (!IsConnected(k, RowsFromMask(k, mask))) continue;
      for (int i = 0; i < k; ++i) perm[static_cast<std::size_t>(i)] = i;
      std::uint32_t best = ~0u;
      do {
        std::uint32_t m = 0;
        for (int i = 0; i < k; ++i) {
          for (int j = i + 1; j < k; ++j) {
            if (!(mask >> PairBit(k, i, j) & 1u)) continue;
            int a = std::min(perm[i], perm[j]), b = std::max(perm[i], perm[j]);
            m |= 1u << PairBit(k, a, b);
          }
        }
        best = std::min(best, m);
      } while (std::next_permutation(perm.begin(), perm.end()));
      GraphClass g = CanonicalFromMask(k, mask);
      // Same brute-force canon must mean same class and vice versa.
      if (g != CanonicalFromMask(k, best)) ++mismatches;
      brute_classes.insert(best);
      classes.insert(g);
    }
    if (brute_classes.size() != classes.size()) ++mismatches;
    counts += (counts.empty() ? "" : ",") + std::to_string(classes.size());
  }
  return {mismatches == 0 && counts == "1,1,2,6,21",
          "class counts " + counts + ", mismatches " + std::to_string(mismatches)};
}

// 4. Total = sum over orders; order counts = sum over classes.
Outcome StructuralIdentities() {
  const int k = 5;
  auto phi = ConnectionFunction::Gilbert(1.0);
  std::uint64_t failures = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    auto pts = SamplePoisson(Window::Box(2, 5.0), DefaultPadding(phi, k), 1.0, DeriveSeed(404, s));
    CensusReport c = Census(BuildRcm(pts, phi, MarksForSeed(DeriveSeed(404, s))), Window::Box(2, 5.0), k);
    std::uint64_t inside = 0;
    for (auto n : c.inside_by_order) inside += n;
    if (inside != c.total_inside) ++failures;
    if (Evaluate(Statistic::TotalComponents(), c) != static_cast<double>(inside)) ++failures;
    for (int m = 1; m <= k; ++m) {
      for (auto mode : {CountMode::kLexmin, CountMode::kInside}) {
        std::uint64_t sum = 0;
        for (const auto& g : EnumerateClasses(m)) sum += c.Count(g, mode);
        if (sum != c.OrderCount(m, mode)) ++failures;
      }
    }
  }
  return {failures == 0, "identity failures " + std::to_string(failures) + " over 1000 samples"};
}

// 5. Var F <= Poincare bound.
Outcome Poincare() {
  json eta1 = {{"kind", "count_order"}, {"order", 1}}, eta2 = {{"kind", "count_order"}, {"order", 2}};
  json total = {{"kind", "total_components"}};
  json gauss = {{"kind", "gaussian"}, {"s", 0.8}};
  struct Case {
    const char* label;
    json phi, stat;
  };
  std::vector<Case> cases{{"eta1/gilbert", Gilbert(1.0), eta1},
                          {"eta2/gilbert", Gilbert(1.0), eta2},
                          {"total/gilbert", Gilbert(1.0), total},
                          {"eta1/gaussian", gauss, eta1},
                          {"total/gaussian", gauss, total}};
  bool pass = true;
  std::string detail;
  std::uint64_t seed = 500;
  for (const auto& c : cases) {
    json cfg = Config(c.label, c.phi, 1.0, {4.0}, json::array({c.stat}), 1000, ++seed);
    cfg["bounds"] = {{"terms", {"poincare"}}, {"outer", 2000}};
    auto r = Run(cfg, Command::kBounds);
    const auto& b = r.rungs[0].bounds.at(0);
    pass = pass && b.holds;
    detail += (detail.empty() ? "" : "; ") + std::string(c.label) + Fmt(" var %.3f <= %.3f", b.empirical, b.value);
  }
  return {pass, detail};
}

// 6. Per-sample first and second difference bounds.
Outcome DifferenceBounds() {
  json stat = {{"kind", "weighted"},
               {"classes", {"vertex", "edge", "path3"}},
               {"weights", {1.0, -2.0, 0.5}}};
  bool pass = true;
  std::string detail;
  std::uint64_t seed = 600;
  for (json phi : {Gilbert(1.0), json{{"kind", "gaussian"}, {"s", 0.7}}}) {
    json cfg = Config("c6", phi, 1.0, {2.5}, json::array({stat}), 2, ++seed);
    cfg["bounds"] = {{"terms", {"difference"}}, {"draws", 10000}};
    auto r = Run(cfg, Command::kBounds);
    if (r.rungs[0].bounds.size() != 2) return {false, "expected two difference-bound records"};
    for (const auto& b : r.rungs[0].bounds) {
      pass = pass && b.holds && b.budget == 10000;
      detail += (detail.empty() ? "" : "; ") + phi["kind"].get<std::string>() + " " + b.term + " violations " +
                std::to_string(static_cast<long long>(b.empirical)) + "/" + std::to_string(b.budget);
    }
  }
  return {pass, detail};
}

// 7. sigma^(1,1) and sigma^(1,2) against empirical covariances at r(W) = 10.
Outcome CovarianceCrossValidation() {
  json stats = json::array({{{"kind", "count_order"}, {"order", 1}}, {{"kind", "count_order"}, {"order", 2}}});
  auto r = Run(Config("c7", Gilbert(1.0), 1.0, {10.0}, stats, 2000, 707), Command::kCovariance);
  bool pass = true;
  std::string detail;
  for (const auto& m : r.rungs[0].moments) {
    if (m.quantity != "asymptotic_covariance") continue;
    if (m.statistic != "order1:lexmin") continue;
    pass = pass && m.agrees;
    detail += (detail.empty() ? "" : "; ") + m.statistic + "|" + m.other +
              Fmt(": analytic %.5f +- %.5f, empirical %.5f +- %.5f", m.value, m.std_error, m.empirical,
                  m.empirical_se);
  }
  return {pass, detail};
}

// 8. Analytic covariance over (vertex, edge, path3) is positive definite.
Outcome PositiveDefinite() {
  std::vector<ClusterSpec> specs{ClusterSpec::Of(GraphClass::Vertex()), ClusterSpec::Of(GraphClass::Edge()),
                                 ClusterSpec::Of(GraphClass::Path(3))};
  McOptions mc;
  mc.samples = 2'000'000;
  mc.seed = 808;
  mc.threads = Threads();
  auto m = AsyCovMatrix(specs, ConnectionFunction::Gilbert(1.0), 1.0, 2, mc);
  auto ev = MinEigenvalue(m);
  return {ev.value > 3 * ev.std_error, Fmt("min eigenvalue %.6f, propagated error %.6f", ev.value, ev.std_error)};
}

// 9. d_K at the largest rung and the log-log rate slope.
Outcome CltRate() {
  json stats = json::array({{{"kind", "count_order"}, {"order", 1}}});
  auto r = Run(Config("c9", Gilbert(1.0), 1.0, {5.0, 10.0, 20.0}, stats, 2000, 909), Command::kClt);
  const double dk = r.rungs.back().distances.at(0).kolmogorov;
  if (r.rate_fits.empty()) return {false, "no rate fit"};
  const auto& f = r.rate_fits[0];
  std::string rungs;
  for (const auto& rung : r.rungs) rungs += Fmt("%.4f ", rung.distances[0].kolmogorov);
  return {dk < 0.05 && f.slope >= -0.75 && f.slope <= -0.25,
          "d_K per rung " + rungs + Fmt("; slope %.3f [%.3f, %.3f]", f.slope, f.slope_ci_low, f.slope_ci_high)};
}

// 10. Total component count in the subcritical regime.
Outcome TotalComponents() {
  json stats = json::array({{{"kind", "total_components"}}});
  json cfg = Config("c10", Gilbert(1.0), 0.5 / std::numbers::pi, {5.0, 10.0, 20.0}, stats, 2000, 1010);
  cfg["partial_sums"] = 3;
  cfg["standardization"] = {{"source", "pilot"}, {"pilot_replicates", 500}};
  auto r = Run(cfg, Command::kTotal);
  const auto& top = r.rungs.back();
  const double dk = top.distances.at(0).kolmogorov;
  double change = 0, s3 = 0, emp = 0;
  for (const auto& m : r.moments) {
    if (m.quantity == "variance_ratio_change") change = m.value;
    if (m.quantity == "sigma_total_partial" && m.other == "m=3") {
      s3 = m.value;
      emp = m.empirical;
    }
  }
  const double rel = std::abs(s3 - emp) / emp;
  return {change < 0.10 && dk < 0.07 && rel <= 0.15,
          Fmt("top-rung change %.4f, d_K %.4f, S_3 %.5f vs Var/vol %.5f", change, dk, s3, emp) +
              Fmt(" (rel %.3f)", rel)};
}

// 11. Birth-time representation of Var eta_1(W) on a box of side 3.
Outcome BirthTime() {
  json stats = json::array({{{"kind", "count_order"}, {"order", 1}, {"mode", "inside"}}});
  json cfg = Config("c11", Gilbert(1.0), 1.0, {1.5}, stats, 20000, 1111);
  cfg["bounds"] = {{"terms", {"birth_time"}}, {"outer", 10000}, {"inner", 16}};
  auto r = Run(cfg, Command::kBounds);
  const auto& b = r.rungs[0].bounds.at(0);
  const double rel = std::abs(b.value - b.empirical) / b.empirical;
  return {rel <= 0.15, Fmt("nested MC %.4f +- %.4f, empirical %.4f +- %.4f", b.value, b.std_error, b.empirical,
                           b.empirical_se) +
                           Fmt(" (rel %.3f)", rel)};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes the result tree through the C API with the given thread count.
std::string EmitVia(const std::string& config, int threads, const fs::path& dir) {
  rcm_scenario* s = nullptr;
  rcm_result* r = nullptr;
  char* path = nullptr;
  if (rcm_scenario_parse(config.c_str(), &s) != RCM_OK) return "";
  bool ok = rcm_run(s, "clt", threads, &r) == RCM_OK && rcm_result_emit(r, dir.c_str(), &path) == RCM_OK;
  std::string out = ok ? path : "";
  rcm_string_free(path);
  rcm_result_free(r);
  rcm_scenario_free(s);
  return out;
}

// 12. Mecke identity for the degree, and serial versus threaded output bytes.
Outcome MeckeAndReproducibility() {
  // sum_{x in eta cap W} deg(x) against beta int_W E deg_{eta + x}(x) dx.
  FunctionalSpec spec;
  spec.statistic = Statistic::CountOrder(1);
  spec.window = Window::Box(2, 3.0);
  spec.phi = ConnectionFunction::Gilbert(1.0);
  const std::uint64_t n = 20000;
  RunningStats lhs, rhs;
  Engine rng = MakeEngine(1212);
  for (std::uint64_t s = 0; s < n; ++s) {
    RcmGraph g = spec.Sample(DeriveSeed(1212, s));
    double sum = 0;
    for (std::size_t v = 0; v < g.size(); ++v) {
      if (spec.window.Contains(g.points()[v])) sum += static_cast<double>(g.degree(v));
    }
    lhs.Add(sum);
    std::vector<double> x(2);
    spec.window.SampleUniform(rng, x);
    rhs.Add(spec.beta * spec.window.Volume() * LocalFunctional(spec, g).AddedDegree(x, 0));
  }
  const double se = std::hypot(lhs.std_error(), rhs.std_error());
  const bool mecke = std::abs(lhs.mean() - rhs.mean()) <= 3 * se;

  unsetenv("RCMLAB_THREADS");
  json stats = json::array({{{"kind", "points"}}, {{"kind", "count_order"}, {"order", 2}}});
  const std::string cfg = Config("c12", Gilbert(1.0), 1.0, {3.0, 5.0}, stats, 300, 1213).dump();
  fs::path base = fs::temp_directory_path() / "rcmlab-acceptance-12";
  fs::remove_all(base);
  std::string a = EmitVia(cfg, 1, base / "serial"), b = EmitVia(cfg, 8, base / "threads8");
  std::size_t files = 0, differ = 0;
  if (!a.empty() && !b.empty()) {
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (!e.is_regular_file()) continue;
      ++files;
      if (Slurp(e.path()) != Slurp(fs::path(b) / fs::relative(e.path(), a))) ++differ;
    }
  }
  const bool same = files > 0 && differ == 0;
  return {mecke && same, Fmt("Mecke %.4f vs %.4f (se %.4f)", lhs.mean(), rhs.mean(), se) + "; " +
                             std::to_string(files) + " files, " + std::to_string(differ) +
                             " differ between 1 and 8 threads"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"isolated-vertex intensity", IsolatedVertexIntensity},
      {"coupling monotonicity", CouplingMonotonicity},
      {"census oracle", CensusOracle},
      {"structural identities", StructuralIdentities},
      {"Poincare inequality", Poincare},
      {"per-sample difference bounds", DifferenceBounds},
      {"asymptotic covariance cross-validation", CovarianceCrossValidation},
      {"positive definiteness", PositiveDefinite},
      {"CLT and rate", CltRate},
      {"total components", TotalComponents},
      {"birth-time variance", BirthTime},
      {"Mecke identity and reproducibility", MeckeAndReproducibility}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %s: %s  (%s; %.1fs)\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
