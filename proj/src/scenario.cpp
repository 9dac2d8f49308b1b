#include "rcmlab/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "rcmlab/errors.hpp"

namespace rcm {

using nlohmann::json;

namespace {

[[noreturn]] void Fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

const json& Require(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) Fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) Fail(path + "." + key, "missing field");
  return *it;
}

double Number(const json& j, const std::string& path) {
  if (!j.is_number()) Fail(path, "expected a number");
  return j.get<double>();
}

std::uint64_t Unsigned(const json& j, const std::string& path) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    Fail(path, "expected a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

int Int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) Fail(path, "expected an integer");
  return j.get<int>();
}

std::string String(const json& j, const std::string& path) {
  if (!j.is_string()) Fail(path, "expected a string");
  return j.get<std::string>();
}

template <class F>
auto WithPath(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const PreconditionError& e) {
    throw PreconditionError(path + ": " + e.what());
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw ConfigError(path + ": " + msg);
  }
}

CountMode ParseMode(const json& j, const std::string& path) {
  if (!j.contains("mode")) return CountMode::kLexmin;
  std::string m = String(j["mode"], path + ".mode");
  if (m == "lexmin") return CountMode::kLexmin;
  if (m == "inside") return CountMode::kInside;
  Fail(path + ".mode", "expected lexmin or inside");
}

GraphClass ParseClass(const json& j, const std::string& path) {
  return WithPath(path, [&] { return GraphClass::Parse(String(j, path)); });
}

StatisticConfig ParseStatistic(const json& j, const std::string& path) {
  StatisticConfig out;
  std::string kind = String(Require(j, "kind", path), path + ".kind");
  CountMode mode = ParseMode(j, path);
  if (kind == "points") {
    out.statistic = Statistic::Points();
  } else if (kind == "total_components") {
    out.statistic = Statistic::TotalComponents();
  } else if (kind == "count_class") {
    out.statistic = Statistic::CountClass(ParseClass(Require(j, "class", path), path + ".class"), mode);
  } else if (kind == "count_order") {
    int k = Int(Require(j, "order", path), path + ".order");
    if (k < 1 || k > kMaxOrder) Fail(path + ".order", "expected 1..8");
    out.statistic = Statistic::CountOrder(k, mode);
  } else if (kind == "weighted") {
    const json& a = Require(j, "weights", path);
    const json& c = Require(j, "classes", path);
    if (!a.is_array() || !c.is_array()) Fail(path, "weights and classes must be arrays");
    std::vector<double> w;
    std::vector<GraphClass> cls;
    for (std::size_t i = 0; i < a.size(); ++i) w.push_back(Number(a[i], path + ".weights[" + std::to_string(i) + "]"));
    for (std::size_t i = 0; i < c.size(); ++i) cls.push_back(ParseClass(c[i], path + ".classes[" + std::to_string(i) + "]"));
    out.statistic = WithPath(path, [&] { return Statistic::Weighted(w, cls, mode); });
  } else {
    Fail(path + ".kind", "unknown statistic kind '" + kind + "'");
  }
  if (j.contains("model")) {
    std::string m = String(j["model"], path + ".model");
    if (m == "psi") out.on_psi = true;
    else if (m != "phi") Fail(path + ".model", "expected phi or psi");
  }
  return out;
}

json StatisticToJson(const StatisticConfig& c) {
  const Statistic& s = c.statistic;
  json j;
  const char* mode = s.mode == CountMode::kLexmin ? "lexmin" : "inside";
  switch (s.kind) {
    case StatisticKind::kPoints: j["kind"] = "points"; break;
    case StatisticKind::kTotalComponents: j["kind"] = "total_components"; break;
    case StatisticKind::kCountClass:
      j = {{"kind", "count_class"}, {"class", s.classes.front().Id()}, {"mode", mode}};
      break;
    case StatisticKind::kCountOrder:
      j = {{"kind", "count_order"}, {"order", s.order}, {"mode", mode}};
      break;
    case StatisticKind::kWeighted: {
      j = {{"kind", "weighted"}, {"weights", s.weights}, {"mode", mode}};
      json cls = json::array();
      for (const auto& g : s.classes) cls.push_back(g.Id());
      j["classes"] = cls;
      break;
    }
  }
  j["model"] = c.on_psi ? "psi" : "phi";
  return j;
}

const std::set<std::string> kTopKeys{"name",         "dim",          "beta",       "phi",       "psi",
                                     "window",       "statistics",   "replicates", "seed_base", "budgets",
                                     "eps_trunc",    "standardization", "partial_sums", "bounds"};
const std::set<std::string> kBoundTerms{"poincare", "birth_time", "fourth_moment", "gamma", "difference"};

void RejectUnknown(const json& j, const std::set<std::string>& keys, const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!keys.count(it.key())) Fail(path + "." + it.key(), "unknown field");
  }
}

json Normalize(const Scenario& s) {
  json doc;
  doc["name"] = s.name;
  doc["dim"] = s.dim;
  doc["beta"] = s.beta;
  doc["phi"] = ConnectionFunctionToJson(s.phi);
  if (s.psi) doc["psi"] = ConnectionFunctionToJson(*s.psi);
  doc["window"] = {{"shape", s.shape == WindowShape::kBox ? "box" : "ball"}, {"extents", s.extents}};
  json stats = json::array();
  for (const auto& c : s.statistics) stats.push_back(StatisticToJson(c));
  doc["statistics"] = stats;
  doc["replicates"] = s.replicates;
  doc["seed_base"] = s.seed_base;
  doc["eps_trunc"] = s.eps_trunc;
  doc["standardization"] = {{"source", s.standardization}, {"pilot_replicates", s.pilot_replicates}};
  doc["partial_sums"] = s.partial_sums;
  doc["budgets"] = {{"mc_samples", s.mc_samples}};
  doc["bounds"] = {{"terms", s.bounds.terms},
                   {"outer", s.bounds.budget.outer},
                   {"points", s.bounds.budget.points},
                   {"inner", s.bounds.budget.inner},
                   {"draws", s.bounds.draws}};
  return doc;
}

}  // namespace

ConnectionFunction ParseConnectionFunction(const json& j, const std::string& path) {
  std::string kind = String(Require(j, "kind", path), path + ".kind");
  auto num = [&](const char* key) { return Number(Require(j, key, path), path + "." + key); };
  return WithPath(path, [&] {
    if (kind == "gilbert") return ConnectionFunction::Gilbert(num("r"));
    if (kind == "scaled_indicator") return ConnectionFunction::ScaledIndicator(num("p"), num("r"));
    if (kind == "exponential") return ConnectionFunction::Exponential(num("theta"));
    if (kind == "gaussian") return ConnectionFunction::Gaussian(num("s"));
    Fail(path + ".kind", "unknown connection function '" + kind + "'");
  });
}

json ConnectionFunctionToJson(const ConnectionFunction& phi) {
  const auto& p = phi.params();
  switch (phi.kind()) {
    case ConnectionKind::kGilbert: return {{"kind", "gilbert"}, {"r", p[0]}};
    case ConnectionKind::kScaledIndicator: return {{"kind", "scaled_indicator"}, {"p", p[0]}, {"r", p[1]}};
    case ConnectionKind::kExponential: return {{"kind", "exponential"}, {"theta", p[0]}};
    case ConnectionKind::kGaussian: return {{"kind", "gaussian"}, {"s", p[0]}};
  }
  return {};
}

Scenario ParseScenario(const json& config) {
  const std::string root = "config";
  if (!config.is_object()) Fail(root, "expected a JSON object");
  RejectUnknown(config, kTopKeys, root);
  Scenario s;
  if (config.contains("name")) s.name = String(config["name"], "name");
  s.dim = Int(Require(config, "dim", root), "dim");
  if (s.dim < 1 || s.dim > 3) Fail("dim", "expected 1, 2 or 3");
  s.beta = Number(Require(config, "beta", root), "beta");
  if (!(s.beta > 0.0) || !std::isfinite(s.beta)) Fail("beta", "must be finite and > 0");
  s.phi = ParseConnectionFunction(Require(config, "phi", root), "phi");
  if (config.contains("psi")) {
    s.psi = ParseConnectionFunction(config["psi"], "psi");
    if (!s.phi.Dominates(*s.psi)) Fail("psi", "psi must satisfy psi <= phi");
  }

  const json& w = Require(config, "window", root);
  std::string shape = w.contains("shape") ? String(w["shape"], "window.shape") : "box";
  if (shape == "box") s.shape = WindowShape::kBox;
  else if (shape == "ball") s.shape = WindowShape::kBall;
  else Fail("window.shape", "expected box or ball");
  const json& ext = Require(w, "extents", "window");
  if (!ext.is_array() || ext.empty()) Fail("window.extents", "expected a nonempty array");
  for (std::size_t i = 0; i < ext.size(); ++i) {
    std::string p = "window.extents[" + std::to_string(i) + "]";
    double e = Number(ext[i], p);
    if (!(e > 0.0) || !std::isfinite(e)) Fail(p, "must be finite and > 0");
    if (!s.extents.empty() && e <= s.extents.back()) Fail(p, "ladder must be strictly increasing");
    s.extents.push_back(e);
  }

  if (config.contains("statistics")) {
    const json& st = config["statistics"];
    if (!st.is_array()) Fail("statistics", "expected an array");
    for (std::size_t i = 0; i < st.size(); ++i) {
      auto c = ParseStatistic(st[i], "statistics[" + std::to_string(i) + "]");
      if (c.on_psi && !s.psi) Fail("statistics[" + std::to_string(i) + "].model", "psi is not configured");
      s.statistics.push_back(std::move(c));
    }
  }
  if (config.contains("replicates")) s.replicates = Unsigned(config["replicates"], "replicates");
  if (s.replicates < 2) Fail("replicates", "must be >= 2");
  if (config.contains("seed_base")) s.seed_base = Unsigned(config["seed_base"], "seed_base");
  if (config.contains("eps_trunc")) {
    s.eps_trunc = Number(config["eps_trunc"], "eps_trunc");
    if (!(s.eps_trunc > 0.0 && s.eps_trunc < 1.0)) Fail("eps_trunc", "expected a value in (0, 1)");
  }
  if (config.contains("budgets")) {
    const json& b = config["budgets"];
    RejectUnknown(b, {"mc_samples"}, "budgets");
    if (b.contains("mc_samples")) s.mc_samples = Unsigned(b["mc_samples"], "budgets.mc_samples");
    if (s.mc_samples == 0) Fail("budgets.mc_samples", "must be positive");
  }
  if (config.contains("standardization")) {
    const json& st = config["standardization"];
    RejectUnknown(st, {"source", "pilot_replicates"}, "standardization");
    if (st.contains("source")) s.standardization = String(st["source"], "standardization.source");
    if (s.standardization != "analytic" && s.standardization != "pilot") {
      Fail("standardization.source", "expected analytic or pilot");
    }
    if (st.contains("pilot_replicates")) {
      s.pilot_replicates = Unsigned(st["pilot_replicates"], "standardization.pilot_replicates");
    }
    if (s.pilot_replicates < 2) Fail("standardization.pilot_replicates", "must be >= 2");
  }
  if (config.contains("partial_sums")) {
    s.partial_sums = Int(config["partial_sums"], "partial_sums");
    if (s.partial_sums < 1 || s.partial_sums > 6) Fail("partial_sums", "expected 1..6");
  }
  if (config.contains("bounds")) {
    const json& b = config["bounds"];
    RejectUnknown(b, {"terms", "outer", "points", "inner", "draws"}, "bounds");
    if (b.contains("terms")) {
      if (!b["terms"].is_array()) Fail("bounds.terms", "expected an array");
      s.bounds.terms.clear();
      for (std::size_t i = 0; i < b["terms"].size(); ++i) {
        std::string p = "bounds.terms[" + std::to_string(i) + "]";
        std::string t = String(b["terms"][i], p);
        if (!kBoundTerms.count(t)) Fail(p, "unknown bound term '" + t + "'");
        s.bounds.terms.push_back(t);
      }
    }
    if (b.contains("outer")) s.bounds.budget.outer = Unsigned(b["outer"], "bounds.outer");
    if (b.contains("points")) s.bounds.budget.points = Int(b["points"], "bounds.points");
    if (b.contains("inner")) s.bounds.budget.inner = Int(b["inner"], "bounds.inner");
    if (b.contains("draws")) s.bounds.draws = Unsigned(b["draws"], "bounds.draws");
    if (s.bounds.budget.outer == 0) Fail("bounds.outer", "must be positive");
    if (s.bounds.budget.points < 1) Fail("bounds.points", "must be positive");
    if (s.bounds.budget.inner < 4) Fail("bounds.inner", "must be >= 4");
  }
  s.document = Normalize(s);
  return s;
}

Scenario ParseScenarioText(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return ParseScenario(j);
}

Scenario LoadScenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseScenarioText(ss.str());
}

void OverrideSeed(Scenario& s, std::uint64_t seed) {
  s.seed_base = seed;
  s.document = Normalize(s);
}

Window Scenario::WindowAt(std::size_t rung) const {
  if (rung >= extents.size()) throw ConfigError("rung index out of range");
  return shape == WindowShape::kBox ? Window::Box(dim, extents[rung]) : Window::Ball(dim, extents[rung]);
}

int Scenario::CensusOrder() const {
  int k = 1;
  for (const auto& c : statistics) k = std::max(k, c.statistic.MaxOrder());
  return std::min(k, kMaxOrder);
}

std::uint64_t Fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Scenario::Hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(Fnv1a64(document.dump())));
  return buf;
}

}  // namespace rcm
