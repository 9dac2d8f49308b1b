#include "rcmlab/rcmlab.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include <json.hpp>

#include "rcmlab/census.hpp"
#include "rcmlab/errors.hpp"
#include "rcmlab/experiments.hpp"
#include "rcmlab/parallel.hpp"
#include "rcmlab/scenario.hpp"

struct rcm_scenario {
  rcm::Scenario s;
};

struct rcm_result {
  rcm::ExperimentResult r;
};

struct rcm_graph {
  rcm::RcmGraph g;
  rcm::Window w;
  int k;
};

namespace {

thread_local std::string last_error;

template <class F>
rcm_status Guard(F&& f) {
  try {
    f();
    last_error.clear();
    return RCM_OK;
  } catch (const rcm::ConfigError& e) {
    last_error = e.what();
    return RCM_CONFIG;
  } catch (const rcm::PreconditionError& e) {
    last_error = e.what();
    return RCM_NUMERIC;
  } catch (const nlohmann::json::exception& e) {
    last_error = e.what();
    return RCM_CONFIG;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return RCM_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return RCM_IO;
  } catch (...) {
    last_error = "unknown error";
    return RCM_INTERNAL;
  }
}

rcm_status Invalid(const char* what) {
  last_error = what;
  return RCM_INVALID_ARGUMENT;
}

char* Dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* rcm_version(void) { return RCMLAB_VERSION; }

const char* rcm_last_error(void) { return last_error.c_str(); }

rcm_status rcm_scenario_load(const char* path, rcm_scenario** out) {
  if (!path || !out) return Invalid("null argument");
  return Guard([&] { *out = new rcm_scenario{rcm::LoadScenario(path)}; });
}

rcm_status rcm_scenario_parse(const char* json_text, rcm_scenario** out) {
  if (!json_text || !out) return Invalid("null argument");
  return Guard([&] { *out = new rcm_scenario{rcm::ParseScenarioText(json_text)}; });
}

rcm_status rcm_scenario_set_seed(rcm_scenario* s, uint64_t seed) {
  if (!s) return Invalid("null scenario");
  return Guard([&] { rcm::OverrideSeed(s->s, seed); });
}

rcm_status rcm_scenario_hash(const rcm_scenario* s, char out[17]) {
  if (!s || !out) return Invalid("null argument");
  return Guard([&] {
    std::string h = s->s.Hash();
    std::memcpy(out, h.c_str(), 17);
  });
}

void rcm_scenario_free(rcm_scenario* s) { delete s; }

rcm_status rcm_run(const rcm_scenario* s, const char* command, int threads, rcm_result** out) {
  if (!s || !command || !out) return Invalid("null argument");
  return Guard([&] {
    rcm::RunOptions opts;
    opts.threads = rcm::ResolveThreads(threads);
    *out = new rcm_result{rcm::RunExperiment(s->s, rcm::ParseCommand(command), opts)};
  });
}

rcm_status rcm_result_emit(const rcm_result* r, const char* dir, char** path_out) {
  if (!r || !dir) return Invalid("null argument");
  return Guard([&] {
    std::string path = rcm::Emit(r->r, dir);
    if (path_out) *path_out = Dup(path);
  });
}

rcm_status rcm_result_json(const rcm_result* r, char** json_out) {
  if (!r || !json_out) return Invalid("null argument");
  return Guard([&] { *json_out = Dup(rcm::ToJson(r->r).dump()); });
}

void rcm_result_free(rcm_result* r) { delete r; }

rcm_status rcm_graph_sample(const rcm_scenario* s, size_t rung, uint64_t seed, rcm_graph** out) {
  if (!s || !out) return Invalid("null argument");
  if (rung >= s->s.extents.size()) return Invalid("rung out of range");
  return Guard([&] {
    const auto& sc = s->s;
    rcm::Window w = sc.WindowAt(rung);
    auto pts = std::make_shared<const rcm::PointSet>(rcm::SamplePoisson(w, sc.Padding(), sc.beta, seed));
    rcm::RcmGraph g = rcm::BuildRcm(pts, sc.phi, rcm::MarksForSeed(seed), rcm::BuildOptions{sc.eps_trunc});
    *out = new rcm_graph{std::move(g), w, sc.CensusOrder()};
  });
}

size_t rcm_graph_size(const rcm_graph* g) { return g ? g->g.size() : 0; }

int rcm_graph_dim(const rcm_graph* g) { return g ? g->g.points().dim() : 0; }

size_t rcm_graph_coords(const rcm_graph* g, double* out, size_t capacity) {
  if (!g) return 0;
  const auto& c = g->g.points().coords();
  if (out) std::memcpy(out, c.data(), std::min(capacity, c.size()) * sizeof(double));
  return c.size();
}

size_t rcm_graph_edges(const rcm_graph* g, int64_t* out, size_t capacity) {
  if (!g) return 0;
  size_t n = 0;
  for (std::size_t v = 0; v < g->g.size(); ++v) {
    for (int u : g->g.neighbors(v)) {
      if (static_cast<std::size_t>(u) <= v) continue;
      if (out && n < capacity) {
        out[2 * n] = static_cast<int64_t>(v);
        out[2 * n + 1] = u;
      }
      ++n;
    }
  }
  return n;
}

rcm_status rcm_graph_census_json(const rcm_graph* g, char** json_out) {
  if (!g || !json_out) return Invalid("null argument");
  return Guard([&] {
    rcm::CensusReport c = rcm::Census(g->g, g->w, g->k);
    nlohmann::json classes = nlohmann::json::object();
    for (const auto& [cls, n] : c.lexmin_by_class) classes[cls.Id()] = n;
    nlohmann::json inside = nlohmann::json::object();
    for (const auto& [cls, n] : c.inside_by_class) inside[cls.Id()] = n;
    nlohmann::json j = {{"k_max", c.k_max},
                        {"lexmin_by_class", classes},
                        {"inside_by_class", inside},
                        {"lexmin_by_order", c.lexmin_by_order},
                        {"inside_by_order", c.inside_by_order},
                        {"total_inside", c.total_inside},
                        {"boundary_touching", c.boundary_touching},
                        {"oversize", c.oversize},
                        {"points_in_window", c.points_in_window},
                        {"truncated", c.truncated}};
    *json_out = Dup(j.dump());
  });
}

void rcm_graph_free(rcm_graph* g) { delete g; }

void rcm_string_free(char* s) { std::free(s); }

}  // extern "C"
