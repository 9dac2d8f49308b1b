#ifndef RCMLAB_RCMLAB_H
#define RCMLAB_RCMLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(RCMLAB_BUILDING)
#define RCM_API __attribute__((visibility("default")))
#else
#define RCM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rcm_status {
  RCM_OK = 0,
  RCM_INVALID_ARGUMENT = 1,
  RCM_CONFIG = 2,
  // A numerical precondition failed (e.g. m_phi = 0).
  RCM_NUMERIC = 3,
  RCM_IO = 4,
  RCM_INTERNAL = 5
} rcm_status;

typedef struct rcm_scenario rcm_scenario;
typedef struct rcm_result rcm_result;
typedef struct rcm_graph rcm_graph;

RCM_API const char* rcm_version(void);
// Message of the last failure on this thread; "" after success.
RCM_API const char* rcm_last_error(void);

RCM_API rcm_status rcm_scenario_load(const char* path, rcm_scenario** out);
RCM_API rcm_status rcm_scenario_parse(const char* json_text, rcm_scenario** out);
RCM_API rcm_status rcm_scenario_set_seed(rcm_scenario* s, uint64_t seed);
// 16 hex digits plus NUL.
RCM_API rcm_status rcm_scenario_hash(const rcm_scenario* s, char out[17]);
RCM_API void rcm_scenario_free(rcm_scenario* s);

// command: sample, census, expectation, covariance, clt, bounds, total.
// threads < 1 runs serially; RCMLAB_THREADS overrides either way.
RCM_API rcm_status rcm_run(const rcm_scenario* s, const char* command, int threads, rcm_result** out);
// Writes the result tree under dir; *path_out (optional) receives <dir>/<hash>.
RCM_API rcm_status rcm_result_emit(const rcm_result* r, const char* dir, char** path_out);
RCM_API rcm_status rcm_result_json(const rcm_result* r, char** json_out);
RCM_API void rcm_result_free(rcm_result* r);

// One phi-graph on rung `rung` of the scenario's ladder.
RCM_API rcm_status rcm_graph_sample(const rcm_scenario* s, size_t rung, uint64_t seed, rcm_graph** out);
RCM_API size_t rcm_graph_size(const rcm_graph* g);
RCM_API int rcm_graph_dim(const rcm_graph* g);
// Copies up to `capacity` coordinates; returns the number available.
RCM_API size_t rcm_graph_coords(const rcm_graph* g, double* out, size_t capacity);
// Copies up to `capacity` (u, v) pairs with u < v; returns the edge count.
RCM_API size_t rcm_graph_edges(const rcm_graph* g, int64_t* out, size_t capacity);
RCM_API rcm_status rcm_graph_census_json(const rcm_graph* g, char** json_out);
RCM_API void rcm_graph_free(rcm_graph* g);

RCM_API void rcm_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
