/* SPDX-License-Identifier: Apache-2.0 */
/* C interface of libisac. Every call returns an isac_status; on failure the message is available
 * from isac_last_error() on the calling thread until the next failing call there. Strings returned
 * through char** are owned by the caller and released with isac_string_free. */
#ifndef ISAC_ISAC_H
#define ISAC_ISAC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ISAC_API __declspec(dllexport)
#else
#define ISAC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum isac_status {
    ISAC_OK = 0,
    ISAC_ERR_INVALID_ARGUMENT = 1,
    ISAC_ERR_CONFIG = 2,
    ISAC_ERR_IO = 3,
    ISAC_ERR_INFEASIBLE = 4,
    ISAC_ERR_NUMERICAL = 5,
    ISAC_ERR_STATE = 6,
    ISAC_ERR_NOT_FOUND = 7,
    ISAC_ERR_RANGE_UNDERFLOW = 8,
    ISAC_ERR_SINGULAR = 9,
    ISAC_ERR_SHAPE = 10,
    ISAC_ERR_INTERNAL = 100
} isac_status;

typedef struct isac_spec isac_spec;
typedef struct isac_env isac_env;

/* Progress lines from long-running verbs; may be NULL. */
typedef void (*isac_progress_fn)(const char* message, void* user);

ISAC_API const char* isac_version(void);
ISAC_API const char* isac_last_error(void);
ISAC_API const char* isac_status_name(isac_status s);
ISAC_API void isac_string_free(char* s);

/* ---- experiment specs ---- */

/* Unknown keys are rejected; missing keys keep their defaults. The spec is validated. */
ISAC_API isac_status isac_spec_from_json(const char* json, isac_spec** out);
ISAC_API isac_status isac_spec_load(const char* path, isac_spec** out);
ISAC_API void isac_spec_free(isac_spec* spec);
/* Merges a JSON object of spec fields into the spec and revalidates; the spec is unchanged on failure. */
ISAC_API isac_status isac_spec_merge_json(isac_spec* spec, const char* json);
ISAC_API isac_status isac_spec_to_json(const isac_spec* spec, char** out);
/* 16 hex digits plus the terminator. */
ISAC_API isac_status isac_spec_hash(const isac_spec* spec, char out[17]);

/* ---- verbs ----
 * Each writes files under the spec output directory and returns a JSON array of written paths. */

ISAC_API isac_status isac_generate(const isac_spec* spec, char** paths_json);
ISAC_API isac_status isac_train(const isac_spec* spec, isac_progress_fn progress, void* user, char** paths_json);
/* Sweep over the spec grid with the spec method; "evaluate" and "sweep" share this entry point. */
ISAC_API isac_status isac_sweep(const isac_spec* spec, char** paths_json);
ISAC_API isac_status isac_boundary(const isac_spec* spec, char** paths_json);
ISAC_API isac_status isac_bench(const isac_spec* spec, char** paths_json);
/* Runs the spec task and adds the placeholder series of the external baselines. */
ISAC_API isac_status isac_emit_plots_data(const isac_spec* spec, isac_progress_fn progress, void* user,
                                          char** paths_json);

/* ---- single environments ----
 * Episodes of one scenario under the spec configuration and psi. Observations and actions travel as
 * JSON: {"s_h": [[...]], "s_p": [[[...]], ...]} and {"select": [...], "phase": [...], "digital": [...]}. */

ISAC_API isac_status isac_env_create(const isac_spec* spec, uint64_t scenario_seed, uint64_t episode_seed,
                                     isac_env** out);
ISAC_API void isac_env_free(isac_env* env);
ISAC_API isac_status isac_env_reset(isac_env* env, char** obs_json);
/* info_json receives {"subframe", "reward", "se", "crlb", ...}; done is set to 1 after the last subframe. */
ISAC_API isac_status isac_env_step(isac_env* env, const char* action_json, char** obs_json, char** info_json,
                                   int* done);
ISAC_API isac_status isac_env_random_action(isac_env* env, char** action_json);

#ifdef __cplusplus
}
#endif

#endif /* ISAC_ISAC_H */
