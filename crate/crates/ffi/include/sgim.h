#ifndef SGIM_H
#define SGIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Number of outcome subspaces, the length of the per-subspace arrays.
#define SGIM_SUBSPACES 6

// Result code of every call.
typedef enum SgimStatus {
  SGIM_STATUS_OK = 0,
  SGIM_STATUS_NULL_POINTER = 1,
  SGIM_STATUS_INVALID_ARGUMENT = 2,
  SGIM_STATUS_INVALID_CONFIG = 3,
  SGIM_STATUS_IO = 4,
  // Nothing in memory to resolve the goal from.
  SGIM_STATUS_COLD_START = 5,
  // Unexpected failure, including a caught panic.
  SGIM_STATUS_INTERNAL = 6,
} SgimStatus;

// Opaque learner handle.
typedef struct SgimLearner SgimLearner;

// Evaluation of a learner's memory against its testbench.
typedef struct SgimEvaluation {
  uint64_t iteration;
  double global;
  // Mean error per outcome subspace; valid where `has_subspace` is 1.
  double per_subspace[SGIM_SUBSPACES];
  uint8_t has_subspace[SGIM_SUBSPACES];
  uint64_t memory_size;
} SgimEvaluation;

// Table geometry; pass NULL to use the default unit table.
typedef struct SgimTable {
  double origin_x;
  double origin_y;
  double width;
  double height;
  double object_radius;
} SgimTable;

// Normalized sound parameters; `t` is meaningful only when `has_t` is 1.
typedef struct SgimSound {
  double f;
  double l;
  double b;
  double t;
  uint8_t has_t;
} SgimSound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread (empty if none). The
// pointer stays valid until the next failing call on the same thread.
const char *sgim_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *sgim_version(void);

// Creates a learner with the default configuration of `profile`
// ("simulation", "physical" or "left-arm") and `testbench_per_subspace`
// evaluation goals per subspace (0 keeps the default).
//
// # Safety
// `profile` and `variant` must be NUL-terminated strings; `out` must be a
// valid pointer to writable storage.
enum SgimStatus sgim_learner_new(const char *profile,
                                 const char *variant,
                                 uint64_t seed,
                                 uint32_t testbench_per_subspace,
                                 struct SgimLearner **out);

// Creates a learner from a TOML configuration file.
//
// # Safety
// `path` and `variant` must be NUL-terminated strings; `out` must be a
// valid pointer to writable storage.
enum SgimStatus sgim_learner_from_config(const char *path,
                                         const char *variant,
                                         uint64_t seed,
                                         struct SgimLearner **out);

// Releases a learner; NULL is ignored.
//
// # Safety
// `learner` must come from this library and not be used afterwards.
void sgim_learner_free(struct SgimLearner *learner);

// Runs `iterations` learning episodes.
//
// # Safety
// `learner` must be a live handle.
enum SgimStatus sgim_learner_step(struct SgimLearner *learner, uint32_t iterations);

// Number of episodes run so far.
//
// # Safety
// `learner` must be a live handle; `out` must be writable.
enum SgimStatus sgim_learner_iteration(const struct SgimLearner *learner, uint64_t *out);

// Evaluates the learner against its testbench without changing it.
//
// # Safety
// `learner` must be a live handle; `out` must be writable.
enum SgimStatus sgim_learner_evaluate(const struct SgimLearner *learner,
                                      struct SgimEvaluation *out);

// Resolves a goal of `subspace` (0-5) with `dim` coordinates through the
// learner's memory, reporting the action length and its perf.
//
// # Safety
// `learner` must be a live handle; `coords` must point to `dim` values;
// `out_length` and `out_perf` must be writable.
enum SgimStatus sgim_learner_resolve(const struct SgimLearner *learner,
                                     uint8_t subspace,
                                     const double *coords,
                                     size_t dim,
                                     size_t *out_length,
                                     double *out_perf);

// Writes the learner's memory as JSON lines to `path`.
//
// # Safety
// `learner` must be a live handle; `path` must be a NUL-terminated string.
enum SgimStatus sgim_learner_dump_memory(const struct SgimLearner *learner, const char *path);

// Burst sound for objects at the given positions.
//
// # Safety
// `table` may be NULL (default table) or point to a valid table; `out`
// must be writable.
enum SgimStatus sgim_burst_sound(const struct SgimTable *table,
                                 double blue_x,
                                 double blue_y,
                                 double green_x,
                                 double green_y,
                                 struct SgimSound *out);

// Maintained sound: the burst sound extended with the duration set by a
// touch at (`touch_x`, `touch_y`).
//
// # Safety
// `table` may be NULL (default table) or point to a valid table; `out`
// must be writable.
enum SgimStatus sgim_maintain_sound(const struct SgimTable *table,
                                    double blue_x,
                                    double blue_y,
                                    double green_x,
                                    double green_y,
                                    double touch_x,
                                    double touch_y,
                                    struct SgimSound *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SGIM_H */
