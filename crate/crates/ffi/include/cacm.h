/* Generated by cbindgen; do not edit. */

#ifndef CACM_H
#define CACM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CacmStatus {
  CACM_STATUS_OK = 0,
  CACM_STATUS_NULL_POINTER = 1,
  CACM_STATUS_INVALID_UTF8 = 2,
  CACM_STATUS_INVALID_ARGUMENT = 3,
  CACM_STATUS_LIBRARY = 4,
  CACM_STATUS_DEMAND = 5,
  CACM_STATUS_CACHING = 6,
  CACM_STATUS_COLORING = 7,
  CACM_STATUS_BOUND = 8,
  CACM_STATUS_SCENARIO = 9,
  CACM_STATUS_IO = 10,
  CACM_STATUS_PANIC = 11,
} CacmStatus;

/**
 * Opaque correlated library.
 */
typedef struct CacmModel CacmModel;

/**
 * Opaque result record of a sweep.
 */
typedef struct CacmRecord CacmRecord;

/**
 * Opaque parsed scenario.
 */
typedef struct CacmScenario CacmScenario;

/**
 * Bound components at one caching distribution.
 */
typedef struct CacmBoundReport {
  double psi;
  double delta_r;
  double m_bar;
  double bound;
} CacmBoundReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *cacm_last_error(void);

/**
 * Library version, static storage.
 */
const char *cacm_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void cacm_string_free(char *s);

/**
 * Generates a library with `files` files of `packets` packets, uniform
 * off-diagonal match entries and threshold `delta`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CacmStatus cacm_model_new_uniform(size_t files,
                                       size_t packets,
                                       double delta,
                                       double off_diagonal,
                                       uint64_t seed,
                                       struct CacmModel **out_model);

/**
 * Generates a library from a row-major `files × files` match matrix.
 *
 * # Safety
 * `matrix` must point to `files * files` doubles; `out_model` must be valid.
 */
enum CacmStatus cacm_model_new(size_t files,
                               size_t packets,
                               double delta,
                               const double *matrix,
                               uint64_t seed,
                               struct CacmModel **out_model);

/**
 * # Safety
 * `model` must come from a `cacm_model_new*` call and not have been freed.
 */
void cacm_model_free(struct CacmModel *model);

/**
 * Number of correlated packet pairs.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CacmStatus cacm_model_pair_count(const struct CacmModel *model, size_t *out_count);

/**
 * `H(target | given)` in file units.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CacmStatus cacm_model_conditional_entropy(const struct CacmModel *model,
                                               size_t target_file,
                                               size_t target_packet,
                                               size_t given_file,
                                               size_t given_packet,
                                               double *out_entropy);

/**
 * Evaluates the rate upper bound at caching distribution `p`. A null
 * `matrix` means no cross-file correlation.
 *
 * # Safety
 * `q` and `p` must point to `files` doubles, `matrix` to `files * files`
 * doubles or be null, and `out_report` must be valid.
 */
enum CacmStatus cacm_rate_bound(size_t receivers,
                                double cache_size,
                                size_t files,
                                const double *q,
                                const double *p,
                                double delta,
                                const double *matrix,
                                struct CacmBoundReport *out_report);

/**
 * Searches for the caching distribution minimizing the bound; writes it to
 * `out_p` (`files` doubles) and the bound to `out_bound`.
 *
 * # Safety
 * As for [`cacm_rate_bound`]; `out_p` must hold `files` doubles.
 */
enum CacmStatus cacm_optimize_p(size_t receivers,
                                double cache_size,
                                size_t files,
                                const double *q,
                                double delta,
                                const double *matrix,
                                double *out_p,
                                double *out_bound);

/**
 * Parses a TOML scenario.
 *
 * # Safety
 * `toml` must be a nul-terminated string; `out_scenario` must be valid.
 */
enum CacmStatus cacm_scenario_from_toml(const char *toml, struct CacmScenario **out_scenario);

/**
 * # Safety
 * `scenario` must come from [`cacm_scenario_from_toml`] and not have been freed.
 */
void cacm_scenario_free(struct CacmScenario *scenario);

/**
 * Runs the scenario's sweep.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CacmStatus cacm_run(const struct CacmScenario *scenario, struct CacmRecord **out_record);

/**
 * # Safety
 * `record` must come from [`cacm_run`] and not have been freed.
 */
void cacm_record_free(struct CacmRecord *record);

/**
 * Number of (scheme, cache size) points in the record.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CacmStatus cacm_record_point_count(const struct CacmRecord *record, size_t *out_count);

/**
 * Cache size, mean rate and standard error of point `index`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CacmStatus cacm_record_point(const struct CacmRecord *record,
                                  size_t index,
                                  double *out_cache_size,
                                  double *out_mean_rate,
                                  double *out_stderr);

/**
 * Serializes the record as JSON; free the string with [`cacm_string_free`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum CacmStatus cacm_record_to_json(const struct CacmRecord *record, char **out_json);

/**
 * Rates of the built-in four-file example: correlation-aware and reference.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CacmStatus cacm_example1(double *out_rate, double *out_reference);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CACM_H */
