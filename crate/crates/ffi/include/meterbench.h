#ifndef METERBENCH_H
#define METERBENCH_H

#include <stddef.h>
#include <stdint.h>

/**
 * Months per forecast row.
 */
#define MB_MONTHS 12

typedef enum MbStatus {
  MB_STATUS_OK = 0,
  MB_STATUS_NULL_POINTER = 1,
  MB_STATUS_INVALID_ARGUMENT = 2,
  MB_STATUS_IO = 3,
  MB_STATUS_PARSE = 4,
  MB_STATUS_DATA = 5,
  MB_STATUS_UNKNOWN_PIPELINE = 6,
  MB_STATUS_OUT_OF_RANGE = 7,
  MB_STATUS_PANIC = 8,
} MbStatus;

/**
 * A loaded or generated cohort.
 */
typedef struct MbCohort MbCohort;

/**
 * Forecast-year monthly predictions of one pipeline, in meter-id order.
 */
typedef struct MbForecast MbForecast;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *mb_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mb_version(void);

/**
 * Generates a synthetic cohort of `n_meters` meters.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle to free
 * with `mb_cohort_free`.
 */
enum MbStatus mb_cohort_generate(size_t n_meters, uint64_t seed, struct MbCohort **out);

/**
 * Reads a cohort directory (readings, weather, survey, optional truth).
 *
 * # Safety
 * `dir` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MbStatus mb_cohort_load(const char *dir, struct MbCohort **out);

/**
 * Writes a cohort directory.
 *
 * # Safety
 * `cohort` must come from this library; `dir` must be NUL-terminated.
 */
enum MbStatus mb_cohort_save(const struct MbCohort *cohort, const char *dir);

/**
 * # Safety
 * `cohort` must be null or a handle from this library not yet freed.
 */
void mb_cohort_free(struct MbCohort *cohort);

/**
 * # Safety
 * `cohort` must come from this library; `out` must be valid.
 */
enum MbStatus mb_cohort_meter_count(const struct MbCohort *cohort, size_t *out);

/**
 * Runs a built-in pipeline on the cohort.
 *
 * # Safety
 * `cohort` must come from this library, `pipeline` must be NUL-terminated
 * and `out` valid; free the result with `mb_forecast_free`.
 */
enum MbStatus mb_run_pipeline(const struct MbCohort *cohort,
                              const char *pipeline,
                              uint64_t seed,
                              struct MbForecast **out);

/**
 * # Safety
 * `forecast` must be null or a handle from this library not yet freed.
 */
void mb_forecast_free(struct MbForecast *forecast);

/**
 * # Safety
 * `forecast` must come from this library; `out` must be valid.
 */
enum MbStatus mb_forecast_meter_count(const struct MbForecast *forecast, size_t *out);

/**
 * Copies the twelve monthly predictions of meter `index` (id order) into `out`.
 *
 * # Safety
 * `out` must point to at least `MB_MONTHS` doubles.
 */
enum MbStatus mb_forecast_get(const struct MbForecast *forecast, size_t index, double *out);

/**
 * Writes the predictions CSV.
 *
 * # Safety
 * `forecast` must come from this library; `path` must be NUL-terminated.
 */
enum MbStatus mb_forecast_write_csv(const struct MbForecast *forecast, const char *path);

/**
 * Scores a forecast against the cohort's forecast-year truth.
 *
 * # Safety
 * Handles must come from this library; output pointers must be valid.
 */
enum MbStatus mb_score(const struct MbForecast *forecast,
                       const struct MbCohort *cohort,
                       double *year_rae,
                       double *month_rae,
                       double *total);

/**
 * Total rAE of row-major `n_meters × MB_MONTHS` prediction and truth arrays.
 *
 * # Safety
 * Both arrays must hold `n_meters * MB_MONTHS` doubles; `out` must be valid.
 */
enum MbStatus mb_total_rae(const double *pred, const double *truth, size_t n_meters, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* METERBENCH_H */
