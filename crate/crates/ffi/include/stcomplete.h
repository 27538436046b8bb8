#ifndef STCOMPLETE_H
#define STCOMPLETE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum StcStatus {
  STC_STATUS_OK = 0,
  STC_STATUS_NULL_POINTER = 1,
  STC_STATUS_INVALID_INPUT = 2,
  STC_STATUS_ANALYSIS = 3,
  STC_STATUS_CONFIG = 4,
  STC_STATUS_PARSE = 5,
  STC_STATUS_IO = 6,
  STC_STATUS_BUFFER_TOO_SMALL = 7,
  STC_STATUS_PANIC = 8,
} StcStatus;

typedef enum StcMaskKind {
  STC_MASK_KIND_RANDOM = 0,
  STC_MASK_KIND_STRUCTURED = 1,
} StcMaskKind;

typedef struct StcMatrix StcMatrix;

typedef struct StcReport StcReport;

typedef struct StcTensor StcTensor;

typedef struct StcSolverConfig {
  size_t rank;
  double lambda;
  double beta;
  double tol;
  size_t max_iters;
  uint64_t seed;
  bool literal_equations;
} StcSolverConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length plus one.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t stc_last_error(char *buf, size_t len);

struct StcSolverConfig stc_solver_config_default(void);

/**
 * # Safety
 * `data` must hold `i1*i2*i3` doubles; `out` must be writable.
 */
enum StcStatus stc_tensor_new(size_t i1,
                              size_t i2,
                              size_t i3,
                              const double *data,
                              struct StcTensor **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum StcStatus stc_tensor_read(const char *path_, struct StcTensor **out);

/**
 * # Safety
 * `t` must be a live handle; `path` a NUL-terminated string.
 */
enum StcStatus stc_tensor_write(const struct StcTensor *t, const char *path_);

/**
 * # Safety
 * `t` must be a live handle; `dims` must hold 3 elements.
 */
enum StcStatus stc_tensor_dims(const struct StcTensor *t, size_t *dims);

/**
 * # Safety
 * `t` must be a live handle; `buf` valid for `len` doubles.
 */
enum StcStatus stc_tensor_copy_data(const struct StcTensor *t, double *buf, size_t len);

/**
 * # Safety
 * `t` must be null or a handle from this library, freed at most once.
 */
void stc_tensor_free(struct StcTensor *t);

/**
 * # Safety
 * `data` must hold `rows*cols` doubles in column-major order.
 */
enum StcStatus stc_matrix_new(size_t rows, size_t cols, const double *data, struct StcMatrix **out);

/**
 * # Safety
 * `m` must be a live handle; `rows` and `cols` writable.
 */
enum StcStatus stc_matrix_dims(const struct StcMatrix *m, size_t *rows, size_t *cols);

/**
 * # Safety
 * `m` must be a live handle; `buf` valid for `len` doubles.
 */
enum StcStatus stc_matrix_copy_data(const struct StcMatrix *m, double *buf, size_t len);

/**
 * # Safety
 * `m` must be null or a handle from this library, freed at most once.
 */
void stc_matrix_free(struct StcMatrix *m);

/**
 * Binary mask (1 observed, 0 missing) as a tensor handle.
 *
 * # Safety
 * `out` must be writable.
 */
enum StcStatus stc_mask_generate(enum StcMaskKind kind,
                                 double rate,
                                 size_t duration_bins,
                                 uint64_t seed,
                                 size_t i1,
                                 size_t i2,
                                 size_t i3,
                                 struct StcTensor **out);

/**
 * # Safety
 * Both handles must be live; `out` writable.
 */
enum StcStatus stc_relative_error(const struct StcTensor *x,
                                  const struct StcTensor *x_hat,
                                  double *out);

/**
 * Detects the period from the observed fibers and builds `T_o`.
 *
 * # Safety
 * `y` and `w` must be live handles; outputs writable.
 */
enum StcStatus stc_temporal_context(const struct StcTensor *y,
                                    const struct StcTensor *w,
                                    struct StcMatrix **out,
                                    size_t *period);

/**
 * Completes `y` under mask `w`. With `baseline` set, or with both `u` and
 * `t_o` null, the context terms are dropped.
 *
 * # Safety
 * Non-null handles must be live; `cfg` must point to a config; outputs
 * writable. `report` may be null.
 */
enum StcStatus stc_complete(const struct StcTensor *y,
                            const struct StcTensor *w,
                            const struct StcMatrix *u,
                            const struct StcMatrix *t_o,
                            const struct StcSolverConfig *cfg,
                            bool baseline,
                            struct StcTensor **out,
                            struct StcReport **report);

/**
 * # Safety
 * `r` must be a live handle.
 */
size_t stc_report_iterations(const struct StcReport *r);

/**
 * # Safety
 * `r` must be a live handle.
 */
bool stc_report_converged(const struct StcReport *r);

/**
 * Number of objective values in the trace (initial value included).
 *
 * # Safety
 * `r` must be a live handle.
 */
size_t stc_report_trace_len(const struct StcReport *r);

/**
 * # Safety
 * `r` must be a live handle; `buf` valid for `len` doubles.
 */
enum StcStatus stc_report_copy_trace(const struct StcReport *r, double *buf, size_t len);

/**
 * # Safety
 * `r` must be null or a handle from this library, freed at most once.
 */
void stc_report_free(struct StcReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STCOMPLETE_H */
