#ifndef CAMUV_H
#define CAMUV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a call.
 */
typedef enum CamuvStatus {
  CAMUV_STATUS_OK = 0,
  CAMUV_STATUS_NULL_POINTER = 1,
  CAMUV_STATUS_INVALID_ARGUMENT = 2,
  CAMUV_STATUS_IO = 3,
  CAMUV_STATUS_PARSE = 4,
  /**
   * Degenerate data: zero variance, too few samples, singular fits.
   */
  CAMUV_STATUS_DATA = 5,
  /**
   * Discovery did not converge.
   */
  CAMUV_STATUS_NO_CONVERGENCE = 6,
  CAMUV_STATUS_BUFFER_TOO_SMALL = 7,
  CAMUV_STATUS_INTERNAL = 8,
} CamuvStatus;

/**
 * A numeric sample matrix with named columns.
 */
typedef struct CamuvData CamuvData;

/**
 * An inferred causal graph: directed parent sets and dashed pairs.
 */
typedef struct CamuvGraph CamuvGraph;

typedef struct CamuvConfig {
  /**
   * Significance level of every independence test.
   */
  double alpha;
  /**
   * Largest variable set examined when searching for sinks; at least 2.
   */
  size_t max_set_size;
  uint64_t seed;
  /**
   * Rows above which independence tests subsample; 0 disables it.
   */
  size_t hsic_max_n;
} CamuvConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null if none.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *camuv_last_error_message(void);

/**
 * Loads a headered numeric CSV file, optionally standardizing each column.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CamuvStatus camuv_data_from_csv(const char *path, bool standardize, struct CamuvData **out);

/**
 * Builds a matrix from `p` columns of `n` values each, stored one column
 * after another. Columns are named `x1..xp`.
 *
 * # Safety
 * `values` must point to `n * p` doubles and `out` must be valid.
 */
enum CamuvStatus camuv_data_from_values(const double *values,
                                        size_t n,
                                        size_t p,
                                        bool standardize,
                                        struct CamuvData **out);

/**
 * # Safety
 * `data` must be null or a handle from this library.
 */
size_t camuv_data_num_rows(const struct CamuvData *data);

/**
 * # Safety
 * `data` must be null or a handle from this library.
 */
size_t camuv_data_num_vars(const struct CamuvData *data);

/**
 * # Safety
 * `data` must be null or a handle from this library not yet freed.
 */
void camuv_data_free(struct CamuvData *data);

/**
 * Default configuration: alpha 0.01, sets of up to 3 variables, seed 0,
 * subsampling above 2000 rows.
 */
struct CamuvConfig camuv_config_default(void);

/**
 * Infers a causal graph. A null `config` uses the defaults.
 *
 * # Safety
 * `data` must be a live handle, `config` null or valid, `out` valid.
 */
enum CamuvStatus camuv_discover(const struct CamuvData *data,
                                const struct CamuvConfig *config,
                                struct CamuvGraph **out);

/**
 * # Safety
 * `graph` must be null or a handle from this library.
 */
size_t camuv_graph_num_vars(const struct CamuvGraph *graph);

/**
 * Copies the parents of variable `i` into `buf` in ascending order and
 * stores their number in `len`. If `capacity` is too small, nothing is
 * copied, `len` still receives the required size and
 * [`CamuvStatus::BufferTooSmall`] is returned.
 *
 * # Safety
 * `graph` must be a live handle, `len` valid, `buf` valid for `capacity`
 * elements (it may be null when `capacity` is 0).
 */
enum CamuvStatus camuv_graph_parents(const struct CamuvGraph *graph,
                                     size_t i,
                                     size_t *buf,
                                     size_t capacity,
                                     size_t *len);

/**
 * # Safety
 * `graph` must be null or a handle from this library.
 */
size_t camuv_graph_num_dashed(const struct CamuvGraph *graph);

/**
 * The `k`-th dashed pair in ascending order, with `i < j`.
 *
 * # Safety
 * `graph` must be a live handle; `i` and `j` valid pointers.
 */
enum CamuvStatus camuv_graph_dashed(const struct CamuvGraph *graph, size_t k, size_t *i, size_t *j);

/**
 * The graph as JSON keyed by variable name. Release the string with
 * [`camuv_string_free`]. Returns null on failure.
 *
 * # Safety
 * `graph` must be null or a handle from this library.
 */
char *camuv_graph_to_json(const struct CamuvGraph *graph);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void camuv_string_free(char *s);

/**
 * # Safety
 * `graph` must be null or a handle from this library not yet freed.
 */
void camuv_graph_free(struct CamuvGraph *graph);

/**
 * Gamma-approximated HSIC p-value between two vectors of length `n`.
 *
 * # Safety
 * `a` and `b` must point to `n` doubles each; `p_value` must be valid.
 */
enum CamuvStatus camuv_p_hsic(const double *a, const double *b, size_t n, double *p_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAMUV_H */
