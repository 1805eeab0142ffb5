#ifndef AMOSL_H
#define AMOSL_H

/* Generated by cbindgen. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every call.
 */
typedef enum AmoslStatus {
  AMOSL_STATUS_OK = 0,
  AMOSL_STATUS_NULL_POINTER = 1,
  AMOSL_STATUS_INVALID_ARGUMENT = 2,
  AMOSL_STATUS_BUFFER_TOO_SMALL = 3,
  AMOSL_STATUS_SOLVER = 4,
  AMOSL_STATUS_IO = 5,
  AMOSL_STATUS_FORMAT = 6,
  AMOSL_STATUS_PANIC = 7,
} AmoslStatus;

/**
 * Gradient rule of [`amosl_transport_gradients`].
 */
typedef enum AmoslGradMode {
  AMOSL_GRAD_MODE_ENVELOPE = 0,
  AMOSL_GRAD_MODE_KKT_QP = 1,
} AmoslGradMode;

/**
 * Prepared dataset.
 */
typedef struct AmoslDataset AmoslDataset;

/**
 * Trained model.
 */
typedef struct AmoslModel AmoslModel;

/**
 * Solved transport instance.
 */
typedef struct AmoslTransport AmoslTransport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *amosl_last_error_message(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *amosl_version(void);

/**
 * Solves the partial transport problem between `w1` (length `n1`) and `w2`
 * (length `n2`) with the row-major `n1×n2` cost.
 *
 * # Safety
 * Pointers must reference arrays of the stated lengths; `out` must be
 * writable.
 */
enum AmoslStatus amosl_transport_solve(const double *cost,
                                       size_t n1,
                                       size_t n2,
                                       const double *w1,
                                       const double *w2,
                                       struct AmoslTransport **out);

/**
 * # Safety
 * `t` must come from [`amosl_transport_solve`] or be null.
 */
void amosl_transport_free(struct AmoslTransport *t);

/**
 * # Safety
 * `t` must be a live handle and `out` writable.
 */
enum AmoslStatus amosl_transport_value(const struct AmoslTransport *t, double *out);

/**
 * Copies the row-major optimal flows into `out` (capacity `len`).
 *
 * # Safety
 * `t` must be a live handle and `out` must hold `len` values.
 */
enum AmoslStatus amosl_transport_flows(const struct AmoslTransport *t, double *out, size_t len);

/**
 * Dual prices of the row and column capacities and of the total-mass
 * constraint.
 *
 * # Safety
 * `t` must be a live handle; `rows` and `cols` must hold `n1` and `n2`
 * values; `total` must be writable.
 */
enum AmoslStatus amosl_transport_duals(const struct AmoslTransport *t,
                                       double *rows,
                                       size_t n1,
                                       double *cols,
                                       size_t n2,
                                       double *total);

/**
 * Gradients of the transport value with respect to the cost and both
 * weight vectors. `damping` is used only in `KktQp` mode.
 *
 * # Safety
 * `t` must be a live handle; the outputs must hold `n1·n2`, `n1` and `n2`
 * values.
 */
enum AmoslStatus amosl_transport_gradients(const struct AmoslTransport *t,
                                           enum AmoslGradMode mode,
                                           double damping,
                                           double *grad_cost,
                                           double *grad_w1,
                                           double *grad_w2);

/**
 * Exhaustive optimum for small integral instances.
 *
 * # Safety
 * Same layout as [`amosl_transport_solve`]; `out` must be writable.
 */
enum AmoslStatus amosl_brute_force_transport(const double *cost,
                                             size_t n1,
                                             size_t n2,
                                             const double *w1,
                                             const double *w2,
                                             double *out);

/**
 * Similarity matrix of the synthesized modality for row-major `n×d`
 * features, written row-major into `out` (`n·n` values).
 *
 * # Safety
 * `x` must hold `n·d` values and `out` `n·n` values.
 */
enum AmoslStatus amosl_synthesize_modality(const double *x,
                                           size_t n,
                                           size_t d,
                                           uint64_t seed,
                                           double *out);

/**
 * Loads a prepared dataset file.
 *
 * # Safety
 * `file` must be a NUL-terminated path and `out` writable.
 */
enum AmoslStatus amosl_dataset_load(const char *file, struct AmoslDataset **out);

/**
 * # Safety
 * `ds` must come from [`amosl_dataset_load`] or be null.
 */
void amosl_dataset_free(struct AmoslDataset *ds);

/**
 * Number of graphs, classes and node features.
 *
 * # Safety
 * `ds` must be a live handle; null outputs are skipped.
 */
enum AmoslStatus amosl_dataset_info(const struct AmoslDataset *ds,
                                    size_t *graphs,
                                    size_t *classes,
                                    size_t *features);

/**
 * Loads a model checkpoint.
 *
 * # Safety
 * `file` must be a NUL-terminated path and `out` writable.
 */
enum AmoslStatus amosl_model_load(const char *file, struct AmoslModel **out);

/**
 * # Safety
 * `m` must come from [`amosl_model_load`] or be null.
 */
void amosl_model_free(struct AmoslModel *m);

/**
 * Class probabilities of graph `index`, written into `probs` (capacity
 * `len`, at least the number of classes).
 *
 * # Safety
 * Handles must be live and `probs` must hold `len` values.
 */
enum AmoslStatus amosl_model_predict(const struct AmoslModel *m,
                                     const struct AmoslDataset *ds,
                                     size_t index,
                                     double *probs,
                                     size_t len);

/**
 * Fraction of graphs whose most probable class is their label.
 *
 * # Safety
 * Handles must be live and `accuracy` writable.
 */
enum AmoslStatus amosl_model_evaluate(const struct AmoslModel *m,
                                      const struct AmoslDataset *ds,
                                      double *accuracy);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AMOSL_H */
