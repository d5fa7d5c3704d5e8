#ifndef SPECSEL_H
#define SPECSEL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every C-ABI call.
 */
typedef enum SpecselStatus {
  /**
   * The call succeeded.
   */
  SpecselStatus_Ok = 0,
  /**
   * A required pointer was null.
   */
  SpecselStatus_NullPointer = 1,
  /**
   * An argument was out of range or inconsistent.
   */
  SpecselStatus_InvalidArgument = 2,
  /**
   * Reading or writing a file failed.
   */
  SpecselStatus_IoError = 3,
  /**
   * A numerical routine reported a failure.
   */
  SpecselStatus_NumericError = 4,
  /**
   * The library panicked; state is still consistent.
   */
  SpecselStatus_InternalError = 5,
} SpecselStatus;

/**
 * Opaque spectra handle.
 */
typedef struct SpecselSpectra SpecselSpectra;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *specsel_last_error_message(void);

/**
 * Load a spectra CSV. `has_target` selects the `target,<w...>` layout.
 *
 * On success `*out` owns the handle; release it with [`specsel_spectra_free`].
 *
 * # Safety
 * `path` must point to a NUL-terminated string and `out` to a writable slot.
 */
enum SpecselStatus specsel_spectra_load(const char *path,
                                        bool has_target,
                                        struct SpecselSpectra **out);

/**
 * Release a spectra handle. Null is a no-op.
 *
 * # Safety
 * `spectra` must have come from [`specsel_spectra_load`] and not be freed twice.
 */
void specsel_spectra_free(struct SpecselSpectra *spectra);

/**
 * Number of spectra and of wavelengths in the handle.
 *
 * # Safety
 * All pointers must be valid; `spectra` must be a live handle.
 */
enum SpecselStatus specsel_spectra_shape(const struct SpecselSpectra *spectra,
                                         uintptr_t *out_spectra,
                                         uintptr_t *out_wavelengths);

/**
 * Pick the basis size minimizing the total leave-one-out error over
 * `[n_min, n_max]` for the given orders.
 *
 * # Safety
 * `orders` must point to `n_orders` readable entries; output pointers must
 * be writable; `spectra` must be a live handle.
 */
enum SpecselStatus specsel_select_basis_size(const struct SpecselSpectra *spectra,
                                             uintptr_t n_min,
                                             uintptr_t n_max,
                                             const uintptr_t *orders,
                                             uintptr_t n_orders,
                                             bool coarse_to_fine,
                                             uintptr_t *out_n_functions,
                                             uintptr_t *out_order);

/**
 * Compress every spectrum onto the `(n_functions, order)` basis.
 *
 * `out_coefficients` receives `n_spectra * n_functions` values, row major.
 *
 * # Safety
 * `out_coefficients` must point to `capacity` writable doubles; `spectra`
 * must be a live handle.
 */
enum SpecselStatus specsel_compress(const struct SpecselSpectra *spectra,
                                    uintptr_t n_functions,
                                    uintptr_t order,
                                    double *out_coefficients,
                                    uintptr_t capacity);

/**
 * Mutual information (nats) between a feature block and a target, Kraskov
 * kNN estimator.
 *
 * `x` is `n_samples * n_features` row major.
 *
 * # Safety
 * `x`, `y` and `out_nats` must point to buffers of the stated sizes.
 */
enum SpecselStatus specsel_mutual_information(const double *x,
                                              uintptr_t n_samples,
                                              uintptr_t n_features,
                                              const double *y,
                                              uintptr_t k,
                                              uint64_t seed,
                                              double *out_nats);

/**
 * Forward-backward feature selection by mutual information maximization.
 *
 * Selected indices land in `out_indices` (ascending); `*out_len` receives
 * the count. `max_size = 0` means unbounded.
 *
 * # Safety
 * `x`, `y`, `out_indices` and `out_len` must point to buffers of the stated
 * sizes; `out_indices` must hold `capacity` entries.
 */
enum SpecselStatus specsel_forward_backward(const double *x,
                                            uintptr_t n_samples,
                                            uintptr_t n_features,
                                            const double *y,
                                            uintptr_t k,
                                            uint64_t seed,
                                            uintptr_t max_size,
                                            double min_delta,
                                            uintptr_t *out_indices,
                                            uintptr_t capacity,
                                            uintptr_t *out_len);

/**
 * Run the full pipeline from a config file and write the JSON report.
 *
 * # Safety
 * Both paths must point to NUL-terminated strings.
 */
enum SpecselStatus specsel_pipeline_run(const char *config_path, const char *report_path);

/**
 * Predict with a model document written by `specsel train`.
 *
 * `x` is `n_samples * n_features` row major over the model's input columns;
 * predictions land in `out_predictions`.
 *
 * # Safety
 * `model_path` must be NUL-terminated; buffers must match the stated sizes.
 */
enum SpecselStatus specsel_model_predict(const char *model_path,
                                         const double *x,
                                         uintptr_t n_samples,
                                         uintptr_t n_features,
                                         double *out_predictions,
                                         uintptr_t capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECSEL_H */
