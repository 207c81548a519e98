#ifndef FSLBM_H
#define FSLBM_H

/* Generated by cbindgen from fslbm-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible `fslbm_*` call.
 */
typedef enum FslbmStatus {
  /**
   * Success.
   */
  FSLBM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  FSLBM_STATUS_NULL_POINTER = 1,
  /**
   * An argument was out of range (width, radius, zeta, class count, ...).
   */
  FSLBM_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Input data violated a contract (width or class mismatch, parse error).
   */
  FSLBM_STATUS_DATA_ERROR = 3,
  /**
   * The projected table memory exceeds the configured budget.
   */
  FSLBM_STATUS_BUDGET_EXCEEDED = 4,
  /**
   * An I/O operation failed.
   */
  FSLBM_STATUS_IO_ERROR = 5,
  /**
   * A model stream was rejected (magic, version, checksum, structure).
   */
  FSLBM_STATUS_CORRUPT_MODEL = 6,
  /**
   * An internal invariant failed; the operation was abandoned.
   */
  FSLBM_STATUS_INTERNAL_ERROR = 7,
} FslbmStatus;

/**
 * Opaque classifier handle.
 */
typedef struct FslbmModel FslbmModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Create an empty model.
 *
 * `zeta_kind` takes an `FslbmZetaKind` value and `storage` an
 * `FslbmStorage` value; both are validated. A `memory_budget` of zero
 * selects the library default. On success `*out` owns the new handle and
 * must be released with `fslbm_model_free`.
 * # Safety
 * `out` must be a valid pointer to writable `*mut FslbmModel` storage.
 */
enum FslbmStatus fslbm_model_create(uint8_t width,
                                    uint8_t radius,
                                    uint32_t zeta_kind,
                                    double zeta_value,
                                    uint32_t storage,
                                    uint64_t memory_budget,
                                    uint16_t class_count,
                                    struct FslbmModel **out);

/**
 * Absorb one training point with a crisp label.
 * # Safety
 * `model` must be a live handle from `fslbm_model_create` or
 * `fslbm_model_load_path`, with no concurrent access.
 */
enum FslbmStatus fslbm_model_absorb_crisp(struct FslbmModel *model, uint32_t code, uint16_t label);

/**
 * Absorb one training point with fuzzy per-class weights.
 *
 * `weights` must point to `len` values with `len` equal to the model's
 * class count; the weights need not be normalized.
 * # Safety
 * `model` must be a live handle with no concurrent access and `weights`
 * must point to `len` readable values.
 */
enum FslbmStatus fslbm_model_absorb_weights(struct FslbmModel *model,
                                            uint32_t code,
                                            const double *weights,
                                            size_t len);

/**
 * Query one codeword.
 *
 * `max_extra_radius < 0` disables fallback expansion; otherwise empty slots
 * probe rings out to that distance. `out_probs` must hold `probs_len`
 * values with `probs_len` equal to the model's class count. A distribution
 * was produced iff `*out_matched != 0` or `*out_fallback_radius >= 0`;
 * otherwise `out_probs` is zeroed.
 * # Safety
 * `model` must be a live handle; `out_probs` must point to `probs_len`
 * writable values; the flag out-pointers must be writable.
 */
enum FslbmStatus fslbm_model_query(const struct FslbmModel *model,
                                   uint32_t code,
                                   int32_t max_extra_radius,
                                   double *out_probs,
                                   size_t probs_len,
                                   uint8_t *out_matched,
                                   int32_t *out_fallback_radius);

/**
 * Codeword width in bits, or 0 for a null handle.
 * # Safety
 * `model` must be a live handle or null.
 */
uint8_t fslbm_model_width(const struct FslbmModel *model);

/**
 * Training expansion radius, or 0 for a null handle.
 * # Safety
 * `model` must be a live handle or null.
 */
uint8_t fslbm_model_radius(const struct FslbmModel *model);

/**
 * Number of classes, or 0 for a null handle.
 * # Safety
 * `model` must be a live handle or null.
 */
uint16_t fslbm_model_class_count(const struct FslbmModel *model);

/**
 * Number of training points absorbed, or 0 for a null handle.
 * # Safety
 * `model` must be a live handle or null.
 */
uint64_t fslbm_model_trained_count(const struct FslbmModel *model);

/**
 * Number of non-null table slots, or 0 for a null handle.
 * # Safety
 * `model` must be a live handle or null.
 */
uint64_t fslbm_model_entry_count(const struct FslbmModel *model);

/**
 * Write the model to a file in the versioned checksummed format.
 * # Safety
 * `model` must be a live handle; `path` must be a valid NUL-terminated
 * string.
 */
enum FslbmStatus fslbm_model_save_path(const struct FslbmModel *model, const char *path);

/**
 * Load a model from a file. On success `*out` owns the new handle.
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be writable.
 */
enum FslbmStatus fslbm_model_load_path(const char *path, struct FslbmModel **out);

/**
 * Release a handle. Null is a no-op.
 * # Safety
 * `model` must be a handle owned by the caller (then consumed) or null.
 */
void fslbm_model_free(struct FslbmModel *model);

/**
 * Hamming distance between two codewords of the given width.
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum FslbmStatus fslbm_hamming_distance(uint32_t a, uint32_t b, uint8_t width, uint32_t *out);

/**
 * Number of codewords within `radius` of any center at the given width.
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum FslbmStatus fslbm_ball_size(uint8_t width, uint8_t radius, uint64_t *out);

/**
 * Static description of a status code.
 */
const char *fslbm_status_name(enum FslbmStatus status);

/**
 * Library version as a static string.
 */
const char *fslbm_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FSLBM_H */
