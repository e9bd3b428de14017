#ifndef DPBEAM_H
#define DPBEAM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum DpbStatus {
  DPB_STATUS_OK = 0,
  DPB_STATUS_NULL_POINTER = 1,
  DPB_STATUS_INVALID_ARGUMENT = 2,
  DPB_STATUS_INVALID_PARAMS = 3,
  DPB_STATUS_DEGENERATE = 4,
  DPB_STATUS_LENGTH_MISMATCH = 5,
  DPB_STATUS_IO = 6,
  DPB_STATUS_FORMAT = 7,
  DPB_STATUS_CONFIG = 8,
  DPB_STATUS_INTERNAL = 9,
  DPB_STATUS_PANIC = 10,
} DpbStatus;

/**
 * Opaque codebook handle.
 */
typedef struct DpbCodebook DpbCodebook;

/**
 * Opaque designer handle.
 */
typedef struct DpbDesigner DpbDesigner;

/**
 * Complex number laid out as two doubles.
 */
typedef struct DpbComplex {
  double re;
  double im;
} DpbComplex;

/**
 * Everything needed to build a designer.
 */
typedef struct DpbDesignParams {
  size_t m_h;
  size_t m_v;
  size_t q_h;
  size_t q_v;
  size_t l_h;
  size_t l_v;
  double chi;
  double phi;
  struct DpbComplex zeta_vv;
  struct DpbComplex zeta_hv;
  size_t b_grid;
  size_t n_rf;
  size_t oversample_h;
  size_t oversample_v;
  size_t pol_phases;
} DpbDesignParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes) and returns the full message length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes of writes.
 */
size_t dpb_last_error_message(char *buf, size_t len);

/**
 * Fills `out` with the default experiment: 8x16 array, 6x6 regions of 7x7
 * sections, chi = 0.3, phi = pi/4, unit path gains, B = 3, N = 4.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum DpbStatus dpb_design_params_default(struct DpbDesignParams *out);

/**
 * Builds a designer; release it with [`dpb_designer_free`].
 *
 * # Safety
 * `params` must be null or point to a valid struct; `out` must be null or
 * valid for writes.
 */
enum DpbStatus dpb_designer_new(const struct DpbDesignParams *params, struct DpbDesigner **out);

/**
 * Releases a designer. Null is ignored.
 *
 * # Safety
 * `designer` must be null or a handle from [`dpb_designer_new`] not yet freed.
 */
void dpb_designer_free(struct DpbDesigner *designer);

/**
 * Designs the squared-error codebook over all regions.
 *
 * # Safety
 * `designer` must be a live handle; `out` must be null or valid for writes.
 */
enum DpbStatus dpb_design_codebook(const struct DpbDesigner *designer, struct DpbCodebook **out);

/**
 * Builds the matched narrow-beam baseline codebook for the designer's setup.
 *
 * # Safety
 * `designer` must be a live handle; `out` must be null or valid for writes.
 */
enum DpbStatus dpb_baseline_codebook(const struct DpbDesigner *designer, struct DpbCodebook **out);

/**
 * Loads a codebook file written by [`dpb_codebook_save`] or the CLI.
 *
 * # Safety
 * `path` must be null or a NUL-terminated string; `out` must be null or
 * valid for writes.
 */
enum DpbStatus dpb_codebook_load(const char *path, struct DpbCodebook **out);

/**
 * Writes the codebook and its JSON sidecar (`<path>.json`).
 *
 * # Safety
 * `codebook` must be a live handle; `path` a NUL-terminated string.
 */
enum DpbStatus dpb_codebook_save(const struct DpbCodebook *codebook, const char *path);

/**
 * Releases a codebook. Null is ignored.
 *
 * # Safety
 * `codebook` must be null or a live handle not yet freed.
 */
void dpb_codebook_free(struct DpbCodebook *codebook);

/**
 * Number of codewords (one per region).
 *
 * # Safety
 * `codebook` must be a live handle; `out` null or valid for writes.
 */
enum DpbStatus dpb_codebook_len(const struct DpbCodebook *codebook, size_t *out);

/**
 * Length `M = 2 m_h m_v` of every codeword.
 *
 * # Safety
 * `codebook` must be a live handle; `out` null or valid for writes.
 */
enum DpbStatus dpb_codebook_codeword_len(const struct DpbCodebook *codebook, size_t *out);

/**
 * Copies codeword `index` into `buf`, which must hold exactly `len`
 * elements (see [`dpb_codebook_codeword_len`]).
 *
 * # Safety
 * `codebook` must be a live handle; `buf` null or valid for `len` writes.
 */
enum DpbStatus dpb_codebook_copy_codeword(const struct DpbCodebook *codebook,
                                          size_t index,
                                          struct DpbComplex *buf,
                                          size_t len);

/**
 * Region `(p, q)` (1-based) and squared error of codeword `index`.
 *
 * # Safety
 * `codebook` must be a live handle; outputs null or valid for writes.
 */
enum DpbStatus dpb_codebook_entry_info(const struct DpbCodebook *codebook,
                                       size_t index,
                                       size_t *p,
                                       size_t *q,
                                       double *se);

/**
 * Reference gain of a unit-norm codeword at unpaired frequencies
 * `(psi_h, psi_v)` under the designer's array and polarization.
 *
 * # Safety
 * `designer` must be a live handle; `codeword` valid for `len` reads; `out`
 * null or valid for writes.
 */
enum DpbStatus dpb_reference_gain(const struct DpbDesigner *designer,
                                  double psi_h,
                                  double psi_v,
                                  const struct DpbComplex *codeword,
                                  size_t len,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DPBEAM_H */
