#ifndef FIELDREC_H
#define FIELDREC_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  FRM_STATUS_OK = 0,
  FRM_STATUS_NULL_POINTER = 1,
  FRM_STATUS_BUFFER_TOO_SMALL = 2,
  /**
   * Malformed input: parse errors, bad dimensions, bad geometry.
   */
  FRM_STATUS_INVALID_INPUT = 3,
  /**
   * A matrix that had to be inverted is singular.
   */
  FRM_STATUS_SINGULAR = 4,
  FRM_STATUS_DEGENERATE_INTERSECTION = 5,
  FRM_STATUS_POLE_HIT = 6,
  /**
   * Any other mathematical failure.
   */
  FRM_STATUS_FAILED = 7,
  FRM_STATUS_PANIC = 8,
} FrmStatus;

typedef enum {
  FRM_TERMINATION_DEPTH_REACHED = 0,
  FRM_TERMINATION_DIM_ZERO = 1,
  FRM_TERMINATION_DEGENERATE = 2,
} FrmTermination;

/**
 * Opaque collection handle.
 */
typedef struct FrmCollection FrmCollection;

/**
 * Opaque hierarchy handle.
 */
typedef struct FrmHierarchy FrmHierarchy;

typedef struct {
  double re;
  double im;
} FrmComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *frm_version(void);

/**
 * JSON description of the last error on this thread, or NULL.
 *
 * The pointer stays valid until the next call that returns an
 * `FrmStatus` on the same thread.
 */
const char *frm_last_error(void);

/**
 * # Safety
 * `s` must come from a `frm_*` function that returns an owned string, and
 * must not be freed twice.
 */
void frm_string_free(char *s);

/**
 * Parses a collection file's JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
FrmStatus frm_collection_from_json(const char *json, FrmCollection **out);

/**
 * Serializes a collection; free the result with `frm_string_free`.
 *
 * # Safety
 * `c` must be a live handle and `out` a writable pointer.
 */
FrmStatus frm_collection_to_json(const FrmCollection *c, char **out);

/**
 * Seeded random collection.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
FrmStatus frm_collection_random(size_t ambient_dim,
                                size_t dim_u,
                                size_t dim_e,
                                size_t dim_j,
                                size_t dim_p1,
                                uint64_t seed,
                                FrmCollection **out);

/**
 * Grid collection of a geometry given as ASCII rows or JSON.
 *
 * # Safety
 * `geometry` must be a NUL-terminated string and `out` a writable pointer.
 */
FrmStatus frm_grid_collection(const char *geometry, FrmCollection **out);

/**
 * # Safety
 * `c` must be NULL or a handle not yet freed.
 */
void frm_collection_free(FrmCollection *c);

/**
 * Writes `[ambient, U, E, J, P1, P2]` into `dims`.
 *
 * # Safety
 * `c` must be a live handle and `dims` must have room for 6 values.
 */
FrmStatus frm_collection_dims(const FrmCollection *c, size_t *dims);

/**
 * Runs the structural checks. `passed` is set either way; the full report
 * is available as JSON through `report` when it is not NULL.
 *
 * # Safety
 * `c` must be a live handle, `passed` writable, `report` NULL or writable.
 */
FrmStatus frm_collection_validate(const FrmCollection *c, bool *passed, char **report);

/**
 * Effective operator `L*(l1, l2)` written row-major into `out`.
 *
 * `method` is one of `schur`, `inverse`, `direct`, `fraction`, `spectral`,
 * `cf:<depth>`; NULL means `schur`. `out_len` must be at least `dim(U)²`.
 *
 * # Safety
 * `c` must be a live handle, `method` NULL or NUL-terminated, and `out`
 * must have room for `out_len` values.
 */
FrmStatus frm_effective(const FrmCollection *c,
                        FrmComplex l1,
                        FrmComplex l2,
                        const char *method,
                        FrmComplex *out,
                        size_t out_len);

/**
 * # Safety
 * `c` must be a live handle and `out` a writable pointer.
 */
FrmStatus frm_hierarchy_build(const FrmCollection *c, size_t max_depth, FrmHierarchy **out);

/**
 * Number of levels; 0 for a NULL handle.
 *
 * # Safety
 * `h` must be NULL or a live handle.
 */
size_t frm_hierarchy_depth(const FrmHierarchy *h);

/**
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
FrmStatus frm_hierarchy_termination(const FrmHierarchy *h, FrmTermination *out);

/**
 * Full hierarchy report; free the result with `frm_string_free`.
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
FrmStatus frm_hierarchy_to_json(const FrmHierarchy *h, char **out);

/**
 * # Safety
 * `h` must be NULL or a handle not yet freed.
 */
void frm_hierarchy_free(FrmHierarchy *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FIELDREC_H */
