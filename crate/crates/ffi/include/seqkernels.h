#ifndef SEQKERNELS_H
#define SEQKERNELS_H

/* Generated by cbindgen from crates/ffi/src; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of all fallible calls.
 */
typedef enum {
  SQK_STATUS_OK = 0,
  SQK_STATUS_NULL_POINTER = 1,
  SQK_STATUS_INVALID_ARGUMENT = 2,
  SQK_STATUS_DIMENSION = 3,
  SQK_STATUS_DOMAIN = 4,
  SQK_STATUS_FORMAT = 5,
  SQK_STATUS_IO = 6,
  SQK_STATUS_NUMERICAL = 7,
  SQK_STATUS_UNSUPPORTED = 8,
  SQK_STATUS_PANIC = 9,
} SqkStatus;

/**
 * A set of sequences.
 */
typedef struct SqkDataset SqkDataset;

/**
 * A Gram matrix with its ids and provenance.
 */
typedef struct SqkGram SqkGram;

/**
 * A sequence kernel configuration.
 */
typedef struct SqkKernel SqkKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sqk_version(void);

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next `sqk_*` call on the same thread.
 */
const char *sqk_last_error(void);

/**
 * Loads a SEQT file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
SqkStatus sqk_dataset_load(const char *path, SqkDataset **out);

/**
 * Builds an unlabeled dataset from `n_seqs` sequences of `dim`-dimensional
 * symbols. `lengths[k]` is the symbol count of sequence k and `values`
 * holds all symbols back to back, `dim` values each.
 *
 * # Safety
 * `lengths` must point to `n_seqs` values and `values` to
 * `dim * sum(lengths)` values.
 */
SqkStatus sqk_dataset_from_values(size_t n_seqs,
                                  const size_t *lengths,
                                  size_t dim,
                                  const double *values,
                                  SqkDataset **out);

/**
 * Number of sequences (0 for NULL).
 *
 * # Safety
 * `d` must be NULL or a live dataset handle.
 */
size_t sqk_dataset_len(const SqkDataset *d);

/**
 * # Safety
 * `d` must be NULL or a handle from `sqk_dataset_*`, not yet freed.
 */
void sqk_dataset_free(SqkDataset *d);

/**
 * rbf symbol kernel with bandwidth `sigma` times the path structure kernel.
 *
 * # Safety
 * `out` must be writable.
 */
SqkStatus sqk_kernel_path(double sigma, double chv, double cd, bool normalize, SqkKernel **out);

/**
 * rbf symbol kernel times the exponential structure kernel of width `alpha`.
 *
 * # Safety
 * `out` must be writable.
 */
SqkStatus sqk_kernel_exponential(double sigma, double alpha, bool normalize, SqkKernel **out);

/**
 * Global alignment kernel with Gaussian local similarity of bandwidth `sigma`.
 *
 * # Safety
 * `out` must be writable.
 */
SqkStatus sqk_kernel_global_alignment(double sigma, bool normalize, SqkKernel **out);

/**
 * Any kernel from its JSON description (as stored in Gram files).
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
SqkStatus sqk_kernel_from_json(const char *json, SqkKernel **out);

/**
 * # Safety
 * `k` must be NULL or a handle from `sqk_kernel_*`, not yet freed.
 */
void sqk_kernel_free(SqkKernel *k);

/**
 * Kernel value between sequences `i` and `j` (0-based) of a dataset.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
SqkStatus sqk_kernel_eval(const SqkKernel *k, const SqkDataset *d, size_t i, size_t j, double *out);

/**
 * Path structure kernel value at 1-based positions (i, j).
 *
 * # Safety
 * `out` must be writable.
 */
SqkStatus sqk_path_structure_value(size_t i, size_t j, double chv, double cd, double *out);

/**
 * Gram matrix of a dataset under a kernel.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
SqkStatus sqk_gram_build(const SqkKernel *k, const SqkDataset *d, SqkGram **out);

/**
 * Side length of the Gram matrix (0 for NULL).
 *
 * # Safety
 * `g` must be NULL or a live Gram handle.
 */
size_t sqk_gram_size(const SqkGram *g);

/**
 * Copies the matrix row-major into `buf`, which must hold `size * size`
 * values (`buf_len` is checked).
 *
 * # Safety
 * `buf` must point to `buf_len` writable doubles.
 */
SqkStatus sqk_gram_values(const SqkGram *g, double *buf, size_t buf_len);

/**
 * Writes the binary Gram file format.
 *
 * # Safety
 * `g` must be live; `path` NUL-terminated.
 */
SqkStatus sqk_gram_save(const SqkGram *g, const char *path);

/**
 * Reads a binary Gram file.
 *
 * # Safety
 * `path` NUL-terminated; `out` writable.
 */
SqkStatus sqk_gram_load(const char *path, SqkGram **out);

/**
 * Eigenvalue check: `pass` is set when the smallest eigenvalue is at least
 * `-tol * max(1, largest)`. Any of the out pointers may be NULL.
 *
 * # Safety
 * `g` must be live; non-NULL out pointers writable.
 */
SqkStatus sqk_gram_check_psd(const SqkGram *g,
                             double tol,
                             double *min_eig,
                             double *max_eig,
                             bool *pass);

/**
 * # Safety
 * `g` must be NULL or a handle from `sqk_gram_*`, not yet freed.
 */
void sqk_gram_free(SqkGram *g);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEQKERNELS_H */
