#ifndef QFRED_H
#define QFRED_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum QfredStatus {
  QFRED_STATUS_OK = 0,
  QFRED_STATUS_NULL_POINTER = 1,
  QFRED_STATUS_INVALID_UTF8 = 2,
  QFRED_STATUS_PARSE = 3,
  QFRED_STATUS_DIMENSION = 4,
  QFRED_STATUS_CONFIG = 5,
  QFRED_STATUS_DECOMPOSITION = 6,
  QFRED_STATUS_CONTAINMENT = 7,
  QFRED_STATUS_INTEGRATION = 8,
  QFRED_STATUS_BUFFER_TOO_SMALL = 9,
  QFRED_STATUS_OTHER = 10,
  QFRED_STATUS_PANIC = 11,
} QfredStatus;

typedef enum QfredAlgebra {
  QFRED_ALGEBRA_AUTO = 0,
  QFRED_ALGEBRA_CHAIN = 1,
} QfredAlgebra;

typedef enum QfredScheme {
  QFRED_SCHEME_EULER = 0,
  QFRED_SCHEME_POSITIVITY_PRESERVING = 1,
} QfredScheme;

// Opaque model handle.
typedef struct QfredModel QfredModel;

// Opaque reduction handle.
typedef struct QfredReduction QfredReduction;

typedef struct QfredReductionInfo {
  // Dimension of the observable space, or -1 when it was not computed.
  int64_t kappa;
  size_t alg_dim;
  size_t reduced_dim;
  size_t num_blocks;
  bool invariant;
} QfredReductionInfo;

typedef struct QfredSimParams {
  double t_final;
  double dt;
  uint64_t seed;
  enum QfredScheme scheme;
} QfredSimParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread (empty after success).
// The pointer stays valid until the next call on the same thread.
const char *qfred_last_error(void);

// Parses a model from its JSON text.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum QfredStatus qfred_model_from_json(const char *json, struct QfredModel **out);

// # Safety
// `model` must come from [`qfred_model_from_json`] (or be null) and not be used afterwards.
void qfred_model_free(struct QfredModel *model);

// Hilbert-space dimension of a model (0 for null).
//
// # Safety
// `model` must be a live handle or null.
size_t qfred_model_dim(const struct QfredModel *model);

// Reduces a model onto the chosen algebra.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum QfredStatus qfred_reduce(const struct QfredModel *model,
                              enum QfredAlgebra algebra,
                              uint64_t seed,
                              struct QfredReduction **out);

// # Safety
// `red` must come from [`qfred_reduce`] (or be null) and not be used afterwards.
void qfred_reduction_free(struct QfredReduction *red);

// # Safety
// `red` must be a live handle and `out` a valid pointer.
enum QfredStatus qfred_reduction_info(const struct QfredReduction *red,
                                      struct QfredReductionInfo *out);

// Copies the block structure (d_F, d_G per block) into caller buffers of
// length `capacity`. Fails with `BufferTooSmall` if fewer than
// `num_blocks` slots are available.
//
// # Safety
// `red` must be a live handle; `d_f` and `d_g` must hold `capacity` elements.
enum QfredStatus qfred_reduction_blocks(const struct QfredReduction *red,
                                        size_t *d_f,
                                        size_t *d_g,
                                        size_t capacity);

// Serializes the reduced model; release the string with [`qfred_string_free`].
//
// # Safety
// `red` must be a live handle and `out` a valid pointer.
enum QfredStatus qfred_reduction_to_json(const struct QfredReduction *red, char **out);

// Runs the full-vs-reduced comparison experiment and returns its JSON
// report; `max_deviation` (optional) receives max_t |Θ − Θ̌| over all
// observables.
//
// # Safety
// `model` must be a live handle, `params` and `report` valid pointers;
// `max_deviation` may be null.
enum QfredStatus qfred_compare(const struct QfredModel *model,
                               enum QfredAlgebra algebra,
                               const struct QfredSimParams *params,
                               char **report,
                               double *max_deviation);

// # Safety
// `s` must come from this library (or be null) and not be used afterwards.
void qfred_string_free(char *s);

// Library version as a static NUL-terminated string.
const char *qfred_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QFRED_H */
