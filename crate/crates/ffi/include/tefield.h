#ifndef TEFIELD_H
#define TEFIELD_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum TefStatus {
  TEF_STATUS_OK = 0,
  TEF_STATUS_NULL_POINTER = 1,
  TEF_STATUS_INVALID_ARGUMENT = 2,
  TEF_STATUS_PARSE = 3,
  TEF_STATUS_IO = 4,
  /**
   * The model or field failed a consistency requirement.
   */
  TEF_STATUS_INCONSISTENT = 5,
  TEF_STATUS_BUDGET_EXCEEDED = 6,
  TEF_STATUS_INTERNAL = 7,
} TefStatus;

typedef enum TefUniquenessMethod {
  TEF_UNIQUENESS_METHOD_DOBRUSHIN = 0,
  TEF_UNIQUENESS_METHOD_DELTA = 1,
} TefUniquenessMethod;

/**
 * Opaque model handle.
 */
typedef struct TefModel TefModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *tef_last_error_message(void);

/**
 * Loads a TOML (`.toml`) or JSON model file.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a writable pointer.
 */
enum TefStatus tef_model_load(const char *path, struct TefModel **out);

/**
 * Parses a model from TOML text.
 *
 * # Safety
 * `text` must be a nul-terminated string and `out` a writable pointer.
 */
enum TefStatus tef_model_from_toml(const char *text, struct TefModel **out);

/**
 * Nearest-neighbour Ising model on `Z^dimension`.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum TefStatus tef_model_ising(uint32_t dimension, double beta, double h, struct TefModel **out);

/**
 * Widom–Rowlinson one-point energy with exclusion radius `radius` in the
 * sup metric.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum TefStatus tef_model_widom_rowlinson(uint32_t dimension,
                                         uint32_t radius,
                                         double alpha,
                                         double beta,
                                         struct TefModel **out);

/**
 * # Safety
 * `model` must be null or a handle from this library not yet freed.
 */
void tef_model_free(struct TefModel *model);

/**
 * Alphabet size and lattice dimension of a model.
 *
 * # Safety
 * `model` must be a live handle; the outputs must be writable.
 */
enum TefStatus tef_model_shape(const struct TefModel *model,
                               size_t *alphabet_size,
                               size_t *dimension);

/**
 * Single-site kernel `q_t(·)` at `site` given an annulus configuration.
 * Writes `alphabet_size` probabilities to `probs`.
 *
 * # Safety
 * `site` holds `dimension` coordinates, the annulus arrays hold
 * `annulus_count` entries (times `dimension` for sites), and `probs` has room
 * for `probs_len` doubles.
 */
enum TefStatus tef_onepoint_kernel(const struct TefModel *model,
                                   const int64_t *site,
                                   const int64_t *annulus_sites,
                                   const uint8_t *annulus_values,
                                   size_t annulus_count,
                                   int32_t tail_symbol,
                                   double *probs,
                                   size_t probs_len);

/**
 * Transition energy `δ_V(x, u)` assembled from single-site energies.
 *
 * # Safety
 * `window_sites` holds `window_count * dimension` coordinates, `x` and `u`
 * hold `window_count` symbols listed in the same order as the sites, and the
 * annulus arrays are as for [`tef_onepoint_kernel`].
 */
enum TefStatus tef_assemble_delta(const struct TefModel *model,
                                  const int64_t *window_sites,
                                  size_t window_count,
                                  const uint8_t *x,
                                  const uint8_t *u,
                                  const int64_t *annulus_sites,
                                  const uint8_t *annulus_values,
                                  size_t annulus_count,
                                  int32_t tail_symbol,
                                  double *out);

/**
 * Dobrushin or delta uniqueness coefficient with neighbourhoods cut at
 * `radius`.
 *
 * # Safety
 * `model` must be a live handle; the outputs must be writable.
 */
enum TefStatus tef_uniqueness(const struct TefModel *model,
                              enum TefUniquenessMethod method,
                              uint32_t radius,
                              double *out_coefficient,
                              bool *out_satisfied);

/**
 * Heat-bath chain on the box `{0..side-1}^d` with every outside site fixed
 * to `boundary_symbol`. Writes the sample statistics as JSON.
 *
 * # Safety
 * `model` must be a live handle and `json_out` writable. Free the string with
 * [`tef_string_free`].
 */
enum TefStatus tef_sample(const struct TefModel *model,
                          uint32_t side,
                          uint8_t boundary_symbol,
                          uint64_t sweeps,
                          uint64_t burn_in,
                          uint64_t seed,
                          char **json_out);

/**
 * Runs the consistency battery behind `tefield verify` and writes its JSON
 * report. `out_passed` receives the overall verdict.
 *
 * # Safety
 * `model` must be a live handle; the outputs must be writable. Free the
 * string with [`tef_string_free`].
 */
enum TefStatus tef_verify_json(const struct TefModel *model,
                               double tol,
                               bool *out_passed,
                               char **json_out);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void tef_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TEFIELD_H */
