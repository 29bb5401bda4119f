#ifndef OTDDF_H
#define OTDDF_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum OtddfStatus {
  OTDDF_STATUS_OK = 0,
  // Null pointer, bad UTF-8, wrong buffer length or an out-of-range index.
  OTDDF_STATUS_INVALID_ARGUMENT = 1,
  // Burn-in plus window exceeds the dataset horizon, or the observation
  // window does not match the map.
  OTDDF_STATUS_INVALID_WINDOW = 2,
  OTDDF_STATUS_IO = 3,
  // Malformed JSON, CSV or map file.
  OTDDF_STATUS_PARSE = 4,
  OTDDF_STATUS_TRAINING_DIVERGED = 5,
  // Overflow, singular matrix or degenerate weights.
  OTDDF_STATUS_NUMERICAL = 6,
  // A Rust panic was caught at the boundary.
  OTDDF_STATUS_PANIC = 7,
} OtddfStatus;

// Simulated or loaded trajectory dataset.
typedef struct OtddfDataset OtddfDataset;

// Trained transport map together with its base pool.
typedef struct OtddfMap OtddfMap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *otddf_version(void);

// Copies the calling thread's last error message into `buf` (truncated and
// always NUL-terminated when `len > 0`). Returns the full message length
// without the terminator; 0 means no error has been recorded.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t otddf_last_error_message(char *buf, size_t len);

// Simulates `trajectories` trajectories of `horizon` steps from the model
// described by `model_json`, e.g. `{"kind":"lorenz63"}` or
// `{"kind":"linear","alpha":0.9,"sigma":0.3,"observation_kind":"quadratic"}`.
// The initial state is the model's default initial distribution.
//
// # Safety
// `model_json` must be a NUL-terminated string; `out` must be writable.
enum OtddfStatus otddf_dataset_simulate(const char *model_json,
                                        size_t trajectories,
                                        size_t horizon,
                                        uint64_t seed,
                                        struct OtddfDataset **out);

// Reads a dataset CSV and its metadata sidecar.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum OtddfStatus otddf_dataset_load(const char *path, struct OtddfDataset **out);

// Writes the dataset as CSV plus metadata sidecar.
//
// # Safety
// `dataset` must come from this library; `path` must be NUL-terminated.
enum OtddfStatus otddf_dataset_save(const struct OtddfDataset *dataset, const char *path);

// Trajectory count, horizon and dimensions; any output may be null.
//
// # Safety
// `dataset` must come from this library; non-null outputs must be writable.
enum OtddfStatus otddf_dataset_dims(const struct OtddfDataset *dataset,
                                    size_t *trajectories,
                                    size_t *horizon,
                                    size_t *state_dim,
                                    size_t *obs_dim);

// Copies observation `y_t` (`t` in `1..=horizon`) of trajectory `j` into
// `out`, which must hold exactly `obs_dim` values.
//
// # Safety
// `dataset` must come from this library; `out` must be valid for `len` values.
enum OtddfStatus otddf_dataset_observation(const struct OtddfDataset *dataset,
                                           size_t j,
                                           size_t t,
                                           double *out,
                                           size_t len);

// Copies state `X_t` (`t` in `0..=horizon`) of trajectory `j` into `out`,
// which must hold exactly `state_dim` values.
//
// # Safety
// `dataset` must come from this library; `out` must be valid for `len` values.
enum OtddfStatus otddf_dataset_state(const struct OtddfDataset *dataset,
                                     size_t j,
                                     size_t t,
                                     double *out,
                                     size_t len);

// # Safety
// `dataset` must be null or come from this library, and not be used again.
void otddf_dataset_free(struct OtddfDataset *dataset);

// Trains a map on `dataset`. `config_json` holds the training configuration
// (window, burn-in, seed, architecture, learning rates, iteration counts);
// omitted fields take their defaults. Null means all defaults.
//
// # Safety
// `dataset` must come from this library; `config_json` must be null or
// NUL-terminated; `out` must be writable.
enum OtddfStatus otddf_map_train(const struct OtddfDataset *dataset,
                                 const char *config_json,
                                 struct OtddfMap **out);

// # Safety
// `path` must be NUL-terminated; `out` must be writable.
enum OtddfStatus otddf_map_load(const char *path, struct OtddfMap **out);

// # Safety
// `map` must come from this library; `path` must be NUL-terminated.
enum OtddfStatus otddf_map_save(const struct OtddfMap *map, const char *path);

// State dimension, observation dimension, window size and base pool size;
// any output may be null.
//
// # Safety
// `map` must come from this library; non-null outputs must be writable.
enum OtddfStatus otddf_map_dims(const struct OtddfMap *map,
                                size_t *state_dim,
                                size_t *obs_dim,
                                size_t *window,
                                size_t *pool_size);

// Applies the map to `count` given base states (`count x state_dim`,
// row-major) conditioned on the observation window (`window x obs_dim`,
// oldest first, row-major). Writes `count x state_dim` values to `out`.
//
// # Safety
// Buffers must be valid for the stated lengths.
enum OtddfStatus otddf_map_push_forward(const struct OtddfMap *map,
                                        const double *base,
                                        size_t count,
                                        const double *window,
                                        size_t window_len,
                                        double *out,
                                        size_t out_len);

// One online filtering step: draws `count` base states from the map's pool
// and pushes them through the map. Deterministic in `seed`.
//
// # Safety
// Buffers must be valid for the stated lengths.
enum OtddfStatus otddf_map_sample(const struct OtddfMap *map,
                                  const double *window,
                                  size_t window_len,
                                  size_t count,
                                  uint64_t seed,
                                  double *out,
                                  size_t out_len);

// # Safety
// `map` must be null or come from this library, and not be used again.
void otddf_map_free(struct OtddfMap *map);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OTDDF_H */
