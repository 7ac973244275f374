#ifndef LILORA_H
#define LILORA_H

/* Generated by cbindgen from lilora-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible function.
typedef enum LiloraStatus {
  LILORA_OK = 0,
  // Invalid argument or configuration.
  LILORA_INVALID_ARGUMENT = 1,
  // Runtime failure (training, I/O, internal panic).
  LILORA_RUNTIME_ERROR = 2,
  // Checksum mismatch or corrupted artifact.
  LILORA_INTEGRITY_ERROR = 3,
  // A required pointer argument was null.
  LILORA_NULL_POINTER = 4,
} LiloraStatus;

// Opaque task-suite handle.
typedef struct LiloraSuite LiloraSuite;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version string of the library; the pointer is valid for the process
// lifetime.
const char *lilora_version(void);

// Message of the last error raised on this thread; valid until the next
// failing call on the same thread.
const char *lilora_last_error_message(void);

// Generate a synthetic continual task suite. On success `*out` owns the
// suite; release it with `lilora_suite_free`.
//
// # Safety
// `out` must be a valid pointer.
enum LiloraStatus lilora_suite_generate(uint32_t d_in,
                                        uint32_t tasks,
                                        uint32_t classes_per_task,
                                        uint32_t train_per_class,
                                        double sigma,
                                        uint64_t seed,
                                        struct LiloraSuite **out);

// Write a suite to `path` (atomic, checksummed).
//
// # Safety
// `suite` must come from this library; `path` must be a valid C string.
enum LiloraStatus lilora_suite_save(const struct LiloraSuite *suite, const char *path);

// Load a suite from `path`, verifying the checksum.
//
// # Safety
// `path` must be a valid C string; `out` must be a valid pointer.
enum LiloraStatus lilora_suite_load(const char *path, struct LiloraSuite **out);

// Number of tasks in the suite.
//
// # Safety
// `suite` must come from this library; `out` must be a valid pointer.
enum LiloraStatus lilora_suite_num_tasks(const struct LiloraSuite *suite, uint32_t *out);

// Release a suite handle. A null pointer is a no-op.
//
// # Safety
// `suite` must come from this library and not be freed twice.
void lilora_suite_free(struct LiloraSuite *suite);

// `AP_k` over a flat lower-triangular accuracy matrix.
//
// # Safety
// `values` must point to `len` doubles; `out` must be a valid pointer.
enum LiloraStatus lilora_average_performance(const double *values,
                                             uintptr_t len,
                                             uint32_t k,
                                             double *out);

// `MAP_k` over a flat lower-triangular accuracy matrix.
//
// # Safety
// `values` must point to `len` doubles; `out` must be a valid pointer.
enum LiloraStatus lilora_mean_average_performance(const double *values,
                                                  uintptr_t len,
                                                  uint32_t k,
                                                  double *out);

// `BWT_k` over a flat lower-triangular accuracy matrix (k >= 2).
//
// # Safety
// `values` must point to `len` doubles; `out` must be a valid pointer.
enum LiloraStatus lilora_backward_transfer(const double *values,
                                           uintptr_t len,
                                           uint32_t k,
                                           double *out);

// Closed-form parameter counts of `strategy_tag` over `layers` identical
// layers of shape `d x k` with ranks `r` and `r_tilde`, after `num_tasks`
// tasks.
//
// # Safety
// `strategy_tag` must be a valid C string; the three out-pointers must be
// valid.
enum LiloraStatus lilora_param_counts(const char *strategy_tag,
                                      uint32_t d,
                                      uint32_t k,
                                      uint32_t r,
                                      uint32_t r_tilde,
                                      uint32_t layers,
                                      uint32_t num_tasks,
                                      uint64_t *total,
                                      uint64_t *per_task,
                                      uint64_t *shared);

// Linear centered kernel alignment between two row-major matrices whose
// rows are samples.
//
// # Safety
// `x` and `y` must point to `x_rows*x_cols` and `y_rows*y_cols` doubles;
// `out` must be a valid pointer.
enum LiloraStatus lilora_linear_cka(const double *x,
                                    uint32_t x_rows,
                                    uint32_t x_cols,
                                    const double *y,
                                    uint32_t y_rows,
                                    uint32_t y_cols,
                                    double *out);

// Run a full experiment from a TOML configuration file: pretraining (suite
// plus frozen backbone) followed by every configured strategy. Artifacts
// are written to the config's output directory.
//
// # Safety
// `config_path` must be a valid C string.
enum LiloraStatus lilora_run_experiment(const char *config_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LILORA_H */
