#ifndef PHOTONIC_PINN_H
#define PHOTONIC_PINN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum PpStatus {
  PP_STATUS_OK = 0,
  PP_STATUS_NULL_POINTER = 1,
  PP_STATUS_INVALID_ARGUMENT = 2,
  PP_STATUS_CONFIG = 3,
  PP_STATUS_DOMAIN = 4,
  PP_STATUS_FORMAT = 5,
  PP_STATUS_RANGE = 6,
  PP_STATUS_OUT_OF_RANGE = 7,
  PP_STATUS_DIVERGENCE = 8,
  PP_STATUS_IO = 9,
  PP_STATUS_BUFFER_TOO_SMALL = 10,
  PP_STATUS_PANIC = 11,
} PpStatus;

// A simulated weight bank: four ring curves plus quantization and noise.
typedef struct PpBank PpBank;

// Network parameters for the default topology.
typedef struct PpParams PpParams;

// A completed training run.
typedef struct PpReport PpReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next call into this library from the same thread.
const char *pp_last_error_message(void);

// Number of trainable parameters in the default network.
size_t pp_param_count(void);

// Tile operations per forward pass of the default network.
uint64_t pp_tile_ops_per_forward(void);

// Exact solution at `(x, t)`.
//
// # Safety
// `out` must be a valid pointer to a `double`.
enum PpStatus pp_analytic_solution(double x, double t, double *out);

// Builds a bank from synthesized ring curves. `bits` = 0 means full
// precision; otherwise it applies to inputs, voltages and detectors alike.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum PpStatus pp_bank_new_synth(double sigma_fab,
                                uint64_t hw_seed,
                                uint32_t bits,
                                double sigma_read,
                                struct PpBank **out);

// Builds the bank described by a run configuration file.
//
// # Safety
// `config_path` must be a NUL-terminated string; `out` a valid handle slot.
enum PpStatus pp_bank_from_config(const char *config_path, struct PpBank **out);

// Realized weight of ring `channel` (0..4) at heater voltage `v`.
//
// # Safety
// `bank` must come from this library; `out` must be valid.
enum PpStatus pp_bank_channel_weight(const struct PpBank *bank,
                                     size_t channel,
                                     double v,
                                     double *out);

// # Safety
// `bank` must be NULL or a handle from this library not yet freed.
void pp_bank_free(struct PpBank *bank);

// Random initial parameters for `bank`.
//
// # Safety
// `bank` must come from this library; `out` must be a valid handle slot.
enum PpStatus pp_params_init(const struct PpBank *bank, uint64_t seed, struct PpParams **out);

// Parameters from a flat array of [`pp_param_count`] values (voltages in
// layer order, each layer input-major, then biases).
//
// # Safety
// `values` must point to `len` doubles; `out` must be a valid handle slot.
enum PpStatus pp_params_from_values(const double *values, size_t len, struct PpParams **out);

// Parameters read from a checkpoint CSV.
//
// # Safety
// `path` must be a NUL-terminated string; `out` a valid handle slot.
enum PpStatus pp_params_load_checkpoint(const char *path, struct PpParams **out);

// Copies the flat parameter values into `buf`. `len` must be at least
// [`pp_param_count`].
//
// # Safety
// `params` must come from this library; `buf` must hold `len` doubles.
enum PpStatus pp_params_copy(const struct PpParams *params, double *buf, size_t len);

// # Safety
// `params` must be NULL or a handle from this library not yet freed.
void pp_params_free(struct PpParams *params);

// One forward pass at `(x, t)`. Read noise is drawn from the stream keyed by
// `noise_key`, starting at position 0. `tile_ops` may be NULL.
//
// # Safety
// Handles must come from this library; `u` must be valid.
enum PpStatus pp_forward(const struct PpParams *params,
                         const struct PpBank *bank,
                         double x,
                         double t,
                         uint64_t noise_key,
                         double *u,
                         uint64_t *tile_ops);

// Runs `train` for a configuration file and writes its outputs. With
// `force` = 0 existing outputs are not overwritten. On divergence the
// partial outputs are written and no report is returned.
//
// # Safety
// `config_path` must be a NUL-terminated string; `out` a valid handle slot.
enum PpStatus pp_train(const char *config_path, int32_t force, struct PpReport **out);

// Number of iterations recorded.
//
// # Safety
// `report` must come from this library.
size_t pp_report_iterations(const struct PpReport *report);

// Relative L2 error of the trained model on the evaluation grid.
//
// # Safety
// `report` must come from this library; `out` must be valid.
enum PpStatus pp_report_l2_rel(const struct PpReport *report, double *out);

// Copies the trained parameters into a new handle.
//
// # Safety
// `report` must come from this library; `out` a valid handle slot.
enum PpStatus pp_report_params(const struct PpReport *report, struct PpParams **out);

// # Safety
// `report` must be NULL or a handle from this library not yet freed.
void pp_report_free(struct PpReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHOTONIC_PINN_H */
