#ifndef TLS_SPECTRO_H
#define TLS_SPECTRO_H

/* Generated by cbindgen from crates/ffi/src; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TlsStatus {
  TLS_STATUS_OK = 0,
  TLS_STATUS_NULL_POINTER = 1,
  TLS_STATUS_INVALID_ARGUMENT = 2,
  TLS_STATUS_CONFIG = 3,
  TLS_STATUS_FORMAT = 4,
  TLS_STATUS_IO = 5,
  TLS_STATUS_UNFITTABLE = 6,
  TLS_STATUS_NO_ELIGIBLE = 7,
  TLS_STATUS_INTERNAL = 8,
} TlsStatus;

/**
 * Run configuration.
 */
typedef struct TlsConfig TlsConfig;

/**
 * Simulated or loaded spectrum grid.
 */
typedef struct TlsGrid TlsGrid;

/**
 * Results document.
 */
typedef struct TlsResults TlsResults;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static string.
 */
const char *tls_version(void);

/**
 * Message of the last failed call on this thread, or null. The caller owns
 * the string.
 */
char *tls_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void tls_string_free(char *s);

/**
 * Default configuration. Never null.
 */
struct TlsConfig *tls_config_new(void);

/**
 * # Safety
 * `cfg` must be null or a handle from `tls_config_new`, freed once.
 */
void tls_config_free(struct TlsConfig *cfg);

/**
 * Sets one dotted key (`sweep.v_stop`) to a JSON scalar or bare string.
 * The configuration is unchanged on failure.
 *
 * # Safety
 * `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum TlsStatus tls_config_set(struct TlsConfig *cfg, const char *key, const char *value);

/**
 * Merges a JSON or key=value file over the configuration.
 *
 * # Safety
 * `cfg` must be a live handle; `path` a NUL-terminated string.
 */
enum TlsStatus tls_config_load(struct TlsConfig *cfg, const char *path);

/**
 * Effective configuration as JSON, owned by the caller.
 *
 * # Safety
 * `cfg` must be a live handle; `out` writable.
 */
enum TlsStatus tls_config_json(const struct TlsConfig *cfg, char **out);

/**
 * Samples the configured ensemble and records one sweep.
 *
 * # Safety
 * `cfg` must be a live handle; `out` writable. On success `*out` is a new
 * grid handle.
 */
enum TlsStatus tls_simulate(const struct TlsConfig *cfg, struct TlsGrid **out);

/**
 * # Safety
 * `path` a NUL-terminated string; `out` writable.
 */
enum TlsStatus tls_grid_read(const char *path, struct TlsGrid **out);

/**
 * Writes the grid in the binary encoding when `binary` is nonzero, text
 * otherwise.
 *
 * # Safety
 * `grid` must be a live handle; `path` a NUL-terminated string.
 */
enum TlsStatus tls_grid_write(const struct TlsGrid *grid, const char *path, int32_t binary);

/**
 * # Safety
 * `grid` must be a live handle; the outputs writable.
 */
enum TlsStatus tls_grid_dims(const struct TlsGrid *grid, size_t *n_bias, size_t *n_freq);

/**
 * Copies |S21| in dB, row-major [bias][freq], into `buf` of `len` values.
 *
 * # Safety
 * `grid` must be a live handle; `buf` must hold `len` doubles.
 */
enum TlsStatus tls_grid_magnitude_db(const struct TlsGrid *grid, double *buf, size_t len);

/**
 * # Safety
 * `grid` must be null or a grid handle, freed once.
 */
void tls_grid_free(struct TlsGrid *grid);

/**
 * Full analysis of one grid with the configured parameters. The grid's own
 * device parameters are used.
 *
 * # Safety
 * `grid` and `cfg` must be live handles; `out` writable.
 */
enum TlsStatus tls_analyze(const struct TlsGrid *grid,
                           const struct TlsConfig *cfg,
                           struct TlsResults **out);

/**
 * Runs a treatment script: a built-in name or a script file path.
 *
 * # Safety
 * `script` a NUL-terminated string; `cfg` a live handle; `out` writable.
 */
enum TlsStatus tls_scenario_run(const char *script,
                                const struct TlsConfig *cfg,
                                struct TlsResults **out);

/**
 * # Safety
 * `res` must be a live handle; `out` writable.
 */
enum TlsStatus tls_results_row_count(const struct TlsResults *res, size_t *out);

/**
 * Density of row `row` in TLS/(μm³·GHz) with its one-sigma uncertainty,
 * and the number of fitted hyperbolas in that row.
 *
 * # Safety
 * `res` must be a live handle; the outputs writable.
 */
enum TlsStatus tls_results_row(const struct TlsResults *res,
                               size_t row,
                               double *rho,
                               double *sigma_rho,
                               size_t *n_fits);

/**
 * The results document as JSON, owned by the caller.
 *
 * # Safety
 * `res` must be a live handle; `out` writable.
 */
enum TlsStatus tls_results_json(const struct TlsResults *res, char **out);

/**
 * # Safety
 * `res` must be null or a results handle, freed once.
 */
void tls_results_free(struct TlsResults *res);

/**
 * Degenerate splitting 2g in Hz for dipole `p_z` (e·Å) on the default device.
 *
 * # Safety
 * `out` writable.
 */
enum TlsStatus tls_splitting_hz(double p_z, double *out);

/**
 * Low-power loss tangent for density `rho` (TLS/(μm³·GHz)) and mean
 * squared dipole `mean_pz_sq` ((e·Å)²) on the default device.
 *
 * # Safety
 * `out` writable.
 */
enum TlsStatus tls_loss_from_density(double rho, double mean_pz_sq, double *out);

/**
 * Expected traces showing a hyperbola; `clamped` is set to 1 when the
 * estimate exceeded one.
 *
 * # Safety
 * The outputs writable.
 */
enum TlsStatus tls_hyperbola_occupancy(size_t n_tls,
                                       double mean_width_v,
                                       double v_range_v,
                                       double *out,
                                       int32_t *clamped);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TLS_SPECTRO_H */
