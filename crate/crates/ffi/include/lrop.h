#ifndef LROP_H
#define LROP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Values 2 to 4 match the command-line exit codes.
 */
typedef enum LropStatus {
  LROP_STATUS_OK = 0,
  LROP_STATUS_NULL_POINTER = 1,
  LROP_STATUS_CONFIG = 2,
  LROP_STATUS_RESOURCE = 3,
  LROP_STATUS_NUMERICAL = 4,
  LROP_STATUS_PANIC = 5,
} LropStatus;

/**
 * Opaque step kernel.
 */
typedef struct LropKernel LropKernel;

/**
 * Opaque two-point estimator table.
 */
typedef struct LropTable LropTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *lrop_version(void);

/**
 * Length in bytes of the last error message on this thread, excluding the
 * terminating NUL; 0 when the last call succeeded.
 */
uintptr_t lrop_last_error_length(void);

/**
 * Copies the last error message into `buf` (NUL-terminated, truncated to
 * `len - 1` bytes). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
uintptr_t lrop_last_error_message(char *buf, uintptr_t len);

/**
 * Builds the power-law kernel. `tail_tol <= 0` keeps the default.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum LropStatus lrop_kernel_new(uintptr_t d,
                                double alpha,
                                uint32_t l,
                                uint64_t radius,
                                double tail_tol,
                                struct LropKernel **out);

/**
 * Releases a kernel; null is ignored.
 *
 * # Safety
 * `k` must come from [`lrop_kernel_new`] and not be used afterwards.
 */
void lrop_kernel_free(struct LropKernel *k);

/**
 * Spatial dimension of the kernel.
 *
 * # Safety
 * `k` must be a live kernel handle and `out` writable.
 */
enum LropStatus lrop_kernel_dim(const struct LropKernel *k, uintptr_t *out);

/**
 * `D(x)` at the `d` coordinates `site`.
 *
 * # Safety
 * `site` must hold `d` values; `k` live; `out` writable.
 */
enum LropStatus lrop_kernel_mass(const struct LropKernel *k,
                                 const int64_t *site,
                                 uintptr_t d,
                                 double *out);

/**
 * `D̂(k)` at the `d` components `kvec`.
 *
 * # Safety
 * `kvec` must hold `d` values; `k` live; `out` writable.
 */
enum LropStatus lrop_kernel_fourier(const struct LropKernel *k,
                                    const double *kvec,
                                    uintptr_t d,
                                    double *out);

/**
 * Bound on the mass discarded by truncation.
 *
 * # Safety
 * `k` live; `out` writable.
 */
enum LropStatus lrop_kernel_tail_mass(const struct LropKernel *k, double *out);

/**
 * Critical-point prediction with default diagram settings.
 *
 * # Safety
 * `k` live; both out pointers writable.
 */
enum LropStatus lrop_pc_prediction(const struct LropKernel *k,
                                   double *out_value,
                                   double *out_uncertainty);

/**
 * Monte Carlo estimate of `Z_p(0; n)`, `n <= n_max`, from `replicas`
 * clusters. Deterministic in `seed`.
 *
 * # Safety
 * `k` live; `out` a valid handle slot.
 */
enum LropStatus lrop_simulate(const struct LropKernel *k,
                              double p,
                              uintptr_t n_max,
                              uint64_t replicas,
                              uint64_t seed,
                              struct LropTable **out);

/**
 * Releases a table; null is ignored.
 *
 * # Safety
 * `t` must come from [`lrop_simulate`] and not be used afterwards.
 */
void lrop_table_free(struct LropTable *t);

/**
 * Replicas folded into the table.
 *
 * # Safety
 * `t` live; `out` writable.
 */
enum LropStatus lrop_table_replicas(const struct LropTable *t, uint64_t *out);

/**
 * Largest time in the table.
 *
 * # Safety
 * `t` live; `out` writable.
 */
enum LropStatus lrop_table_n_max(const struct LropTable *t, uintptr_t *out);

/**
 * `Ẑ(0; n)` and its standard error.
 *
 * # Safety
 * `t` live; out pointers writable.
 */
enum LropStatus lrop_table_z0(const struct LropTable *t,
                              uintptr_t n,
                              double *out_mean,
                              double *out_stderr);

/**
 * Adds the replicas of `src` into `dst`.
 *
 * # Safety
 * Both handles live and distinct.
 */
enum LropStatus lrop_table_merge(struct LropTable *dst, const struct LropTable *src);

/**
 * Runs one subcommand (for example `"pc-formula"`) from a TOML config,
 * writing results below `out_root`.
 *
 * # Safety
 * All strings must be valid NUL-terminated UTF-8.
 */
enum LropStatus lrop_run(const char *subcommand, const char *config_toml, const char *out_root);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LROP_H */
