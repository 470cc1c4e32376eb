#ifndef FLEA_LAB_H
#define FLEA_LAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum FleaStatus {
  FLEA_STATUS_OK = 0,
  FLEA_STATUS_NULL_POINTER = 1,
  FLEA_STATUS_INVALID_ARGUMENT = 2,
  FLEA_STATUS_NUMERICAL_FAILURE = 3,
  FLEA_STATUS_PANIC = 4,
} FleaStatus;

/**
 * A double-well potential with an optional flea.
 */
typedef struct FleaPotential FleaPotential;

/**
 * The lowest levels of a potential on a grid.
 */
typedef struct FleaSpectrum FleaSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates the well `lambda/4 (x^2 - a^2)^2` with `a = omega / sqrt(lambda)`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum FleaStatus flea_potential_new(double omega, double lambda, struct FleaPotential **out);

/**
 * Installs the bump of height `d` and half-width `c` centered at `b`, replacing any previous one.
 *
 * # Safety
 * `potential` must be a live handle from [`flea_potential_new`].
 */
enum FleaStatus flea_potential_set_flea(struct FleaPotential *potential,
                                        double b,
                                        double c,
                                        double d);

/**
 * Removes the flea.
 *
 * # Safety
 * `potential` must be a live handle.
 */
enum FleaStatus flea_potential_clear_flea(struct FleaPotential *potential);

/**
 * `V(x)` including the flea.
 *
 * # Safety
 * `potential` must be a live handle and `out` writable.
 */
enum FleaStatus flea_potential_eval(const struct FleaPotential *potential, double x, double *out);

/**
 * Agmon distance between `x` and `y` in the unperturbed well.
 *
 * # Safety
 * `potential` must be a live handle and `out` writable.
 */
enum FleaStatus flea_potential_agmon_distance(const struct FleaPotential *potential,
                                              double x,
                                              double y,
                                              double *out);

/**
 * Releases a potential. Null is ignored.
 *
 * # Safety
 * `potential` must be null or a handle not yet freed.
 */
void flea_potential_free(struct FleaPotential *potential);

/**
 * Solves for the `levels` lowest states on `points` interior grid points.
 *
 * # Safety
 * `potential` must be a live handle and `out` writable.
 */
enum FleaStatus flea_spectrum_compute(const struct FleaPotential *potential,
                                      double hbar,
                                      size_t points,
                                      size_t levels,
                                      struct FleaSpectrum **out);

/**
 * Number of stored levels.
 *
 * # Safety
 * `spectrum` must be a live handle and `out` writable.
 */
enum FleaStatus flea_spectrum_len(const struct FleaSpectrum *spectrum, size_t *out);

/**
 * Energy of level `k`.
 *
 * # Safety
 * `spectrum` must be a live handle and `out` writable.
 */
enum FleaStatus flea_spectrum_eigenvalue(const struct FleaSpectrum *spectrum,
                                         size_t k,
                                         double *out);

/**
 * Number of grid points per state.
 *
 * # Safety
 * `spectrum` must be a live handle and `out` writable.
 */
enum FleaStatus flea_spectrum_grid_len(const struct FleaSpectrum *spectrum, size_t *out);

/**
 * Copies the grid into `x` and the real, unit-normalized state `k` into `psi`.
 *
 * Both buffers must hold `len` doubles, and `len` must equal the grid length; `x` may be null.
 *
 * # Safety
 * `spectrum` must be a live handle; non-null buffers must hold `len` writable doubles.
 */
enum FleaStatus flea_spectrum_copy_state(const struct FleaSpectrum *spectrum,
                                         size_t k,
                                         double *x,
                                         double *psi,
                                         size_t len);

/**
 * Probability of `x < 0` in level `k`.
 *
 * # Safety
 * `spectrum` must be a live handle and `out` writable.
 */
enum FleaStatus flea_spectrum_mass_left(const struct FleaSpectrum *spectrum, size_t k, double *out);

/**
 * Releases a spectrum. Null is ignored.
 *
 * # Safety
 * `spectrum` must be null or a handle not yet freed.
 */
void flea_spectrum_free(struct FleaSpectrum *spectrum);

/**
 * `P_L(t)` after switching on a flea of strength `delta` in the two-level model,
 * starting from the symmetric ground state. `side` is 0 for the left well, 1 for the right.
 *
 * # Safety
 * `out` must be writable.
 */
enum FleaStatus flea_two_level_p_left(double splitting,
                                      double delta,
                                      int side,
                                      double t,
                                      double hbar,
                                      double *out);

/**
 * The barrier phase correction as a function of the barrier action `k`.
 *
 * # Safety
 * `out` must be writable.
 */
enum FleaStatus flea_wkb_phi_tilde(double k, double *out);

/**
 * Message of the last failure on this thread, or an empty string.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *flea_last_error_message(void);

/**
 * Static name of a status code.
 */
const char *flea_status_string(enum FleaStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLEA_LAB_H */
