#ifndef THERMO_H
#define THERMO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  THERMO_STATUS_OK = 0,
  THERMO_STATUS_NULL_POINTER = 1,
  THERMO_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A well-formed request with no answer, such as a flat objective.
   */
  THERMO_STATUS_DOMAIN_ERROR = 3,
  /**
   * Estimation input without any manifold-crossing jump.
   */
  THERMO_STATUS_NO_JUMPS = 4,
  /**
   * The likelihood equation has no admissible root.
   */
  THERMO_STATUS_INVALID_ROOT = 5,
  /**
   * Internal failure; the library state is unaffected.
   */
  THERMO_STATUS_PANIC = 6,
} ThermoStatus;

/**
 * Opaque bath model.
 */
typedef struct ThermoBath ThermoBath;

/**
 * Opaque energy spectrum.
 */
typedef struct ThermoSpectrum ThermoSpectrum;

/**
 * Measure-and-reset reference point.
 */
typedef struct {
  double x_reset;
  double coefficient;
  double bound;
} ThermoResetBound;

/**
 * Optimum of a gap search. `n0_star` is 0 when the search has no level
 * count; `c_star` is NaN when it has no degeneracy fraction.
 */
typedef struct {
  double x_star;
  double c_star;
  double fi_rate;
  double coefficient_per_level;
  size_t n0_star;
  bool converged;
} ThermoOptimum;

/**
 * Sufficient statistics of a two-manifold record.
 */
typedef struct {
  uint64_t k;
  uint64_t l;
  double tau0;
  double tau;
} ThermoStats;

/**
 * Maximum-likelihood temperature estimate.
 */
typedef struct {
  double t_hat;
  double occupation_hat;
  bool valid;
  double log_likelihood;
} ThermoMle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *thermo_version(void);

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *thermo_last_error(void);

/**
 * Spectrum from `len` level values (in units of k_B T or energies,
 * depending on use).
 */
ThermoStatus thermo_spectrum_new(const double *levels, size_t len, ThermoSpectrum **out);

/**
 * Two-level spectrum: `n0` levels at 0 and `n - n0` at `x`.
 */
ThermoStatus thermo_spectrum_two_level(size_t n, size_t n0, double x, ThermoSpectrum **out);

/**
 * Number of levels, or 0 for NULL.
 */
size_t thermo_spectrum_len(const ThermoSpectrum *spectrum);

/**
 * Releases a spectrum; NULL is ignored.
 */
void thermo_spectrum_free(ThermoSpectrum *spectrum);

ThermoStatus thermo_bath_fermionic(double gamma, ThermoBath **out);

/**
 * Bosonic bath with ohmicity `s > 1`.
 */
ThermoStatus thermo_bath_bosonic(double gamma, double s, ThermoBath **out);

/**
 * Releases a bath; NULL is ignored.
 */
void thermo_bath_free(ThermoBath *bath);

/**
 * Dimensionless FI rate of a spectrum given in units of k_B T.
 */
ThermoStatus thermo_fi_rate_exact(const ThermoSpectrum *spectrum,
                                  const ThermoBath *bath,
                                  double *out);

/**
 * Closed-form FI rate of the two-level spectrum `(n, n0, x)`.
 */
ThermoStatus thermo_fi_rate_two_level(size_t n,
                                      size_t n0,
                                      double x,
                                      const ThermoBath *bath,
                                      double *out);

/**
 * FI rate available from time-averaged populations only.
 */
ThermoStatus thermo_empirical_fi_rate(const ThermoSpectrum *spectrum,
                                      const ThermoBath *bath,
                                      double *out);

ThermoStatus thermo_reset_bound(size_t n, const ThermoBath *bath, ThermoResetBound *out);

/**
 * Large-N optimum per level; `empirical` selects the population-only rate.
 */
ThermoStatus thermo_optimize_asymptotic(const ThermoBath *bath, bool empirical, ThermoOptimum *out);

/**
 * Best two-level spectrum with `n` levels.
 */
ThermoStatus thermo_optimize_two_level(size_t n, const ThermoBath *bath, ThermoOptimum *out);

/**
 * Maximum-likelihood temperature for a two-level probe `(n, n0)` with
 * physical gap `epsilon`, using the bath's coupling as the known one.
 */
ThermoStatus thermo_mle(const ThermoStats *stats,
                        size_t n,
                        size_t n0,
                        double epsilon,
                        const ThermoBath *bath,
                        ThermoMle *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THERMO_H */
