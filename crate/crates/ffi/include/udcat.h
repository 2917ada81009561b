#ifndef UDCAT_H
#define UDCAT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum UdcatStatus {
  UDCAT_STATUS_OK = 0,
  UDCAT_STATUS_INVALID_ARGUMENT = 1,
  UDCAT_STATUS_NULL_POINTER = 2,
  UDCAT_STATUS_CAPACITY_EXCEEDED = 3,
  UDCAT_STATUS_NUMERICAL_FAILURE = 4,
  UDCAT_STATUS_PANIC = 5,
} UdcatStatus;

/**
 * Symmetric Fock basis for `D` levels and `N` particles.
 */
typedef struct UdcatBasis UdcatBasis;

/**
 * Low-lying LMG spectrum with parity labels and eigenvectors.
 */
typedef struct UdcatSpectrum UdcatSpectrum;

/**
 * Normalized state in a basis.
 */
typedef struct UdcatState UdcatState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread. The pointer stays valid until
 * the next failing call on the same thread.
 */
const char *udcat_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *udcat_version(void);

enum UdcatStatus udcat_basis_new(size_t levels, uint32_t particles, struct UdcatBasis **basis);

enum UdcatStatus udcat_basis_len(const struct UdcatBasis *basis, size_t *len);

void udcat_basis_free(struct UdcatBasis *basis);

/**
 * Coherent state at `z = re + i im` (`levels - 1` coordinates).
 */
enum UdcatStatus udcat_state_coherent(const struct UdcatBasis *basis,
                                      const double *re,
                                      const double *im,
                                      size_t len,
                                      struct UdcatState **state);

/**
 * Parity-projected coherent state; bit `i` of `parity_mask` is the parity of level `i + 1`.
 */
enum UdcatStatus udcat_state_cat(const struct UdcatBasis *basis,
                                 const double *re,
                                 const double *im,
                                 size_t len,
                                 uint32_t parity_mask,
                                 struct UdcatState **state);

/**
 * Variational cat at the critical point of the three-level model.
 */
enum UdcatStatus udcat_state_variational(const struct UdcatBasis *basis,
                                         uint32_t parity_mask,
                                         double epsilon,
                                         double lambda,
                                         struct UdcatState **state);

void udcat_state_free(struct UdcatState *state);

/**
 * Copies the coefficients into `re`/`im`, which must hold `capacity` entries.
 * `len` receives the basis size; copying happens only when it fits.
 */
enum UdcatStatus udcat_state_coefficients(const struct UdcatState *state,
                                          double *re,
                                          double *im,
                                          size_t capacity,
                                          size_t *len);

enum UdcatStatus udcat_fidelity(const struct UdcatState *a,
                                const struct UdcatState *b,
                                double *value);

enum UdcatStatus udcat_husimi(const struct UdcatState *state,
                              const double *re,
                              const double *im,
                              size_t len,
                              double *value);

/**
 * Exact `nu`-th Husimi moment (`nu >= 2`).
 */
enum UdcatStatus udcat_moment(const struct UdcatState *state, uint32_t nu, double *value);

/**
 * Wehrl entropy by Haar Monte Carlo, with its standard error.
 */
enum UdcatStatus udcat_wehrl(const struct UdcatState *state,
                             size_t samples,
                             uint64_t seed,
                             double *value,
                             double *std_error);

/**
 * Number of Husimi maxima on a square position slice `|x_i| <= half_width`.
 */
enum UdcatStatus udcat_count_humps(const struct UdcatState *state,
                                   double half_width,
                                   size_t resolution,
                                   size_t *count);

/**
 * Diagonalizes the LMG energy density, keeping the lowest `keep` eigenvectors.
 */
enum UdcatStatus udcat_spectrum_new(size_t levels,
                                    uint32_t particles,
                                    double epsilon,
                                    double lambda,
                                    size_t keep,
                                    struct UdcatSpectrum **spectrum);

/**
 * Number of eigenvectors kept.
 */
enum UdcatStatus udcat_spectrum_len(const struct UdcatSpectrum *spectrum, size_t *len);

/**
 * Energy, parity mask and parity certainty of level `index`.
 */
enum UdcatStatus udcat_spectrum_level(const struct UdcatSpectrum *spectrum,
                                      size_t index,
                                      double *energy,
                                      uint32_t *parity_mask,
                                      double *certainty);

/**
 * Copy of eigenvector `index` as a new state handle.
 */
enum UdcatStatus udcat_spectrum_state(const struct UdcatSpectrum *spectrum,
                                      size_t index,
                                      struct UdcatState **state);

void udcat_spectrum_free(struct UdcatSpectrum *spectrum);

/**
 * Ground-state energy density of the three-level model as `N -> infinity`.
 */
enum UdcatStatus udcat_gs_energy_limit(double epsilon, double lambda, double *value);

/**
 * Real critical coordinates `(z1, z2)` minimizing the energy surface.
 */
enum UdcatStatus udcat_critical_point(double epsilon, double lambda, double *z1, double *z2);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UDCAT_H */
