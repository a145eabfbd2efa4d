#ifndef MHTEST_H
#define MHTEST_H

/* Generated from the mhtest-ffi crate sources; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Flat result code of every fallible call.
typedef enum MhtStatus {
  // The call succeeded and all out-parameters are set.
  MHT_STATUS_OK = 0,
  // A required pointer argument was NULL.
  MHT_STATUS_NULL_POINTER = 1,
  // Malformed input: bad probabilities, shapes, or documents.
  MHT_STATUS_INVALID_ARGUMENT = 2,
  // A parameter lies outside its mathematically valid range.
  MHT_STATUS_OUT_OF_RANGE = 3,
  // An iterative routine failed to converge or found no solution.
  MHT_STATUS_SOLVER_FAILED = 4,
  // The requested exact enumeration exceeds the supplied cap.
  MHT_STATUS_CAP_EXCEEDED = 5,
  // An internal invariant was violated; the library state is still
  // sound but the call produced nothing.
  MHT_STATUS_PANIC = 6,
} MhtStatus;

// A positive joint distribution on a finite product alphabet.
typedef struct MhtDist MhtDist;

// A solved gap system for a fixed base pair: the two aligned members,
// the additive statistic, and everything needed to price error rates.
typedef struct MhtSolution MhtSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version string of the library, static storage.
const char *mht_version(void);

// Message describing the most recent failure on this thread, empty when
// nothing failed yet. Valid until the next failing call on this thread.
const char *mht_last_error(void);

// Builds a distribution from `x_size * y_size` row-major cell masses.
// Cells must be strictly positive and sum to 1 within 1e-9.
//
// # Safety
// `cells` must point to `x_size * y_size` readable doubles and `out` to a
// writable handle slot, or be NULL (rejected cleanly).
enum MhtStatus mht_dist_new(size_t x_size,
                            size_t y_size,
                            const double *cells,
                            struct MhtDist **out);

// Builds a distribution from a JSON document with fields `x_size`,
// `y_size`, and `p` (array of rows).
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable handle
// slot, or NULL (rejected cleanly).
enum MhtStatus mht_dist_from_json(const char *json, struct MhtDist **out);

// Releases a distribution handle. NULL is accepted and ignored.
//
// # Safety
// `d` must be NULL or a handle from this library not yet freed.
void mht_dist_free(struct MhtDist *d);

// First-alphabet size, or 0 for NULL.
//
// # Safety
// `d` must be NULL or a live handle.
size_t mht_dist_x_size(const struct MhtDist *d);

// Second-alphabet size, or 0 for NULL.
//
// # Safety
// `d` must be NULL or a live handle.
size_t mht_dist_y_size(const struct MhtDist *d);

// Copies the row-major cell masses into `buf`, which must hold at least
// `len >= x_size * y_size` entries.
//
// # Safety
// `d` must be NULL or a live handle; `buf` must be NULL or writable for
// `len` doubles.
enum MhtStatus mht_dist_cells(const struct MhtDist *d, double *buf, size_t len);

// Projected relative entropy E(p || q): the minimum divergence against
// `q` over distributions sharing `p`'s marginals.
//
// # Safety
// Handles must be NULL or live; `out` must be NULL or writable.
enum MhtStatus mht_projected_divergence(const struct MhtDist *p,
                                        const struct MhtDist *q,
                                        double *out);

// Closed admissible interval of the gap parameter,
// [-E(q || p), E(p || q)].
//
// # Safety
// Handles must be NULL or live; out-pointers must be NULL or writable.
enum MhtStatus mht_admissible_interval(const struct MhtDist *p,
                                       const struct MhtDist *q,
                                       double *out_low,
                                       double *out_high);

// Solves the gap system at `lambda`, which must lie in the closed
// admissible interval; values at the ends resolve to the endpoint
// solutions. `tol` is the solver's residual target (1e-11 is a good
// default).
//
// # Safety
// Handles must be NULL or live; `out` must be NULL or a writable handle
// slot.
enum MhtStatus mht_solve_pair(const struct MhtDist *p,
                              const struct MhtDist *q,
                              double lambda,
                              double tol,
                              struct MhtSolution **out);

// Solves for the gap whose type-I exponent equals `r`,
// with `r` in [0, E(q || p)].
//
// # Safety
// Handles must be NULL or live; `out` must be NULL or a writable handle
// slot.
enum MhtStatus mht_solve_for_rate(const struct MhtDist *p,
                                  const struct MhtDist *q,
                                  double r,
                                  double tol,
                                  struct MhtSolution **out);

// Releases a solution handle. NULL is accepted and ignored.
//
// # Safety
// `s` must be NULL or a handle from this library not yet freed.
void mht_solution_free(struct MhtSolution *s);

// Gap value of the solution, or NaN for NULL.
//
// # Safety
// `s` must be NULL or a live handle.
double mht_solution_lambda(const struct MhtSolution *s);

// Alignment slope `a` (0 at the upper endpoint, +inf at the lower one),
// or NaN for NULL.
//
// # Safety
// `s` must be NULL or a live handle.
double mht_solution_slope(const struct MhtSolution *s);

// Alignment offset `b`, or NaN for NULL.
//
// # Safety
// `s` must be NULL or a live handle.
double mht_solution_offset(const struct MhtSolution *s);

// Large-deviation exponents of the two error probabilities at the
// canonical threshold: D(p_member || p) and D(q_member || q).
//
// # Safety
// `s` must be NULL or a live handle; out-pointers must be NULL or
// writable.
enum MhtStatus mht_solution_exponents(const struct MhtSolution *s,
                                      double *out_type1,
                                      double *out_type2);

// Evaluates the per-letter additive statistic on a pair of marginal
// types, given as frequency vectors of the two alphabets.
//
// # Safety
// `s` must be NULL or a live handle; `tx` and `ty` must point to
// `tx_len` and `ty_len` readable doubles; `out` must be NULL or
// writable.
enum MhtStatus mht_solution_statistic(const struct MhtSolution *s,
                                      const double *tx,
                                      size_t tx_len,
                                      const double *ty,
                                      size_t ty_len,
                                      double *out);

// Exact error probabilities of the threshold rule on the solution's
// statistic at blocklength `n`: accept the null when the statistic
// exceeds `tau`. `cap` bounds the joint-type enumeration; the optional
// log out-pointers (NULL allowed) receive natural-log rates, with
// -inf for an exactly zero probability.
//
// # Safety
// `s` must be NULL or a live handle; `out_alpha` and `out_beta` must be
// NULL or writable; the log out-pointers may be NULL or writable.
enum MhtStatus mht_solution_exact_rates(const struct MhtSolution *s,
                                        double tau,
                                        uint64_t n,
                                        uint64_t cap,
                                        double *out_alpha,
                                        double *out_beta,
                                        double *out_log_alpha,
                                        double *out_log_beta);

// Exact error probabilities of the divergence-ball rule with radius `r`
// at blocklength `n`: accept the null when the observed marginal pair
// can be coupled within projected divergence `r` of `p`. Log
// out-pointers as in `mht_solution_exact_rates`.
//
// # Safety
// Handles must be NULL or live; `out_alpha` and `out_beta` must be NULL
// or writable; the log out-pointers may be NULL or writable.
enum MhtStatus mht_hoeffding_exact_rates(const struct MhtDist *p,
                                         const struct MhtDist *q,
                                         double r,
                                         uint64_t n,
                                         uint64_t cap,
                                         double *out_alpha,
                                         double *out_beta,
                                         double *out_log_alpha,
                                         double *out_log_beta);

// First three moments (mean, variance, third absolute central moment)
// of the per-letter information density of the upper-endpoint statistic
// under the null; the inputs of normal-approximation analysis.
//
// # Safety
// Handles must be NULL or live; out-pointers must be NULL or writable.
enum MhtStatus mht_second_order(const struct MhtDist *p,
                                const struct MhtDist *q,
                                double *out_e,
                                double *out_v,
                                double *out_t3);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MHTEST_H */
