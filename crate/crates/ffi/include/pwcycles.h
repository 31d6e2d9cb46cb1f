#ifndef PWCYCLES_H
#define PWCYCLES_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum PwcStatus {
  PWC_STATUS_OK = 0,
  PWC_STATUS_NULL_POINTER = 1,
  PWC_STATUS_INVALID_ARGUMENT = 2,
  PWC_STATUS_PRECONDITION = 3,
  PWC_STATUS_NUMERICAL = 4,
  PWC_STATUS_SERIALIZATION = 5,
  PWC_STATUS_PANIC = 6,
} PwcStatus;

// Piecewise polynomial vector field.
typedef struct PwcField PwcField;

// Assembled level of the recursive family.
typedef struct PwcLevel PwcLevel;

// Cycle count of one level.
typedef struct PwcReport PwcReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *pwc_last_error_message(void);

// Library version, static storage.
const char *pwc_version(void);

// Frees a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void pwc_string_free(char *s);

// `c_k = 3 k 2^(k-1) + 1`.
uint64_t pwc_expected_cycles(size_t k);

// `n_k = 3 2^k - 1`.
size_t pwc_field_degree(size_t k);

// Level `k` with the default coefficient tables.
//
// # Safety
// `epsilon_vector` must hold `len` doubles (it may be null when `len` is 0);
// `out` must be writable.
enum PwcStatus pwc_level_build(size_t k,
                               double epsilon,
                               const double *epsilon_vector,
                               size_t len,
                               struct PwcLevel **out);

// # Safety
// `level` must come from [`pwc_level_build`] and not have been freed.
void pwc_level_free(struct PwcLevel *level);

// The vector field of a level.
//
// # Safety
// `level` must be a live handle and `out` writable.
enum PwcStatus pwc_level_field(const struct PwcLevel *level, struct PwcField **out);

// JSON of the level record.
//
// # Safety
// `level` must be a live handle and `out` writable.
enum PwcStatus pwc_level_to_json(const struct PwcLevel *level, char **out);

// Parses a field from JSON.
//
// # Safety
// `text` must be a nul-terminated string and `out` writable.
enum PwcStatus pwc_field_from_json(const char *text, struct PwcField **out);

// # Safety
// `field` must be a live handle and `out` writable.
enum PwcStatus pwc_field_to_json(const struct PwcField *field, char **out);

// # Safety
// `field` must be a live handle and `out` writable.
enum PwcStatus pwc_field_get_degree(const struct PwcField *field, size_t *out);

// `(P, Q)` at `(x, y)`, the upper piece for `x > 0`.
//
// # Safety
// `field` must be a live handle and `out` must hold two doubles.
enum PwcStatus pwc_field_eval(const struct PwcField *field, double x, double y, double *out);

// # Safety
// `field` must come from this library and not have been freed.
void pwc_field_free(struct PwcField *field);

// Certifies the level-0 cycle at `epsilon`.
//
// # Safety
// `out` must be writable.
enum PwcStatus pwc_certify_level0(double epsilon, struct PwcReport **out);

// Certifies levels `0..=k` and returns the report of level `k`.
//
// # Safety
// `epsilon_vector` must hold `len` doubles and `out` must be writable.
enum PwcStatus pwc_certify_level(size_t k,
                                 double epsilon,
                                 const double *epsilon_vector,
                                 size_t len,
                                 struct PwcReport **out);

// # Safety
// `report` must be a live handle and `out` writable.
enum PwcStatus pwc_report_found(const struct PwcReport *report, uint64_t *out);

// # Safety
// `report` must be a live handle and `out` writable.
enum PwcStatus pwc_report_expected(const struct PwcReport *report, uint64_t *out);

// # Safety
// `report` must be a live handle and `out` writable.
enum PwcStatus pwc_report_passed(const struct PwcReport *report, bool *out);

// Seconds spent producing the report; not part of its JSON.
//
// # Safety
// `report` must be a live handle and `out` writable.
enum PwcStatus pwc_report_wall_clock(const struct PwcReport *report, double *out);

// # Safety
// `report` must be a live handle and `out` writable.
enum PwcStatus pwc_report_to_json(const struct PwcReport *report, char **out);

// # Safety
// `report` must come from this library and not have been freed.
void pwc_report_free(struct PwcReport *report);

// Leading `1/eps` term of the second Lyapunov coefficient of the lifted
// two-fold, from the field values at the origin.
//
// # Safety
// `out` must be writable.
enum PwcStatus pwc_lyapunov_v2_leading(double pp,
                                       double qp,
                                       double pm,
                                       double qm,
                                       double epsilon,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PWCYCLES_H */
