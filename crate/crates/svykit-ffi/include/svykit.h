#ifndef SVYKIT_H
#define SVYKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Zero is success.
typedef enum SvyStatus {
  SVY_STATUS_OK = 0,
  SVY_STATUS_NULL_POINTER = 1,
  SVY_STATUS_INVALID_INPUT = 2,
  SVY_STATUS_DATA = 3,
  SVY_STATUS_ZERO_INCLUSION = 4,
  SVY_STATUS_SUPPORT_TOO_LARGE = 5,
  SVY_STATUS_NOT_ENUMERABLE = 6,
  SVY_STATUS_SINGULAR = 7,
  SVY_STATUS_NO_CONVERGENCE = 8,
  SVY_STATUS_NUMERICAL = 9,
  SVY_STATUS_BUFFER_TOO_SMALL = 10,
  SVY_STATUS_PANIC = 99,
} SvyStatus;

// Opaque sampling design.
typedef struct SvyDesign SvyDesign;

// Opaque population frame.
typedef struct SvyFrame SvyFrame;

// Opaque realized sample.
typedef struct SvySample SvySample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *svy_last_error(void);

// Library version as a static NUL-terminated string.
const char *svy_version(void);

// Frame of `n` units with sizes `mos`.
//
// # Safety
// `mos` must point to `n` doubles; `out` must be writable.
enum SvyStatus svy_frame_from_mos(const double *mos, size_t n, struct SvyFrame **out);

// Read a frame from a CSV file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SvyStatus svy_frame_from_csv(const char *path, struct SvyFrame **out);

// Attach one study variable to every unit.
//
// # Safety
// `frame` must be a live handle and `y` must point to `n` doubles.
enum SvyStatus svy_frame_set_y(struct SvyFrame *frame, const double *y, size_t n);

// # Safety
// `frame` must be NULL or a handle not yet freed.
size_t svy_frame_len(const struct SvyFrame *frame);

// # Safety
// `frame` must be NULL or a handle from this library, freed once.
void svy_frame_free(struct SvyFrame *frame);

// Parse and validate a JSON design document such as `{"srs":{"n":2}}`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum SvyStatus svy_design_from_json(const char *json, struct SvyDesign **out);

// # Safety
// `design` must be NULL or a handle from this library, freed once.
void svy_design_free(struct SvyDesign *design);

// First-order inclusion probabilities into `out`, which holds `cap`
// doubles. `cap` must be at least the frame size.
//
// # Safety
// Handles must be live; `out` must point to `cap` writable doubles.
enum SvyStatus svy_inclusion_probs(const struct SvyDesign *design,
                                   const struct SvyFrame *frame,
                                   double *out,
                                   size_t cap);

// Draw one sample with the seeded stream `(seed, 0)`.
//
// # Safety
// Handles must be live; `out` must be writable.
enum SvyStatus svy_draw(const struct SvyDesign *design,
                        const struct SvyFrame *frame,
                        uint64_t seed,
                        struct SvySample **out);

// Number of distinct units in the sample.
//
// # Safety
// `sample` must be NULL or a live handle.
size_t svy_sample_len(const struct SvySample *sample);

// Frame positions (0-based) of the sampled units.
//
// # Safety
// `sample` must be live; `out` must point to `cap` writable slots.
enum SvyStatus svy_sample_units(const struct SvySample *sample, size_t *out, size_t cap);

// Inclusion probabilities of the sampled units, in sample order.
//
// # Safety
// `sample` must be live; `out` must point to `cap` writable doubles.
enum SvyStatus svy_sample_pis(const struct SvySample *sample, double *out, size_t cap);

// # Safety
// `sample` must be NULL or a handle from this library, freed once.
void svy_sample_free(struct SvySample *sample);

// Horvitz-Thompson total of the frame's first study variable.
//
// # Safety
// Handles must be live; `value` must be writable.
enum SvyStatus svy_ht_total(const struct SvySample *sample,
                            const struct SvyFrame *frame,
                            double *value);

// Exact design mean and variance of the HT total, by enumeration.
//
// # Safety
// Handles must be live; `mean` and `variance` must be writable.
enum SvyStatus svy_exact_ht_moments(const struct SvyDesign *design,
                                    const struct SvyFrame *frame,
                                    double *mean,
                                    double *variance);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SVYKIT_H */
