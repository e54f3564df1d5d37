#ifndef CVACC_H
#define CVACC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes for all fallible entry points.
 */
typedef enum CvaccStatus {
  CvaccStatus_Ok = 0,
  /**
   * A pointer argument was null.
   */
  CvaccStatus_NullPointer = 1,
  /**
   * An argument failed validation (range, sign, finiteness).
   */
  CvaccStatus_InvalidArgument = 2,
  /**
   * The requested inversion has no solution in range.
   */
  CvaccStatus_Unsatisfiable = 3,
  /**
   * Calibration failed (bad points or no converged start).
   */
  CvaccStatus_FitFailed = 4,
  /**
   * An internal panic was caught at the boundary.
   */
  CvaccStatus_Panic = 5,
} CvaccStatus;

/**
 * Which model family `cvacc_fit` should calibrate.
 */
typedef enum CvaccModelKind {
  CvaccModelKind_Qrmoda = 0,
  CvaccModelKind_Brmoda = 1,
} CvaccModelKind;

/**
 * Opaque model handle: either QRMODA or BRMODA constants.
 */
typedef struct CvaccModel CvaccModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Create a QRMODA (quantization + resolution) model.
 *
 * Requirements: c1 > 0, c3 >= 0, c4 >= 0, c5 < 0, all finite.
 */
enum CvaccStatus cvacc_qrmoda_new(double c1,
                                  double c2,
                                  double c3,
                                  double c4,
                                  double c5,
                                  struct CvaccModel **out_model);

/**
 * Create a BRMODA (bitrate + resolution) model.
 *
 * Requirements: cp1 >= 0, cp3 < 0, cp4 >= 0, cp5 < 0, all finite.
 * Bitrates passed to eval/invert must use the unit the constants were
 * calibrated in; the ABI does not convert units.
 */
enum CvaccStatus cvacc_brmoda_new(double cp1,
                                  double cp2,
                                  double cp3,
                                  double cp4,
                                  double cp5,
                                  struct CvaccModel **out_model);

/**
 * Release a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must be a pointer previously returned by this library and
 * not already freed.
 */
void cvacc_model_free(struct CvaccModel *model);

/**
 * 1 when the handle is a QRMODA model, 0 for BRMODA, -1 on null.
 *
 * # Safety
 * `model` must be a live handle from this library (or null).
 */
int32_t cvacc_model_is_qrmoda(const struct CvaccModel *model);

/**
 * Evaluate the raw model error at (width, height, knob).
 *
 * The knob is Qp in [0, 51] for QRMODA handles and an actual bitrate
 * (>= 0) for BRMODA handles. The raw value may fall outside [0, 1].
 *
 * # Safety
 * `model` must be a live handle; `out_error` must point to a writable
 * f64.
 */
enum CvaccStatus cvacc_eval(const struct CvaccModel *model,
                            uint32_t width,
                            uint32_t height,
                            double knob,
                            double *out_error);

/**
 * Like `cvacc_eval`, but clamps the result into [0, 1].
 *
 * # Safety
 * Same as `cvacc_eval`.
 */
enum CvaccStatus cvacc_eval_clamped(const struct CvaccModel *model,
                                    uint32_t width,
                                    uint32_t height,
                                    double knob,
                                    double *out_error);

/**
 * Largest integer Qp whose clamped error stays within `target_error`,
 * written to `out_qp`. Returns `Unsatisfiable` when even Qp = 0
 * exceeds the target.
 *
 * # Safety
 * `model` must be a live QRMODA handle; `out_qp` must be writable.
 */
enum CvaccStatus cvacc_qrmoda_max_qp(const struct CvaccModel *model,
                                     uint32_t width,
                                     uint32_t height,
                                     double target_error,
                                     int32_t *out_qp);

/**
 * Smallest actual bitrate (searched up to `max_bitrate`) whose clamped
 * error stays within `target_error`, written to `out_bitrate`.
 * Returns `Unsatisfiable` when `max_bitrate` is not enough.
 *
 * # Safety
 * `model` must be a live BRMODA handle; `out_bitrate` must be
 * writable.
 */
enum CvaccStatus cvacc_brmoda_required_bitrate(const struct CvaccModel *model,
                                               uint32_t width,
                                               uint32_t height,
                                               double target_error,
                                               double max_bitrate,
                                               double *out_bitrate);

/**
 * Read the five constants out of a handle, in c1..c5 / cp1..cp5 order.
 *
 * # Safety
 * `model` must be a live handle; `out_constants` must point to an
 * array of at least five f64.
 */
enum CvaccStatus cvacc_model_constants(const struct CvaccModel *model, double *out_constants);

/**
 * Calibrate model constants from `n` measurement points.
 *
 * `widths`, `heights`, `knobs` and `observed` are parallel arrays of
 * length `n`. Knobs are Qp values for QRMODA and actual bitrates for
 * BRMODA; observed errors must lie in [0, 1]. The fit needs at least
 * 6 points, 2 distinct resolutions and 4 distinct knob values. `seed`
 * makes the multistart search reproducible. On success a new handle
 * is written to `out_model` and the fit's R² to `out_r2` (which may
 * be null if not wanted).
 *
 * # Safety
 * The array pointers must be readable for `n` elements; `out_model`
 * must be writable.
 */
enum CvaccStatus cvacc_fit(enum CvaccModelKind kind,
                           uintptr_t n,
                           const uint32_t *widths,
                           const uint32_t *heights,
                           const double *knobs,
                           const double *observed,
                           uint64_t seed,
                           struct CvaccModel **out_model,
                           double *out_r2);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CVACC_H */
