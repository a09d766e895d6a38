#ifndef NORMALFLOW_H
#define NORMALFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of an FFI call.
 */
typedef enum NfStatus {
  NF_STATUS_OK = 0,
  NF_STATUS_NULL_POINTER = 1,
  NF_STATUS_INVALID_ARGUMENT = 2,
  NF_STATUS_IO = 3,
  NF_STATUS_FORMAT = 4,
  NF_STATUS_INSUFFICIENT_OVERLAP = 5,
  NF_STATUS_DEGENERATE = 6,
  NF_STATUS_PANIC = 7,
} NfStatus;

/**
 * Opaque tactile frame.
 */
typedef struct NfFrame NfFrame;

/**
 * Opaque keyframe tracker.
 */
typedef struct NfTracker NfTracker;

/**
 * Outcome of [`nf_register`].
 */
typedef struct NfRegistration {
  /**
   * Row-major 4x4 transform, reference to target.
   */
  double transform[16];
  uint32_t iterations;
  double final_cost;
  uint64_t shared_pixels;
  double hessian_condition;
  bool converged;
} NfRegistration;

/**
 * Outcome of [`nf_tracker_push`].
 */
typedef struct NfTrackStep {
  /**
   * Row-major 4x4 transform, first frame to this frame.
   */
  double pose[16];
  uint64_t frame_index;
  bool promoted_keyframe;
  /**
   * Registration failed; `pose` repeats the last good estimate.
   */
  bool lost;
} NfTrackStep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Reads an NFLW frame file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer; on
 * success `*out` owns a frame to release with [`nf_frame_free`].
 */
enum NfStatus nf_frame_load(const char *path, struct NfFrame **out);

/**
 * Builds a frame from a gradient map.
 *
 * `gradients` holds `height * width` interleaved `(g_u, g_v)` pairs in
 * row-major order; `mask` holds `height * width` bytes, nonzero for
 * contact. When `heights` is null the height map is integrated from the
 * gradients.
 *
 * # Safety
 * Non-null array arguments must point to at least the stated number of
 * elements; `out` must be valid. On success `*out` owns a frame to release
 * with [`nf_frame_free`].
 */
enum NfStatus nf_frame_from_gradients(uint32_t height,
                                      uint32_t width,
                                      double pixel_pitch,
                                      const double *gradients,
                                      const double *heights,
                                      const uint8_t *mask,
                                      double timestamp,
                                      struct NfFrame **out);

/**
 * Releases a frame. Null is ignored.
 *
 * # Safety
 * `frame` must be null or a handle from this library not yet freed.
 */
void nf_frame_free(struct NfFrame *frame);

/**
 * Number of contact pixels in a frame, or 0 for null.
 *
 * # Safety
 * `frame` must be null or a live handle.
 */
uint64_t nf_frame_contact_pixels(const struct NfFrame *frame);

/**
 * Registers `target` against `reference` with default solver settings.
 * `init` is an optional row-major 4x4 initial guess; null means identity.
 *
 * # Safety
 * Frame handles must be live, `init` null or 16 doubles, `out` valid.
 */
enum NfStatus nf_register(const struct NfFrame *reference,
                          const struct NfFrame *target,
                          const double *init,
                          struct NfRegistration *out);

/**
 * Starts a tracker with `first` as frame 0. The frame is copied.
 *
 * # Safety
 * `first` must be a live handle and `out` valid. On success `*out` owns a
 * tracker to release with [`nf_tracker_free`].
 */
enum NfStatus nf_tracker_new(const struct NfFrame *first, struct NfTracker **out);

/**
 * Tracks the next frame. A registration failure is not an error: the step
 * reports `lost` and repeats the previous pose.
 *
 * # Safety
 * Handles must be live and `out` valid. The frame is copied.
 */
enum NfStatus nf_tracker_push(struct NfTracker *tracker,
                              const struct NfFrame *frame,
                              struct NfTrackStep *out);

/**
 * Releases a tracker. Null is ignored.
 *
 * # Safety
 * `tracker` must be null or a handle from this library not yet freed.
 */
void nf_tracker_free(struct NfTracker *tracker);

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *nf_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nf_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NORMALFLOW_H */
