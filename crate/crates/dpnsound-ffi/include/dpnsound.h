#ifndef DPNSOUND_H
#define DPNSOUND_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call.
 */
typedef enum DpnsoundStatus {
  /**
   * The call succeeded.
   */
  DPNSOUND_STATUS_OK = 0,
  /**
   * A pointer argument was null or otherwise unusable.
   */
  DPNSOUND_STATUS_INVALID_ARGUMENT = 1,
  /**
   * The input text is not a valid model.
   */
  DPNSOUND_STATUS_PARSE_ERROR = 2,
  /**
   * State-space exploration exceeded a configured bound.
   */
  DPNSOUND_STATUS_BOUND_EXCEEDED = 3,
  /**
   * An internal invariant failed; the library state is unspecified.
   */
  DPNSOUND_STATUS_INTERNAL = 4,
} DpnsoundStatus;

/**
 * Opaque handle to a loaded model.
 */
typedef struct DpnsoundModel DpnsoundModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the message of the most recent failure on this thread.
 *
 * The pointer stays valid until the next failing call on the same thread;
 * it must not be freed.
 */
const char *dpnsound_last_error(void);

/**
 * Returns the library version as a static string; do not free.
 */
const char *dpnsound_version(void);

/**
 * Parses a model from JSON text.
 *
 * `strict` rejects unknown fields. On success `*out` owns the handle and
 * must be released with [`dpnsound_model_free`].
 *
 * # Safety
 * `text` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum DpnsoundStatus dpnsound_model_load_json(const char *text,
                                             bool strict,
                                             struct DpnsoundModel **out);

/**
 * Releases a model handle; a null handle is ignored.
 *
 * # Safety
 * `model` must come from [`dpnsound_model_load_json`] and not be used again.
 */
void dpnsound_model_free(struct DpnsoundModel *model);

/**
 * Analyzes a model and writes the full JSON report to `*out_report`.
 *
 * `max_tokens_per_place` and `max_states` bound the exploration; pass 0 for
 * the defaults. The returned string must be released with
 * [`dpnsound_string_free`].
 *
 * # Safety
 * `model` must be a live handle and `out_report` a valid pointer.
 */
enum DpnsoundStatus dpnsound_check(const struct DpnsoundModel *model,
                                   uint32_t max_tokens_per_place,
                                   uintptr_t max_states,
                                   char **out_report);

/**
 * Writes 1 to `*out` when the model is data-aware sound, otherwise 0.
 *
 * Bounds behave as in [`dpnsound_check`].
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum DpnsoundStatus dpnsound_is_data_aware_sound(const struct DpnsoundModel *model,
                                                 uint32_t max_tokens_per_place,
                                                 uintptr_t max_states,
                                                 uint8_t *out);

/**
 * Releases a string returned by this library; a null pointer is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used again.
 */
void dpnsound_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DPNSOUND_H */
