#ifndef TIDEWATCH_H
#define TIDEWATCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TwStatus {
  TW_STATUS_OK = 0,
  TW_STATUS_NULL_POINTER = 1,
  TW_STATUS_INVALID_UTF8 = 2,
  TW_STATUS_INVALID_ARGUMENT = 3,
  TW_STATUS_PARSE = 4,
  TW_STATUS_IO = 5,
  TW_STATUS_DOMAIN = 6,
  TW_STATUS_PANIC = 7,
} TwStatus;

/**
 * Opaque sentiment lexicon.
 */
typedef struct TwLexicon TwLexicon;

/**
 * Opaque locality registry.
 */
typedef struct TwRegistry TwRegistry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call on this thread.
 */
const char *tw_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tw_version(void);

/**
 * The bundled lexicon with the bundled domain customization applied.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum TwStatus tw_lexicon_default(struct TwLexicon **out);

/**
 * Lexicon from CSV text (`phrase,class,weight`), optionally patched with
 * CSV text (`op,phrase,class,weight`). `patch_csv` may be null.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be valid.
 */
enum TwStatus tw_lexicon_from_csv(const char *csv, const char *patch_csv, struct TwLexicon **out);

/**
 * # Safety
 * `lexicon` must be null or a handle from a `tw_lexicon_*` constructor that
 * has not been freed.
 */
void tw_lexicon_free(struct TwLexicon *lexicon);

/**
 * Sentiment score of `text` with the default constants.
 *
 * # Safety
 * `lexicon` must be a live handle, `text` NUL-terminated, `out` valid.
 */
enum TwStatus tw_sentiment_score(const struct TwLexicon *lexicon, const char *text, double *out);

/**
 * Sentiment score with explicit question weight and ellipsis penalty.
 *
 * # Safety
 * As for [`tw_sentiment_score`].
 */
enum TwStatus tw_sentiment_score_ex(const struct TwLexicon *lexicon,
                                    const char *text,
                                    double question_weight,
                                    double ellipsis_penalty,
                                    double *out);

/**
 * Great-circle distance in statute miles.
 *
 * # Safety
 * `out` must be valid.
 */
enum TwStatus tw_geodesic_miles(double lat1, double lon1, double lat2, double lon2, double *out);

/**
 * Registry from CSV text; `polygons_geojson` may be null.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be valid.
 */
enum TwStatus tw_registry_from_csv(const char *csv,
                                   const char *polygons_geojson,
                                   struct TwRegistry **out);

/**
 * # Safety
 * `registry` must be null or a live handle from [`tw_registry_from_csv`].
 */
void tw_registry_free(struct TwRegistry *registry);

/**
 * Registers a shared unit over comma-separated county ids.
 *
 * # Safety
 * `registry` must be a live handle; strings NUL-terminated.
 */
enum TwStatus tw_registry_add_shared_unit(struct TwRegistry *registry,
                                          const char *id,
                                          const char *name,
                                          const char *members_csv);

/**
 * Count per 100,000 residents of `unit`.
 *
 * # Safety
 * `registry` must be a live handle, `unit` NUL-terminated, `out` valid.
 */
enum TwStatus tw_per_capita(const struct TwRegistry *registry,
                            double count,
                            const char *unit,
                            double *out);

/**
 * Share of one tweet located at `unit` credited to `member`.
 *
 * # Safety
 * `registry` must be a live handle, strings NUL-terminated, `out` valid.
 */
enum TwStatus tw_credit_share(const struct TwRegistry *registry,
                              const char *unit,
                              const char *member,
                              double *out);

/**
 * Pearson correlation of two length-`n` arrays.
 *
 * # Safety
 * `x` and `y` must point to `n` readable doubles; `out` must be valid.
 */
enum TwStatus tw_pearson(const double *x, const double *y, size_t n, double *out);

/**
 * Generates a synthetic corpus into `out_dir`. `spec_json` may be null for
 * the default spec.
 *
 * # Safety
 * String arguments must be null or NUL-terminated.
 */
enum TwStatus tw_synth_generate(const char *spec_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TIDEWATCH_H */
