/* C interface to the dirlatent video-restoration library.
 *
 * All functions return a dlt_status; on failure a human-readable detail
 * string is available from dlt_last_error() until the next call on the same
 * thread. Strings handed out through output parameters are heap-allocated
 * and must be released with dlt_free().
 */
#ifndef DIRLATENT_H
#define DIRLATENT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DLT_API __declspec(dllexport)
#else
#define DLT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dlt_status {
    DLT_OK = 0,
    DLT_ERR_CONTRACT = 1, /* arguments violate a documented precondition */
    DLT_ERR_CONFIG = 2,   /* unknown key, malformed value, missing setting */
    DLT_ERR_NUMERIC = 3,  /* non-finite values or a failed numeric invariant */
    DLT_ERR_IO = 4,       /* unreadable, unwritable, or corrupt file */
    DLT_ERR_UNKNOWN = 5,  /* anything else that escaped the library */
} dlt_status;

/* Stable lower-case name of a status value ("ok", "config", ...). */
DLT_API const char* dlt_status_name(dlt_status status);

/* Detail text of the most recent failure on the calling thread ("" if none). */
DLT_API const char* dlt_last_error(void);

DLT_API const char* dlt_version(void);

DLT_API void dlt_free(char* text);

/* Runs one command verb end to end: "gen-data", "train", "infer", "eval",
 * "ablate", or "selftest".
 *
 *   config_json  NULL/"" for defaults, else a JSON object of dotted keys.
 *   overrides    n_overrides strings of the form "key=value" applied in
 *                order after the config document; may be NULL when empty.
 *   seed         master seed fanned out to the component seeds when >= 0;
 *                pass -1 to keep the configured seeds.
 *   out_dir      artifact directory, created if missing. Every run writes
 *                "<out_dir>/config.resolved.json".
 *   summary      optional; receives malloc'd printable summary text.
 */
DLT_API dlt_status dlt_run(const char* verb, const char* config_json,
                           const char* const* overrides, size_t n_overrides,
                           int64_t seed, const char* out_dir, char** summary);

/* A trained restoration model held in memory. */
typedef struct dlt_model dlt_model;

DLT_API dlt_status dlt_model_load(const char* checkpoint_path, dlt_model** out);
DLT_API void dlt_model_free(dlt_model* model);

/* Frame geometry the model was trained for. Any output pointer may be NULL. */
DLT_API dlt_status dlt_model_geometry(const dlt_model* model, int64_t* height,
                                      int64_t* width, int64_t* in_channels,
                                      int64_t* out_channels);

/* Restores a clip held in memory.
 *
 * `frames` holds n_frames * height * width * in_channels doubles in [0,1],
 * frame-major and row-major with interleaved channel planes; `out_frames`
 * receives n_frames * height * width * out_channels doubles in the same
 * layout. `mode` is one of "mean", "argmax", "topk" (uses `topk`), or
 * "sample" (uses `seed`).
 */
DLT_API dlt_status dlt_restore(const dlt_model* model, const double* frames,
                               int64_t n_frames, const char* mode, int64_t topk,
                               uint64_t seed, double* out_frames);

#ifdef __cplusplus
}
#endif

#endif /* DIRLATENT_H */
