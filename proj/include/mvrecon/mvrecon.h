#ifndef MVRECON_H
#define MVRECON_H

/* C interface to the multi-camera frame reconstruction library.
 *
 * Objects are opaque handles released with their matching *_free function.
 * Every call returns an mvr_status; on failure mvr_last_error() describes the
 * problem as "module.op: Code: message" (thread-local, valid until the next
 * failing call on the same thread). Strings returned through char** are
 * owned by the caller and released with mvr_string_free. */

#include <stddef.h>

#if defined(_WIN32)
#  if defined(MVRECON_BUILDING)
#    define MVR_API __declspec(dllexport)
#  else
#    define MVR_API __declspec(dllimport)
#  endif
#else
#  define MVR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mvr_status {
  MVR_OK = 0,
  MVR_INVALID_ARGUMENT = 1,
  MVR_INDEX_MISMATCH = 2,
  MVR_DIMENSION_MISMATCH = 3,
  MVR_INVALID_PIXEL_VALUE = 4,
  MVR_EMPTY_CAMERA = 5,
  MVR_UNREADABLE_IMAGE = 6,
  MVR_GAP_TOO_LARGE = 7,
  MVR_NON_OVERLAPPING_VIEWS = 8,
  MVR_BAD_RESOLUTION = 9,
  MVR_NON_FINITE_LOSS = 10,
  MVR_EMPTY_SPLIT = 11,
  MVR_MISSING_MODEL = 12,
  MVR_NO_CANDIDATES = 13,
  MVR_EMPTY_VALIDATION = 14,
  MVR_FRAME_TOO_SMALL = 15,
  MVR_UNWRITABLE_PATH = 16,
  MVR_CONFIG_ERROR = 17,
  MVR_CHECKPOINT_ERROR = 18,
  MVR_GAP_NOT_CALIBRATED = 19,
  MVR_INTERNAL = 100
} mvr_status;

typedef enum mvr_mode { MVR_SINGLE_VIEW = 0, MVR_MULTI_VIEW = 1 } mvr_mode;
typedef enum mvr_format { MVR_CSV = 0, MVR_MARKDOWN = 1 } mvr_format;

typedef struct mvr_experiment mvr_experiment;
typedef struct mvr_store mvr_store;
typedef struct mvr_bank mvr_bank;
typedef struct mvr_weights mvr_weights;
typedef struct mvr_report mvr_report;

typedef struct mvr_store_info {
  size_t frame_count;
  size_t train_count;
  size_t val_count;
  size_t test_count;
  int height;
  int width;
  int n_cameras;
  int target_camera;
} mvr_store_info;

typedef struct mvr_reconstruction {
  int has_ground_truth;
  double psnr;
  double ssim;
  int n_candidates;
} mvr_reconstruction;

/* Called after every training step; may be NULL. */
typedef void (*mvr_progress_fn)(const char* tag, long step, double d_loss, double g_loss, double l1, void* user);

MVR_API const char* mvr_version(void);
MVR_API const char* mvr_last_error(void);
MVR_API const char* mvr_status_name(mvr_status status);
MVR_API void mvr_string_free(char* text);

/* Experiment configuration. path may be NULL for all defaults. */
MVR_API mvr_status mvr_experiment_load(const char* path, mvr_experiment** out);
MVR_API mvr_status mvr_experiment_parse(const char* text, mvr_experiment** out);
/* Overrides one key ("key=value" form) and revalidates. */
MVR_API mvr_status mvr_experiment_set(mvr_experiment* experiment, const char* assignment);
MVR_API mvr_status mvr_experiment_text(const mvr_experiment* experiment, char** out);
MVR_API void mvr_experiment_free(mvr_experiment* experiment);

/* Synthesizes or ingests the sequence the experiment describes. */
MVR_API mvr_status mvr_store_load(const mvr_experiment* experiment, mvr_store** out);
MVR_API mvr_status mvr_store_info_get(const mvr_store* store, mvr_store_info* out);
/* Writes <dir>/cam<id>/%06d.png in raw (unshifted) file numbering plus
 * <dir>/rig.cfg describing the rig, so the directory can be re-ingested. */
MVR_API mvr_status mvr_store_export(const mvr_store* store, const char* dir);
MVR_API void mvr_store_free(mvr_store* store);

/* source: a tag (past, future, ref_<id>) or "all". */
MVR_API mvr_status mvr_train(const mvr_experiment* experiment, const mvr_store* store, const char* source,
                             mvr_progress_fn progress, void* user, mvr_bank** out);
/* Writes <dir>/<tag>.ckpt and, for freshly trained banks, <dir>/<tag>_loss.csv. */
MVR_API mvr_status mvr_bank_save(const mvr_bank* bank, const char* dir);
MVR_API mvr_status mvr_bank_load(const char* dir, mvr_bank** out);
MVR_API size_t mvr_bank_size(const mvr_bank* bank);
MVR_API const char* mvr_bank_tag(const mvr_bank* bank, size_t i);
MVR_API void mvr_bank_free(mvr_bank* bank);

MVR_API mvr_status mvr_calibrate(const mvr_experiment* experiment, const mvr_store* store, const mvr_bank* bank,
                                 mvr_weights** out);
MVR_API mvr_status mvr_weights_save(const mvr_weights* weights, const char* path);
MVR_API mvr_status mvr_weights_load(const char* path, mvr_weights** out);
MVR_API mvr_status mvr_weights_text(const mvr_weights* weights, char** out);
/* Weight of `tag` at `gap`; 0 when the tag has no entry. */
MVR_API mvr_status mvr_weights_get(const mvr_weights* weights, int gap, const char* tag, double* out);
MVR_API void mvr_weights_free(mvr_weights* weights);

/* Reconstructs target frame `index` from neighbours at distance `gap`.
 * fused_png and grid_png may be NULL. */
MVR_API mvr_status mvr_reconstruct(const mvr_experiment* experiment, const mvr_store* store, const mvr_bank* bank,
                                   const mvr_weights* weights, long long index, int gap, mvr_mode mode,
                                   const char* fused_png, const char* grid_png, mvr_reconstruction* out);

MVR_API mvr_status mvr_evaluate(const mvr_experiment* experiment, const mvr_store* store, const mvr_bank* bank,
                                const mvr_weights* weights, mvr_mode mode, mvr_report** out);
MVR_API mvr_status mvr_report_render(const mvr_report* report, mvr_format format, char** out);
MVR_API mvr_status mvr_ablation_render(const mvr_report* single_view, const mvr_report* multi_view, char** out);
MVR_API size_t mvr_report_rows(const mvr_report* report);
MVR_API mvr_status mvr_report_row(const mvr_report* report, size_t i, int* gap, double* mean_psnr, double* mean_ssim,
                                  size_t* task_count);
MVR_API void mvr_report_free(mvr_report* report);

#ifdef __cplusplus
}
#endif

#endif
