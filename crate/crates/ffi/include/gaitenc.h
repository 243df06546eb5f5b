/* C interface to the gaitenc gait-encoding library. */

#ifndef GAITENC_H
#define GAITENC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum GaitencStatus {
  GAITENC_STATUS_OK = 0,
  /**
   * Invalid configuration, shapes, or arguments.
   */
  GAITENC_STATUS_CONFIG = 1,
  /**
   * Unreadable, malformed, or inconsistent data.
   */
  GAITENC_STATUS_DATA = 2,
  /**
   * Training diverged or produced non-finite values.
   */
  GAITENC_STATUS_NUMERIC = 3,
  /**
   * A required pointer argument was null.
   */
  GAITENC_STATUS_NULL_ARGUMENT = 4,
  /**
   * An internal invariant failed; the library state is unharmed.
   */
  GAITENC_STATUS_PANIC = 5,
} GaitencStatus;

/**
 * Opaque handle to a windowed dataset (train + test splits).
 */
typedef struct GaitencDataset {
  uint8_t _private[0];
} GaitencDataset;

/**
 * Opaque handle to a trained-model checkpoint.
 */
typedef struct GaitencCheckpoint {
  uint8_t _private[0];
} GaitencCheckpoint;

/**
 * Opaque handle to an extracted feature table.
 */
typedef struct GaitencFeatures {
  uint8_t _private[0];
} GaitencFeatures;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static UTF-8 string; never freed by the caller.
 */
const char *gaitenc_version(void);

/**
 * Message for the most recent failure on this thread. The pointer is
 * valid until the next failing call on the same thread. Never null.
 */
const char *gaitenc_last_error(void);

/**
 * Frees a string returned through a `char**` out-parameter.
 */
void gaitenc_string_free(char *ptr);

/**
 * Generates a synthetic walking-skeleton dataset from a JSON generator
 * config and writes it as JSONL at `out_path`.
 */
enum GaitencStatus gaitenc_generate_dataset(const char *config_json, const char *out_path);

/**
 * Loads a JSONL dataset and windows it into `seq_len`-frame sequences
 * (default preprocessing: 10 frames discarded at each end, sequences
 * centered). On success `*out` owns the dataset.
 */
enum GaitencStatus gaitenc_dataset_load(const char *path,
                                        size_t seq_len,
                                        struct GaitencDataset **out);

void gaitenc_dataset_free(struct GaitencDataset *ptr);

/**
 * Number of training sequences; 0 for a null handle.
 */
size_t gaitenc_dataset_train_count(const struct GaitencDataset *ptr);

/**
 * Number of test sequences; 0 for a null handle.
 */
size_t gaitenc_dataset_test_count(const struct GaitencDataset *ptr);

/**
 * Joints per skeleton; 0 for a null handle.
 */
size_t gaitenc_dataset_joint_count(const struct GaitencDataset *ptr);

/**
 * Trains the per-axis models on the dataset's training split.
 * `config_json` may be null for defaults. On success `*out` owns the
 * resulting checkpoint.
 */
enum GaitencStatus gaitenc_train(const struct GaitencDataset *dataset,
                                 const char *config_json,
                                 struct GaitencCheckpoint **out);

enum GaitencStatus gaitenc_checkpoint_save(const struct GaitencCheckpoint *ckpt, const char *path);

enum GaitencStatus gaitenc_checkpoint_load(const char *path, struct GaitencCheckpoint **out);

void gaitenc_checkpoint_free(struct GaitencCheckpoint *ptr);

/**
 * Writes the checkpoint's resolved training config as a JSON string to
 * `*out_json`; free it with `gaitenc_string_free`.
 */
enum GaitencStatus gaitenc_checkpoint_config_json(const struct GaitencCheckpoint *ckpt,
                                                  char **out_json);

/**
 * Extracts per-step features. `split` is "train", "test", or "all";
 * `feature_kind` is "age" or "encoded-state". On success `*out` owns
 * the feature table.
 */
enum GaitencStatus gaitenc_extract(const struct GaitencCheckpoint *ckpt,
                                   const struct GaitencDataset *dataset,
                                   const char *split,
                                   const char *feature_kind,
                                   struct GaitencFeatures **out);

/**
 * Number of feature rows; 0 for a null handle.
 */
size_t gaitenc_features_count(const struct GaitencFeatures *ptr);

/**
 * Values per feature row (3k); 0 for a null or empty handle.
 */
size_t gaitenc_features_width(const struct GaitencFeatures *ptr);

/**
 * Copies row `index` out of the table. `out_values` must have room for
 * `values_capacity` doubles, at least the table width. Any out-pointer
 * may be null to skip that field.
 */
enum GaitencStatus gaitenc_features_row(const struct GaitencFeatures *ptr,
                                        size_t index,
                                        size_t *out_sequence,
                                        size_t *out_step,
                                        size_t *out_label,
                                        double *out_values,
                                        size_t values_capacity);

/**
 * Writes the feature table as CSV (same format as the CLI).
 */
enum GaitencStatus gaitenc_features_save_csv(const struct GaitencFeatures *ptr, const char *path);

void gaitenc_features_free(struct GaitencFeatures *ptr);

/**
 * Trains the recognition head on `train_features`, scores
 * `test_features`, and writes the evaluation report (rank-1, CMC,
 * nAUC, per-sequence scores) as JSON to `*out_report_json`; free it
 * with `gaitenc_string_free`. `recognizer_config_json` may be null for
 * defaults.
 */
enum GaitencStatus gaitenc_evaluate(const struct GaitencFeatures *train_features,
                                    const struct GaitencFeatures *test_features,
                                    const char *recognizer_config_json,
                                    char **out_report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAITENC_H */
