#ifndef MEMRW_MEMRW_H
#define MEMRW_MEMRW_H

/* C interface to the memory-grounded query rewriter.
 *
 * Every function returns a memrw_status. On failure the message of the most
 * recent error on the calling thread is available from memrw_last_error().
 * Strings returned through char** out-parameters are owned by the caller
 * and released with memrw_string_free(). Handles are released with their
 * matching *_free function; passing NULL to a free function is a no-op. */

#include <stdint.h>

#if defined(_WIN32)
#define MEMRW_API __declspec(dllexport)
#else
#define MEMRW_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum memrw_status {
  MEMRW_OK = 0,
  MEMRW_INVALID_ARGUMENT = 1,
  MEMRW_CONFIG = 2,
  MEMRW_IO = 3,
  MEMRW_FORMAT = 4,
  MEMRW_DIVERGENCE = 5,
  MEMRW_MISMATCH = 6,
  MEMRW_INTERNAL = 7
} memrw_status;

typedef struct memrw_config memrw_config;
typedef struct memrw_dataset memrw_dataset;
typedef struct memrw_model memrw_model;

/* Called after each training epoch with the 1-based epoch number. */
typedef void (*memrw_epoch_fn)(int epoch, double mean_loss, void* user_data);

MEMRW_API const char* memrw_version(void);
MEMRW_API const char* memrw_last_error(void);
/* Stable upper-case name of a status, e.g. "CONFIG". */
MEMRW_API const char* memrw_status_name(memrw_status status);
MEMRW_API void memrw_string_free(char* s);

/* Run configuration. path may be NULL for the defaults. MEMRW_SEED in the
 * environment overrides the seed. */
MEMRW_API memrw_status memrw_config_load(const char* path, memrw_config** out);
MEMRW_API memrw_status memrw_config_from_json(const char* json, memrw_config** out);
/* Overrides one key by dotted path, e.g. "pointer.epochs" = "3". The value
 * is parsed as JSON, falling back to a plain string. */
MEMRW_API memrw_status memrw_config_set(memrw_config* config, const char* key, const char* value);
/* Value of one key by dotted path, as JSON text. */
MEMRW_API memrw_status memrw_config_get(const memrw_config* config, const char* key, char** out);
MEMRW_API memrw_status memrw_config_to_json(const memrw_config* config, char** out);
MEMRW_API void memrw_config_free(memrw_config* config);

/* Synthetic data: generates from config, writes pairs.jsonl,
 * memories.jsonl, split.json and gen_report.json into out_dir. */
MEMRW_API memrw_status memrw_generate(const memrw_config* config, const char* out_dir,
                                      memrw_dataset** out, char** report_json);
MEMRW_API memrw_status memrw_dataset_load(const char* dir, memrw_dataset** out);
MEMRW_API void memrw_dataset_free(memrw_dataset* dataset);

/* kind: "retrieval", "pointer" or "pointer_no_memory". */
MEMRW_API memrw_status memrw_model_create(const char* kind, const memrw_config* config,
                                          const memrw_dataset* dataset, memrw_model** out);
MEMRW_API memrw_status memrw_model_load(const char* path, memrw_model** out);
MEMRW_API memrw_status memrw_model_save(const memrw_model* model, const char* path);
MEMRW_API void memrw_model_free(memrw_model* model);
/* Kind name; valid while the model lives. */
MEMRW_API const char* memrw_model_kind(const memrw_model* model);
MEMRW_API int memrw_model_epochs(const memrw_model* model);
MEMRW_API memrw_status memrw_model_set_threads(memrw_model* model, int threads);
/* Loss trace as {"epoch_loss": [...], "batch_loss": [...]}. */
MEMRW_API memrw_status memrw_model_trace(const memrw_model* model, char** out);

/* Trains until target_epochs epochs are complete (resuming a loaded model).
 * on_epoch may be NULL. */
MEMRW_API memrw_status memrw_model_train(memrw_model* model, const memrw_dataset* dataset,
                                         int target_epochs, memrw_epoch_fn on_epoch,
                                         void* user_data);

/* Evaluates on the test side of the dataset. Writes metrics.json and
 * prcurve.csv into out_dir when it is not NULL, and returns the metrics. */
MEMRW_API memrw_status memrw_model_evaluate(const memrw_model* model,
                                            const memrw_dataset* dataset, const char* out_dir,
                                            char** metrics_json);

/* nbest_json is {"hyps": [[...]], "scores": [...]}; memory_json is a user
 * memory {"user_id": ..., "entries": [...]} or NULL. The decision is
 * {"rewrite": bool, "utterance": string or null, "probability": number}. */
MEMRW_API memrw_status memrw_model_rewrite(const memrw_model* model, const char* nbest_json,
                                           const char* memory_json, double threshold,
                                           char** decision_json);

#ifdef __cplusplus
}
#endif

#endif
