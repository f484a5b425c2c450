/* Facial emotion recognition engine: C interface.
 *
 * Every fallible call returns fer_status. On failure, fer_last_error() gives a
 * message for the calling thread that stays valid until that thread's next
 * call into the library. Handles are opaque; free each with its own function.
 * Strings returned through char** are owned by the caller and released with
 * fer_string_free().
 */
#ifndef FER_FER_H
#define FER_FER_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FER_API __declspec(dllexport)
#else
#define FER_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fer_status {
  FER_OK = 0,
  FER_ERR_INVALID_ARGUMENT = 1,
  FER_ERR_SHAPE_MISMATCH = 2,
  FER_ERR_IO = 3,
  FER_ERR_DECODE = 4,
  FER_ERR_BAD_MAGIC = 5,
  FER_ERR_UNSUPPORTED_VERSION = 6,
  FER_ERR_TRUNCATED = 7,
  FER_ERR_CHECKSUM_MISMATCH = 8,
  FER_ERR_FORMAT = 9,
  FER_ERR_CONSENT_REQUIRED = 10,
  FER_ERR_NOT_FOUND = 11,
  FER_ERR_NO_ACTIVE_MODEL = 12,
  FER_ERR_NON_FINITE = 13,
  FER_ERR_INTERNAL = 14
} fer_status;

#define FER_NUM_EMOTIONS 8
#define FER_TOP_K 3

FER_API const char* fer_version(void);
FER_API const char* fer_status_name(fer_status status);
FER_API const char* fer_last_error(void);
FER_API void fer_string_free(char* s);

/* Label index order is fixed: neutral, happy, sad, surprise, fear, disgust,
 * anger, contempt. Returns NULL for an index outside [0, 8). */
FER_API const char* fer_label_name(int index);

/* ---- cancellation ------------------------------------------------------ */

/* A flag that long-running calls poll. fer_cancel_request only performs a
 * lock-free atomic store, so it may be called from a signal handler. */
typedef struct fer_cancel fer_cancel;
FER_API fer_status fer_cancel_create(fer_cancel** out);
FER_API void fer_cancel_request(fer_cancel* cancel);
FER_API int fer_cancel_requested(const fer_cancel* cancel);
FER_API void fer_cancel_free(fer_cancel* cancel);

/* ---- models ------------------------------------------------------------ */

typedef struct fer_model fer_model;

typedef struct fer_model_info {
  size_t parameter_count;
  size_t trainable_count;
  size_t layer_count;
  size_t flatten_width; /* 0 when the network has no flatten layer */
  size_t input_height;
  size_t input_width;
  size_t input_channels;
} fer_model_info;

/* The reference architecture with fan-in scaled Gaussian initialisation. */
FER_API fer_status fer_model_create_reference(uint64_t seed, fer_model** out);
FER_API fer_status fer_model_load(const char* path, fer_model** out);
/* Atomic replace of path. */
FER_API fer_status fer_model_save(const fer_model* model, const char* path);
FER_API void fer_model_free(fer_model* model);
FER_API fer_status fer_model_info_get(const fer_model* model, fer_model_info* out);
/* Layer manifest with output shapes and parameter counts, one line per layer. */
FER_API fer_status fer_model_describe(const fer_model* model, char** out);

typedef struct fer_crop {
  int64_t x, y, w, h;
} fer_crop;

typedef struct fer_classification {
  int top_label[FER_TOP_K];
  float top_confidence[FER_TOP_K];
  float distribution[FER_NUM_EMOTIONS];
} fer_classification;

/* Decodes JPEG or PNG bytes, applies the optional crop (NULL for none),
 * resizes to the model input and ranks the 8-way softmax. */
FER_API fer_status fer_model_classify(const fer_model* model, const uint8_t* bytes, size_t size,
                                      const fer_crop* crop, fer_classification* out);

/* ---- evaluation -------------------------------------------------------- */

typedef struct fer_eval_summary {
  size_t evaluated;
  size_t failed;
  double top1;
  double top3;
} fer_eval_summary;

/* Evaluates on a directory-per-label tree and renders the comparison report
 * against the published baselines, naming the evaluated row display_name.
 * Unreadable images are counted as failed and listed in the report. */
FER_API fer_status fer_evaluate_directory(const fer_model* model, const char* data_root,
                                          const char* display_name, fer_eval_summary* summary,
                                          char** report);

/* The baseline rows only. */
FER_API fer_status fer_baseline_report(char** report);

/* ---- training ---------------------------------------------------------- */

typedef struct fer_epoch_record {
  size_t epoch; /* 1-based */
  double train_loss;
  double train_acc;
  double eval_top1;
  double eval_top3;
} fer_epoch_record;

/* Return nonzero to continue, zero to stop after this epoch. */
typedef int (*fer_epoch_callback)(const fer_epoch_record* record, void* user);

typedef struct fer_train_options {
  size_t epochs;        /* default 13 */
  size_t batch_size;    /* default 64 */
  uint64_t seed;        /* shuffle order; default 0 */
  int class_weighting;  /* default 1 */
  double learning_rate; /* default 0.001 */
  double beta1;         /* default 0.9 */
  double beta2;         /* default 0.999 */
  double epsilon;       /* default 1e-8 */
  const char* checkpoint_path; /* optional: best model written on each new peak */
  fer_epoch_callback on_epoch; /* optional */
  void* user;
  const fer_cancel* cancel; /* optional */
} fer_train_options;

FER_API void fer_train_options_init(fer_train_options* options);

/* Trains a copy of initial on train_root, evaluating on eval_root after every
 * epoch. best receives the peak-epoch model, history_csv the per-epoch rows
 * (either may be NULL). interrupted is set when the cancel flag stopped the
 * run early; completed epochs are still reported. */
FER_API fer_status fer_train(const fer_model* initial, const char* train_root,
                             const char* eval_root, const fer_train_options* options,
                             fer_model** best, char** history_csv, int* interrupted);

/* ---- image store ------------------------------------------------------- */

/* Writes the directory-per-label tar of a store to out_path (atomic replace)
 * and reports the manifest's record count. */
FER_API fer_status fer_store_export(const char* store_root, int labeled_only,
                                    const char* out_path, size_t* record_count);

/* ---- service ----------------------------------------------------------- */

typedef struct fer_server fer_server;

typedef struct fer_server_config {
  const char* store_root;
  const char* host;        /* default "127.0.0.1" */
  int port;                /* default 8080; 0 picks a free port */
  size_t max_upload_bytes; /* default 10 MiB */
  size_t max_model_bytes;  /* default 256 MiB */
  const char* allowed_origin; /* default "*" */
} fer_server_config;

FER_API void fer_server_config_init(fer_server_config* config);
FER_API fer_status fer_server_create(const fer_server_config* config, fer_server** out);
/* Installs a FERW file and makes it the active model; model_id receives the
 * 64-character hex id plus NUL when not NULL. */
FER_API fer_status fer_server_install_model(fer_server* server, const char* ferw_path,
                                            char model_id[65]);
FER_API fer_status fer_server_bind(fer_server* server, int* port);
/* Blocks until fer_server_stop; in-flight requests complete first. */
FER_API fer_status fer_server_run(fer_server* server);
FER_API void fer_server_stop(fer_server* server);
FER_API void fer_server_free(fer_server* server);

#ifdef __cplusplus
}
#endif

#endif /* FER_FER_H */
