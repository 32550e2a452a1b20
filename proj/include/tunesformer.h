#ifndef TUNESFORMER_H
#define TUNESFORMER_H

/*
 * C interface to the tunesformer library: ABC preprocessing, training,
 * sampling and evaluation of the dual-decoder bar-patch model.
 *
 * Every fallible call returns a tf_status. On failure a description is
 * available from tf_last_error() on the same thread until the next call.
 * Strings returned through char** parameters are owned by the caller and
 * released with tf_string_free().
 */

#include <stddef.h>
#include <stdint.h>

#if defined(TF_BUILDING_LIBRARY)
#define TF_API __attribute__((visibility("default")))
#else
#define TF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tf_status {
  TF_OK = 0,
  TF_ERR_MISSING_KEY_FIELD,
  TF_ERR_EMPTY_BODY,
  TF_ERR_FORM_OUT_OF_RANGE,
  TF_ERR_MALFORMED_PREFIX,
  TF_ERR_INCONSISTENT_COUNTS,
  TF_ERR_OUT_OF_RANGE,
  TF_ERR_PATCH_OVERFLOW,
  TF_ERR_TRUNCATED,
  TF_ERR_UNKNOWN_CHAR,
  TF_ERR_EMPTY_INPUT,
  TF_ERR_SHAPE_MISMATCH,
  TF_ERR_EMPTY_TARGET,
  TF_ERR_TOO_MANY_PATCHES,
  TF_ERR_PATCH_TOO_LONG,
  TF_ERR_SEQUENCE_TOO_SHORT,
  TF_ERR_NON_FINITE_LOSS,
  TF_ERR_INVALID_PROMPT,
  TF_ERR_EMPTY_SAMPLE,
  TF_ERR_CONFIG_INFEASIBLE,
  TF_ERR_INVALID_ARGUMENT,
  TF_ERR_IO,
  TF_ERR_BAD_CHECKPOINT,
  TF_ERR_INTERNAL = 99
} tf_status;

typedef struct tf_model tf_model;

TF_API const char* tf_version(void);
TF_API const char* tf_status_name(tf_status status);
TF_API const char* tf_last_error(void);
TF_API void tf_string_free(char* s);

/* ---- models ---------------------------------------------------------- */

/* preset: "toy", "paper" or "micro". */
TF_API tf_status tf_model_create(const char* preset, uint64_t seed, tf_model** out);
TF_API tf_status tf_model_load(const char* path, tf_model** out);
TF_API tf_status tf_model_save(const tf_model* model, const char* path);
TF_API void tf_model_free(tf_model* model);

/* M (patch level, with projection and patch positions) and N (char level). */
TF_API tf_status tf_model_param_counts(const tf_model* model, uint64_t* patch, uint64_t* chars);
/* 16 hex digits plus NUL are written to buf (size >= 17). */
TF_API tf_status tf_model_config_digest(const tf_model* model, char* buf, size_t size);
TF_API tf_status tf_model_config_text(const tf_model* model, char** out);

/* ---- preprocessing --------------------------------------------------- */

typedef struct tf_corpus_counts {
  size_t input;
  size_t accepted;
  size_t train;
  size_t validation;
  size_t skipped;
} tf_corpus_counts;

/* Writes training records to out_path and validation records to
 * out_path + ".val". skip_report (may be NULL) receives "reason=count" lines. */
TF_API tf_status tf_preprocess(const char* const* paths, size_t n_paths, const char* out_path, double val_fraction,
                               uint64_t seed, tf_corpus_counts* counts, char** skip_report);

/* ---- training -------------------------------------------------------- */

typedef struct tf_train_options {
  int steps;
  int batch;
  double lr;
  int warmup;
  uint64_t seed;
  int eval_every;
  const char* resume_state; /* NULL or a state file written by tf_train */
} tf_train_options;

typedef struct tf_train_result {
  int steps;          /* total steps including resumed ones */
  double first_loss;  /* loss of the first step of this call */
  double final_loss;  /* loss of the last step of this call */
  double best_val;    /* NaN without validation data */
  size_t train_records;
  size_t dropped_records;
} tf_train_result;

/* val_loss is NaN on steps without validation. */
typedef void (*tf_train_callback)(int step, double loss, double val_loss, void* user);

TF_API void tf_train_options_default(tf_train_options* opts);

/* Trains in place. The model is saved to out_path (the best validation
 * checkpoint when val_path is given, the final weights otherwise) and the
 * resumable state to out_path + ".state". */
TF_API tf_status tf_train(tf_model* model, const char* corpus_path, const char* val_path,
                          const tf_train_options* opts, const char* out_path, tf_train_callback callback, void* user,
                          tf_train_result* result);

/* ---- generation ------------------------------------------------------ */

typedef struct tf_sample_options {
  double temperature;
  double top_p;
  int max_patches; /* 0 = model capacity */
  uint64_t seed;
  int greedy;
} tf_sample_options;

typedef struct tf_sample_info {
  int prompt_patches;
  int new_patches;
  size_t new_chars;
  int ended;
  int budget_exhausted;
  int form_match;
  int form_extraction_failed;
  double form_similarity;
} tf_sample_info;

TF_API void tf_sample_options_default(tf_sample_options* opts);

/* prompt: control prefix lines, optionally followed by ABC header lines and
 * bars. text receives the prompt followed by the continuation; meta (may be
 * NULL) receives key=value lines describing the run and the form check. */
TF_API tf_status tf_generate(const tf_model* model, const char* prompt, const tf_sample_options* opts, char** text,
                             tf_sample_info* info, char** meta);

/* ---- evaluation ------------------------------------------------------ */

typedef struct tf_eval_result {
  double value;    /* controllability mean or tokens per second */
  double per_code; /* controllability only: fraction of matching codes */
  size_t n;
  size_t exact;
  size_t failed;
  size_t tokens;
  double seconds;
} tf_eval_result;

/* Prompts are control prefixes drawn (with replacement, by seed) from the
 * corpus records. report (may be NULL) receives key=value lines. */
TF_API tf_status tf_eval_controllability(const tf_model* model, const char* corpus_path, size_t n,
                                         const tf_sample_options* opts, int threads, tf_eval_result* result,
                                         char** report);
/* corpus_path may be NULL: prefixes then come from a built-in one-section form. */
TF_API tf_status tf_eval_efficiency(const tf_model* model, const char* corpus_path, size_t n,
                                    const tf_sample_options* opts, tf_eval_result* result, char** report);

typedef enum tf_bench_mode { TF_BENCH_DUAL = 0, TF_BENCH_FLAT = 1, TF_BENCH_BOTH = 2 } tf_bench_mode;

typedef struct tf_bench_result {
  double dual_tokens_per_second; /* medians over runs */
  double flat_tokens_per_second;
  double ratio;
  uint64_t dual_params;
  uint64_t flat_params;
  int flat_layers;
  int flat_hidden;
  uint64_t flops_dual;
  uint64_t flops_flat;
  double flops_ratio;
} tf_bench_result;

TF_API tf_status tf_bench(const char* preset, tf_bench_mode mode, int runs, uint64_t seed, tf_bench_result* result,
                          char** report);

TF_API tf_status tf_flops_estimate(uint64_t M, uint64_t N, uint64_t L, uint64_t P, uint64_t* dual, uint64_t* flat,
                                   double* ratio);

/* ---- form codes ------------------------------------------------------ */

/* Control prefix of an ABC tune. */
TF_API tf_status tf_extract_control_prefix(const char* abc, char** prefix);
/* 1 - lev(a,b) / max(|a|,|b|). */
TF_API tf_status tf_edit_similarity(const char* a, const char* b, double* out);

#ifdef __cplusplus
}
#endif

#endif /* TUNESFORMER_H */
