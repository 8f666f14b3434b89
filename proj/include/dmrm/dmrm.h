#ifndef DMRM_H
#define DMRM_H

/* C interface to the dual-channel multi-hop visual dialog model. All entry
 * points return a status code; on failure dmrm_last_error() holds a
 * human-readable message for the calling thread. Strings returned through
 * char** out-parameters are heap-allocated and must be released with
 * dmrm_string_free(). */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dmrm_status {
    DMRM_OK = 0,
    DMRM_INVALID_ARGUMENT = 1,
    DMRM_ERROR = 2
} dmrm_status;

const char* dmrm_version(void);
const char* dmrm_last_error(void);
void dmrm_string_free(char* s);

/* ---- synthetic corpus generation ---- */

typedef struct dmrm_synth_config {
    int32_t num_dialogs;
    int32_t rounds_per_dialog;
    int32_t objects_per_image;
    int32_t num_candidates;
    uint64_t seed;
} dmrm_synth_config;

void dmrm_synth_config_init(dmrm_synth_config* cfg);

/* Writes dataset.json, vocab.txt and features/*.feat under out_dir. */
dmrm_status dmrm_synth_write(const dmrm_synth_config* cfg, const char* out_dir);

/* ---- preprocessing ---- */

/* Builds a vocabulary from a raw dataset's captions, questions, answers and
 * candidates (text pipeline applied) and writes it to out_vocab. */
dmrm_status dmrm_build_vocab(const char* dataset_json, int32_t min_count,
                             const char* out_vocab);

/* ---- corpus handle ---- */

typedef struct dmrm_corpus dmrm_corpus;

dmrm_status dmrm_corpus_open(const char* dataset_json, const char* features_dir,
                             const char* vocab_path, const char* split, dmrm_corpus** out);
void dmrm_corpus_free(dmrm_corpus* c);
int32_t dmrm_corpus_dialogs(const dmrm_corpus* c);
int32_t dmrm_corpus_rounds(const dmrm_corpus* c);
int32_t dmrm_corpus_vocab_size(const dmrm_corpus* c);
uint64_t dmrm_corpus_vocab_fingerprint(const dmrm_corpus* c);

/* ---- model configuration ---- */

typedef struct dmrm_model_config {
    int32_t embed_dim;
    int32_t hidden;
    int32_t d_track;
    int32_t d_locate;
    int32_t n_hops;
    int32_t no_track;
    int32_t no_locate;
    int32_t no_attd;
} dmrm_model_config;

void dmrm_model_config_init(dmrm_model_config* cfg);

typedef struct dmrm_train_config {
    dmrm_model_config model;
    double base_lr;
    double min_lr;
    double clip_norm;
    int32_t warmup_steps;
    int32_t total_steps;
    int32_t batch_size;
    uint64_t seed;
} dmrm_train_config;

void dmrm_train_config_init(dmrm_train_config* cfg);

/* ---- model handle ---- */

typedef struct dmrm_model dmrm_model;

dmrm_status dmrm_model_create(const dmrm_model_config* cfg, const dmrm_corpus* corpus,
                              uint64_t seed, dmrm_model** out);
/* expected_vocab_fingerprint of 0 skips the pairing check. */
dmrm_status dmrm_model_load(const char* path, uint64_t expected_vocab_fingerprint,
                            dmrm_model** out);
dmrm_status dmrm_model_save(const dmrm_model* m, const char* path);
void dmrm_model_free(dmrm_model* m);

/* ---- training ---- */

/* log_path (newline-delimited JSON) and checkpoint_path may be NULL.
 * checkpoint_every > 0 adds periodic saves; the final state is always saved
 * when checkpoint_path is given. */
dmrm_status dmrm_train(dmrm_model* m, const dmrm_corpus* corpus,
                       const dmrm_train_config* cfg, const char* log_path,
                       const char* checkpoint_path, int32_t checkpoint_every);

/* ---- evaluation ---- */

/* report_json: {"mrr","r_at_1","r_at_5","r_at_10","mean_rank",
 * "num_questions","slices"}. scores_path (optional) receives one JSON line
 * {"dialog","round","gt_rank","scores"} per question. */
dmrm_status dmrm_evaluate(dmrm_model* m, const dmrm_corpus* corpus, const char* scores_path,
                          char** report_json);

/* variants_csv example: "full,no-track,no-locate". table_json is an array of
 * rows in input order; rejected variants carry an "error" field. */
dmrm_status dmrm_ablate(const dmrm_corpus* train_corpus, const dmrm_corpus* val_corpus,
                        const dmrm_train_config* base, const char* variants_csv,
                        char** table_json);

/* ---- attention traces ---- */

dmrm_status dmrm_trace(dmrm_model* m, const dmrm_corpus* corpus, int32_t dialog, int32_t round,
                       char** trace_json);
/* Renders SVG plots from a trace JSON document; paths_json lists the files
 * written. */
dmrm_status dmrm_trace_plots(const char* trace_json, const char* prefix, char** paths_json);

/* ---- score comparison ---- */

/* Paired t-test over per-question reciprocal ranks of two score dumps.
 * result_json: {"n","mean_rr_a","mean_rr_b","mean_diff","t_stat","df",
 * "p_value"}. */
dmrm_status dmrm_compare_scores(const char* scores_path_a, const char* scores_path_b,
                                char** result_json);

#ifdef __cplusplus
}
#endif

#endif /* DMRM_H */
