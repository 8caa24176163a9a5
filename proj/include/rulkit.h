/* C interface to the RUL prognostics toolkit. All functions return rk_status;
 * on failure rk_last_error() describes the problem for the calling thread.
 * Handles are opaque and must be released with their _close function. */
#ifndef RULKIT_H
#define RULKIT_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rk_status {
    RK_OK = 0,
    RK_ERR_IO = 1,
    RK_ERR_PARSE = 2,
    RK_ERR_VALIDATION = 3,
    RK_ERR_SHAPE = 4,
    RK_ERR_NUMERIC = 5,
    RK_ERR_INTERNAL = 6
} rk_status;

const char* rk_version(void);

/* Message from the current thread's most recent failing call; empty string
 * when the last call succeeded. The pointer stays valid until the next call
 * on the same thread. */
const char* rk_last_error(void);

/* ---- synthetic data ---- */

typedef struct rk_synth_config {
    int32_t n_engines;
    int32_t min_life;
    int32_t max_life;
    int32_t n_constant_sensors;
    double noise_std;
    double degradation_exponent;
    uint64_t seed;
} rk_synth_config;

void rk_synth_config_default(rk_synth_config* config);

/* Writes train/test trajectory files and the terminal-RUL truth file. */
rk_status rk_generate(const rk_synth_config* config, const char* train_path,
                      const char* test_path, const char* truth_path);

/* ---- preprocessing ---- */

typedef struct rk_preprocess_config {
    int32_t window;
    int32_t stride;
    double max_rul;
    double variance_threshold;
    /* When n_dropped >= 0, dropped_sensors (1-based ids) overrides the
     * variance scan. Set n_dropped to -1 for automatic selection. */
    const int32_t* dropped_sensors;
    int32_t n_dropped;
} rk_preprocess_config;

void rk_preprocess_config_default(rk_preprocess_config* config);

/* Reads C-MAPSS-format text files, fits the scaler on train only, windows
 * both splits and writes two window containers plus a JSON metadata file. */
rk_status rk_preprocess(const rk_preprocess_config* config, const char* train_path,
                        const char* test_path, const char* truth_path,
                        const char* out_train_windows, const char* out_test_windows,
                        const char* out_meta);

typedef struct rk_windows rk_windows;

rk_status rk_windows_open(const char* data_path, rk_windows** out);
void rk_windows_close(rk_windows* windows);
rk_status rk_windows_shape(const rk_windows* windows, int64_t* n, int64_t* t, int64_t* f);

/* ---- training ---- */

typedef struct rk_arch_config {
    int32_t kernel_size;
    int32_t conv1_filters;
    int32_t conv2_filters;
    int32_t lstm_hidden;
    int32_t attn_units;
    int32_t fc1_units;
    int32_t fc2_units;
    double dropout_conv;
    double dropout_lstm;
    double dropout_fc;
} rk_arch_config;

void rk_arch_config_default(rk_arch_config* config);

typedef struct rk_train_config {
    double learning_rate;
    double clipnorm;
    int32_t batch_size;
    int32_t max_epochs;
    int32_t early_stop_patience;
    double lr_factor;
    int32_t lr_patience;
    double min_lr;
    double l2_lambda;
    double val_fraction;
    uint64_t seed;
    int32_t split_mode; /* 0 = by engine, 1 = by window */
    int32_t loss_kind;  /* 0 = asymmetric exponential, 1 = squared error */
    double loss_h1;
    double loss_h2;
} rk_train_config;

void rk_train_config_default(rk_train_config* config);

/* Trains from a fresh seed-determined initialization on the given window
 * container (metadata sidecar required) and writes a checkpoint plus a
 * per-epoch history table. history_path may be NULL to skip the table. */
rk_status rk_train(const rk_arch_config* arch, const rk_train_config* config,
                   const char* windows_path, const char* meta_path, const char* checkpoint_path,
                   const char* history_path);

/* ---- evaluation and interpretability ---- */

typedef struct rk_model rk_model;

rk_status rk_model_open(const char* checkpoint_path, rk_model** out);
void rk_model_close(rk_model* model);
rk_status rk_model_param_count(const rk_model* model, int64_t* out);

/* One prediction per window; out must hold the window count. */
rk_status rk_predict(const rk_model* model, const rk_windows* windows, double* out,
                     int64_t out_len);

/* Verifies the windows' metadata against the checkpoint, then writes a
 * key-value text report, a JSON report and a per-engine prediction table.
 * Any output path may be NULL to skip that artifact. */
rk_status rk_evaluate(const rk_model* model, const char* windows_path, const char* meta_path,
                      const char* report_txt_path, const char* report_json_path,
                      const char* per_engine_path);

/* Writes attention, residual, correlation and RUL-profile tables under
 * out_dir. train_path is the raw training text file (correlation and
 * profiles are computed from it). units selects the engines for per-engine
 * profile files; n_units 0 means the first five. */
rk_status rk_explain(const rk_model* model, const char* windows_path, const char* meta_path,
                     const char* train_path, const char* out_dir, const int32_t* units,
                     int32_t n_units);

#ifdef __cplusplus
}
#endif

#endif /* RULKIT_H */
