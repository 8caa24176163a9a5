#include "rulkit.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "rulkit/checkpoint.hpp"
#include "rulkit/cmapss_io.hpp"
#include "rulkit/common.hpp"
#include "rulkit/interpret.hpp"
#include "rulkit/loss_metrics.hpp"
#include "rulkit/pipeline.hpp"
#include "rulkit/synth_gen.hpp"
#include "rulkit/trainer.hpp"

namespace {

thread_local std::string g_last_error;

rk_status status_of(rulkit::ErrorKind kind) {
    switch (kind) {
        case rulkit::ErrorKind::kIo: return RK_ERR_IO;
        case rulkit::ErrorKind::kParse: return RK_ERR_PARSE;
        case rulkit::ErrorKind::kValidation: return RK_ERR_VALIDATION;
        case rulkit::ErrorKind::kShape: return RK_ERR_SHAPE;
        case rulkit::ErrorKind::kNumeric: return RK_ERR_NUMERIC;
        case rulkit::ErrorKind::kInternal: return RK_ERR_INTERNAL;
    }
    return RK_ERR_INTERNAL;
}

template <typename Fn>
rk_status wrap(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return RK_OK;
    } catch (const rulkit::Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return RK_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return RK_ERR_INTERNAL;
    }
}

rk_status fail_validation(const std::string& message) {
    g_last_error = message;
    return RK_ERR_VALIDATION;
}

}  // namespace

struct rk_windows {
    rulkit::WindowDataset dataset;
};

struct rk_model {
    rulkit::Checkpoint checkpoint;
};

namespace {

// Shared by evaluate and explain: load windows + metadata, verify they belong
// with the checkpoint.
void load_matching_windows(const rk_model& model, const char* windows_path, const char* meta_path,
                           rulkit::WindowDataset* dataset, rulkit::PreprocessMeta* meta) {
    *dataset = rulkit::load_windows(windows_path);
    *meta = rulkit::load_preprocess_meta(meta_path);
    const auto& cp = model.checkpoint;
    if (meta->selection.feature_names != cp.feature_names)
        rulkit::throw_validation(std::string(meta_path) +
                                 ": feature set does not match the checkpoint");
    if (dataset->window() != cp.params.config.window ||
        dataset->features() != cp.params.config.features)
        rulkit::throw_shape("window tensor dims do not match the checkpoint architecture");
    if (meta->max_rul != cp.max_rul)
        rulkit::throw_validation("label cap differs between windows metadata and checkpoint");
}

std::vector<int> provenance_units(const rulkit::WindowDataset& dataset) {
    std::vector<int> units;
    units.reserve(dataset.provenance.size());
    for (const auto& p : dataset.provenance) units.push_back(p.unit_id);
    return units;
}

void write_metrics_txt(const std::string& path, const rulkit::MetricsReport& report,
                       double band10) {
    std::ofstream out(path, std::ios::binary);
    if (!out) rulkit::throw_io("cannot open file for writing: " + path);
    using rulkit::format_double;
    out << "n_engines: " << report.n_engines << '\n';
    out << "rmse: " << format_double(report.rmse) << '\n';
    out << "mae: " << format_double(report.mae) << '\n';
    out << "mape: " << format_double(report.mape) << '\n';
    out << "mape_excluded: " << report.mape_excluded << '\n';
    out << "r2: " << (report.r2_defined ? format_double(report.r2) : std::string("undefined"))
        << '\n';
    out << "s_score: " << format_double(report.s_score) << '\n';
    out << "mean_error: " << format_double(report.mean_error) << '\n';
    out << "std_error: " << format_double(report.std_error) << '\n';
    out << "within_10_cycles: " << format_double(band10) << '\n';
    if (!out) rulkit::throw_io("write failed: " + path);
}

void write_metrics_json(const std::string& path, const rulkit::MetricsReport& report,
                        double band10) {
    nlohmann::json j;
    j["n_engines"] = report.n_engines;
    j["rmse"] = report.rmse;
    j["mae"] = report.mae;
    j["mape"] = report.mape;
    j["mape_excluded"] = report.mape_excluded;
    if (report.r2_defined)
        j["r2"] = report.r2;
    else
        j["r2"] = nullptr;
    j["s_score"] = report.s_score;
    j["mean_error"] = report.mean_error;
    j["std_error"] = report.std_error;
    j["within_10_cycles"] = band10;
    std::ofstream out(path, std::ios::binary);
    if (!out) rulkit::throw_io("cannot open file for writing: " + path);
    out << j.dump(2) << '\n';
    if (!out) rulkit::throw_io("write failed: " + path);
}

}  // namespace

extern "C" {

const char* rk_version(void) { return "0.1.0"; }

const char* rk_last_error(void) { return g_last_error.c_str(); }

void rk_synth_config_default(rk_synth_config* config) {
    rulkit::SynthConfig d;
    config->n_engines = d.n_engines;
    config->min_life = d.min_life;
    config->max_life = d.max_life;
    config->n_constant_sensors = d.n_constant_sensors;
    config->noise_std = d.noise_std;
    config->degradation_exponent = d.degradation_exponent;
    config->seed = d.seed;
}

rk_status rk_generate(const rk_synth_config* config, const char* train_path,
                      const char* test_path, const char* truth_path) {
    if (!config || !train_path || !test_path || !truth_path)
        return fail_validation("rk_generate: null argument");
    return wrap([&] {
        rulkit::SynthConfig c;
        c.n_engines = config->n_engines;
        c.min_life = config->min_life;
        c.max_life = config->max_life;
        c.n_constant_sensors = config->n_constant_sensors;
        c.noise_std = config->noise_std;
        c.degradation_exponent = config->degradation_exponent;
        c.seed = config->seed;
        rulkit::SynthResult result = rulkit::generate(c);
        rulkit::write_trajectories(train_path, result.train);
        rulkit::write_trajectories(test_path, result.test);
        rulkit::write_rul_truth(truth_path, result.truth);
    });
}

void rk_preprocess_config_default(rk_preprocess_config* config) {
    config->window = rulkit::kDefaultWindow;
    config->stride = rulkit::kDefaultStride;
    config->max_rul = rulkit::kDefaultMaxRul;
    config->variance_threshold = rulkit::kDefaultVarianceThreshold;
    config->dropped_sensors = nullptr;
    config->n_dropped = -1;
}

rk_status rk_preprocess(const rk_preprocess_config* config, const char* train_path,
                        const char* test_path, const char* truth_path,
                        const char* out_train_windows, const char* out_test_windows,
                        const char* out_meta) {
    if (!config || !train_path || !test_path || !truth_path || !out_train_windows ||
        !out_test_windows || !out_meta)
        return fail_validation("rk_preprocess: null argument");
    return wrap([&] {
        auto train = rulkit::parse_trajectories(train_path);
        auto test = rulkit::parse_trajectories(test_path);
        auto truth = rulkit::parse_rul_truth(truth_path);

        std::optional<std::vector<int>> override_drop;
        if (config->n_dropped >= 0) {
            override_drop.emplace();
            for (int32_t i = 0; i < config->n_dropped; ++i)
                override_drop->push_back(config->dropped_sensors[i]);
        }
        auto selection = rulkit::select_sensors(train, config->variance_threshold, override_drop);
        auto scaler = rulkit::fit_scaler(rulkit::extract_features(train, selection));

        auto train_windows = rulkit::make_train_windows(train, selection, scaler, config->window,
                                                        config->stride, config->max_rul);
        auto test_windows = rulkit::make_test_windows(test, selection, scaler, truth,
                                                      config->window, config->max_rul);
        rulkit::save_windows(out_train_windows, train_windows);
        rulkit::save_windows(out_test_windows, test_windows);

        rulkit::PreprocessMeta meta;
        meta.selection = selection;
        meta.scaler = scaler;
        meta.window = config->window;
        meta.stride = config->stride;
        meta.max_rul = config->max_rul;
        meta.variance_threshold = config->variance_threshold;
        rulkit::save_preprocess_meta(out_meta, meta);
    });
}

rk_status rk_windows_open(const char* data_path, rk_windows** out) {
    if (!data_path || !out) return fail_validation("rk_windows_open: null argument");
    return wrap([&] {
        auto handle = std::make_unique<rk_windows>();
        handle->dataset = rulkit::load_windows(data_path);
        *out = handle.release();
    });
}

void rk_windows_close(rk_windows* windows) { delete windows; }

rk_status rk_windows_shape(const rk_windows* windows, int64_t* n, int64_t* t, int64_t* f) {
    if (!windows || !n || !t || !f) return fail_validation("rk_windows_shape: null argument");
    *n = windows->dataset.count();
    *t = windows->dataset.window();
    *f = windows->dataset.features();
    g_last_error.clear();
    return RK_OK;
}

void rk_arch_config_default(rk_arch_config* config) {
    rulkit::ModelConfig d;
    config->kernel_size = d.kernel_size;
    config->conv1_filters = d.conv1_filters;
    config->conv2_filters = d.conv2_filters;
    config->lstm_hidden = d.lstm_hidden;
    config->attn_units = d.attn_units;
    config->fc1_units = d.fc1_units;
    config->fc2_units = d.fc2_units;
    config->dropout_conv = d.dropout_conv;
    config->dropout_lstm = d.dropout_lstm;
    config->dropout_fc = d.dropout_fc;
}

void rk_train_config_default(rk_train_config* config) {
    rulkit::TrainConfig d;
    rulkit::LossConfig l;
    config->learning_rate = d.learning_rate;
    config->clipnorm = d.clipnorm;
    config->batch_size = d.batch_size;
    config->max_epochs = d.max_epochs;
    config->early_stop_patience = d.early_stop_patience;
    config->lr_factor = d.lr_factor;
    config->lr_patience = d.lr_patience;
    config->min_lr = d.min_lr;
    config->l2_lambda = d.l2_lambda;
    config->val_fraction = d.val_fraction;
    config->seed = d.seed;
    config->split_mode = 0;
    config->loss_kind = 0;
    config->loss_h1 = l.h1;
    config->loss_h2 = l.h2;
}

rk_status rk_train(const rk_arch_config* arch, const rk_train_config* config,
                   const char* windows_path, const char* meta_path, const char* checkpoint_path,
                   const char* history_path) {
    if (!arch || !config || !windows_path || !meta_path || !checkpoint_path)
        return fail_validation("rk_train: null argument");
    return wrap([&] {
        rulkit::WindowDataset windows = rulkit::load_windows(windows_path);
        rulkit::PreprocessMeta meta = rulkit::load_preprocess_meta(meta_path);
        if (windows.features() != meta.selection.feature_count() || windows.window() != meta.window)
            rulkit::throw_validation("window container does not match its metadata sidecar");

        rulkit::ModelConfig model_config;
        model_config.features = windows.features();
        model_config.window = windows.window();
        model_config.kernel_size = arch->kernel_size;
        model_config.conv1_filters = arch->conv1_filters;
        model_config.conv2_filters = arch->conv2_filters;
        model_config.lstm_hidden = arch->lstm_hidden;
        model_config.attn_units = arch->attn_units;
        model_config.fc1_units = arch->fc1_units;
        model_config.fc2_units = arch->fc2_units;
        model_config.dropout_conv = arch->dropout_conv;
        model_config.dropout_lstm = arch->dropout_lstm;
        model_config.dropout_fc = arch->dropout_fc;

        rulkit::TrainConfig tc;
        tc.learning_rate = config->learning_rate;
        tc.clipnorm = config->clipnorm;
        tc.batch_size = config->batch_size;
        tc.max_epochs = config->max_epochs;
        tc.early_stop_patience = config->early_stop_patience;
        tc.lr_factor = config->lr_factor;
        tc.lr_patience = config->lr_patience;
        tc.min_lr = config->min_lr;
        tc.l2_lambda = config->l2_lambda;
        tc.val_fraction = config->val_fraction;
        tc.seed = config->seed;
        tc.split_mode = config->split_mode == 1 ? rulkit::SplitMode::kWindow
                                                : rulkit::SplitMode::kEngine;
        tc.loss_kind = config->loss_kind == 1 ? rulkit::LossKind::kSquaredError
                                              : rulkit::LossKind::kAsymmetric;
        rulkit::LossConfig loss{config->loss_h1, config->loss_h2};

        rulkit::ModelParams initial = rulkit::init_params(model_config, tc.seed);
        rulkit::FitResult fitted = rulkit::fit(windows, initial, tc, loss);

        rulkit::Checkpoint cp;
        cp.params = std::move(fitted.best_params);
        cp.loss = loss;
        cp.seed = tc.seed;
        cp.feature_names = meta.selection.feature_names;
        cp.max_rul = meta.max_rul;
        rulkit::save_checkpoint(checkpoint_path, cp);

        if (history_path) {
            std::vector<std::vector<double>> rows;
            for (const auto& e : fitted.history.epochs)
                rows.push_back({static_cast<double>(e.epoch), e.train_loss, e.val_loss,
                                e.learning_rate});
            rulkit::write_table(history_path, {"epoch", "train_loss", "val_loss", "learning_rate"},
                                rows);
        }
    });
}

rk_status rk_model_open(const char* checkpoint_path, rk_model** out) {
    if (!checkpoint_path || !out) return fail_validation("rk_model_open: null argument");
    return wrap([&] {
        auto handle = std::make_unique<rk_model>();
        handle->checkpoint = rulkit::load_checkpoint(checkpoint_path);
        *out = handle.release();
    });
}

void rk_model_close(rk_model* model) { delete model; }

rk_status rk_model_param_count(const rk_model* model, int64_t* out) {
    if (!model || !out) return fail_validation("rk_model_param_count: null argument");
    return wrap([&] { *out = rulkit::trainable_param_count(model->checkpoint.params.config); });
}

rk_status rk_predict(const rk_model* model, const rk_windows* windows, double* out,
                     int64_t out_len) {
    if (!model || !windows || !out) return fail_validation("rk_predict: null argument");
    return wrap([&] {
        const auto& ds = windows->dataset;
        if (out_len != ds.count())
            rulkit::throw_shape("rk_predict: output buffer holds " + std::to_string(out_len) +
                                " slots for " + std::to_string(ds.count()) + " windows");
        std::vector<double> y_hat = rulkit::predict(model->checkpoint.params, ds);
        std::memcpy(out, y_hat.data(), y_hat.size() * sizeof(double));
    });
}

rk_status rk_evaluate(const rk_model* model, const char* windows_path, const char* meta_path,
                      const char* report_txt_path, const char* report_json_path,
                      const char* per_engine_path) {
    if (!model || !windows_path || !meta_path)
        return fail_validation("rk_evaluate: null argument");
    return wrap([&] {
        rulkit::WindowDataset dataset;
        rulkit::PreprocessMeta meta;
        load_matching_windows(*model, windows_path, meta_path, &dataset, &meta);

        std::vector<double> y_hat = rulkit::predict(model->checkpoint.params, dataset);
        rulkit::MetricsReport report =
            rulkit::compute_metrics(y_hat, dataset.labels, model->checkpoint.loss);
        double band10 = rulkit::accuracy_band(y_hat, dataset.labels, 10.0);

        if (report_txt_path) write_metrics_txt(report_txt_path, report, band10);
        if (report_json_path) write_metrics_json(report_json_path, report, band10);
        if (per_engine_path) {
            std::vector<std::vector<double>> rows;
            for (int i = 0; i < dataset.count(); ++i)
                rows.push_back({static_cast<double>(dataset.provenance[i].unit_id),
                                dataset.labels[i], y_hat[i], y_hat[i] - dataset.labels[i]});
            rulkit::write_table(per_engine_path, {"unit", "actual", "predicted", "error"}, rows);
        }
    });
}

rk_status rk_explain(const rk_model* model, const char* windows_path, const char* meta_path,
                     const char* train_path, const char* out_dir, const int32_t* units,
                     int32_t n_units) {
    if (!model || !windows_path || !meta_path || !train_path || !out_dir)
        return fail_validation("rk_explain: null argument");
    return wrap([&] {
        namespace fs = std::filesystem;
        rulkit::WindowDataset dataset;
        rulkit::PreprocessMeta meta;
        load_matching_windows(*model, windows_path, meta_path, &dataset, &meta);
        fs::create_directories(out_dir);
        const fs::path dir(out_dir);

        auto records = rulkit::attention_records(dataset, model->checkpoint.params);
        rulkit::write_attention_table((dir / "attention.csv").string(), records);

        std::vector<double> y_hat;
        y_hat.reserve(records.size());
        for (const auto& r : records) y_hat.push_back(r.predicted_rul);
        auto residuals =
            rulkit::residual_report(provenance_units(dataset), y_hat, dataset.labels, 10.0);
        rulkit::write_residual_table((dir / "residuals.csv").string(), residuals);

        auto train = rulkit::parse_trajectories(train_path);
        auto features = rulkit::extract_features(train, meta.selection);
        auto corr = rulkit::correlation_matrix(features);
        rulkit::write_correlation_table((dir / "correlation.csv").string(), corr,
                                        meta.selection.feature_names);

        std::vector<int> selected;
        if (n_units > 0) {
            selected.assign(units, units + n_units);
        } else {
            for (const auto& t : train) {
                selected.push_back(t.unit_id);
                if (selected.size() == 5) break;
            }
        }
        auto profiles = rulkit::rul_profiles(train, selected, meta.max_rul);
        rulkit::write_rul_profiles((dir / "rul_profile").string(), profiles);
    });
}

}  // extern "C"
