// Command-line front end. Everything goes through the shared-library C API;
// this translation unit holds only flag plumbing and the run manifest.
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rulkit.h"

namespace {

namespace fs = std::filesystem;

int fail(rk_status status) {
    std::cerr << "error: " << rk_last_error() << '\n';
    return static_cast<int>(status);
}

// FNV-1a over the file bytes, hex encoded; "missing" when unreadable.
std::string digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "missing";
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a:") + hex;
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(const std::string& path, const std::string& command,
                    const nlohmann::json& config, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    nlohmann::json j;
    j["command"] = command;
    j["version"] = rk_version();
    j["timestamp"] = utc_timestamp();
    j["config"] = config;
    nlohmann::json digests = nlohmann::json::object();
    for (const auto& p : inputs) digests[p] = digest_file(p);
    j["inputs"] = digests;
    j["outputs"] = outputs;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "error: cannot write manifest: " << path << '\n';
        std::exit(1);
    }
    out << j.dump(2) << '\n';
}

// Registers "--foo-bar,--foo_bar" so flags read naturally while config files
// can use the exact field names.
std::string names(const std::string& dashed) {
    std::string underscored = dashed;
    for (char& c : underscored)
        if (c == '-') c = '_';
    if (underscored == dashed) return "--" + dashed;
    return "--" + dashed + ",--" + underscored;
}

struct GenerateArgs {
    rk_synth_config config;
    std::string out_dir = ".";
};

int run_generate(const GenerateArgs& args) {
    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);
    std::string train = (dir / "train.txt").string();
    std::string test = (dir / "test.txt").string();
    std::string truth = (dir / "rul_truth.txt").string();
    rk_status st = rk_generate(&args.config, train.c_str(), test.c_str(), truth.c_str());
    if (st != RK_OK) return fail(st);
    nlohmann::json cfg{{"n_engines", args.config.n_engines},
                       {"min_life", args.config.min_life},
                       {"max_life", args.config.max_life},
                       {"n_constant_sensors", args.config.n_constant_sensors},
                       {"noise_std", args.config.noise_std},
                       {"degradation_exponent", args.config.degradation_exponent},
                       {"seed", args.config.seed}};
    write_manifest((dir / "manifest_generate.json").string(), "generate", cfg, {},
                   {train, test, truth});
    std::cout << "wrote " << train << ", " << test << ", " << truth << '\n';
    return 0;
}

struct PreprocessArgs {
    std::string train, test, truth;
    std::string out_dir = ".";
    rk_preprocess_config config;
    std::vector<int> drop;
    bool drop_given = false;
};

int run_preprocess(PreprocessArgs& args) {
    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);
    std::string train_w = (dir / "train_windows.rkwd").string();
    std::string test_w = (dir / "test_windows.rkwd").string();
    std::string meta = (dir / "preprocess_meta.json").string();
    std::vector<int32_t> drop(args.drop.begin(), args.drop.end());
    if (args.drop_given) {
        args.config.dropped_sensors = drop.data();
        args.config.n_dropped = static_cast<int32_t>(drop.size());
    }
    rk_status st = rk_preprocess(&args.config, args.train.c_str(), args.test.c_str(),
                                 args.truth.c_str(), train_w.c_str(), test_w.c_str(),
                                 meta.c_str());
    if (st != RK_OK) return fail(st);

    rk_windows* wins = nullptr;
    int64_t n = 0, t = 0, f = 0;
    if (rk_windows_open(test_w.c_str(), &wins) == RK_OK) {
        rk_windows_shape(wins, &n, &t, &f);
        rk_windows_close(wins);
    }
    nlohmann::json cfg{{"window", args.config.window},
                       {"stride", args.config.stride},
                       {"max_rul", args.config.max_rul},
                       {"variance_threshold", args.config.variance_threshold}};
    if (args.drop_given) cfg["dropped_sensors"] = args.drop;
    write_manifest((dir / "manifest_preprocess.json").string(), "preprocess", cfg,
                   {args.train, args.test, args.truth}, {train_w, test_w, meta});
    std::cout << "test tensor shape (" << n << ", " << t << ", " << f << ")\n";
    return 0;
}

struct TrainArgs {
    std::string windows, meta, checkpoint;
    std::string history;
    rk_arch_config arch;
    rk_train_config config;
};

int run_train(TrainArgs& args) {
    if (args.history.empty()) args.history = args.checkpoint + ".history.csv";
    rk_status st = rk_train(&args.arch, &args.config, args.windows.c_str(), args.meta.c_str(),
                            args.checkpoint.c_str(), args.history.c_str());
    if (st != RK_OK) return fail(st);
    nlohmann::json cfg{{"learning_rate", args.config.learning_rate},
                       {"clipnorm", args.config.clipnorm},
                       {"batch_size", args.config.batch_size},
                       {"max_epochs", args.config.max_epochs},
                       {"early_stop_patience", args.config.early_stop_patience},
                       {"lr_factor", args.config.lr_factor},
                       {"lr_patience", args.config.lr_patience},
                       {"min_lr", args.config.min_lr},
                       {"l2_lambda", args.config.l2_lambda},
                       {"val_fraction", args.config.val_fraction},
                       {"seed", args.config.seed},
                       {"split_mode", args.config.split_mode == 1 ? "window" : "engine"},
                       {"loss_kind", args.config.loss_kind == 1 ? "squared_error" : "asymmetric"},
                       {"loss_h1", args.config.loss_h1},
                       {"loss_h2", args.config.loss_h2},
                       {"kernel_size", args.arch.kernel_size},
                       {"conv1_filters", args.arch.conv1_filters},
                       {"conv2_filters", args.arch.conv2_filters},
                       {"lstm_hidden", args.arch.lstm_hidden},
                       {"attn_units", args.arch.attn_units},
                       {"fc1_units", args.arch.fc1_units},
                       {"fc2_units", args.arch.fc2_units},
                       {"dropout_conv", args.arch.dropout_conv},
                       {"dropout_lstm", args.arch.dropout_lstm},
                       {"dropout_fc", args.arch.dropout_fc}};
    write_manifest(args.checkpoint + ".manifest.json", "train", cfg, {args.windows, args.meta},
                   {args.checkpoint, args.history});
    std::cout << "wrote " << args.checkpoint << '\n';
    return 0;
}

struct EvaluateArgs {
    std::string checkpoint, windows, meta;
    std::string out_dir = ".";
};

int run_evaluate(const EvaluateArgs& args) {
    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);
    std::string txt = (dir / "metrics.txt").string();
    std::string json = (dir / "metrics.json").string();
    std::string table = (dir / "per_engine.csv").string();

    rk_model* model = nullptr;
    rk_status st = rk_model_open(args.checkpoint.c_str(), &model);
    if (st != RK_OK) return fail(st);
    st = rk_evaluate(model, args.windows.c_str(), args.meta.c_str(), txt.c_str(), json.c_str(),
                     table.c_str());
    rk_model_close(model);
    if (st != RK_OK) return fail(st);

    write_manifest((dir / "manifest_evaluate.json").string(), "evaluate",
                   {{"checkpoint", args.checkpoint}},
                   {args.checkpoint, args.windows, args.meta}, {txt, json, table});
    std::ifstream report(txt);
    std::cout << report.rdbuf();
    return 0;
}

struct ExplainArgs {
    std::string checkpoint, windows, meta, train_data;
    std::string out_dir = ".";
    std::vector<int> units;
};

int run_explain(const ExplainArgs& args) {
    rk_model* model = nullptr;
    rk_status st = rk_model_open(args.checkpoint.c_str(), &model);
    if (st != RK_OK) return fail(st);
    std::vector<int32_t> units(args.units.begin(), args.units.end());
    st = rk_explain(model, args.windows.c_str(), args.meta.c_str(), args.train_data.c_str(),
                    args.out_dir.c_str(), units.data(), static_cast<int32_t>(units.size()));
    rk_model_close(model);
    if (st != RK_OK) return fail(st);

    const fs::path dir(args.out_dir);
    std::vector<std::string> outputs{(dir / "attention.csv").string(),
                                     (dir / "residuals.csv").string(),
                                     (dir / "correlation.csv").string(),
                                     (dir / "rul_profile_all.csv").string()};
    nlohmann::json cfg{{"checkpoint", args.checkpoint}, {"units", args.units}};
    write_manifest((dir / "manifest_explain.json").string(), "explain", cfg,
                   {args.checkpoint, args.windows, args.meta, args.train_data}, outputs);
    std::cout << "wrote interpretability tables to " << args.out_dir << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RUL prognostics toolkit (CNN + BiLSTM + attention)"};
    app.require_subcommand(1);
    app.set_config("--config")->description("flat key=value configuration file");

    GenerateArgs gen;
    rk_synth_config_default(&gen.config);
    auto* cmd_gen = app.add_subcommand("generate", "write a synthetic run-to-failure corpus");
    cmd_gen->add_option("--engines", gen.config.n_engines, "number of engines per split");
    cmd_gen->add_option(names("min-life"), gen.config.min_life, "shortest engine life, cycles");
    cmd_gen->add_option(names("max-life"), gen.config.max_life, "longest engine life, cycles");
    cmd_gen->add_option(names("constant-sensors"), gen.config.n_constant_sensors,
                        "how many sensors emit a constant");
    cmd_gen->add_option(names("noise-std"), gen.config.noise_std, "sensor noise level");
    cmd_gen->add_option(names("degradation-exponent"), gen.config.degradation_exponent,
                        "health decay exponent");
    cmd_gen->add_option("--seed", gen.config.seed, "RNG seed");
    cmd_gen->add_option(names("out-dir"), gen.out_dir, "output directory");

    PreprocessArgs pre;
    rk_preprocess_config_default(&pre.config);
    auto* cmd_pre = app.add_subcommand("preprocess", "select, scale and window a corpus");
    cmd_pre->add_option("--train", pre.train, "training trajectories")->required();
    cmd_pre->add_option("--test", pre.test, "test trajectories")->required();
    cmd_pre->add_option("--truth", pre.truth, "terminal RUL truth file")->required();
    cmd_pre->add_option(names("out-dir"), pre.out_dir, "output directory");
    cmd_pre->add_option("--window", pre.config.window, "window length, cycles");
    cmd_pre->add_option("--stride", pre.config.stride, "window stride, cycles");
    cmd_pre->add_option(names("max-rul"), pre.config.max_rul, "label plateau cap");
    cmd_pre->add_option(names("variance-threshold"), pre.config.variance_threshold,
                        "sensor range below which a sensor is dropped");
    CLI::Option* drop_opt =
        cmd_pre->add_option(names("drop-sensors"), pre.drop, "explicit sensor ids to drop")
            ->delimiter(',');

    TrainArgs trn;
    rk_arch_config_default(&trn.arch);
    rk_train_config_default(&trn.config);
    auto* cmd_trn = app.add_subcommand("train", "train a model on a window container");
    cmd_trn->add_option("--windows", trn.windows, "training window container")->required();
    cmd_trn->add_option("--meta", trn.meta, "preprocessing metadata sidecar")->required();
    cmd_trn->add_option("--checkpoint", trn.checkpoint, "checkpoint output path")->required();
    cmd_trn->add_option("--history", trn.history, "epoch history table output path");
    cmd_trn->add_option(names("learning-rate"), trn.config.learning_rate, "Adam learning rate");
    cmd_trn->add_option("--clipnorm", trn.config.clipnorm, "global gradient norm cap");
    cmd_trn->add_option(names("batch-size"), trn.config.batch_size, "mini-batch size");
    cmd_trn->add_option(names("max-epochs"), trn.config.max_epochs, "epoch budget");
    cmd_trn->add_option(names("early-stop-patience"), trn.config.early_stop_patience,
                        "epochs without val improvement before stopping");
    cmd_trn->add_option(names("lr-factor"), trn.config.lr_factor, "plateau LR multiplier");
    cmd_trn->add_option(names("lr-patience"), trn.config.lr_patience,
                        "epochs without val improvement before LR decay");
    cmd_trn->add_option(names("min-lr"), trn.config.min_lr, "learning-rate floor");
    cmd_trn->add_option(names("l2-lambda"), trn.config.l2_lambda, "L2 penalty weight");
    cmd_trn->add_option(names("val-fraction"), trn.config.val_fraction, "validation share");
    cmd_trn->add_option("--seed", trn.config.seed, "RNG seed");
    cmd_trn->add_option(names("split-mode"), trn.config.split_mode,
                        "0 = split by engine, 1 = split by window");
    cmd_trn->add_option(names("loss-kind"), trn.config.loss_kind,
                        "0 = asymmetric exponential, 1 = squared error");
    cmd_trn->add_option(names("loss-h1"), trn.config.loss_h1, "under-estimation coefficient");
    cmd_trn->add_option(names("loss-h2"), trn.config.loss_h2, "over-estimation coefficient");
    cmd_trn->add_option(names("kernel-size"), trn.arch.kernel_size, "conv kernel size");
    cmd_trn->add_option(names("conv1-filters"), trn.arch.conv1_filters, "first conv width");
    cmd_trn->add_option(names("conv2-filters"), trn.arch.conv2_filters, "second conv width");
    cmd_trn->add_option(names("lstm-hidden"), trn.arch.lstm_hidden, "LSTM units per direction");
    cmd_trn->add_option(names("attn-units"), trn.arch.attn_units, "attention projection width");
    cmd_trn->add_option(names("fc1-units"), trn.arch.fc1_units, "first dense width");
    cmd_trn->add_option(names("fc2-units"), trn.arch.fc2_units, "second dense width");
    cmd_trn->add_option(names("dropout-conv"), trn.arch.dropout_conv, "conv dropout rate");
    cmd_trn->add_option(names("dropout-lstm"), trn.arch.dropout_lstm, "post-BiLSTM dropout rate");
    cmd_trn->add_option(names("dropout-fc"), trn.arch.dropout_fc, "dense dropout rate");

    EvaluateArgs ev;
    auto* cmd_ev = app.add_subcommand("evaluate", "score a checkpoint against test windows");
    cmd_ev->add_option("--checkpoint", ev.checkpoint, "trained checkpoint")->required();
    cmd_ev->add_option("--windows", ev.windows, "test window container")->required();
    cmd_ev->add_option("--meta", ev.meta, "preprocessing metadata sidecar")->required();
    cmd_ev->add_option(names("out-dir"), ev.out_dir, "output directory");

    ExplainArgs ex;
    auto* cmd_ex = app.add_subcommand("explain", "export interpretability tables");
    cmd_ex->add_option("--checkpoint", ex.checkpoint, "trained checkpoint")->required();
    cmd_ex->add_option("--windows", ex.windows, "test window container")->required();
    cmd_ex->add_option("--meta", ex.meta, "preprocessing metadata sidecar")->required();
    cmd_ex->add_option(names("train-data"), ex.train_data,
                       "raw training trajectories (correlation and profiles)")
        ->required();
    cmd_ex->add_option(names("out-dir"), ex.out_dir, "output directory");
    cmd_ex->add_option("--units", ex.units, "engine ids for per-engine profiles")->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    if (cmd_gen->parsed()) return run_generate(gen);
    if (cmd_pre->parsed()) {
        pre.drop_given = drop_opt->count() > 0;
        return run_preprocess(pre);
    }
    if (cmd_trn->parsed()) return run_train(trn);
    if (cmd_ev->parsed()) return run_evaluate(ev);
    if (cmd_ex->parsed()) return run_explain(ex);
    return 1;
}
