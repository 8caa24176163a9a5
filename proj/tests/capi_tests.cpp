#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "rulkit.h"
#include "test_util.hpp"

namespace {

struct Workspace {
    testutil::TempDir dir;
    std::string train = dir.file("train.txt");
    std::string test = dir.file("test.txt");
    std::string truth = dir.file("rul_truth.txt");
    std::string train_windows = dir.file("train_windows.rkwd");
    std::string test_windows = dir.file("test_windows.rkwd");
    std::string meta = dir.file("meta.json");
    std::string checkpoint = dir.file("model.rkcp");

    void generate_small() {
        rk_synth_config sc;
        rk_synth_config_default(&sc);
        sc.n_engines = 5;
        sc.min_life = 60;
        sc.max_life = 90;
        sc.seed = 7;
        REQUIRE(rk_generate(&sc, train.c_str(), test.c_str(), truth.c_str()) == RK_OK);
    }

    void preprocess() {
        rk_preprocess_config pc;
        rk_preprocess_config_default(&pc);
        REQUIRE(rk_preprocess(&pc, train.c_str(), test.c_str(), truth.c_str(),
                              train_windows.c_str(), test_windows.c_str(),
                              meta.c_str()) == RK_OK);
    }

    void train_small() {
        rk_arch_config arch;
        rk_arch_config_default(&arch);
        arch.conv1_filters = 4;
        arch.conv2_filters = 6;
        arch.lstm_hidden = 3;
        arch.attn_units = 2;
        arch.fc1_units = 4;
        arch.fc2_units = 2;
        rk_train_config tc;
        rk_train_config_default(&tc);
        tc.batch_size = 16;
        tc.max_epochs = 2;
        tc.seed = 3;
        REQUIRE(rk_train(&arch, &tc, train_windows.c_str(), meta.c_str(), checkpoint.c_str(),
                         dir.file("history.csv").c_str()) == RK_OK);
    }
};

}  // namespace

TEST_CASE("library reports its version") {
    CHECK(std::string(rk_version()) == "0.1.0");
}

TEST_CASE("defaults mirror the documented values") {
    rk_synth_config sc;
    rk_synth_config_default(&sc);
    CHECK(sc.n_engines == 20);
    CHECK(sc.n_constant_sensors == 7);
    CHECK(sc.seed == 42);

    rk_preprocess_config pc;
    rk_preprocess_config_default(&pc);
    CHECK(pc.window == 30);
    CHECK(pc.stride == 3);
    CHECK(pc.max_rul == 130.0);
    CHECK(pc.n_dropped == -1);

    rk_arch_config ac;
    rk_arch_config_default(&ac);
    CHECK(ac.conv1_filters == 64);
    CHECK(ac.conv2_filters == 128);
    CHECK(ac.lstm_hidden == 128);
    CHECK(ac.attn_units == 64);

    rk_train_config tc;
    rk_train_config_default(&tc);
    CHECK(tc.learning_rate == 1e-3);
    CHECK(tc.batch_size == 128);
    CHECK(tc.early_stop_patience == 20);
    CHECK(tc.lr_patience == 8);
    CHECK(tc.loss_h1 == 13.0);
    CHECK(tc.loss_h2 == 10.0);
    CHECK(tc.split_mode == 0);
    CHECK(tc.loss_kind == 0);
}

TEST_CASE("null arguments are rejected with a validation status") {
    CHECK(rk_generate(nullptr, "a", "b", "c") == RK_ERR_VALIDATION);
    rk_synth_config sc;
    rk_synth_config_default(&sc);
    CHECK(rk_generate(&sc, nullptr, "b", "c") == RK_ERR_VALIDATION);
    CHECK(rk_windows_open(nullptr, nullptr) == RK_ERR_VALIDATION);
    CHECK(rk_model_open(nullptr, nullptr) == RK_ERR_VALIDATION);
    CHECK(std::string(rk_last_error()).size() > 0);
}

TEST_CASE("missing files surface as io errors with a message") {
    rk_windows* w = nullptr;
    CHECK(rk_windows_open("/nonexistent/windows.rkwd", &w) == RK_ERR_IO);
    CHECK(w == nullptr);
    CHECK(std::string(rk_last_error()).find("windows.rkwd") != std::string::npos);

    rk_model* m = nullptr;
    CHECK(rk_model_open("/nonexistent/model.rkcp", &m) == RK_ERR_IO);
    CHECK(m == nullptr);
}

TEST_CASE("generate, preprocess, train, predict, evaluate and explain chain") {
    Workspace ws;
    ws.generate_small();
    CHECK(std::filesystem::exists(ws.train));
    CHECK(std::filesystem::exists(ws.test));
    CHECK(std::filesystem::exists(ws.truth));

    ws.preprocess();
    rk_windows* test_w = nullptr;
    REQUIRE(rk_windows_open(ws.test_windows.c_str(), &test_w) == RK_OK);
    int64_t n = 0, t = 0, f = 0;
    REQUIRE(rk_windows_shape(test_w, &n, &t, &f) == RK_OK);
    CHECK(n == 5);
    CHECK(t == 30);
    CHECK(f == 17);

    ws.train_small();
    CHECK(std::filesystem::exists(ws.dir.file("history.csv")));

    rk_model* model = nullptr;
    REQUIRE(rk_model_open(ws.checkpoint.c_str(), &model) == RK_OK);
    int64_t params = 0;
    REQUIRE(rk_model_param_count(model, &params) == RK_OK);
    CHECK(params > 0);

    std::vector<double> preds(static_cast<size_t>(n), -1.0);
    REQUIRE(rk_predict(model, test_w, preds.data(), n) == RK_OK);
    for (double p : preds) CHECK(p == p);  // finite, filled in

    // wrong output length is refused before anything is written
    CHECK(rk_predict(model, test_w, preds.data(), n - 1) == RK_ERR_SHAPE);

    std::string txt = ws.dir.file("metrics.txt");
    std::string json = ws.dir.file("metrics.json");
    std::string csv = ws.dir.file("per_engine.csv");
    REQUIRE(rk_evaluate(model, ws.test_windows.c_str(), ws.meta.c_str(), txt.c_str(), json.c_str(),
                        csv.c_str()) == RK_OK);
    CHECK(std::filesystem::exists(txt));
    CHECK(std::filesystem::exists(json));
    CHECK(std::filesystem::exists(csv));
    CHECK(testutil::slurp(txt).find("rmse") != std::string::npos);
    CHECK(testutil::slurp(json).find("s_score") != std::string::npos);

    std::string out_dir = ws.dir.file("explain");
    REQUIRE(rk_explain(model, ws.test_windows.c_str(), ws.meta.c_str(), ws.train.c_str(),
                       out_dir.c_str(), nullptr, 0) == RK_OK);
    CHECK(std::filesystem::exists(out_dir + "/attention.csv"));
    CHECK(std::filesystem::exists(out_dir + "/residuals.csv"));
    CHECK(std::filesystem::exists(out_dir + "/correlation.csv"));
    CHECK(std::filesystem::exists(out_dir + "/rul_profile_all.csv"));
    CHECK(std::filesystem::exists(out_dir + "/rul_profile_unit1.csv"));

    rk_model_close(model);
    rk_windows_close(test_w);
}

TEST_CASE("metadata mismatches between model and windows are refused") {
    Workspace ws;
    ws.generate_small();
    ws.preprocess();
    ws.train_small();

    // windows preprocessed with a different geometry don't match the model
    Workspace other;
    other.generate_small();
    rk_preprocess_config pc;
    rk_preprocess_config_default(&pc);
    pc.window = 20;
    REQUIRE(rk_preprocess(&pc, other.train.c_str(), other.test.c_str(), other.truth.c_str(),
                          other.train_windows.c_str(), other.test_windows.c_str(),
                          other.meta.c_str()) == RK_OK);

    rk_model* model = nullptr;
    REQUIRE(rk_model_open(ws.checkpoint.c_str(), &model) == RK_OK);
    rk_status status = rk_evaluate(model, other.test_windows.c_str(), other.meta.c_str(),
                                   other.dir.file("m.txt").c_str(), nullptr, nullptr);
    CHECK(status == RK_ERR_SHAPE);
    CHECK(std::string(rk_last_error()).size() > 0);
    rk_model_close(model);
}

TEST_CASE("preprocess accepts an explicit sensor drop list") {
    Workspace ws;
    ws.generate_small();
    const int32_t drop[] = {1, 5, 6, 10, 16, 18, 19};
    rk_preprocess_config pc;
    rk_preprocess_config_default(&pc);
    pc.dropped_sensors = drop;
    pc.n_dropped = 7;
    REQUIRE(rk_preprocess(&pc, ws.train.c_str(), ws.test.c_str(), ws.truth.c_str(),
                          ws.train_windows.c_str(), ws.test_windows.c_str(),
                          ws.meta.c_str()) == RK_OK);
    CHECK(testutil::slurp(ws.meta).find("\"s2\"") != std::string::npos);

    // out-of-range entries are rejected
    const int32_t bad[] = {22};
    pc.dropped_sensors = bad;
    pc.n_dropped = 1;
    CHECK(rk_preprocess(&pc, ws.train.c_str(), ws.test.c_str(), ws.truth.c_str(),
                        ws.train_windows.c_str(), ws.test_windows.c_str(),
                        ws.meta.c_str()) == RK_ERR_VALIDATION);
}
