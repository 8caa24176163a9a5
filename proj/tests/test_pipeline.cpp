#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rulkit/pipeline.hpp"
#include "rulkit/synth_gen.hpp"
#include "test_util.hpp"

using namespace rulkit;

namespace {

EngineTrajectory ramp_engine(int unit, int life) {
    EngineTrajectory traj;
    traj.unit_id = unit;
    for (int t = 1; t <= life; ++t) {
        CycleRecord rec;
        rec.cycle = t;
        for (int i = 0; i < kNumSettings; ++i) rec.settings[i] = i;
        for (int i = 0; i < kNumSensors; ++i) rec.sensors[i] = 10.0 * (i + 1) + t;
        traj.cycles.push_back(rec);
    }
    return traj;
}

}  // namespace

TEST_CASE("constant sensors are dropped by the range scan, moving ones kept") {
    SynthConfig cfg;
    cfg.n_engines = 4;
    cfg.n_constant_sensors = 7;
    cfg.noise_std = 0.0;
    auto r = generate(cfg);
    auto sel = select_sensors(r.train);
    CHECK(sel.dropped_sensors == std::vector<int>{1, 2, 3, 4, 5, 6, 7});
    // 3 settings + 14 moving sensors
    CHECK(sel.feature_count() == 17);
    CHECK(sel.feature_names[0] == "setting1");
    CHECK(sel.feature_names[3] == "s8");
    CHECK(sel.feature_names.back() == "s21");
}

TEST_CASE("explicit drop list overrides the scan and is used verbatim") {
    auto traj = std::vector<EngineTrajectory>{ramp_engine(1, 40)};
    auto sel = select_sensors(traj, kDefaultVarianceThreshold,
                              std::vector<int>{1, 5, 6, 10, 16, 18, 19});
    CHECK(sel.dropped_sensors == std::vector<int>{1, 5, 6, 10, 16, 18, 19});
    CHECK(sel.feature_count() == 17);
    CHECK(sel.feature_names[3] == "s2");

    CHECK_THROWS_AS(select_sensors(traj, kDefaultVarianceThreshold, std::vector<int>{0}), Error);
    CHECK_THROWS_AS(select_sensors(traj, kDefaultVarianceThreshold, std::vector<int>{22}), Error);
}

TEST_CASE("labels plateau at the cap then descend linearly to zero") {
    auto traj = ramp_engine(1, 200);
    auto labels = label_rul(traj);
    REQUIRE(labels.size() == 200);
    for (int t = 1; t <= 70; ++t) CHECK(labels[t - 1] == 130.0);
    CHECK(labels[70] == 129.0);
    CHECK(labels.back() == 0.0);
    for (size_t i = 1; i < labels.size(); ++i) CHECK(labels[i] <= labels[i - 1]);

    auto short_labels = label_rul(ramp_engine(1, 80));
    CHECK(short_labels.front() == 79.0);  // cap never binds for short lives
    CHECK(short_labels.back() == 0.0);
}

TEST_CASE("scaler maps train extremes to [0,1], flags constants, never clips") {
    std::vector<std::vector<double>> train = {{0.0, 5.0}, {10.0, 5.0}, {4.0, 5.0}};
    auto scaler = fit_scaler(train);
    CHECK(scaler.min[0] == 0.0);
    CHECK(scaler.max[0] == 10.0);
    CHECK_FALSE(scaler.constant[0]);
    CHECK(scaler.constant[1]);

    auto scaled = transform({{0.0, 5.0}, {10.0, 99.0}, {15.0, 5.0}, {-5.0, 5.0}}, scaler);
    CHECK(scaled[0][0] == 0.0);
    CHECK(scaled[1][0] == 1.0);
    CHECK(scaled[2][0] == 1.5);   // out-of-range stays out of range
    CHECK(scaled[3][0] == -0.5);
    for (const auto& row : scaled) CHECK(row[1] == 0.0);  // constant feature

    CHECK_THROWS_AS(transform({{1.0}}, scaler), Error);
    CHECK_THROWS_AS(fit_scaler({{std::nan("")}}), Error);
}

TEST_CASE("scaler parameters ignore the test split entirely") {
    SynthConfig cfg;
    cfg.n_engines = 5;
    auto r = generate(cfg);
    auto sel = select_sensors(r.train);
    auto scaler_before = fit_scaler(extract_features(r.train, sel));

    // perturb the test split wildly; the fitted parameters cannot move
    for (auto& traj : r.test)
        for (auto& rec : traj.cycles)
            for (auto& s : rec.sensors) s *= 1000.0;
    auto scaler_after = fit_scaler(extract_features(r.train, sel));
    CHECK(scaler_before.min == scaler_after.min);
    CHECK(scaler_before.max == scaler_after.max);

    // transforming the perturbed test data with the train scaler still works
    auto scaled = transform(extract_features(r.test, sel), scaler_after);
    CHECK_FALSE(scaled.empty());
}

TEST_CASE("train window count matches brute-force enumeration over random geometries") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> life_dist(1, 120);
    std::uniform_int_distribution<int> window_dist(2, 40);
    std::uniform_int_distribution<int> stride_dist(1, 10);

    for (int trial = 0; trial < 200; ++trial) {
        int life = life_dist(rng);
        int window = window_dist(rng);
        int stride = stride_dist(rng);

        std::vector<EngineTrajectory> trajs{ramp_engine(1, life)};
        auto sel = select_sensors(trajs, kDefaultVarianceThreshold, std::vector<int>{});
        auto scaler = fit_scaler(extract_features(trajs, sel));
        auto ds = make_train_windows(trajs, sel, scaler, window, stride);

        int expected = 0;
        for (int start = 1; start + window - 1 <= life; start += stride) ++expected;
        REQUIRE(ds.count() == expected);
    }
}

TEST_CASE("train window labels are the terminal-cycle labels, capped and non-increasing") {
    std::vector<EngineTrajectory> trajs{ramp_engine(7, 180)};
    auto sel = select_sensors(trajs, kDefaultVarianceThreshold, std::vector<int>{});
    auto scaler = fit_scaler(extract_features(trajs, sel));
    auto ds = make_train_windows(trajs, sel, scaler, 30, 3);

    REQUIRE(ds.count() == (180 - 30) / 3 + 1);
    for (int w = 0; w < ds.count(); ++w) {
        CHECK(ds.labels[w] >= 0.0);
        CHECK(ds.labels[w] <= 130.0);
        CHECK(ds.provenance[w].unit_id == 7);
        CHECK(ds.provenance[w].terminal_cycle == 30 + 3 * w);
        CHECK(ds.labels[w] == std::min(180.0 - (30 + 3 * w), 130.0));
        if (w > 0) CHECK(ds.labels[w] <= ds.labels[w - 1]);
    }
    // windows shorter than the engine produce nothing
    auto empty = make_train_windows({ramp_engine(1, 20)}, sel, scaler, 30, 3);
    CHECK(empty.count() == 0);
}

TEST_CASE("test windows take the last cycles, left-padded with zeros, labels capped") {
    std::vector<EngineTrajectory> trajs{ramp_engine(1, 50), ramp_engine(2, 12)};
    auto sel = select_sensors(trajs, kDefaultVarianceThreshold, std::vector<int>{});
    auto scaler = fit_scaler(extract_features(trajs, sel));
    RulTruthTable truth;
    truth.terminal_rul = {200, 4};

    auto ds = make_test_windows(trajs, sel, scaler, truth, 30);
    REQUIRE(ds.count() == 2);
    CHECK(ds.window() == 30);
    CHECK(ds.labels[0] == 130.0);  // capped
    CHECK(ds.labels[1] == 4.0);

    // engine 1: last 30 of 50 cycles; first feature row equals scaled cycle 21
    auto features = transform(extract_features({trajs[0]}, sel), scaler);
    for (int f = 0; f < ds.features(); ++f)
        CHECK(ds.tensor.at(0, 0, f) == features[20][f]);

    // engine 2: 12 cycles, so 18 leading zero rows
    for (int t = 0; t < 18; ++t)
        for (int f = 0; f < ds.features(); ++f) CHECK(ds.tensor.at(1, t, f) == 0.0);
    auto features2 = transform(extract_features({trajs[1]}, sel), scaler);
    for (int f = 0; f < ds.features(); ++f)
        CHECK(ds.tensor.at(1, 18, f) == features2[0][f]);

    truth.terminal_rul = {200};
    CHECK_THROWS_AS(make_test_windows(trajs, sel, scaler, truth, 30), Error);
}

TEST_CASE("window containers and metadata round-trip bit-exactly") {
    testutil::TempDir tmp;
    SynthConfig cfg;
    cfg.n_engines = 3;
    auto r = generate(cfg);
    auto sel = select_sensors(r.train);
    auto scaler = fit_scaler(extract_features(r.train, sel));
    auto ds = make_train_windows(r.train, sel, scaler);

    save_windows(tmp.file("w.rkwd"), ds);
    auto loaded = load_windows(tmp.file("w.rkwd"));
    CHECK(loaded.tensor.shape == ds.tensor.shape);
    CHECK(loaded.tensor.data == ds.tensor.data);
    CHECK(loaded.labels == ds.labels);
    REQUIRE(loaded.provenance.size() == ds.provenance.size());
    for (size_t i = 0; i < ds.provenance.size(); ++i) {
        CHECK(loaded.provenance[i].unit_id == ds.provenance[i].unit_id);
        CHECK(loaded.provenance[i].terminal_cycle == ds.provenance[i].terminal_cycle);
    }

    // writing the loaded dataset again reproduces the file byte for byte
    save_windows(tmp.file("w2.rkwd"), loaded);
    CHECK(testutil::slurp(tmp.file("w.rkwd")) == testutil::slurp(tmp.file("w2.rkwd")));

    PreprocessMeta meta;
    meta.selection = sel;
    meta.scaler = scaler;
    save_preprocess_meta(tmp.file("meta.json"), meta);
    auto meta2 = load_preprocess_meta(tmp.file("meta.json"));
    CHECK(meta2.selection.dropped_sensors == sel.dropped_sensors);
    CHECK(meta2.selection.feature_names == sel.feature_names);
    CHECK(meta2.scaler.min == scaler.min);
    CHECK(meta2.scaler.max == scaler.max);
    CHECK(meta2.window == meta.window);
    CHECK(meta2.max_rul == meta.max_rul);

    // corrupted magic is refused
    auto bytes = testutil::slurp(tmp.file("w.rkwd"));
    bytes[0] = 'X';
    testutil::spit(tmp.file("bad.rkwd"), bytes);
    CHECK_THROWS_AS(load_windows(tmp.file("bad.rkwd")), Error);
}
