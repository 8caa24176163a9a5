#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "rulkit/interpret.hpp"
#include "rulkit/synth_gen.hpp"
#include "rulkit/trainer.hpp"
#include "test_util.hpp"

using namespace rulkit;

namespace {

WindowDataset small_windows(int n_engines, std::uint64_t seed) {
    SynthConfig sc;
    sc.n_engines = n_engines;
    sc.min_life = 60;
    sc.max_life = 90;
    sc.seed = seed;
    auto r = generate(sc);
    auto sel = select_sensors(r.train);
    auto scaler = fit_scaler(extract_features(r.train, sel));
    return make_test_windows(r.test, sel, scaler, r.truth);
}

ModelConfig small_arch(const WindowDataset& ds) {
    ModelConfig cfg;
    cfg.features = ds.features();
    cfg.window = ds.window();
    cfg.conv1_filters = 4;
    cfg.conv2_filters = 6;
    cfg.lstm_hidden = 3;
    cfg.attn_units = 2;
    cfg.fc1_units = 4;
    cfg.fc2_units = 2;
    return cfg;
}

}  // namespace

TEST_CASE("attention records carry normalized weights and match predict") {
    auto ds = small_windows(5, 31);
    ModelParams params = init_params(small_arch(ds), 2);

    auto records = attention_records(ds, params, 2);
    auto again = attention_records(ds, params, 128);
    auto preds = predict(params, ds);
    REQUIRE(records.size() == static_cast<size_t>(ds.count()));
    for (size_t i = 0; i < records.size(); ++i) {
        CHECK(records[i].unit_id == ds.provenance[i].unit_id);
        CHECK(records[i].true_rul == ds.labels[i]);
        CHECK(records[i].predicted_rul == preds[i]);
        CHECK(records[i].alpha == again[i].alpha);  // batch size cannot matter
        REQUIRE(records[i].alpha.size() == static_cast<size_t>(ds.window()));
        double sum = 0.0;
        for (double a : records[i].alpha) {
            CHECK(a >= 0.0);
            sum += a;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("attention table has one row per engine and a header of timesteps") {
    testutil::TempDir tmp;
    auto ds = small_windows(3, 32);
    ModelParams params = init_params(small_arch(ds), 3);
    write_attention_table(tmp.file("attn.csv"), attention_records(ds, params));

    auto table = read_table(tmp.file("attn.csv"));
    REQUIRE(table.header.size() == static_cast<size_t>(2 + ds.window() + 1));
    CHECK(table.header[0] == "unit");
    CHECK(table.header[1] == "t1");
    CHECK(table.header[ds.window()] == "t" + std::to_string(ds.window()));
    CHECK(table.header[ds.window() + 1] == "predicted");
    CHECK(table.header.back() == "true");
    CHECK(table.rows.size() == 3);
}

TEST_CASE("correlation matrix is symmetric with a unit diagonal") {
    std::mt19937_64 rng(7);
    const int n = 60, f = 5;
    std::vector<std::vector<double>> rows(n, std::vector<double>(f));
    for (auto& row : rows) oracles::fill_uniform(row, rng, -2.0, 2.0);

    auto m = correlation_matrix(rows);
    REQUIRE(m.size == f);
    for (int i = 0; i < f; ++i) {
        CHECK(m.at(i, i) == 1.0);
        for (int j = 0; j < f; ++j) {
            CHECK(m.defined_at(i, j));
            CHECK(m.at(i, j) == doctest::Approx(m.at(j, i)).epsilon(1e-12));
            CHECK(m.at(i, j) >= -1.0);
            CHECK(m.at(i, j) <= 1.0);
        }
    }
}

TEST_CASE("correlation matches the textbook two-pass computation") {
    std::mt19937_64 rng(9);
    const int n = 80, f = 4;
    std::vector<std::vector<double>> rows(n, std::vector<double>(f));
    for (auto& row : rows) oracles::fill_uniform(row, rng, 0.0, 10.0);
    // make two columns strongly related so the test covers non-trivial values
    for (auto& row : rows) row[2] = 3.0 * row[0] + row[3] * 0.1;

    auto m = correlation_matrix(rows);
    for (int i = 0; i < f; ++i)
        for (int j = 0; j < f; ++j) {
            std::vector<double> a(n), b(n);
            for (int k = 0; k < n; ++k) {
                a[k] = rows[k][i];
                b[k] = rows[k][j];
            }
            CHECK(m.at(i, j) == doctest::Approx(oracles::pearson_two_pass(a, b)).epsilon(1e-10));
        }
}

TEST_CASE("exact linear relations hit the bounds") {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 10; ++i)
        rows.push_back({static_cast<double>(i), -static_cast<double>(i), 2.0 * i + 5.0});
    auto m = correlation_matrix(rows);
    CHECK(m.at(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(m.at(0, 2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.at(1, 2) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("constant columns are flagged instead of producing NaN") {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 8; ++i) rows.push_back({static_cast<double>(i), 4.0});
    auto m = correlation_matrix(rows);
    CHECK(m.at(0, 1) == 0.0);
    CHECK_FALSE(m.defined_at(0, 1));
    CHECK_FALSE(m.defined_at(1, 0));
    CHECK(m.at(1, 1) == 1.0);        // diagonal stays 1 by convention
    CHECK_FALSE(m.defined_at(1, 1));
    CHECK(m.defined_at(0, 0));
}

TEST_CASE("correlation matrix is positive semidefinite") {
    std::mt19937_64 rng(13);
    const int n = 50, f = 6;
    std::vector<std::vector<double>> rows(n, std::vector<double>(f));
    for (auto& row : rows) oracles::fill_uniform(row, rng);
    auto m = correlation_matrix(rows);

    // Cholesky of M + tiny ridge must succeed for a PSD matrix
    std::vector<double> a(m.r);
    const int dim = m.size;
    for (int i = 0; i < dim; ++i) a[static_cast<size_t>(i) * dim + i] += 1e-10;
    bool ok = true;
    for (int i = 0; i < dim && ok; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = a[static_cast<size_t>(i) * dim + j];
            for (int k = 0; k < j; ++k)
                sum -= a[static_cast<size_t>(i) * dim + k] * a[static_cast<size_t>(j) * dim + k];
            if (i == j) {
                if (sum <= 0.0) {
                    ok = false;
                    break;
                }
                a[static_cast<size_t>(i) * dim + i] = std::sqrt(sum);
            } else {
                a[static_cast<size_t>(i) * dim + j] = sum / a[static_cast<size_t>(j) * dim + j];
            }
        }
    }
    CHECK(ok);
}

TEST_CASE("correlation table carries a leading feature index column") {
    testutil::TempDir tmp;
    std::vector<std::vector<double>> rows = {{1.0, 2.0}, {2.0, 1.0}, {3.0, 5.0}};
    auto m = correlation_matrix(rows);
    write_correlation_table(tmp.file("corr.csv"), m, {"setting1", "s2"});
    auto table = read_table(tmp.file("corr.csv"));
    CHECK(table.header == std::vector<std::string>{"feature", "setting1", "s2"});
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0][0] == 1.0);
    CHECK(table.rows[0][1] == 1.0);
    CHECK(table.rows[1][2] == 1.0);
}

TEST_CASE("residuals rank by absolute error and count the risky side") {
    auto report = residual_report({4, 9, 2}, {37.0, 58.0, 19.0}, {40.0, 50.0, 20.0});
    REQUIRE(report.entries.size() == 3);
    CHECK(report.entries[0].unit_id == 2);   // error -1
    CHECK(report.entries[0].rank == 1);
    CHECK(report.entries[1].unit_id == 4);   // error -3
    CHECK(report.entries[2].unit_id == 9);   // error +8
    CHECK(report.entries[2].error == 8.0);
    CHECK(report.negative_fraction == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(report.band_fraction == 1.0);
    CHECK(report.over_count == 1);
    CHECK(report.band == 10.0);

    auto tight = residual_report({4, 9, 2}, {37.0, 58.0, 19.0}, {40.0, 50.0, 20.0}, 2.0);
    CHECK(tight.band_fraction == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("residual ties keep input order and zero errors are not negative") {
    auto report = residual_report({1, 2, 3}, {10.0, 30.0, 20.0}, {10.0, 33.0, 17.0});
    CHECK(report.entries[0].unit_id == 1);
    CHECK(report.entries[0].error == 0.0);
    CHECK(report.negative_fraction == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(report.over_count == 1);
    // |error| ties at 3: unit 2 before unit 3 as given
    CHECK(report.entries[1].unit_id == 2);
    CHECK(report.entries[2].unit_id == 3);

    CHECK_THROWS_AS(residual_report({1}, {1.0, 2.0}, {1.0, 2.0}), Error);
}

TEST_CASE("residual table round-trips through the csv reader") {
    testutil::TempDir tmp;
    auto report = residual_report({4, 9}, {37.0, 58.0}, {40.0, 50.0});
    write_residual_table(tmp.file("res.csv"), report);
    auto table = read_table(tmp.file("res.csv"));
    CHECK(table.header == std::vector<std::string>{"rank", "unit", "actual", "predicted", "error"});
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0] == std::vector<double>{1.0, 4.0, 40.0, 37.0, -3.0});
    CHECK(table.rows[1] == std::vector<double>{2.0, 9.0, 50.0, 58.0, 8.0});
}

TEST_CASE("label curves plateau then descend for long engines") {
    SynthConfig sc;
    sc.n_engines = 1;
    sc.min_life = 200;
    sc.max_life = 200;
    sc.seed = 5;
    auto r = generate(sc);

    auto profiles = rul_profiles(r.train, {1});
    REQUIRE(profiles.per_engine.size() == 1);
    const auto& p = profiles.per_engine[0];
    REQUIRE(p.labels.size() == 200);
    for (int t = 0; t < 70; ++t) CHECK(p.labels[t] == 130.0);
    CHECK(p.labels[70] == 129.0);
    CHECK(p.labels.back() == 0.0);
    CHECK(p.cycles.front() == 1);
    CHECK(p.cycles.back() == 200);
    for (size_t i = 1; i < p.labels.size(); ++i) CHECK(p.labels[i] <= p.labels[i - 1]);
    CHECK(profiles.global_rows.size() == 200);
}

TEST_CASE("short engines never reach the plateau") {
    SynthConfig sc;
    sc.n_engines = 2;
    sc.min_life = 60;
    sc.max_life = 90;
    sc.seed = 6;
    auto r = generate(sc);
    auto profiles = rul_profiles(r.train, {2});
    const auto& p = profiles.per_engine[0];
    CHECK(p.unit_id == 2);
    CHECK(p.labels.front() == static_cast<double>(p.labels.size() - 1));
    CHECK(p.labels.back() == 0.0);
    // global scatter covers both engines
    size_t total = r.train[0].cycles.size() + r.train[1].cycles.size();
    CHECK(profiles.global_rows.size() == total);
}

TEST_CASE("asking for an unknown engine names the valid ids") {
    SynthConfig sc;
    sc.n_engines = 2;
    auto r = generate(sc);
    CHECK_THROWS_WITH_AS(rul_profiles(r.train, {7}) , doctest::Contains("7"), Error);
}

TEST_CASE("profile files appear per engine plus a combined scatter") {
    testutil::TempDir tmp;
    SynthConfig sc;
    sc.n_engines = 3;
    sc.min_life = 60;
    sc.max_life = 80;
    auto r = generate(sc);
    auto profiles = rul_profiles(r.train, {1, 3});
    write_rul_profiles(tmp.file("rul_profile"), profiles);

    CHECK(std::filesystem::exists(tmp.file("rul_profile_unit1.csv")));
    CHECK_FALSE(std::filesystem::exists(tmp.file("rul_profile_unit2.csv")));
    CHECK(std::filesystem::exists(tmp.file("rul_profile_unit3.csv")));
    auto one = read_table(tmp.file("rul_profile_unit1.csv"));
    CHECK(one.header == std::vector<std::string>{"cycle", "label"});
    CHECK(one.rows.size() == r.train[0].cycles.size());
    auto all = read_table(tmp.file("rul_profile_all.csv"));
    CHECK(all.header == std::vector<std::string>{"unit", "cycle", "label"});
}
