#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "rulkit/common.hpp"
#include "rulkit/loss_metrics.hpp"

using namespace rulkit;

TEST_CASE("documented penalty values for a 20-cycle miss") {
    CHECK(asym_loss(20.0, 40.0) == doctest::Approx(3.66).epsilon(0.01 / 3.66));
    CHECK(asym_loss(60.0, 40.0) == doctest::Approx(6.39).epsilon(0.01 / 6.39));
    double ratio = asym_loss(60.0, 40.0) / asym_loss(20.0, 40.0);
    CHECK(ratio == doctest::Approx(1.74).epsilon(0.01));
}

TEST_CASE("penalty branches follow the two exponentials exactly") {
    for (double err : {-30.0, -13.0, -1.0, 0.5, 10.0, 25.0}) {
        double want = err < 0.0 ? std::exp(-err / 13.0) - 1.0 : std::exp(err / 10.0) - 1.0;
        CHECK(asym_loss(100.0 + err, 100.0) == want);
    }
    CHECK(asym_loss(55.0, 55.0) == 0.0);
}

TEST_CASE("penalty gradient hand values and the kink convention") {
    CHECK(asym_loss_grad(0.0, 13.0) == doctest::Approx(-std::exp(1.0) / 13.0).epsilon(1e-12));
    CHECK(asym_loss_grad(50.0, 40.0) == doctest::Approx(std::exp(1.0) / 10.0).epsilon(1e-12));
    CHECK(asym_loss_grad(40.0, 40.0) == 0.1);  // right-branch value at zero error
}

TEST_CASE("gradient signs and loss monotonicity") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> mag(0.1, 60.0);
    for (int i = 0; i < 200; ++i) {
        double d = mag(rng);
        CHECK(asym_loss_grad(50.0 - d, 50.0) < 0.0);
        CHECK(asym_loss_grad(50.0 + d, 50.0) > 0.0);
        // farther from truth costs strictly more on each branch
        CHECK(asym_loss(50.0 - d - 1.0, 50.0) > asym_loss(50.0 - d, 50.0));
        CHECK(asym_loss(50.0 + d + 1.0, 50.0) > asym_loss(50.0 + d, 50.0));
        // over-estimation by d always costs more than under-estimation by d
        CHECK(asym_loss(50.0 + d, 50.0) > asym_loss(50.0 - d, 50.0));
    }
}

TEST_CASE("loss rejects bad coefficient pairs and non-finite inputs") {
    CHECK_NOTHROW(validate_loss_config({13.0, 10.0}));
    CHECK_THROWS_AS(validate_loss_config({10.0, 13.0}), Error);
    CHECK_THROWS_AS(validate_loss_config({10.0, 10.0}), Error);
    CHECK_THROWS_AS(validate_loss_config({13.0, -1.0}), Error);
    CHECK_THROWS_AS(validate_loss_config({-13.0, -20.0}), Error);
    CHECK_THROWS_AS(asym_loss(std::nan(""), 1.0), Error);
    CHECK_THROWS_AS(asym_loss_grad(1.0, std::numeric_limits<double>::infinity()), Error);
}

TEST_CASE("score sums per-engine penalties") {
    CHECK(nasa_s_score({50.0}, {40.0}) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));
    CHECK(nasa_s_score({50.0, 50.0}, {40.0, 40.0}) ==
          doctest::Approx(2.0 * (std::exp(1.0) - 1.0)).epsilon(1e-12));

    // additivity over concatenated fleets
    std::vector<double> pa = {10.0, 30.0}, ya = {20.0, 25.0};
    std::vector<double> pb = {70.0, 61.0, 90.0}, yb = {55.0, 80.0, 90.0};
    std::vector<double> pc = pa, yc = ya;
    pc.insert(pc.end(), pb.begin(), pb.end());
    yc.insert(yc.end(), yb.begin(), yb.end());
    CHECK(nasa_s_score(pc, yc) ==
          doctest::Approx(nasa_s_score(pa, ya) + nasa_s_score(pb, yb)).epsilon(1e-12));

    CHECK(asym_loss_mean(pc, yc) == doctest::Approx(nasa_s_score(pc, yc) / 5.0).epsilon(1e-12));
    CHECK_THROWS_AS(nasa_s_score({1.0}, {1.0, 2.0}), Error);
}

TEST_CASE("perfect predictions give zero errors and unit fit") {
    std::vector<double> y = {10.0, 50.0, 90.0, 130.0};
    auto m = compute_metrics(y, y);
    CHECK(m.rmse == 0.0);
    CHECK(m.mae == 0.0);
    CHECK(m.mape == 0.0);
    CHECK(m.r2 == 1.0);
    CHECK(m.r2_defined);
    CHECK(m.s_score == 0.0);
    CHECK(m.mean_error == 0.0);
    CHECK(m.std_error == 0.0);
    CHECK(m.n_engines == 4);
}

TEST_CASE("constant offset shows up in the mean, not the spread") {
    std::vector<double> y = {20.0, 60.0, 100.0};
    std::vector<double> p = {23.0, 63.0, 103.0};
    auto m = regression_metrics(p, y);
    CHECK(m.rmse == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(m.mae == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(m.mean_error == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(m.std_error == doctest::Approx(0.0).epsilon(1e-12));
    // SSE = 27, SST = 3200
    CHECK(m.r2 == doctest::Approx(1.0 - 27.0 / 3200.0).epsilon(1e-12));
}

TEST_CASE("hand-checked two-engine report") {
    std::vector<double> p = {50.0, 10.0};
    std::vector<double> y = {40.0, 20.0};
    auto m = compute_metrics(p, y);
    CHECK(m.rmse == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(m.mae == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(m.mean_error == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m.std_error == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(m.mape == doctest::Approx(37.5).epsilon(1e-12));  // (25% + 50%) / 2
    CHECK(m.r2 == doctest::Approx(0.0).epsilon(1e-12));     // SSE == SST == 200
    CHECK(m.s_score ==
          doctest::Approx(std::exp(1.0) - 1.0 + std::exp(10.0 / 13.0) - 1.0).epsilon(1e-12));
}

TEST_CASE("zero-variance actuals flag the fit score as undefined") {
    auto m = regression_metrics({41.0, 39.0}, {40.0, 40.0});
    CHECK_FALSE(m.r2_defined);
    CHECK(m.r2 == 0.0);
    CHECK(m.rmse == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("engines at zero true life leave the percentage average") {
    std::vector<double> p = {5.0, 55.0, 3.0};
    std::vector<double> y = {0.0, 50.0, 0.0};
    auto m = regression_metrics(p, y);
    CHECK(m.mape_excluded == 2);
    CHECK(m.mape == doctest::Approx(10.0).epsilon(1e-12));  // only the 50-cycle engine counts

    auto all_zero = regression_metrics({1.0, 2.0}, {0.0, 0.0});
    CHECK(all_zero.mape == 0.0);
    CHECK(all_zero.mape_excluded == 2);
}

TEST_CASE("band accuracy counts inclusive hits") {
    std::vector<double> p = {40.0, 50.0, 60.2, 15.0};
    std::vector<double> y = {40.0, 40.0, 50.0, 40.0};
    CHECK(accuracy_band(p, y) == 0.5);            // 0 and 10 in, 10.2 and 25 out
    CHECK(accuracy_band(p, y, 30.0) == 1.0);
    CHECK(accuracy_band(p, y, 0.0) == 0.25);
    CHECK_THROWS_AS(accuracy_band({}, {}), Error);
}

TEST_CASE("metric helpers reject degenerate inputs") {
    CHECK_THROWS_AS(regression_metrics({1.0}, {1.0}), Error);
    CHECK_THROWS_AS(regression_metrics({1.0, 2.0}, {1.0}), Error);
    CHECK_THROWS_AS(regression_metrics({std::nan(""), 2.0}, {1.0, 2.0}), Error);
    CHECK_THROWS_AS(asym_loss_mean({}, {}), Error);
}
