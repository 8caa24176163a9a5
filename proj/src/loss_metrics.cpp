#include "rulkit/loss_metrics.hpp"

#include <cmath>
#include <string>

#include "rulkit/common.hpp"

namespace rulkit {
namespace {

void check_lengths(const std::vector<double>& predicted, const std::vector<double>& actual) {
    if (predicted.size() != actual.size())
        throw_shape("prediction/actual length mismatch: " + std::to_string(predicted.size()) +
                    " vs " + std::to_string(actual.size()));
}

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw_numeric(std::string(what) + " is not finite");
}

}  // namespace

void validate_loss_config(const LossConfig& config) {
    if (!(config.h1 > config.h2 && config.h2 > 0.0))
        throw_validation("loss config requires h1 > h2 > 0, got h1=" + std::to_string(config.h1) +
                         " h2=" + std::to_string(config.h2));
}

double asym_loss(double predicted, double actual, const LossConfig& config) {
    check_finite(predicted, "prediction");
    check_finite(actual, "actual");
    double error = predicted - actual;
    if (error < 0.0) return std::exp(-error / config.h1) - 1.0;
    return std::exp(error / config.h2) - 1.0;
}

double asym_loss_grad(double predicted, double actual, const LossConfig& config) {
    check_finite(predicted, "prediction");
    check_finite(actual, "actual");
    double error = predicted - actual;
    if (error < 0.0) return -std::exp(-error / config.h1) / config.h1;
    return std::exp(error / config.h2) / config.h2;
}

double asym_loss_mean(const std::vector<double>& predicted, const std::vector<double>& actual,
                      const LossConfig& config) {
    check_lengths(predicted, actual);
    if (predicted.empty()) throw_validation("asym_loss_mean: empty input");
    double acc = 0.0;
    for (size_t i = 0; i < predicted.size(); ++i) acc += asym_loss(predicted[i], actual[i], config);
    return acc / static_cast<double>(predicted.size());
}

double nasa_s_score(const std::vector<double>& predicted, const std::vector<double>& actual,
                    const LossConfig& config) {
    check_lengths(predicted, actual);
    double acc = 0.0;
    for (size_t i = 0; i < predicted.size(); ++i) acc += asym_loss(predicted[i], actual[i], config);
    return acc;
}

MetricsReport regression_metrics(const std::vector<double>& predicted,
                                 const std::vector<double>& actual) {
    check_lengths(predicted, actual);
    const size_t n = predicted.size();
    if (n < 2) throw_validation("regression metrics need at least 2 samples");

    MetricsReport report;
    report.n_engines = static_cast<int>(n);

    double sse = 0.0, abs_sum = 0.0, err_sum = 0.0;
    double mape_sum = 0.0;
    int mape_count = 0;
    for (size_t i = 0; i < n; ++i) {
        check_finite(predicted[i], "prediction");
        check_finite(actual[i], "actual");
        double e = predicted[i] - actual[i];
        sse += e * e;
        abs_sum += std::abs(e);
        err_sum += e;
        if (actual[i] != 0.0) {
            mape_sum += std::abs(e / actual[i]);
            ++mape_count;
        }
    }
    const double dn = static_cast<double>(n);
    report.rmse = std::sqrt(sse / dn);
    report.mae = abs_sum / dn;
    report.mean_error = err_sum / dn;

    double var_err = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double d = (predicted[i] - actual[i]) - report.mean_error;
        var_err += d * d;
    }
    report.std_error = std::sqrt(var_err / dn);

    report.mape_excluded = static_cast<int>(n) - mape_count;
    report.mape = mape_count > 0 ? 100.0 * mape_sum / mape_count : 0.0;

    double y_mean = 0.0;
    for (double y : actual) y_mean += y;
    y_mean /= dn;
    double sst = 0.0;
    for (double y : actual) sst += (y - y_mean) * (y - y_mean);
    if (sst > 0.0) {
        report.r2 = 1.0 - sse / sst;
        report.r2_defined = true;
    } else {
        report.r2 = 0.0;
        report.r2_defined = false;
    }
    return report;
}

MetricsReport compute_metrics(const std::vector<double>& predicted,
                              const std::vector<double>& actual, const LossConfig& config) {
    validate_loss_config(config);
    MetricsReport report = regression_metrics(predicted, actual);
    report.s_score = nasa_s_score(predicted, actual, config);
    return report;
}

double accuracy_band(const std::vector<double>& predicted, const std::vector<double>& actual,
                     double band) {
    check_lengths(predicted, actual);
    if (predicted.empty()) throw_validation("accuracy_band: empty input");
    size_t hits = 0;
    for (size_t i = 0; i < predicted.size(); ++i)
        if (std::abs(predicted[i] - actual[i]) <= band) ++hits;
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace rulkit
