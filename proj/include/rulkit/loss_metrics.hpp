#pragma once

#include <vector>

namespace rulkit {

// Asymmetric exponential penalty coefficients. h1 shapes the under-estimation
// branch, h2 the steeper over-estimation branch.
struct LossConfig {
    double h1 = 13.0;
    double h2 = 10.0;
};

// Enforces h1 > h2 > 0.
void validate_loss_config(const LossConfig& config);

// error = predicted - actual. Negative error (under-estimation) costs
// exp(-error/h1) - 1; non-negative error costs exp(error/h2) - 1.
double asym_loss(double predicted, double actual, const LossConfig& config = {});

// d(loss)/d(predicted). At error == 0 the right-branch value 1/h2 is used.
double asym_loss_grad(double predicted, double actual, const LossConfig& config = {});

double asym_loss_mean(const std::vector<double>& predicted, const std::vector<double>& actual,
                      const LossConfig& config = {});

// Sum (not mean) of per-engine asymmetric penalties.
double nasa_s_score(const std::vector<double>& predicted, const std::vector<double>& actual,
                    const LossConfig& config = {});

struct MetricsReport {
    double rmse = 0.0;       // cycles
    double mae = 0.0;        // cycles
    double mape = 0.0;       // percent, engines with actual == 0 excluded
    double r2 = 0.0;         // valid only when r2_defined
    double s_score = 0.0;
    double mean_error = 0.0;  // signed, cycles
    double std_error = 0.0;   // population convention
    int n_engines = 0;
    bool r2_defined = true;   // false when the actuals have zero variance
    int mape_excluded = 0;    // engines left out of the MAPE average
};

// All fields except s_score; requires n >= 2.
MetricsReport regression_metrics(const std::vector<double>& predicted,
                                 const std::vector<double>& actual);

// regression_metrics plus the summed S-Score.
MetricsReport compute_metrics(const std::vector<double>& predicted,
                              const std::vector<double>& actual, const LossConfig& config = {});

// Fraction of engines with |predicted - actual| <= band.
double accuracy_band(const std::vector<double>& predicted, const std::vector<double>& actual,
                     double band = 10.0);

}  // namespace rulkit
