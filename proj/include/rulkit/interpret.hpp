#pragma once

#include <string>
#include <vector>

#include "rulkit/cmapss_io.hpp"
#include "rulkit/nn_core.hpp"
#include "rulkit/pipeline.hpp"

namespace rulkit {

// One engine's attention profile from a single inference pass.
struct AttentionRecord {
    int unit_id = 0;
    std::vector<double> alpha;  // one weight per window timestep
    double predicted_rul = 0.0;
    double true_rul = 0.0;
};

std::vector<AttentionRecord> attention_records(const WindowDataset& dataset,
                                               const ModelParams& params, int batch_size = 128);

// Columns: unit, t1..tT, predicted, true.
void write_attention_table(const std::string& path, const std::vector<AttentionRecord>& records);

// Pearson matrix over feature columns, row-major F x F. Constant columns get
// r = 0 with defined = false instead of NaN; the diagonal is exactly 1.
struct CorrelationMatrix {
    int size = 0;
    std::vector<double> r;        // size x size
    std::vector<bool> defined;    // false where either column is constant

    double at(int i, int j) const { return r[static_cast<size_t>(i) * size + j]; }
    bool defined_at(int i, int j) const { return defined[static_cast<size_t>(i) * size + j]; }
};

// rows: observations, each with one value per feature (unscaled).
CorrelationMatrix correlation_matrix(const std::vector<std::vector<double>>& features);

// Columns: feature (1-based row index), then one column per feature.
// Undefined entries are written as 0.
void write_correlation_table(const std::string& path, const CorrelationMatrix& matrix,
                             const std::vector<std::string>& feature_names);

struct ResidualEntry {
    int rank = 0;  // 1-based after sorting by |error|
    int unit_id = 0;
    double actual = 0.0;
    double predicted = 0.0;
    double error = 0.0;  // predicted - actual
};

struct ResidualReport {
    std::vector<ResidualEntry> entries;  // ascending |error|
    double negative_fraction = 0.0;      // error < 0
    double band_fraction = 0.0;          // |error| <= band
    int over_count = 0;                  // error > 0, the safety-critical side
    double band = 10.0;
};

ResidualReport residual_report(const std::vector<int>& unit_ids,
                               const std::vector<double>& predicted,
                               const std::vector<double>& actual, double band = 10.0);

// Columns: rank, unit, actual, predicted, error.
void write_residual_table(const std::string& path, const ResidualReport& report);

struct RulProfile {
    int unit_id = 0;
    std::vector<int> cycles;
    std::vector<double> labels;
};

// Piecewise RUL label curves for the selected engines plus a global
// (unit, cycle, label) scatter over every trajectory passed in. Unknown unit
// ids raise an error naming the valid ids.
struct RulProfileSet {
    std::vector<RulProfile> per_engine;
    std::vector<std::vector<double>> global_rows;  // unit, cycle, label
};

RulProfileSet rul_profiles(const std::vector<EngineTrajectory>& trajectories,
                           const std::vector<int>& units, double max_rul = kDefaultMaxRul);

// One file per selected engine (suffix _unit<id>.csv, columns cycle, label)
// plus <prefix>_all.csv with columns unit, cycle, label.
void write_rul_profiles(const std::string& path_prefix, const RulProfileSet& profiles);

}  // namespace rulkit
