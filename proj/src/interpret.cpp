#include "rulkit/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace rulkit {

std::vector<AttentionRecord> attention_records(const WindowDataset& dataset,
                                               const ModelParams& params, int batch_size) {
    if (batch_size < 1) throw_validation("attention_records: batch_size must be positive");
    if (dataset.window() != params.config.window || dataset.features() != params.config.features)
        throw_shape("attention_records: dataset dims do not match the model architecture");
    const int t = dataset.window(), f = dataset.features();
    const size_t row = static_cast<size_t>(t) * f;

    std::vector<AttentionRecord> records;
    records.reserve(dataset.count());
    ForwardOptions options;
    options.mode = RunMode::kInfer;
    for (int begin = 0; begin < dataset.count(); begin += batch_size) {
        const int end = std::min(begin + batch_size, dataset.count());
        Tensor x({end - begin, t, f});
        for (int i = begin; i < end; ++i)
            std::memcpy(x.data.data() + static_cast<size_t>(i - begin) * row,
                        dataset.tensor.data.data() + static_cast<size_t>(i) * row,
                        row * sizeof(double));
        ForwardTrace trace;
        std::vector<double> y_hat = model_forward(x, params, options, &trace);
        for (int i = begin; i < end; ++i) {
            AttentionRecord rec;
            rec.unit_id = dataset.provenance[i].unit_id;
            rec.alpha.resize(t);
            for (int step = 0; step < t; ++step) rec.alpha[step] = trace.attn.alpha.at(i - begin, step);
            rec.predicted_rul = y_hat[i - begin];
            rec.true_rul = dataset.labels[i];
            records.push_back(std::move(rec));
        }
    }
    return records;
}

void write_attention_table(const std::string& path, const std::vector<AttentionRecord>& records) {
    if (records.empty()) throw_validation("write_attention_table: no records");
    const size_t t = records.front().alpha.size();
    std::vector<std::string> header{"unit"};
    for (size_t i = 1; i <= t; ++i) header.push_back("t" + std::to_string(i));
    header.push_back("predicted");
    header.push_back("true");
    std::vector<std::vector<double>> rows;
    for (const auto& rec : records) {
        if (rec.alpha.size() != t) throw_shape("write_attention_table: ragged alpha lengths");
        std::vector<double> row{static_cast<double>(rec.unit_id)};
        row.insert(row.end(), rec.alpha.begin(), rec.alpha.end());
        row.push_back(rec.predicted_rul);
        row.push_back(rec.true_rul);
        rows.push_back(std::move(row));
    }
    write_table(path, header, rows);
}

CorrelationMatrix correlation_matrix(const std::vector<std::vector<double>>& features) {
    if (features.size() < 2) throw_validation("correlation_matrix: need at least 2 rows");
    const size_t f = features.front().size();
    if (f == 0) throw_validation("correlation_matrix: no feature columns");
    for (const auto& row : features)
        if (row.size() != f) throw_shape("correlation_matrix: ragged rows");
    const size_t n = features.size();

    // Single pass over sums of deviations from a per-column pivot (the first
    // row); the pivot shift keeps the accumulations well conditioned.
    std::vector<double> pivot(features.front());
    std::vector<double> sum(f, 0.0);
    std::vector<double> sum_sq(f, 0.0);
    std::vector<double> cross(f * f, 0.0);
    std::vector<double> shifted(f);
    for (const auto& row : features) {
        for (size_t a = 0; a < f; ++a) {
            double d = row[a] - pivot[a];
            if (!std::isfinite(d)) throw_numeric("correlation_matrix: non-finite feature value");
            shifted[a] = d;
            sum[a] += d;
            sum_sq[a] += d * d;
        }
        for (size_t a = 0; a < f; ++a) {
            if (shifted[a] == 0.0) continue;
            for (size_t b = a + 1; b < f; ++b) cross[a * f + b] += shifted[a] * shifted[b];
        }
    }

    std::vector<double> var(f);
    for (size_t a = 0; a < f; ++a) var[a] = std::max(0.0, sum_sq[a] / n - (sum[a] / n) * (sum[a] / n));

    CorrelationMatrix out;
    out.size = static_cast<int>(f);
    out.r.assign(f * f, 0.0);
    out.defined.assign(f * f, true);
    for (size_t a = 0; a < f; ++a) {
        out.r[a * f + a] = 1.0;
        out.defined[a * f + a] = var[a] > 0.0;
        for (size_t b = a + 1; b < f; ++b) {
            if (var[a] > 0.0 && var[b] > 0.0) {
                double cov = cross[a * f + b] / n - (sum[a] / n) * (sum[b] / n);
                double r = cov / std::sqrt(var[a] * var[b]);
                r = std::clamp(r, -1.0, 1.0);
                out.r[a * f + b] = out.r[b * f + a] = r;
            } else {
                out.defined[a * f + b] = out.defined[b * f + a] = false;
            }
        }
    }
    return out;
}

void write_correlation_table(const std::string& path, const CorrelationMatrix& matrix,
                             const std::vector<std::string>& feature_names) {
    if (static_cast<int>(feature_names.size()) != matrix.size)
        throw_shape("write_correlation_table: name count does not match matrix size");
    std::vector<std::string> header{"feature"};
    header.insert(header.end(), feature_names.begin(), feature_names.end());
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < matrix.size; ++i) {
        std::vector<double> row{static_cast<double>(i + 1)};
        for (int j = 0; j < matrix.size; ++j) row.push_back(matrix.at(i, j));
        rows.push_back(std::move(row));
    }
    write_table(path, header, rows);
}

ResidualReport residual_report(const std::vector<int>& unit_ids,
                               const std::vector<double>& predicted,
                               const std::vector<double>& actual, double band) {
    if (unit_ids.size() != predicted.size() || predicted.size() != actual.size())
        throw_shape("residual_report: input length mismatch");
    if (predicted.empty()) throw_validation("residual_report: empty input");

    ResidualReport report;
    report.band = band;
    for (size_t i = 0; i < predicted.size(); ++i) {
        ResidualEntry e;
        e.unit_id = unit_ids[i];
        e.actual = actual[i];
        e.predicted = predicted[i];
        e.error = predicted[i] - actual[i];
        report.entries.push_back(e);
    }
    std::stable_sort(report.entries.begin(), report.entries.end(),
                     [](const ResidualEntry& a, const ResidualEntry& b) {
                         return std::abs(a.error) < std::abs(b.error);
                     });
    int negatives = 0, in_band = 0;
    for (size_t i = 0; i < report.entries.size(); ++i) {
        ResidualEntry& e = report.entries[i];
        e.rank = static_cast<int>(i) + 1;
        if (e.error < 0.0) ++negatives;
        if (e.error > 0.0) ++report.over_count;
        if (std::abs(e.error) <= band) ++in_band;
    }
    const double n = static_cast<double>(report.entries.size());
    report.negative_fraction = negatives / n;
    report.band_fraction = in_band / n;
    return report;
}

void write_residual_table(const std::string& path, const ResidualReport& report) {
    std::vector<std::vector<double>> rows;
    for (const auto& e : report.entries)
        rows.push_back({static_cast<double>(e.rank), static_cast<double>(e.unit_id), e.actual,
                        e.predicted, e.error});
    write_table(path, {"rank", "unit", "actual", "predicted", "error"}, rows);
}

RulProfileSet rul_profiles(const std::vector<EngineTrajectory>& trajectories,
                           const std::vector<int>& units, double max_rul) {
    if (trajectories.empty()) throw_validation("rul_profiles: no trajectories");
    RulProfileSet out;
    for (const auto& traj : trajectories) {
        std::vector<double> labels = label_rul(traj, max_rul);
        for (int i = 0; i < traj.length(); ++i)
            out.global_rows.push_back(
                {static_cast<double>(traj.unit_id), static_cast<double>(traj.cycles[i].cycle),
                 labels[i]});
    }
    for (int unit : units) {
        auto it = std::find_if(trajectories.begin(), trajectories.end(),
                               [unit](const EngineTrajectory& t) { return t.unit_id == unit; });
        if (it == trajectories.end()) {
            std::string valid;
            for (const auto& t : trajectories) {
                if (!valid.empty()) valid += ", ";
                valid += std::to_string(t.unit_id);
            }
            throw_validation("rul_profiles: unknown unit " + std::to_string(unit) +
                             "; valid units: " + valid);
        }
        RulProfile profile;
        profile.unit_id = unit;
        std::vector<double> labels = label_rul(*it, max_rul);
        for (int i = 0; i < it->length(); ++i) {
            profile.cycles.push_back(it->cycles[i].cycle);
            profile.labels.push_back(labels[i]);
        }
        out.per_engine.push_back(std::move(profile));
    }
    return out;
}

void write_rul_profiles(const std::string& path_prefix, const RulProfileSet& profiles) {
    for (const auto& p : profiles.per_engine) {
        std::vector<std::vector<double>> rows;
        for (size_t i = 0; i < p.cycles.size(); ++i)
            rows.push_back({static_cast<double>(p.cycles[i]), p.labels[i]});
        write_table(path_prefix + "_unit" + std::to_string(p.unit_id) + ".csv", {"cycle", "label"},
                    rows);
    }
    write_table(path_prefix + "_all.csv", {"unit", "cycle", "label"}, profiles.global_rows);
}

}  // namespace rulkit
