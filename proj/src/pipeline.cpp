#include "rulkit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

namespace rulkit {
namespace {

std::vector<int> retained_sensors(const std::vector<int>& dropped) {
    std::set<int> drop(dropped.begin(), dropped.end());
    std::vector<int> out;
    for (int s = 1; s <= kNumSensors; ++s)
        if (!drop.count(s)) out.push_back(s);
    return out;
}

std::vector<std::string> build_feature_names(const std::vector<int>& dropped) {
    std::vector<std::string> names;
    for (int i = 1; i <= kNumSettings; ++i) names.push_back("setting" + std::to_string(i));
    for (int s : retained_sensors(dropped)) names.push_back("s" + std::to_string(s));
    return names;
}

// Feature row for one cycle in selection order: settings, then retained sensors.
void fill_row(const CycleRecord& rec, const std::vector<int>& sensors, std::vector<double>& row) {
    row.clear();
    for (int i = 0; i < kNumSettings; ++i) row.push_back(rec.settings[i]);
    for (int s : sensors) row.push_back(rec.sensors[s - 1]);
}

void scale_row_into(const std::vector<double>& row, const ScalerParams& scaler, double* out) {
    for (size_t f = 0; f < row.size(); ++f) {
        if (scaler.constant[f]) {
            out[f] = 0.0;
        } else {
            out[f] = (row[f] - scaler.min[f]) / (scaler.max[f] - scaler.min[f]);
        }
    }
}

}  // namespace

FeatureSelection select_sensors(const std::vector<EngineTrajectory>& trajectories,
                                double variance_threshold,
                                const std::optional<std::vector<int>>& override_drop) {
    if (trajectories.empty()) throw_validation("select_sensors: empty corpus");

    FeatureSelection sel;
    if (override_drop) {
        std::set<int> drop;
        for (int s : *override_drop) {
            if (s < 1 || s > kNumSensors)
                throw_validation("select_sensors: override sensor index out of range: " + std::to_string(s));
            drop.insert(s);
        }
        sel.dropped_sensors.assign(drop.begin(), drop.end());
    } else {
        std::array<double, kNumSensors> lo, hi;
        lo.fill(std::numeric_limits<double>::infinity());
        hi.fill(-std::numeric_limits<double>::infinity());
        for (const auto& traj : trajectories) {
            for (const auto& rec : traj.cycles) {
                for (int i = 0; i < kNumSensors; ++i) {
                    lo[i] = std::min(lo[i], rec.sensors[i]);
                    hi[i] = std::max(hi[i], rec.sensors[i]);
                }
            }
        }
        for (int i = 0; i < kNumSensors; ++i)
            if (hi[i] - lo[i] <= variance_threshold) sel.dropped_sensors.push_back(i + 1);
    }
    sel.feature_names = build_feature_names(sel.dropped_sensors);
    return sel;
}

std::vector<double> label_rul(const EngineTrajectory& trajectory, double max_rul) {
    int max_cycle = trajectory.length();
    std::vector<double> labels(max_cycle);
    for (int t = 1; t <= max_cycle; ++t)
        labels[t - 1] = std::min(static_cast<double>(max_cycle - t), max_rul);
    return labels;
}

std::vector<std::vector<double>> extract_features(const std::vector<EngineTrajectory>& trajectories,
                                                  const FeatureSelection& selection) {
    std::vector<int> sensors = retained_sensors(selection.dropped_sensors);
    std::vector<std::vector<double>> rows;
    std::vector<double> row;
    for (const auto& traj : trajectories) {
        for (const auto& rec : traj.cycles) {
            fill_row(rec, sensors, row);
            rows.push_back(row);
        }
    }
    return rows;
}

ScalerParams fit_scaler(const std::vector<std::vector<double>>& train_features) {
    if (train_features.empty()) throw_validation("fit_scaler: no rows");
    size_t f_count = train_features[0].size();
    ScalerParams scaler;
    scaler.min.assign(f_count, std::numeric_limits<double>::infinity());
    scaler.max.assign(f_count, -std::numeric_limits<double>::infinity());
    for (const auto& row : train_features) {
        if (row.size() != f_count) throw_shape("fit_scaler: ragged feature matrix");
        for (size_t f = 0; f < f_count; ++f) {
            if (!std::isfinite(row[f])) throw_numeric("fit_scaler: non-finite feature value");
            scaler.min[f] = std::min(scaler.min[f], row[f]);
            scaler.max[f] = std::max(scaler.max[f], row[f]);
        }
    }
    scaler.constant.resize(f_count);
    for (size_t f = 0; f < f_count; ++f) scaler.constant[f] = (scaler.max[f] == scaler.min[f]);
    return scaler;
}

std::vector<std::vector<double>> transform(const std::vector<std::vector<double>>& features,
                                           const ScalerParams& scaler) {
    std::vector<std::vector<double>> out;
    out.reserve(features.size());
    std::vector<double> scaled;
    for (const auto& row : features) {
        if (static_cast<int>(row.size()) != scaler.feature_count())
            throw_shape("transform: feature arity mismatch");
        scaled.resize(row.size());
        scale_row_into(row, scaler, scaled.data());
        out.push_back(scaled);
    }
    return out;
}

WindowDataset make_train_windows(const std::vector<EngineTrajectory>& trajectories,
                                 const FeatureSelection& selection, const ScalerParams& scaler,
                                 int window, int stride, double max_rul) {
    if (window <= 0 || stride <= 0) throw_validation("make_train_windows: window and stride must be positive");
    std::vector<int> sensors = retained_sensors(selection.dropped_sensors);
    int f_count = selection.feature_count();
    if (f_count != scaler.feature_count()) throw_shape("make_train_windows: selection/scaler mismatch");

    // Count first so the tensor is allocated once.
    std::int64_t n_windows = 0;
    for (const auto& traj : trajectories) {
        int len = traj.length();
        if (len >= window) n_windows += (len - window) / stride + 1;
    }

    WindowDataset ds;
    ds.tensor = Tensor({static_cast<int>(n_windows), window, f_count});
    ds.labels.reserve(n_windows);
    ds.provenance.reserve(n_windows);

    std::vector<double> row;
    std::int64_t w = 0;
    for (const auto& traj : trajectories) {
        int len = traj.length();
        if (len < window) continue;
        std::vector<double> labels = label_rul(traj, max_rul);
        for (int start = 1; start + window - 1 <= len; start += stride) {
            int terminal = start + window - 1;
            for (int t = 0; t < window; ++t) {
                fill_row(traj.cycles[start - 1 + t], sensors, row);
                scale_row_into(row, scaler, &ds.tensor.at(static_cast<int>(w), t, 0));
            }
            ds.labels.push_back(labels[terminal - 1]);
            ds.provenance.push_back({traj.unit_id, terminal});
            ++w;
        }
    }
    return ds;
}

WindowDataset make_test_windows(const std::vector<EngineTrajectory>& trajectories,
                                const FeatureSelection& selection, const ScalerParams& scaler,
                                const RulTruthTable& truth, int window, double max_rul) {
    if (window <= 0) throw_validation("make_test_windows: window must be positive");
    if (truth.size() != static_cast<int>(trajectories.size()))
        throw_validation("make_test_windows: truth table has " + std::to_string(truth.size()) +
                         " entries for " + std::to_string(trajectories.size()) + " engines");
    std::vector<int> sensors = retained_sensors(selection.dropped_sensors);
    int f_count = selection.feature_count();
    if (f_count != scaler.feature_count()) throw_shape("make_test_windows: selection/scaler mismatch");

    WindowDataset ds;
    ds.tensor = Tensor({static_cast<int>(trajectories.size()), window, f_count});
    std::vector<double> row;
    for (size_t e = 0; e < trajectories.size(); ++e) {
        const auto& traj = trajectories[e];
        int len = traj.length();
        int used = std::min(len, window);
        int pad = window - used;  // leading all-zero rows in scaled space
        for (int t = 0; t < used; ++t) {
            const CycleRecord& rec = traj.cycles[len - used + t];
            fill_row(rec, sensors, row);
            scale_row_into(row, scaler, &ds.tensor.at(static_cast<int>(e), pad + t, 0));
        }
        ds.labels.push_back(std::min(static_cast<double>(truth.terminal_rul[e]), max_rul));
        ds.provenance.push_back({traj.unit_id, len});
    }
    return ds;
}

namespace {

constexpr char kWindowsMagic[4] = {'R', 'K', 'W', 'D'};
constexpr std::uint32_t kWindowsVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void save_windows(const std::string& data_path, const WindowDataset& dataset) {
    std::ofstream out(data_path, std::ios::binary);
    if (!out) throw_io("cannot open file for writing: " + data_path);
    out.write(kWindowsMagic, 4);
    write_raw(out, kWindowsVersion);
    std::uint64_t n = dataset.count(), t = dataset.window(), f = dataset.features();
    write_raw(out, n);
    write_raw(out, t);
    write_raw(out, f);
    out.write(reinterpret_cast<const char*>(dataset.tensor.data.data()),
              static_cast<std::streamsize>(dataset.tensor.data.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(dataset.labels.data()),
              static_cast<std::streamsize>(dataset.labels.size() * sizeof(double)));
    for (const auto& p : dataset.provenance) {
        std::uint32_t unit = p.unit_id, cyc = p.terminal_cycle;
        write_raw(out, unit);
        write_raw(out, cyc);
    }
    if (!out) throw_io("write failed: " + data_path);
}

WindowDataset load_windows(const std::string& data_path) {
    std::ifstream in(data_path, std::ios::binary);
    if (!in) throw_io("cannot open file: " + data_path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kWindowsMagic, 4) != 0)
        throw_parse(data_path + ": not a window container (bad magic)");
    std::uint32_t version = 0;
    read_raw(in, version);
    if (version != kWindowsVersion)
        throw_parse(data_path + ": unsupported container version " + std::to_string(version));
    std::uint64_t n = 0, t = 0, f = 0;
    read_raw(in, n);
    read_raw(in, t);
    read_raw(in, f);
    WindowDataset ds;
    ds.tensor = Tensor({static_cast<int>(n), static_cast<int>(t), static_cast<int>(f)});
    in.read(reinterpret_cast<char*>(ds.tensor.data.data()),
            static_cast<std::streamsize>(ds.tensor.data.size() * sizeof(double)));
    ds.labels.resize(n);
    in.read(reinterpret_cast<char*>(ds.labels.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    ds.provenance.resize(n);
    for (auto& p : ds.provenance) {
        std::uint32_t unit = 0, cyc = 0;
        read_raw(in, unit);
        read_raw(in, cyc);
        p.unit_id = static_cast<int>(unit);
        p.terminal_cycle = static_cast<int>(cyc);
    }
    if (!in) throw_parse(data_path + ": truncated window container");
    return ds;
}

void save_preprocess_meta(const std::string& meta_path, const PreprocessMeta& meta) {
    nlohmann::json j;
    j["dropped_sensors"] = meta.selection.dropped_sensors;
    j["feature_names"] = meta.selection.feature_names;
    j["scaler"]["min"] = meta.scaler.min;
    j["scaler"]["max"] = meta.scaler.max;
    j["scaler"]["constant"] = std::vector<int>(meta.scaler.constant.begin(), meta.scaler.constant.end());
    j["window"] = meta.window;
    j["stride"] = meta.stride;
    j["max_rul"] = meta.max_rul;
    j["variance_threshold"] = meta.variance_threshold;
    std::ofstream out(meta_path, std::ios::binary);
    if (!out) throw_io("cannot open file for writing: " + meta_path);
    out << j.dump(2) << '\n';
    if (!out) throw_io("write failed: " + meta_path);
}

PreprocessMeta load_preprocess_meta(const std::string& meta_path) {
    std::ifstream in(meta_path);
    if (!in) throw_io("cannot open file: " + meta_path);
    nlohmann::json j;
    try {
        in >> j;
        PreprocessMeta meta;
        meta.selection.dropped_sensors = j.at("dropped_sensors").get<std::vector<int>>();
        meta.selection.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        meta.scaler.min = j.at("scaler").at("min").get<std::vector<double>>();
        meta.scaler.max = j.at("scaler").at("max").get<std::vector<double>>();
        auto c = j.at("scaler").at("constant").get<std::vector<int>>();
        meta.scaler.constant.assign(c.begin(), c.end());
        meta.window = j.at("window").get<int>();
        meta.stride = j.at("stride").get<int>();
        meta.max_rul = j.at("max_rul").get<double>();
        meta.variance_threshold = j.at("variance_threshold").get<double>();
        return meta;
    } catch (const nlohmann::json::exception& e) {
        throw_parse(meta_path + ": bad preprocess metadata: " + e.what());
    }
}

}  // namespace rulkit
