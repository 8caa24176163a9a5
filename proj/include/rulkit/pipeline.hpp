#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rulkit/cmapss_io.hpp"
#include "rulkit/tensor.hpp"

namespace rulkit {

inline constexpr int kDefaultWindow = 30;
inline constexpr int kDefaultStride = 3;
inline constexpr double kDefaultMaxRul = 130.0;
inline constexpr double kDefaultVarianceThreshold = 1e-8;

// Sensors to drop plus the resulting feature order. Feature order is fixed:
// setting1..setting3 first, then retained sensors by ascending index.
struct FeatureSelection {
    std::vector<int> dropped_sensors;  // sorted, 1-based sensor indices
    std::vector<std::string> feature_names;

    int feature_count() const { return static_cast<int>(feature_names.size()); }
};

// Per-feature min/max fitted on training data only. Constant features
// (max == min) are flagged and transform to 0.0.
struct ScalerParams {
    std::vector<double> min;
    std::vector<double> max;
    std::vector<bool> constant;

    int feature_count() const { return static_cast<int>(min.size()); }
};

struct WindowProvenance {
    int unit_id = 0;
    int terminal_cycle = 0;
};

// A batch of fixed-length windows: tensor (N, T, F), one scalar RUL label and
// one provenance record per window.
struct WindowDataset {
    Tensor tensor;  // (N, T, F)
    std::vector<double> labels;
    std::vector<WindowProvenance> provenance;

    int count() const { return static_cast<int>(labels.size()); }
    int window() const { return tensor.dim(1); }
    int features() const { return tensor.dim(2); }
};

// A sensor is dropped iff its corpus-wide (max - min) <= threshold. The
// override list, when given, is used verbatim instead of the variance scan.
// Settings are always retained.
FeatureSelection select_sensors(const std::vector<EngineTrajectory>& trajectories,
                                double variance_threshold = kDefaultVarianceThreshold,
                                const std::optional<std::vector<int>>& override_drop = std::nullopt);

// Piecewise-linear label: min(max_cycle - t, max_rul) per cycle t.
std::vector<double> label_rul(const EngineTrajectory& trajectory, double max_rul = kDefaultMaxRul);

// Row-major feature matrix (rows x selected features) for a set of
// trajectories in the FeatureSelection's feature order, unscaled.
std::vector<std::vector<double>> extract_features(const std::vector<EngineTrajectory>& trajectories,
                                                  const FeatureSelection& selection);

ScalerParams fit_scaler(const std::vector<std::vector<double>>& train_features);

// x' = (x - min) / (max - min); constant features map to 0.0; out-of-range
// values are not clipped.
std::vector<std::vector<double>> transform(const std::vector<std::vector<double>>& features,
                                           const ScalerParams& scaler);

WindowDataset make_train_windows(const std::vector<EngineTrajectory>& trajectories,
                                 const FeatureSelection& selection, const ScalerParams& scaler,
                                 int window = kDefaultWindow, int stride = kDefaultStride,
                                 double max_rul = kDefaultMaxRul);

// Exactly one window per engine: the final min(L, T) scaled cycles,
// left-padded with zero rows to length T. Labels come from the truth table,
// capped at max_rul.
WindowDataset make_test_windows(const std::vector<EngineTrajectory>& trajectories,
                                const FeatureSelection& selection, const ScalerParams& scaler,
                                const RulTruthTable& truth, int window = kDefaultWindow,
                                double max_rul = kDefaultMaxRul);

// Preprocessing metadata captured alongside materialized window datasets and
// model checkpoints.
struct PreprocessMeta {
    FeatureSelection selection;
    ScalerParams scaler;
    int window = kDefaultWindow;
    int stride = kDefaultStride;
    double max_rul = kDefaultMaxRul;
    double variance_threshold = kDefaultVarianceThreshold;
};

// Window container on disk: "RKWD" magic, version, dims, then little-endian
// doubles for tensor and labels plus per-window provenance. Metadata goes to
// a JSON sidecar. Round-trips bit-exactly.
void save_windows(const std::string& data_path, const WindowDataset& dataset);
WindowDataset load_windows(const std::string& data_path);
void save_preprocess_meta(const std::string& meta_path, const PreprocessMeta& meta);
PreprocessMeta load_preprocess_meta(const std::string& meta_path);

}  // namespace rulkit
