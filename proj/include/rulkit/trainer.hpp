#pragma once

#include <cstdint>
#include <vector>

#include "rulkit/loss_metrics.hpp"
#include "rulkit/nn_core.hpp"
#include "rulkit/pipeline.hpp"

namespace rulkit {

enum class SplitMode { kEngine, kWindow };
enum class LossKind { kAsymmetric, kSquaredError };

struct TrainConfig {
    double learning_rate = 1e-3;
    double clipnorm = 1.0;
    int batch_size = 128;
    int max_epochs = 200;
    int early_stop_patience = 20;
    double lr_factor = 0.5;
    int lr_patience = 8;
    double min_lr = 1e-6;
    double l2_lambda = 1e-4;
    double val_fraction = 0.2;
    std::uint64_t seed = 42;
    SplitMode split_mode = SplitMode::kEngine;
    LossKind loss_kind = LossKind::kAsymmetric;
    // A validation loss counts as an improvement only when it beats the best
    // by at least this much; shared by early stopping and the LR schedule.
    double min_improvement = 1e-4;
};

void validate_train_config(const TrainConfig& config);

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double learning_rate = 0.0;  // rate used during this epoch
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;  // 1-based, 0 when no epoch ran
    double best_val_loss = 0.0;
    bool early_stopped = false;
};

// Engine mode keeps all windows of an engine on one side; window mode splits
// individual windows. Both shuffle with the config seed. The validation share
// is round(total * val_fraction) clamped to [1, total-1].
void split_train_val(const WindowDataset& dataset, const TrainConfig& config,
                     WindowDataset* train_out, WindowDataset* val_out);

WindowDataset subset_windows(const WindowDataset& dataset, const std::vector<int>& indices);

// L2 norm over every gradient array jointly.
double gradient_global_norm(const GradientSet& grads, const ModelConfig& config);

// Scales every array by min(1, clipnorm / global_norm).
void clip_global_norm(GradientSet& grads, const ModelConfig& config, double clipnorm);

struct AdamState {
    std::vector<std::vector<double>> m, v;  // canonical trainable order
    std::int64_t step = 0;
};

AdamState make_adam_state(const ModelConfig& config);

void adam_step(ModelParams& params, const GradientSet& grads, AdamState& state,
               double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-7);

// Stops after `patience` consecutive non-improving observations; the best
// observation index is tracked so callers can restore those weights.
class EarlyStopper {
public:
    EarlyStopper(int patience, double min_improvement);

    struct Decision {
        bool improved = false;
        bool stop = false;
    };
    Decision observe(double val_loss);

    int best_epoch() const { return best_epoch_; }
    double best_value() const { return best_value_; }

private:
    int patience_;
    double min_improvement_;
    int epoch_ = 0;
    int counter_ = 0;
    int best_epoch_ = 0;
    double best_value_ = 0.0;
};

// Halves (by `factor`) the learning rate after `patience` consecutive
// non-improving observations, resetting its own counter on each reduction.
// Never drops below min_lr.
class PlateauLrScheduler {
public:
    PlateauLrScheduler(double initial_lr, double factor, int patience, double min_lr,
                       double min_improvement);

    // Report one epoch's validation loss; returns the rate for the next epoch.
    double observe(double val_loss);
    double current() const { return lr_; }

private:
    double lr_;
    double factor_;
    int patience_;
    double min_lr_;
    double min_improvement_;
    bool seen_any_ = false;
    int counter_ = 0;
    double best_value_ = 0.0;
};

// Batched inference (dropout off, BN moving stats); one prediction per window.
std::vector<double> predict(const ModelParams& params, const WindowDataset& dataset,
                            int batch_size = 128);

// Mean loss of predict() against the dataset labels.
double evaluate_loss(const ModelParams& params, const WindowDataset& dataset, LossKind kind,
                     const LossConfig& loss_config, int batch_size = 128);

struct FitResult {
    ModelParams best_params;
    TrainHistory history;
};

// Full training loop: seeded shuffling, mini-batches (a lone trailing sample
// is merged into the previous batch), forward/backward, global-norm clipping,
// Adam, per-epoch validation, early stopping, plateau LR decay and
// best-weight restoration. Deterministic per (seed, data, config).
FitResult fit(const WindowDataset& dataset, const ModelParams& initial, const TrainConfig& config,
              const LossConfig& loss_config);

// Same loop against a caller-provided split.
FitResult fit_split(const WindowDataset& train, const WindowDataset& val,
                    const ModelParams& initial, const TrainConfig& config,
                    const LossConfig& loss_config);

}  // namespace rulkit
