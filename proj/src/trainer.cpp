#include "rulkit/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <map>
#include <string>

namespace rulkit {
namespace {

double sample_loss(LossKind kind, const LossConfig& config, double predicted, double actual) {
    if (kind == LossKind::kAsymmetric) return asym_loss(predicted, actual, config);
    double e = predicted - actual;
    return e * e;
}

double sample_grad(LossKind kind, const LossConfig& config, double predicted, double actual) {
    if (kind == LossKind::kAsymmetric) return asym_loss_grad(predicted, actual, config);
    return 2.0 * (predicted - actual);
}

// Batch index ranges over a shuffled index vector. A lone trailing sample is
// folded into the previous batch so batch normalization always sees >= 2 rows.
std::vector<std::pair<int, int>> batch_ranges(int total, int batch_size) {
    std::vector<std::pair<int, int>> ranges;
    for (int begin = 0; begin < total; begin += batch_size)
        ranges.emplace_back(begin, std::min(begin + batch_size, total));
    if (ranges.size() > 1 && ranges.back().second - ranges.back().first == 1) {
        ranges.pop_back();
        ranges.back().second = total;
    }
    return ranges;
}

Tensor gather_batch(const WindowDataset& dataset, const std::vector<int>& indices, int begin,
                    int end, std::vector<double>* labels) {
    const int t = dataset.window(), f = dataset.features();
    const size_t row = static_cast<size_t>(t) * f;
    Tensor x({end - begin, t, f});
    labels->resize(end - begin);
    for (int i = begin; i < end; ++i) {
        const int src = indices[i];
        std::memcpy(x.data.data() + static_cast<size_t>(i - begin) * row,
                    dataset.tensor.data.data() + static_cast<size_t>(src) * row,
                    row * sizeof(double));
        (*labels)[i - begin] = dataset.labels[src];
    }
    return x;
}

}  // namespace

void validate_train_config(const TrainConfig& config) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw_validation(std::string("train config: ") + name + " must be positive");
    };
    positive(config.learning_rate, "learning_rate");
    positive(config.clipnorm, "clipnorm");
    positive(config.batch_size, "batch_size");
    positive(config.max_epochs, "max_epochs");
    positive(config.early_stop_patience, "early_stop_patience");
    positive(config.lr_factor, "lr_factor");
    positive(config.lr_patience, "lr_patience");
    positive(config.min_lr, "min_lr");
    positive(config.min_improvement, "min_improvement");
    if (config.l2_lambda < 0.0) throw_validation("train config: l2_lambda must be non-negative");
    if (!(config.val_fraction > 0.0 && config.val_fraction < 1.0))
        throw_validation("train config: val_fraction must lie in (0, 1)");
    if (config.lr_factor >= 1.0) throw_validation("train config: lr_factor must be < 1");
}

WindowDataset subset_windows(const WindowDataset& dataset, const std::vector<int>& indices) {
    const int t = dataset.window(), f = dataset.features();
    WindowDataset out;
    out.tensor = Tensor({static_cast<int>(indices.size()), t, f});
    const size_t row = static_cast<size_t>(t) * f;
    for (size_t i = 0; i < indices.size(); ++i) {
        int src = indices[i];
        if (src < 0 || src >= dataset.count())
            throw_validation("subset_windows: index out of range: " + std::to_string(src));
        std::memcpy(out.tensor.data.data() + i * row,
                    dataset.tensor.data.data() + static_cast<size_t>(src) * row,
                    row * sizeof(double));
        out.labels.push_back(dataset.labels[src]);
        out.provenance.push_back(dataset.provenance[src]);
    }
    return out;
}

void split_train_val(const WindowDataset& dataset, const TrainConfig& config,
                     WindowDataset* train_out, WindowDataset* val_out) {
    validate_train_config(config);
    if (dataset.count() == 0) throw_validation("split_train_val: empty dataset");
    std::mt19937_64 rng(config.seed);

    std::vector<int> train_indices, val_indices;
    if (config.split_mode == SplitMode::kEngine) {
        std::vector<int> units;
        for (const auto& p : dataset.provenance)
            if (units.empty() || units.back() != p.unit_id) units.push_back(p.unit_id);
        std::sort(units.begin(), units.end());
        units.erase(std::unique(units.begin(), units.end()), units.end());
        if (units.size() < 2)
            throw_validation("engine-mode split requires at least 2 engines, found " +
                             std::to_string(units.size()));
        std::shuffle(units.begin(), units.end(), rng);
        int n_val = static_cast<int>(std::lround(units.size() * config.val_fraction));
        n_val = std::clamp(n_val, 1, static_cast<int>(units.size()) - 1);
        std::map<int, bool> side;
        for (size_t i = 0; i < units.size(); ++i)
            side[units[i]] = i >= units.size() - static_cast<size_t>(n_val);
        for (int i = 0; i < dataset.count(); ++i) {
            if (side.at(dataset.provenance[i].unit_id))
                val_indices.push_back(i);
            else
                train_indices.push_back(i);
        }
    } else {
        if (dataset.count() < 2) throw_validation("window-mode split requires at least 2 windows");
        std::vector<int> order(dataset.count());
        for (int i = 0; i < dataset.count(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        int n_val = static_cast<int>(std::lround(order.size() * config.val_fraction));
        n_val = std::clamp(n_val, 1, static_cast<int>(order.size()) - 1);
        int n_train = static_cast<int>(order.size()) - n_val;
        train_indices.assign(order.begin(), order.begin() + n_train);
        val_indices.assign(order.begin() + n_train, order.end());
    }
    if (train_indices.empty() || val_indices.empty())
        throw_validation("split produced an empty side");
    *train_out = subset_windows(dataset, train_indices);
    *val_out = subset_windows(dataset, val_indices);
}

double gradient_global_norm(const GradientSet& grads, const ModelConfig& config) {
    double acc = 0.0;
    for (const auto& e : gradient_entries(grads, config))
        for (double v : *e.values) acc += v * v;
    return std::sqrt(acc);
}

void clip_global_norm(GradientSet& grads, const ModelConfig& config, double clipnorm) {
    double norm = gradient_global_norm(grads, config);
    if (norm <= clipnorm || norm == 0.0) return;
    double scale = clipnorm / norm;
    for (auto& e : gradient_entries(grads, config))
        for (double& v : *e.values) v *= scale;
}

AdamState make_adam_state(const ModelConfig& config) {
    AdamState state;
    ModelParams probe;
    probe.config = config;
    for (const auto& e : trainable_entries(probe)) {
        size_t n = static_cast<size_t>(Tensor::element_count(e.shape));
        state.m.emplace_back(n, 0.0);
        state.v.emplace_back(n, 0.0);
    }
    return state;
}

void adam_step(ModelParams& params, const GradientSet& grads, AdamState& state,
               double learning_rate, double beta1, double beta2, double eps) {
    auto param_entries = trainable_entries(params);
    auto grad_entries = gradient_entries(grads, params.config);
    if (state.m.size() != param_entries.size())
        throw_shape("adam state does not match parameter layout");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (size_t a = 0; a < param_entries.size(); ++a) {
        std::vector<double>& w = *param_entries[a].values;
        const std::vector<double>& g = *grad_entries[a].values;
        std::vector<double>& m = state.m[a];
        std::vector<double>& v = state.v[a];
        if (w.size() != g.size() || w.size() != m.size())
            throw_shape("adam: array size mismatch at " + param_entries[a].name);
        for (size_t i = 0; i < w.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            double m_hat = m[i] / bc1;
            double v_hat = v[i] / bc2;
            w[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

EarlyStopper::EarlyStopper(int patience, double min_improvement)
    : patience_(patience), min_improvement_(min_improvement) {}

EarlyStopper::Decision EarlyStopper::observe(double val_loss) {
    ++epoch_;
    if (best_epoch_ == 0 || best_value_ - val_loss >= min_improvement_) {
        best_value_ = val_loss;
        best_epoch_ = epoch_;
        counter_ = 0;
        return {true, false};
    }
    ++counter_;
    return {false, counter_ >= patience_};
}

PlateauLrScheduler::PlateauLrScheduler(double initial_lr, double factor, int patience,
                                       double min_lr, double min_improvement)
    : lr_(initial_lr), factor_(factor), patience_(patience), min_lr_(min_lr),
      min_improvement_(min_improvement) {}

double PlateauLrScheduler::observe(double val_loss) {
    if (!seen_any_ || best_value_ - val_loss >= min_improvement_) {
        seen_any_ = true;
        best_value_ = val_loss;
        counter_ = 0;
        return lr_;
    }
    if (++counter_ >= patience_) {
        lr_ = std::max(lr_ * factor_, min_lr_);
        counter_ = 0;
    }
    return lr_;
}

std::vector<double> predict(const ModelParams& params, const WindowDataset& dataset,
                            int batch_size) {
    if (batch_size < 1) throw_validation("predict: batch_size must be positive");
    std::vector<double> out;
    out.reserve(dataset.count());
    std::vector<int> identity(dataset.count());
    for (int i = 0; i < dataset.count(); ++i) identity[i] = i;
    ForwardOptions options;
    options.mode = RunMode::kInfer;
    for (int begin = 0; begin < dataset.count(); begin += batch_size) {
        int end = std::min(begin + batch_size, dataset.count());
        std::vector<double> labels;
        Tensor x = gather_batch(dataset, identity, begin, end, &labels);
        std::vector<double> y_hat = model_forward(x, params, options, nullptr);
        out.insert(out.end(), y_hat.begin(), y_hat.end());
    }
    return out;
}

double evaluate_loss(const ModelParams& params, const WindowDataset& dataset, LossKind kind,
                     const LossConfig& loss_config, int batch_size) {
    if (dataset.count() == 0) throw_validation("evaluate_loss: empty dataset");
    std::vector<double> y_hat = predict(params, dataset, batch_size);
    double acc = 0.0;
    for (int i = 0; i < dataset.count(); ++i)
        acc += sample_loss(kind, loss_config, y_hat[i], dataset.labels[i]);
    return acc / dataset.count();
}

FitResult fit_split(const WindowDataset& train, const WindowDataset& val,
                    const ModelParams& initial, const TrainConfig& config,
                    const LossConfig& loss_config) {
    validate_train_config(config);
    validate_loss_config(loss_config);
    if (train.count() < 2) throw_validation("fit: need at least 2 training windows");
    if (val.count() < 1) throw_validation("fit: need at least 1 validation window");
    if (train.window() != initial.config.window || train.features() != initial.config.features)
        throw_shape("fit: window dataset dims do not match the model architecture");

    ModelParams params = initial;
    AdamState adam = make_adam_state(params.config);
    std::mt19937_64 rng(config.seed);
    EarlyStopper stopper(config.early_stop_patience, config.min_improvement);
    PlateauLrScheduler scheduler(config.learning_rate, config.lr_factor, config.lr_patience,
                                 config.min_lr, config.min_improvement);

    FitResult result;
    result.best_params = params;

    std::vector<int> order(train.count());
    for (int i = 0; i < train.count(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        const double lr = scheduler.current();
        std::shuffle(order.begin(), order.end(), rng);
        auto ranges = batch_ranges(train.count(), config.batch_size);

        double loss_sum = 0.0;  // per-sample data term, summed over the epoch
        for (size_t b = 0; b < ranges.size(); ++b) {
            auto [begin, end] = ranges[b];
            const int batch = end - begin;
            std::vector<double> labels;
            Tensor x = gather_batch(train, order, begin, end, &labels);

            ForwardTrace trace;
            ForwardOptions options;
            options.mode = RunMode::kTrain;
            options.dropout_enabled = true;
            options.rng = &rng;
            std::vector<double> y_hat = model_forward(x, params, options, &trace);

            double batch_loss = 0.0;
            std::vector<double> dldy(batch);
            for (int i = 0; i < batch; ++i) {
                batch_loss += sample_loss(config.loss_kind, loss_config, y_hat[i], labels[i]);
                dldy[i] = sample_grad(config.loss_kind, loss_config, y_hat[i], labels[i]) / batch;
            }
            double objective = batch_loss / batch + l2_penalty(params, config.l2_lambda);
            if (!std::isfinite(objective))
                throw_numeric("training loss diverged (not finite) at epoch " +
                              std::to_string(epoch) + ", batch " + std::to_string(b + 1));
            loss_sum += batch_loss;

            GradientSet grads = model_backward(trace, params, dldy, config.l2_lambda);
            apply_bn_updates(params, trace);
            clip_global_norm(grads, params.config, config.clipnorm);
            adam_step(params, grads, adam, lr);
        }

        double val_loss = evaluate_loss(params, val, config.loss_kind, loss_config,
                                        config.batch_size);
        if (!std::isfinite(val_loss))
            throw_numeric("validation loss diverged (not finite) at epoch " + std::to_string(epoch));
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        result.history.epochs.push_back(
            {epoch, loss_sum / train.count(), val_loss, lr, seconds});

        auto decision = stopper.observe(val_loss);
        if (decision.improved) result.best_params = params;
        scheduler.observe(val_loss);
        if (decision.stop) {
            result.history.early_stopped = true;
            break;
        }
    }
    result.history.best_epoch = stopper.best_epoch();
    result.history.best_val_loss = stopper.best_value();
    return result;
}

FitResult fit(const WindowDataset& dataset, const ModelParams& initial, const TrainConfig& config,
              const LossConfig& loss_config) {
    WindowDataset train, val;
    split_train_val(dataset, config, &train, &val);
    return fit_split(train, val, initial, config, loss_config);
}

}  // namespace rulkit
