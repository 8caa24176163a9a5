#include "rulkit/nn_core.hpp"

#include <algorithm>
#include <cmath>

namespace rulkit {
namespace {

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

void check(bool cond, const char* msg) {
    if (!cond) throw_shape(msg);
}

// Inverted dropout: kept elements are scaled by 1/(1-rate) so inference is a
// pure pass-through. The mask holds the applied factor per element.
void apply_dropout(Tensor& x, double rate, std::mt19937_64& rng, std::vector<double>& mask) {
    mask.resize(x.data.size());
    if (rate <= 0.0) {
        std::fill(mask.begin(), mask.end(), 1.0);
        return;
    }
    const double scale = 1.0 / (1.0 - rate);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (size_t i = 0; i < x.data.size(); ++i) {
        double m = unit(rng) < rate ? 0.0 : scale;
        mask[i] = m;
        x.data[i] *= m;
    }
}

void relu_inplace(Tensor& x) {
    for (double& v : x.data)
        if (v < 0) v = 0;
}

std::vector<int> conv_shape(int k, int cin, int cout) { return {k, cin, cout}; }

}  // namespace

// ---------------------------------------------------------------------------
// parameter bookkeeping
// ---------------------------------------------------------------------------

namespace {

template <typename Entry, typename Params>
std::vector<Entry> trainable_entries_impl(Params& p) {
    const ModelConfig& c = p.config;
    const int h = c.lstm_hidden, w = c.bilstm_width();
    return {
        {"conv1_kernel", conv_shape(c.kernel_size, c.features, c.conv1_filters), &p.conv1_kernel},
        {"bn1_gamma", {c.conv1_filters}, &p.bn1.gamma},
        {"bn1_beta", {c.conv1_filters}, &p.bn1.beta},
        {"conv2_kernel", conv_shape(c.kernel_size, c.conv1_filters, c.conv2_filters), &p.conv2_kernel},
        {"bn2_gamma", {c.conv2_filters}, &p.bn2.gamma},
        {"bn2_beta", {c.conv2_filters}, &p.bn2.beta},
        {"lstm_fwd_w_input", {c.conv2_filters, 4 * h}, &p.lstm_fwd.w_input},
        {"lstm_fwd_w_recurrent", {h, 4 * h}, &p.lstm_fwd.w_recurrent},
        {"lstm_fwd_bias", {4 * h}, &p.lstm_fwd.bias},
        {"lstm_bwd_w_input", {c.conv2_filters, 4 * h}, &p.lstm_bwd.w_input},
        {"lstm_bwd_w_recurrent", {h, 4 * h}, &p.lstm_bwd.w_recurrent},
        {"lstm_bwd_bias", {4 * h}, &p.lstm_bwd.bias},
        {"ln_gamma", {w}, &p.ln_gamma},
        {"ln_beta", {w}, &p.ln_beta},
        {"attn_w1", {w, c.attn_units}, &p.attn_w1},
        {"attn_w2", {c.attn_units}, &p.attn_w2},
        {"attn_b", {c.attn_units}, &p.attn_b},
        {"fc1_w", {w, c.fc1_units}, &p.fc1_w},
        {"fc1_b", {c.fc1_units}, &p.fc1_b},
        {"fc2_w", {c.fc1_units, c.fc2_units}, &p.fc2_w},
        {"fc2_b", {c.fc2_units}, &p.fc2_b},
        {"out_w", {c.fc2_units, 1}, &p.out_w},
        {"out_b", {1}, &p.out_b},
    };
}

template <typename Entry, typename Grads>
std::vector<Entry> gradient_entries_impl(Grads& g, const ModelConfig& c) {
    const int h = c.lstm_hidden, w = c.bilstm_width();
    return {
        {"conv1_kernel", conv_shape(c.kernel_size, c.features, c.conv1_filters), &g.conv1_kernel},
        {"bn1_gamma", {c.conv1_filters}, &g.bn1_gamma},
        {"bn1_beta", {c.conv1_filters}, &g.bn1_beta},
        {"conv2_kernel", conv_shape(c.kernel_size, c.conv1_filters, c.conv2_filters), &g.conv2_kernel},
        {"bn2_gamma", {c.conv2_filters}, &g.bn2_gamma},
        {"bn2_beta", {c.conv2_filters}, &g.bn2_beta},
        {"lstm_fwd_w_input", {c.conv2_filters, 4 * h}, &g.lstm_fwd.w_input},
        {"lstm_fwd_w_recurrent", {h, 4 * h}, &g.lstm_fwd.w_recurrent},
        {"lstm_fwd_bias", {4 * h}, &g.lstm_fwd.bias},
        {"lstm_bwd_w_input", {c.conv2_filters, 4 * h}, &g.lstm_bwd.w_input},
        {"lstm_bwd_w_recurrent", {h, 4 * h}, &g.lstm_bwd.w_recurrent},
        {"lstm_bwd_bias", {4 * h}, &g.lstm_bwd.bias},
        {"ln_gamma", {w}, &g.ln_gamma},
        {"ln_beta", {w}, &g.ln_beta},
        {"attn_w1", {w, c.attn_units}, &g.attn_w1},
        {"attn_w2", {c.attn_units}, &g.attn_w2},
        {"attn_b", {c.attn_units}, &g.attn_b},
        {"fc1_w", {w, c.fc1_units}, &g.fc1_w},
        {"fc1_b", {c.fc1_units}, &g.fc1_b},
        {"fc2_w", {c.fc1_units, c.fc2_units}, &g.fc2_w},
        {"fc2_b", {c.fc2_units}, &g.fc2_b},
        {"out_w", {c.fc2_units, 1}, &g.out_w},
        {"out_b", {1}, &g.out_b},
    };
}

template <typename Entry, typename Params>
std::vector<Entry> state_entries_impl(Params& p) {
    const ModelConfig& c = p.config;
    return {
        {"bn1_moving_mean", {c.conv1_filters}, &p.bn1.moving_mean},
        {"bn1_moving_var", {c.conv1_filters}, &p.bn1.moving_var},
        {"bn2_moving_mean", {c.conv2_filters}, &p.bn2.moving_mean},
        {"bn2_moving_var", {c.conv2_filters}, &p.bn2.moving_var},
    };
}

}  // namespace

std::vector<ParamEntry> trainable_entries(ModelParams& p) {
    return trainable_entries_impl<ParamEntry>(p);
}
std::vector<ConstParamEntry> trainable_entries(const ModelParams& p) {
    return trainable_entries_impl<ConstParamEntry>(p);
}
std::vector<ParamEntry> gradient_entries(GradientSet& g, const ModelConfig& config) {
    return gradient_entries_impl<ParamEntry>(g, config);
}
std::vector<ConstParamEntry> gradient_entries(const GradientSet& g, const ModelConfig& config) {
    return gradient_entries_impl<ConstParamEntry>(g, config);
}
std::vector<ParamEntry> state_entries(ModelParams& p) {
    return state_entries_impl<ParamEntry>(p);
}
std::vector<ConstParamEntry> state_entries(const ModelParams& p) {
    return state_entries_impl<ConstParamEntry>(p);
}

std::int64_t trainable_param_count(const ModelConfig& config) {
    ModelParams probe;
    probe.config = config;
    std::int64_t n = 0;
    for (const auto& e : trainable_entries(probe)) n += Tensor::element_count(e.shape);
    return n;
}

GradientSet make_gradient_set(const ModelConfig& config) {
    GradientSet g;
    for (auto& e : gradient_entries(g, config))
        e.values->assign(static_cast<size_t>(Tensor::element_count(e.shape)), 0.0);
    return g;
}

namespace {

bool is_kernel(const std::string& name) {
    return name.ends_with("_kernel") || name.ends_with("_w") || name.ends_with("_w_input") ||
           name.ends_with("_w_recurrent") || name == "attn_w1" || name == "attn_w2";
}

// Glorot fan pair per array. Conv kernels use receptive-field fans; vectors
// like attn_w2 are treated as (n, 1) kernels.
std::pair<double, double> fan_in_out(const std::vector<int>& shape) {
    if (shape.size() == 3)  // conv (K, Cin, Cout)
        return {static_cast<double>(shape[0]) * shape[1], static_cast<double>(shape[0]) * shape[2]};
    if (shape.size() == 2) return {static_cast<double>(shape[0]), static_cast<double>(shape[1])};
    return {static_cast<double>(shape[0]), 1.0};
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    ModelParams p;
    p.config = config;
    std::mt19937_64 rng(seed);
    for (auto& e : trainable_entries(p)) {
        size_t n = static_cast<size_t>(Tensor::element_count(e.shape));
        if (is_kernel(e.name)) {
            auto [fin, fout] = fan_in_out(e.shape);
            double limit = std::sqrt(6.0 / (fin + fout));
            std::uniform_real_distribution<double> dist(-limit, limit);
            e.values->resize(n);
            for (double& v : *e.values) v = dist(rng);
        } else if (e.name.ends_with("gamma")) {
            e.values->assign(n, 1.0);
        } else {
            e.values->assign(n, 0.0);
        }
    }
    // Forget-gate bias starts at 1.
    const int h = config.lstm_hidden;
    std::fill(p.lstm_fwd.bias.begin() + h, p.lstm_fwd.bias.begin() + 2 * h, 1.0);
    std::fill(p.lstm_bwd.bias.begin() + h, p.lstm_bwd.bias.begin() + 2 * h, 1.0);
    for (auto& e : state_entries(p)) {
        size_t n = static_cast<size_t>(Tensor::element_count(e.shape));
        e.values->assign(n, e.name.ends_with("var") ? 1.0 : 0.0);
    }
    return p;
}

// ---------------------------------------------------------------------------
// conv1d
// ---------------------------------------------------------------------------

Tensor conv1d_forward(const Tensor& x, const std::vector<double>& kernel, int k, int cin, int cout) {
    check(x.rank() == 3 && x.dim(2) == cin, "conv1d: input shape mismatch");
    check(k % 2 == 1, "conv1d: kernel size must be odd");
    check(static_cast<std::int64_t>(kernel.size()) == static_cast<std::int64_t>(k) * cin * cout,
          "conv1d: kernel size mismatch");
    const int b_count = x.dim(0), t_count = x.dim(1), off = (k - 1) / 2;
    Tensor y({b_count, t_count, cout});
    // One tap at a time: y[:, t, :] += x[:, t + tap - off, :] * K[tap].
    for (int tap = 0; tap < k; ++tap) {
        const double* ktap = kernel.data() + static_cast<size_t>(tap) * cin * cout;
        int t_begin = std::max(0, off - tap);
        int t_end = std::min(t_count, t_count + off - tap);
        if (t_begin >= t_end) continue;
        for (int b = 0; b < b_count; ++b) {
            const double* xs = &x.at(b, t_begin + tap - off, 0);
            double* ys = &y.at(b, t_begin, 0);
            matmul_acc(xs, ktap, ys, t_end - t_begin, cin, cout);
        }
    }
    return y;
}

void conv1d_backward(const Tensor& x, const std::vector<double>& kernel, int k, int cin, int cout,
                     const Tensor& dy, Tensor* dx, std::vector<double>* dkernel) {
    check(dy.rank() == 3 && dy.dim(2) == cout, "conv1d_backward: dy shape mismatch");
    const int b_count = x.dim(0), t_count = x.dim(1), off = (k - 1) / 2;
    if (dx) *dx = Tensor(x.shape);
    if (dkernel) dkernel->assign(kernel.size(), 0.0);
    for (int tap = 0; tap < k; ++tap) {
        int t_begin = std::max(0, off - tap);
        int t_end = std::min(t_count, t_count + off - tap);
        if (t_begin >= t_end) continue;
        const int len = t_end - t_begin;
        const double* ktap = kernel.data() + static_cast<size_t>(tap) * cin * cout;
        double* dktap = dkernel ? dkernel->data() + static_cast<size_t>(tap) * cin * cout : nullptr;
        for (int b = 0; b < b_count; ++b) {
            const double* xs = &x.at(b, t_begin + tap - off, 0);
            const double* dys = &dy.at(b, t_begin, 0);
            if (dx) {
                double* dxs = &dx->at(b, t_begin + tap - off, 0);
                matmul_a_bt_acc(dys, ktap, dxs, len, cout, cin);
            }
            if (dktap) matmul_at_b_acc(xs, dys, dktap, cin, len, cout);
        }
    }
}

// ---------------------------------------------------------------------------
// batch normalization
// ---------------------------------------------------------------------------

Tensor batchnorm_forward(const Tensor& x, const BatchNormParams& params, RunMode mode, double eps,
                         BnTrace* trace) {
    const int b_count = x.dim(0), t_count = x.dim(1), channels = x.dim(2);
    const std::int64_t rows = static_cast<std::int64_t>(b_count) * t_count;
    check(static_cast<int>(params.gamma.size()) == channels, "batchnorm: channel mismatch");
    if (mode == RunMode::kTrain && rows < 2) throw_validation("batchnorm: train mode needs >= 2 rows");

    BnTrace local;
    BnTrace& tr = trace ? *trace : local;
    tr.batch_stats = (mode == RunMode::kTrain);
    tr.mean.assign(channels, 0.0);
    tr.var.assign(channels, 0.0);
    if (mode == RunMode::kTrain) {
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* row = x.data.data() + r * channels;
            for (int c = 0; c < channels; ++c) tr.mean[c] += row[c];
        }
        for (int c = 0; c < channels; ++c) tr.mean[c] /= static_cast<double>(rows);
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* row = x.data.data() + r * channels;
            for (int c = 0; c < channels; ++c) {
                double d = row[c] - tr.mean[c];
                tr.var[c] += d * d;
            }
        }
        for (int c = 0; c < channels; ++c) tr.var[c] /= static_cast<double>(rows);
    } else {
        tr.mean = params.moving_mean;
        tr.var = params.moving_var;
    }
    tr.inv_std.resize(channels);
    for (int c = 0; c < channels; ++c) tr.inv_std[c] = 1.0 / std::sqrt(tr.var[c] + eps);

    tr.xhat = Tensor(x.shape);
    Tensor y(x.shape);
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* row = x.data.data() + r * channels;
        double* xh = tr.xhat.data.data() + r * channels;
        double* yr = y.data.data() + r * channels;
        for (int c = 0; c < channels; ++c) {
            xh[c] = (row[c] - tr.mean[c]) * tr.inv_std[c];
            yr[c] = params.gamma[c] * xh[c] + params.beta[c];
        }
    }
    return y;
}

void batchnorm_backward(const BnTrace& trace, const BatchNormParams& params, const Tensor& dy,
                        Tensor* dx, std::vector<double>* dgamma, std::vector<double>* dbeta) {
    const int channels = dy.dim(2);
    const std::int64_t rows = static_cast<std::int64_t>(dy.dim(0)) * dy.dim(1);
    std::vector<double> sum_dy(channels, 0.0), sum_dy_xhat(channels, 0.0);
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* dyr = dy.data.data() + r * channels;
        const double* xh = trace.xhat.data.data() + r * channels;
        for (int c = 0; c < channels; ++c) {
            sum_dy[c] += dyr[c];
            sum_dy_xhat[c] += dyr[c] * xh[c];
        }
    }
    if (dgamma) *dgamma = sum_dy_xhat;
    if (dbeta) *dbeta = sum_dy;
    if (!dx) return;
    *dx = Tensor(dy.shape);
    const double inv_rows = 1.0 / static_cast<double>(rows);
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* dyr = dy.data.data() + r * channels;
        const double* xh = trace.xhat.data.data() + r * channels;
        double* dxr = dx->data.data() + r * channels;
        for (int c = 0; c < channels; ++c) {
            double g = params.gamma[c] * trace.inv_std[c];
            if (trace.batch_stats) {
                dxr[c] = g * (dyr[c] - inv_rows * sum_dy[c] - xh[c] * inv_rows * sum_dy_xhat[c]);
            } else {
                dxr[c] = g * dyr[c];
            }
        }
    }
}

void update_bn_moving(BatchNormParams& params, const BnTrace& trace, double momentum) {
    if (!trace.batch_stats) return;
    for (size_t c = 0; c < params.moving_mean.size(); ++c) {
        params.moving_mean[c] = momentum * params.moving_mean[c] + (1.0 - momentum) * trace.mean[c];
        params.moving_var[c] = momentum * params.moving_var[c] + (1.0 - momentum) * trace.var[c];
    }
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

Tensor lstm_forward(const Tensor& x, const LstmParams& params, int hidden, bool reverse,
                    LstmTrace* trace) {
    const int b_count = x.dim(0), t_count = x.dim(1), in_dim = x.dim(2);
    const int h4 = 4 * hidden;
    check(static_cast<int>(params.w_input.size()) == in_dim * h4, "lstm: w_input shape mismatch");
    check(static_cast<int>(params.w_recurrent.size()) == hidden * h4, "lstm: w_recurrent shape mismatch");
    check(static_cast<int>(params.bias.size()) == h4, "lstm: bias shape mismatch");

    LstmTrace local;
    LstmTrace& tr = trace ? *trace : local;
    for (Tensor* t : {&tr.i, &tr.f, &tr.g, &tr.o, &tr.c, &tr.tanh_c, &tr.h})
        *t = Tensor({b_count, t_count, hidden});

    // Input projection for all timesteps at once: (B*T, D) x (D, 4H).
    std::vector<double> in_proj(static_cast<size_t>(b_count) * t_count * h4, 0.0);
    matmul_acc(x.data.data(), params.w_input.data(), in_proj.data(), b_count * t_count, in_dim, h4);

    std::vector<double> h_prev(static_cast<size_t>(b_count) * hidden, 0.0);
    std::vector<double> c_prev(static_cast<size_t>(b_count) * hidden, 0.0);
    std::vector<double> pre(static_cast<size_t>(b_count) * h4);

    for (int step = 0; step < t_count; ++step) {
        const int t = reverse ? t_count - 1 - step : step;
        for (int b = 0; b < b_count; ++b) {
            const double* ip = in_proj.data() + (static_cast<size_t>(b) * t_count + t) * h4;
            double* pr = pre.data() + static_cast<size_t>(b) * h4;
            for (int j = 0; j < h4; ++j) pr[j] = ip[j] + params.bias[j];
        }
        matmul_acc(h_prev.data(), params.w_recurrent.data(), pre.data(), b_count, hidden, h4);

        for (int b = 0; b < b_count; ++b) {
            const double* pr = pre.data() + static_cast<size_t>(b) * h4;
            double* cp = c_prev.data() + static_cast<size_t>(b) * hidden;
            double* hp = h_prev.data() + static_cast<size_t>(b) * hidden;
            for (int j = 0; j < hidden; ++j) {
                double gi = sigmoid(pr[j]);
                double gf = sigmoid(pr[hidden + j]);
                double gg = std::tanh(pr[2 * hidden + j]);
                double go = sigmoid(pr[3 * hidden + j]);
                double cell = gf * cp[j] + gi * gg;
                double tc = std::tanh(cell);
                double hval = go * tc;
                tr.i.at(b, t, j) = gi;
                tr.f.at(b, t, j) = gf;
                tr.g.at(b, t, j) = gg;
                tr.o.at(b, t, j) = go;
                tr.c.at(b, t, j) = cell;
                tr.tanh_c.at(b, t, j) = tc;
                tr.h.at(b, t, j) = hval;
                cp[j] = cell;
                hp[j] = hval;
            }
        }
    }
    return tr.h;
}

void lstm_backward(const Tensor& x, const LstmParams& params, int hidden, bool reverse,
                   const LstmTrace& trace, const Tensor& dh, Tensor* dx, LstmParams* dparams) {
    const int b_count = x.dim(0), t_count = x.dim(1), in_dim = x.dim(2);
    const int h4 = 4 * hidden;
    if (dx) *dx = Tensor(x.shape);
    if (dparams) {
        dparams->w_input.assign(params.w_input.size(), 0.0);
        dparams->w_recurrent.assign(params.w_recurrent.size(), 0.0);
        dparams->bias.assign(params.bias.size(), 0.0);
    }

    std::vector<double> dh_carry(static_cast<size_t>(b_count) * hidden, 0.0);
    std::vector<double> dc_carry(static_cast<size_t>(b_count) * hidden, 0.0);
    std::vector<double> dz(static_cast<size_t>(b_count) * h4);
    std::vector<double> x_t(static_cast<size_t>(b_count) * in_dim);
    std::vector<double> h_prev(static_cast<size_t>(b_count) * hidden);

    // Walk processing order backwards: last processed timestep first.
    for (int step = t_count - 1; step >= 0; --step) {
        const int t = reverse ? t_count - 1 - step : step;
        const int t_prev = reverse ? t + 1 : t - 1;  // previously processed timestep
        const bool has_prev = step > 0;

        for (int b = 0; b < b_count; ++b) {
            double* dzb = dz.data() + static_cast<size_t>(b) * h4;
            const double* dhc = dh_carry.data() + static_cast<size_t>(b) * hidden;
            double* dcc = dc_carry.data() + static_cast<size_t>(b) * hidden;
            for (int j = 0; j < hidden; ++j) {
                double gi = trace.i.at(b, t, j), gf = trace.f.at(b, t, j);
                double gg = trace.g.at(b, t, j), go = trace.o.at(b, t, j);
                double tc = trace.tanh_c.at(b, t, j);
                double cp = has_prev ? trace.c.at(b, t_prev, j) : 0.0;

                double dh_total = dh.at(b, t, j) + dhc[j];
                double do_ = dh_total * tc;
                double dc = dh_total * go * (1.0 - tc * tc) + dcc[j];
                double di = dc * gg;
                double dg = dc * gi;
                double df = dc * cp;
                dcc[j] = dc * gf;

                dzb[j] = di * gi * (1.0 - gi);
                dzb[hidden + j] = df * gf * (1.0 - gf);
                dzb[2 * hidden + j] = dg * (1.0 - gg * gg);
                dzb[3 * hidden + j] = do_ * go * (1.0 - go);
            }
        }

        // Gather the timestep slices as contiguous matrices.
        for (int b = 0; b < b_count; ++b) {
            std::copy_n(&x.at(b, t, 0), in_dim, x_t.data() + static_cast<size_t>(b) * in_dim);
            if (has_prev)
                std::copy_n(&trace.h.at(b, t_prev, 0), hidden,
                            h_prev.data() + static_cast<size_t>(b) * hidden);
        }

        if (dparams) {
            matmul_at_b_acc(x_t.data(), dz.data(), dparams->w_input.data(), in_dim, b_count, h4);
            if (has_prev)
                matmul_at_b_acc(h_prev.data(), dz.data(), dparams->w_recurrent.data(), hidden,
                                b_count, h4);
            for (int b = 0; b < b_count; ++b) {
                const double* dzb = dz.data() + static_cast<size_t>(b) * h4;
                for (int j = 0; j < h4; ++j) dparams->bias[j] += dzb[j];
            }
        }
        if (dx) {
            std::vector<double> dx_t(static_cast<size_t>(b_count) * in_dim, 0.0);
            matmul_a_bt_acc(dz.data(), params.w_input.data(), dx_t.data(), b_count, h4, in_dim);
            for (int b = 0; b < b_count; ++b)
                for (int j = 0; j < in_dim; ++j) dx->at(b, t, j) += dx_t[static_cast<size_t>(b) * in_dim + j];
        }
        std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
        matmul_a_bt_acc(dz.data(), params.w_recurrent.data(), dh_carry.data(), b_count, h4, hidden);
    }
}

Tensor bilstm_forward(const Tensor& x, const LstmParams& fwd, const LstmParams& bwd, int hidden,
                      LstmTrace* fwd_trace, LstmTrace* bwd_trace) {
    Tensor hf = lstm_forward(x, fwd, hidden, false, fwd_trace);
    Tensor hb = lstm_forward(x, bwd, hidden, true, bwd_trace);
    const int b_count = x.dim(0), t_count = x.dim(1);
    Tensor out({b_count, t_count, 2 * hidden});
    for (int b = 0; b < b_count; ++b) {
        for (int t = 0; t < t_count; ++t) {
            std::copy_n(&hf.at(b, t, 0), hidden, &out.at(b, t, 0));
            std::copy_n(&hb.at(b, t, 0), hidden, &out.at(b, t, hidden));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// layer normalization
// ---------------------------------------------------------------------------

Tensor layernorm_forward(const Tensor& x, const std::vector<double>& gamma,
                         const std::vector<double>& beta, double eps, LnTrace* trace) {
    const int channels = x.dim(x.rank() - 1);
    const std::int64_t rows = x.size() / channels;
    check(static_cast<int>(gamma.size()) == channels, "layernorm: channel mismatch");

    LnTrace local;
    LnTrace& tr = trace ? *trace : local;
    tr.xhat = Tensor(x.shape);
    tr.inv_std.resize(rows);
    Tensor y(x.shape);
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* row = x.data.data() + r * channels;
        double mean = 0.0;
        for (int c = 0; c < channels; ++c) mean += row[c];
        mean /= channels;
        double var = 0.0;
        for (int c = 0; c < channels; ++c) {
            double d = row[c] - mean;
            var += d * d;
        }
        var /= channels;
        double inv_std = 1.0 / std::sqrt(var + eps);
        tr.inv_std[r] = inv_std;
        double* xh = tr.xhat.data.data() + r * channels;
        double* yr = y.data.data() + r * channels;
        for (int c = 0; c < channels; ++c) {
            xh[c] = (row[c] - mean) * inv_std;
            yr[c] = gamma[c] * xh[c] + beta[c];
        }
    }
    return y;
}

void layernorm_backward(const LnTrace& trace, const std::vector<double>& gamma, const Tensor& dy,
                        Tensor* dx, std::vector<double>* dgamma, std::vector<double>* dbeta) {
    const int channels = dy.dim(dy.rank() - 1);
    const std::int64_t rows = dy.size() / channels;
    if (dgamma) dgamma->assign(channels, 0.0);
    if (dbeta) dbeta->assign(channels, 0.0);
    if (dx) *dx = Tensor(dy.shape);
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* dyr = dy.data.data() + r * channels;
        const double* xh = trace.xhat.data.data() + r * channels;
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int c = 0; c < channels; ++c) {
            if (dgamma) (*dgamma)[c] += dyr[c] * xh[c];
            if (dbeta) (*dbeta)[c] += dyr[c];
        }
        if (!dx) continue;
        for (int c = 0; c < channels; ++c) {
            double dxhat = dyr[c] * gamma[c];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xh[c];
        }
        double* dxr = dx->data.data() + r * channels;
        const double inv_n = 1.0 / channels;
        for (int c = 0; c < channels; ++c) {
            double dxhat = dyr[c] * gamma[c];
            dxr[c] = trace.inv_std[r] * (dxhat - inv_n * sum_dxhat - xh[c] * inv_n * sum_dxhat_xhat);
        }
    }
}

// ---------------------------------------------------------------------------
// additive attention
// ---------------------------------------------------------------------------

void attention_forward(const Tensor& h, const std::vector<double>& w1, const std::vector<double>& w2,
                       const std::vector<double>& b, int attn_units, AttnTrace* trace) {
    const int b_count = h.dim(0), t_count = h.dim(1), width = h.dim(2);
    check(static_cast<int>(w1.size()) == width * attn_units, "attention: w1 shape mismatch");
    check(static_cast<int>(w2.size()) == attn_units, "attention: w2 shape mismatch");

    trace->z = Tensor({b_count, t_count, attn_units});
    trace->alpha = Tensor({b_count, t_count});
    trace->context = Tensor({b_count, width});

    // u = H W1 + b over all (b, t) rows at once, then z = tanh(u).
    Tensor& z = trace->z;
    matmul_acc(h.data.data(), w1.data(), z.data.data(), b_count * t_count, width, attn_units);
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(b_count) * t_count; ++r) {
        double* zr = z.data.data() + r * attn_units;
        for (int a = 0; a < attn_units; ++a) zr[a] = std::tanh(zr[a] + b[a]);
    }

    std::vector<double> scores(t_count);
    for (int bi = 0; bi < b_count; ++bi) {
        for (int t = 0; t < t_count; ++t) {
            const double* zr = &z.at(bi, t, 0);
            double e = 0.0;
            for (int a = 0; a < attn_units; ++a) e += w2[a] * zr[a];
            scores[t] = e;
        }
        double m = *std::max_element(scores.begin(), scores.end());
        double denom = 0.0;
        for (int t = 0; t < t_count; ++t) {
            scores[t] = std::exp(scores[t] - m);
            denom += scores[t];
        }
        double* ctx = &trace->context.at(bi, 0);
        for (int t = 0; t < t_count; ++t) {
            double a = scores[t] / denom;
            trace->alpha.at(bi, t) = a;
            const double* hr = &h.at(bi, t, 0);
            for (int j = 0; j < width; ++j) ctx[j] += a * hr[j];
        }
    }
}

void attention_backward(const Tensor& h, const std::vector<double>& w1, const std::vector<double>& w2,
                        int attn_units, const AttnTrace& trace, const Tensor& dcontext, Tensor* dh,
                        std::vector<double>* dw1, std::vector<double>* dw2, std::vector<double>* db) {
    const int b_count = h.dim(0), t_count = h.dim(1), width = h.dim(2);
    if (dh) *dh = Tensor(h.shape);
    if (dw1) dw1->assign(w1.size(), 0.0);
    if (dw2) dw2->assign(w2.size(), 0.0);
    if (db) db->assign(attn_units, 0.0);

    Tensor du({b_count, t_count, attn_units});
    std::vector<double> dalpha(t_count), de(t_count);
    for (int bi = 0; bi < b_count; ++bi) {
        const double* dc = &dcontext.at(bi, 0);
        double dot = 0.0;
        for (int t = 0; t < t_count; ++t) {
            const double* hr = &h.at(bi, t, 0);
            double s = 0.0;
            for (int j = 0; j < width; ++j) s += dc[j] * hr[j];
            dalpha[t] = s;
            dot += trace.alpha.at(bi, t) * s;
        }
        for (int t = 0; t < t_count; ++t) {
            double a = trace.alpha.at(bi, t);
            de[t] = a * (dalpha[t] - dot);
            if (dh) {
                double* dhr = &dh->at(bi, t, 0);
                for (int j = 0; j < width; ++j) dhr[j] += a * dc[j];
            }
            const double* zr = &trace.z.at(bi, t, 0);
            double* dur = &du.at(bi, t, 0);
            for (int a_i = 0; a_i < attn_units; ++a_i) {
                double dz = de[t] * w2[a_i];
                if (dw2) (*dw2)[a_i] += de[t] * zr[a_i];
                dur[a_i] = dz * (1.0 - zr[a_i] * zr[a_i]);
            }
        }
    }
    if (db) {
        for (std::int64_t r = 0; r < static_cast<std::int64_t>(b_count) * t_count; ++r) {
            const double* dur = du.data.data() + r * attn_units;
            for (int a = 0; a < attn_units; ++a) (*db)[a] += dur[a];
        }
    }
    if (dw1)
        matmul_at_b_acc(h.data.data(), du.data.data(), dw1->data(), width, b_count * t_count,
                        attn_units);
    if (dh)
        matmul_a_bt_acc(du.data.data(), w1.data(), dh->data.data(), b_count * t_count, attn_units,
                        width);
}

// ---------------------------------------------------------------------------
// dense head and full model
// ---------------------------------------------------------------------------

namespace {

// y = x W + bias with x (B, in), W (in, out).
Tensor linear_forward(const Tensor& x, const std::vector<double>& w, const std::vector<double>& bias,
                      int in_dim, int out_dim) {
    const int b_count = x.dim(0);
    Tensor y({b_count, out_dim});
    for (int b = 0; b < b_count; ++b)
        std::copy_n(bias.data(), out_dim, &y.at(b, 0));
    matmul_acc(x.data.data(), w.data(), y.data.data(), b_count, in_dim, out_dim);
    return y;
}

void linear_backward(const Tensor& x, const std::vector<double>& w, const Tensor& dy, int in_dim,
                     int out_dim, Tensor* dx, std::vector<double>* dw, std::vector<double>* dbias) {
    const int b_count = x.dim(0);
    if (dw) {
        dw->assign(w.size(), 0.0);
        matmul_at_b_acc(x.data.data(), dy.data.data(), dw->data(), in_dim, b_count, out_dim);
    }
    if (dbias) {
        dbias->assign(out_dim, 0.0);
        for (int b = 0; b < b_count; ++b)
            for (int j = 0; j < out_dim; ++j) (*dbias)[j] += dy.at(b, j);
    }
    if (dx) {
        *dx = Tensor({b_count, in_dim});
        matmul_a_bt_acc(dy.data.data(), w.data(), dx->data.data(), b_count, out_dim, in_dim);
    }
}

// d(post)/d(pre) for the ReLU+dropout composites cached as post-activation
// values plus masks: where the mask is zero the gradient is already zero, so
// gating on act > 0 is exact.
void relu_dropout_backward(Tensor& grad, const Tensor& act, const std::vector<double>& mask) {
    for (size_t i = 0; i < grad.data.size(); ++i) {
        double m = mask.empty() ? 1.0 : mask[i];
        grad.data[i] *= (act.data[i] > 0.0 ? m : 0.0);
    }
}

}  // namespace

void dense_head_forward(const Tensor& context, const ModelParams& params,
                        const ForwardOptions& options, ForwardTrace* trace) {
    const ModelConfig& c = params.config;
    const bool training_dropout = options.mode == RunMode::kTrain && options.dropout_enabled;

    Tensor fc1 = linear_forward(context, params.fc1_w, params.fc1_b, c.bilstm_width(), c.fc1_units);
    relu_inplace(fc1);
    trace->mask_fc.clear();
    if (training_dropout) {
        check(options.rng != nullptr, "dense_head: train-mode dropout needs an RNG");
        apply_dropout(fc1, c.dropout_fc, *options.rng, trace->mask_fc);
    }
    trace->fc1_act = std::move(fc1);

    Tensor fc2 = linear_forward(trace->fc1_act, params.fc2_w, params.fc2_b, c.fc1_units, c.fc2_units);
    relu_inplace(fc2);
    trace->fc2_act = std::move(fc2);

    Tensor out = linear_forward(trace->fc2_act, params.out_w, params.out_b, c.fc2_units, 1);
    trace->y_hat.assign(out.data.begin(), out.data.end());
}

std::vector<double> model_forward(const Tensor& x, const ModelParams& params,
                                  const ForwardOptions& options, ForwardTrace* trace) {
    const ModelConfig& c = params.config;
    check(x.rank() == 3, "model_forward: input must be (B, T, F)");
    check(x.dim(1) == c.window && x.dim(2) == c.features, "model_forward: input dims do not match config");

    ForwardTrace local;
    ForwardTrace& tr = trace ? *trace : local;
    tr.mode = options.mode;
    tr.x = x;
    const bool training_dropout = options.mode == RunMode::kTrain && options.dropout_enabled;
    if (training_dropout) check(options.rng != nullptr, "model_forward: train-mode dropout needs an RNG");

    // conv stage 1
    tr.conv1_out = conv1d_forward(x, params.conv1_kernel, c.kernel_size, c.features, c.conv1_filters);
    Tensor a1 = batchnorm_forward(tr.conv1_out, params.bn1, options.mode, c.bn_eps, &tr.bn1);
    relu_inplace(a1);
    tr.mask1.clear();
    if (training_dropout) apply_dropout(a1, c.dropout_conv, *options.rng, tr.mask1);
    tr.act1 = std::move(a1);

    // conv stage 2
    tr.conv2_out = conv1d_forward(tr.act1, params.conv2_kernel, c.kernel_size, c.conv1_filters,
                                  c.conv2_filters);
    Tensor a2 = batchnorm_forward(tr.conv2_out, params.bn2, options.mode, c.bn_eps, &tr.bn2);
    relu_inplace(a2);
    tr.mask2.clear();
    if (training_dropout) apply_dropout(a2, c.dropout_conv, *options.rng, tr.mask2);
    tr.act2 = std::move(a2);

    // bidirectional recurrent stage
    tr.bilstm_out = bilstm_forward(tr.act2, params.lstm_fwd, params.lstm_bwd, c.lstm_hidden,
                                   &tr.lstm_fwd, &tr.lstm_bwd);
    Tensor ln_out = layernorm_forward(tr.bilstm_out, params.ln_gamma, params.ln_beta, c.ln_eps, &tr.ln);
    tr.mask_lstm.clear();
    if (training_dropout) apply_dropout(ln_out, c.dropout_lstm, *options.rng, tr.mask_lstm);
    tr.attn_in = std::move(ln_out);

    attention_forward(tr.attn_in, params.attn_w1, params.attn_w2, params.attn_b, c.attn_units,
                      &tr.attn);
    dense_head_forward(tr.attn.context, params, options, &tr);
    return tr.y_hat;
}

void apply_bn_updates(ModelParams& params, const ForwardTrace& trace) {
    update_bn_moving(params.bn1, trace.bn1, params.config.bn_momentum);
    update_bn_moving(params.bn2, trace.bn2, params.config.bn_momentum);
}

double l2_penalty(const ModelParams& params, double l2_lambda) {
    if (l2_lambda == 0.0) return 0.0;
    double acc = 0.0;
    const std::vector<double>* penalized[] = {&params.lstm_fwd.w_recurrent,
                                              &params.lstm_bwd.w_recurrent, &params.fc1_w};
    for (const auto* w : penalized)
        for (double v : *w) acc += v * v;
    return l2_lambda * acc;
}

GradientSet model_backward(const ForwardTrace& trace, const ModelParams& params,
                           const std::vector<double>& dldy, double l2_lambda) {
    const ModelConfig& c = params.config;
    const int b_count = trace.x.dim(0);
    check(static_cast<int>(dldy.size()) == b_count, "model_backward: upstream gradient batch mismatch");
    check(trace.y_hat.size() == dldy.size(), "model_backward: trace does not match upstream gradient");

    GradientSet g = make_gradient_set(c);

    // head
    Tensor dout({b_count, 1});
    for (int b = 0; b < b_count; ++b) dout.at(b, 0) = dldy[b];
    Tensor dfc2;
    linear_backward(trace.fc2_act, params.out_w, dout, c.fc2_units, 1, &dfc2, &g.out_w, &g.out_b);
    relu_dropout_backward(dfc2, trace.fc2_act, {});
    Tensor dfc1;
    linear_backward(trace.fc1_act, params.fc2_w, dfc2, c.fc1_units, c.fc2_units, &dfc1, &g.fc2_w,
                    &g.fc2_b);
    relu_dropout_backward(dfc1, trace.fc1_act, trace.mask_fc);
    Tensor dcontext;
    linear_backward(trace.attn.context, params.fc1_w, dfc1, c.bilstm_width(), c.fc1_units, &dcontext,
                    &g.fc1_w, &g.fc1_b);

    // attention
    Tensor dattn_in;
    attention_backward(trace.attn_in, params.attn_w1, params.attn_w2, c.attn_units, trace.attn,
                       dcontext, &dattn_in, &g.attn_w1, &g.attn_w2, &g.attn_b);

    // dropout over layernorm output
    if (!trace.mask_lstm.empty())
        for (size_t i = 0; i < dattn_in.data.size(); ++i) dattn_in.data[i] *= trace.mask_lstm[i];
    Tensor dbilstm;
    layernorm_backward(trace.ln, params.ln_gamma, dattn_in, &dbilstm, &g.ln_gamma, &g.ln_beta);

    // split the concatenated gradient back into directions
    const int h = c.lstm_hidden, t_count = c.window;
    Tensor dh_fwd({b_count, t_count, h}), dh_bwd({b_count, t_count, h});
    for (int b = 0; b < b_count; ++b) {
        for (int t = 0; t < t_count; ++t) {
            std::copy_n(&dbilstm.at(b, t, 0), h, &dh_fwd.at(b, t, 0));
            std::copy_n(&dbilstm.at(b, t, h), h, &dh_bwd.at(b, t, 0));
        }
    }
    Tensor dact2_f, dact2_b;
    lstm_backward(trace.act2, params.lstm_fwd, h, false, trace.lstm_fwd, dh_fwd, &dact2_f,
                  &g.lstm_fwd);
    lstm_backward(trace.act2, params.lstm_bwd, h, true, trace.lstm_bwd, dh_bwd, &dact2_b,
                  &g.lstm_bwd);
    Tensor dact2 = std::move(dact2_f);
    for (size_t i = 0; i < dact2.data.size(); ++i) dact2.data[i] += dact2_b.data[i];

    // conv stage 2
    relu_dropout_backward(dact2, trace.act2, trace.mask2);
    Tensor dconv2;
    batchnorm_backward(trace.bn2, params.bn2, dact2, &dconv2, &g.bn2_gamma, &g.bn2_beta);
    Tensor dact1;
    conv1d_backward(trace.act1, params.conv2_kernel, c.kernel_size, c.conv1_filters, c.conv2_filters,
                    dconv2, &dact1, &g.conv2_kernel);

    // conv stage 1
    relu_dropout_backward(dact1, trace.act1, trace.mask1);
    Tensor dconv1;
    batchnorm_backward(trace.bn1, params.bn1, dact1, &dconv1, &g.bn1_gamma, &g.bn1_beta);
    conv1d_backward(trace.x, params.conv1_kernel, c.kernel_size, c.features, c.conv1_filters, dconv1,
                    nullptr, &g.conv1_kernel);

    if (l2_lambda != 0.0) {
        auto add_l2 = [l2_lambda](std::vector<double>& grad, const std::vector<double>& w) {
            for (size_t i = 0; i < w.size(); ++i) grad[i] += 2.0 * l2_lambda * w[i];
        };
        add_l2(g.lstm_fwd.w_recurrent, params.lstm_fwd.w_recurrent);
        add_l2(g.lstm_bwd.w_recurrent, params.lstm_bwd.w_recurrent);
        add_l2(g.fc1_w, params.fc1_w);
    }
    return g;
}

}  // namespace rulkit
