#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rulkit/tensor.hpp"

namespace rulkit {

// Architecture constants. Defaults reproduce the full-size network; tests and
// desk-scale runs shrink them.
struct ModelConfig {
    int features = 17;  // input channels per cycle
    int window = 30;    // cycles per window
    int kernel_size = 3;
    int conv1_filters = 64;
    int conv2_filters = 128;
    int lstm_hidden = 128;  // per direction
    int attn_units = 64;
    int fc1_units = 64;
    int fc2_units = 32;
    double dropout_conv = 0.2;
    double dropout_lstm = 0.3;
    double dropout_fc = 0.2;
    double bn_momentum = 0.99;
    double bn_eps = 1e-3;
    double ln_eps = 1e-3;

    int bilstm_width() const { return 2 * lstm_hidden; }
};

struct BatchNormParams {
    std::vector<double> gamma, beta;              // trainable
    std::vector<double> moving_mean, moving_var;  // inference statistics
};

// Gate order i, f, g, o. w_input is (input_dim x 4H), w_recurrent (H x 4H),
// bias 4H, all row-major.
struct LstmParams {
    std::vector<double> w_input;
    std::vector<double> w_recurrent;
    std::vector<double> bias;
};

struct ModelParams {
    ModelConfig config;
    std::vector<double> conv1_kernel;  // (K, F, C1)
    BatchNormParams bn1;
    std::vector<double> conv2_kernel;  // (K, C1, C2)
    BatchNormParams bn2;
    LstmParams lstm_fwd, lstm_bwd;
    std::vector<double> ln_gamma, ln_beta;  // 2H
    std::vector<double> attn_w1;            // (2H, A)
    std::vector<double> attn_w2;            // A
    std::vector<double> attn_b;             // A
    std::vector<double> fc1_w, fc1_b;       // (2H, F1), F1
    std::vector<double> fc2_w, fc2_b;       // (F1, F2), F2
    std::vector<double> out_w, out_b;       // (F2, 1), 1
};

// One array per trainable array in ModelParams, identical shapes.
struct GradientSet {
    std::vector<double> conv1_kernel;
    std::vector<double> bn1_gamma, bn1_beta;
    std::vector<double> conv2_kernel;
    std::vector<double> bn2_gamma, bn2_beta;
    LstmParams lstm_fwd, lstm_bwd;
    std::vector<double> ln_gamma, ln_beta;
    std::vector<double> attn_w1, attn_w2, attn_b;
    std::vector<double> fc1_w, fc1_b;
    std::vector<double> fc2_w, fc2_b;
    std::vector<double> out_w, out_b;
};

// Canonical named view over parameter arrays; the order is fixed and shared
// by the optimizer, gradient clipping, and the checkpoint format.
struct ParamEntry {
    std::string name;
    std::vector<int> shape;
    std::vector<double>* values;
};
struct ConstParamEntry {
    std::string name;
    std::vector<int> shape;
    const std::vector<double>* values;
};

std::vector<ParamEntry> trainable_entries(ModelParams& p);
std::vector<ConstParamEntry> trainable_entries(const ModelParams& p);
std::vector<ParamEntry> gradient_entries(GradientSet& g, const ModelConfig& config);
std::vector<ConstParamEntry> gradient_entries(const GradientSet& g, const ModelConfig& config);
// Non-trainable inference statistics (BN moving mean/var).
std::vector<ParamEntry> state_entries(ModelParams& p);
std::vector<ConstParamEntry> state_entries(const ModelParams& p);

// Glorot-uniform kernels, zero biases (LSTM forget-gate block set to 1),
// gamma and moving variances one, beta and moving means zero. Deterministic
// per seed.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);
GradientSet make_gradient_set(const ModelConfig& config);
std::int64_t trainable_param_count(const ModelConfig& config);

enum class RunMode { kTrain, kInfer };

// ---- layer traces ----

struct BnTrace {
    bool batch_stats = false;               // true when normalized with batch statistics
    std::vector<double> mean, var, inv_std;  // per channel (batch or moving)
    Tensor xhat;                             // normalized pre-affine values
};

struct LstmTrace {
    // All (B, T, H), indexed by the original (unreversed) timestep.
    Tensor i, f, g, o, c, tanh_c, h;
};

struct LnTrace {
    Tensor xhat;                  // (B, T, C)
    std::vector<double> inv_std;  // per (b, t)
};

struct AttnTrace {
    Tensor z;        // tanh projection, (B, T, A)
    Tensor alpha;    // attention weights, (B, T)
    Tensor context;  // (B, 2H)
};

// Everything model_backward needs, plus the attention weights kept for
// interpretability export.
struct ForwardTrace {
    RunMode mode = RunMode::kInfer;
    Tensor x;
    Tensor conv1_out;
    BnTrace bn1;
    Tensor act1;  // post-ReLU post-dropout (B, T, C1)
    std::vector<double> mask1;
    Tensor conv2_out;
    BnTrace bn2;
    Tensor act2;  // (B, T, C2)
    std::vector<double> mask2;
    LstmTrace lstm_fwd, lstm_bwd;
    Tensor bilstm_out;  // (B, T, 2H)
    LnTrace ln;
    Tensor attn_in;  // layernormed + dropout (B, T, 2H)
    std::vector<double> mask_lstm;
    AttnTrace attn;
    Tensor fc1_act;  // post-ReLU post-dropout (B, F1)
    std::vector<double> mask_fc;
    Tensor fc2_act;              // post-ReLU (B, F2)
    std::vector<double> y_hat;   // B
};

// ---- individual layers ----

// Same-padded 1D convolution without bias; kernel (K, Cin, Cout), K odd.
Tensor conv1d_forward(const Tensor& x, const std::vector<double>& kernel, int k, int cin, int cout);
void conv1d_backward(const Tensor& x, const std::vector<double>& kernel, int k, int cin, int cout,
                     const Tensor& dy, Tensor* dx, std::vector<double>* dkernel);

// Normalizes over the (B, T) axes per channel. Train mode uses batch
// statistics; infer mode uses the moving statistics. Moving stats are never
// mutated here; the batch statistics land in the trace and are folded in by
// update_bn_moving.
Tensor batchnorm_forward(const Tensor& x, const BatchNormParams& params, RunMode mode, double eps,
                         BnTrace* trace);
void batchnorm_backward(const BnTrace& trace, const BatchNormParams& params, const Tensor& dy,
                        Tensor* dx, std::vector<double>* dgamma, std::vector<double>* dbeta);
void update_bn_moving(BatchNormParams& params, const BnTrace& trace, double momentum);

Tensor lstm_forward(const Tensor& x, const LstmParams& params, int hidden, bool reverse,
                    LstmTrace* trace);
void lstm_backward(const Tensor& x, const LstmParams& params, int hidden, bool reverse,
                   const LstmTrace& trace, const Tensor& dh, Tensor* dx, LstmParams* dparams);

// Concatenation [h_fwd(t) || h_bwd(t)] per timestep.
Tensor bilstm_forward(const Tensor& x, const LstmParams& fwd, const LstmParams& bwd, int hidden,
                      LstmTrace* fwd_trace, LstmTrace* bwd_trace);

Tensor layernorm_forward(const Tensor& x, const std::vector<double>& gamma,
                         const std::vector<double>& beta, double eps, LnTrace* trace);
void layernorm_backward(const LnTrace& trace, const std::vector<double>& gamma, const Tensor& dy,
                        Tensor* dx, std::vector<double>* dgamma, std::vector<double>* dbeta);

// Additive attention: e(t) = w2 . tanh(W1^T h(t) + b), alpha = softmax(e)
// with max subtraction, context = sum_t alpha(t) h(t).
void attention_forward(const Tensor& h, const std::vector<double>& w1, const std::vector<double>& w2,
                       const std::vector<double>& b, int attn_units, AttnTrace* trace);
void attention_backward(const Tensor& h, const std::vector<double>& w1, const std::vector<double>& w2,
                        int attn_units, const AttnTrace& trace, const Tensor& dcontext, Tensor* dh,
                        std::vector<double>* dw1, std::vector<double>* dw2, std::vector<double>* db);

// ---- full model ----

struct ForwardOptions {
    RunMode mode = RunMode::kInfer;
    bool dropout_enabled = true;       // only honored in train mode
    std::mt19937_64* rng = nullptr;    // required when train mode draws dropout masks
};

// FC(64)+ReLU -> dropout -> FC(32)+ReLU -> FC(1). Exposed for tests; the
// trace fields fc1_act/fc2_act/y_hat/mask_fc are filled.
void dense_head_forward(const Tensor& context, const ModelParams& params,
                        const ForwardOptions& options, ForwardTrace* trace);

std::vector<double> model_forward(const Tensor& x, const ModelParams& params,
                                  const ForwardOptions& options, ForwardTrace* trace);

// Applies the train-mode batch statistics captured in the trace to the BN
// moving averages (one training step's worth of decay).
void apply_bn_updates(ModelParams& params, const ForwardTrace& trace);

// Gradients of (upstream-weighted output + L2 penalty) for every trainable
// array. The L2 term (lambda * sum w^2, contributing 2*lambda*w) covers the
// BiLSTM recurrent kernels and the fc1 kernel only.
GradientSet model_backward(const ForwardTrace& trace, const ModelParams& params,
                           const std::vector<double>& dldy, double l2_lambda);

// lambda * sum of squares over the penalized kernels; added to the training
// objective so reported losses and gradients agree.
double l2_penalty(const ModelParams& params, double l2_lambda);

}  // namespace rulkit
