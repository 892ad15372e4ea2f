#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meldiff/param.hpp"
#include "meldiff/rng.hpp"
#include "meldiff/tensor.hpp"

namespace meldiff {

// Named view into a module's parameter and its gradient accumulator.
// Non-trainable entries (batch-norm running statistics) are serialized but
// skipped by the optimizer.
struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
    bool trainable = true;
};

enum class Mode { kTrain, kEval };

// All activation tensors are (N, C, L): batch, channels, time axis.

class Conv1d {
public:
    Conv1d() = default;
    // pad = kernel/2 keeps the length; rng = nullptr zero-initializes.
    Conv1d(int in_ch, int out_ch, int kernel, RandomStream* rng);

    Tensor forward(const Tensor& x, Mode mode);
    Tensor backward(const Tensor& gy);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);

    int in_ch() const { return in_ch_; }
    int out_ch() const { return out_ch_; }
    int kernel() const { return kernel_; }

private:
    int in_ch_ = 0, out_ch_ = 0, kernel_ = 0, pad_ = 0;
    Tensor w_;  // (out_ch, in_ch * kernel)
    Tensor b_;  // (out_ch)
    Tensor gw_, gb_;
    Tensor x_ctx_;
};

// Exact 2x upsampling: kernel 2, stride 2.
class ConvTranspose1d {
public:
    ConvTranspose1d() = default;
    ConvTranspose1d(int in_ch, int out_ch, RandomStream* rng);

    Tensor forward(const Tensor& x, Mode mode);
    Tensor backward(const Tensor& gy);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);

private:
    int in_ch_ = 0, out_ch_ = 0;
    Tensor w_;  // (2, out_ch, in_ch); plane j feeds output position 2l + j
    Tensor b_;  // (out_ch)
    Tensor gw_, gb_;
    Tensor x_ctx_;
};

class BatchNorm1d {
public:
    BatchNorm1d() = default;
    explicit BatchNorm1d(int channels);

    Tensor forward(const Tensor& x, Mode mode);
    Tensor backward(const Tensor& gy);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);

private:
    int ch_ = 0;
    double eps_ = 1e-5;
    double momentum_ = 0.1;
    Tensor gamma_, beta_, ggamma_, gbeta_;
    Tensor run_mean_, run_var_;
    // training-mode context
    Tensor xhat_ctx_;
    Tensor inv_std_ctx_; // per channel
    int64_t ctx_m_ = 0;  // samples per channel in the cached batch
};

class ReLU {
public:
    Tensor forward(const Tensor& x, Mode mode);
    Tensor backward(const Tensor& gy);

private:
    Tensor mask_ctx_;
};

// Kernel 2, stride 2; the time axis must have even length.
class MaxPool1d {
public:
    Tensor forward(const Tensor& x, Mode mode);
    Tensor backward(const Tensor& gy);

private:
    std::vector<uint8_t> argmax_ctx_;
    std::vector<int64_t> in_shape_ctx_;
};

class Linear {
public:
    Linear() = default;
    Linear(int in_dim, int out_dim, RandomStream* rng);

    // x: (N, in) -> (N, out)
    Tensor forward(const Tensor& x, Mode mode);
    Tensor backward(const Tensor& gy);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);

private:
    int in_dim_ = 0, out_dim_ = 0;
    Tensor w_; // (out, in)
    Tensor b_;
    Tensor gw_, gb_;
    Tensor x_ctx_;
};

// Single-head dot-product self-attention over the time axis with a residual
// connection: y = proj(V * softmax(Q^T K / sqrt(C))^T) + x.
class SelfAttention1d {
public:
    SelfAttention1d() = default;
    SelfAttention1d(int channels, RandomStream* rng);

    Tensor forward(const Tensor& x, Mode mode);
    Tensor backward(const Tensor& gy);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);

private:
    int ch_ = 0;
    Conv1d q_, k_, v_, proj_;
    Tensor q_ctx_, k_ctx_, v_ctx_, attn_ctx_;
};

// Sinusoidal features over a geometric frequency ladder; lowest frequency
// pi/2 makes the first channel monotone on [0,1].
Tensor sinusoidal_time_embedding(std::span<const double> ts, int dim);

// Model that can be trained with the Adam loop: exposes its parameters, a
// raw batched forward conditioned on per-item fractional times, and the
// matching reverse pass.
class TrainableModel {
public:
    virtual ~TrainableModel() = default;

    virtual std::vector<ParamRef> parameters() = 0;
    virtual ParamKind param_kind() const = 0;

    // z: (N, ...) with one fractional time per item. Returns the raw
    // parameterized output (channel count doubled for XEPS).
    virtual Tensor forward_raw(const Tensor& z, std::span<const double> ts, Mode mode) = 0;
    // Accumulates parameter gradients for the most recent training-mode forward.
    virtual void backward_raw(const Tensor& grad_out) = 0;

    void zero_grad();
    int64_t param_count();
};

} // namespace meldiff
