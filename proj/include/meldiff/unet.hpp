#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "meldiff/diffusion.hpp"
#include "meldiff/nn.hpp"
#include "meldiff/param.hpp"

namespace meldiff {

// Packed mel slices are (3, 128, 128): 3 snake channels x 128 mel bins x 128
// frames. The denoiser treats the leading 3 x 128 as 384 distinct frequency
// channels and convolves along the frame axis only.
inline constexpr int kSliceChannels = 3;
inline constexpr int kMelBins = 128;
inline constexpr int kFrameAxis = 128;
inline constexpr int kFreqChannels = kSliceChannels * kMelBins;

struct UNetConfig {
    int in_channels = kFreqChannels;
    int base_width = 64;
    int depth = 3;
    int time_embed_dim = 128;
    bool use_attention = true; // one self-attention block at the bottleneck
    ParamKind kind = ParamKind::V;
    int schedule_T = 1000;

    void validate() const;
    int width(int level) const;   // encoder width at a level, capped at 4x base
    int mid_width() const;
};

// 1D U-Net denoiser: pointwise stem, per-level residual bulk blocks with
// batch norm and time-embedding injection, max-pool downsampling, transposed
// convolution upsampling, encoder-decoder skip concatenation, and a
// zero-initialized pointwise head.
class UNetModel : public TrainableModel {
public:
    UNetModel() = default;
    UNetModel(const UNetConfig& cfg, RandomStream& init_rng);

    UNetModel(const UNetModel&);
    UNetModel& operator=(const UNetModel&);
    UNetModel(UNetModel&&) = default;
    UNetModel& operator=(UNetModel&&) = default;

    const UNetConfig& config() const { return cfg_; }
    int64_t step_counter() const { return step_counter_; }
    void set_step_counter(int64_t s) { step_counter_ = s; }

    std::vector<ParamRef> parameters() override;
    ParamKind param_kind() const override { return cfg_.kind; }

    // z: (N, 3, 128, 128); output (N, 3*mult, 128, 128).
    Tensor forward_raw(const Tensor& z, std::span<const double> ts, Mode mode) override;
    void backward_raw(const Tensor& grad_out) override;

    // Implied x-prediction for a whole batch at per-item times (eval mode).
    Tensor predict_x_batch(const Tensor& z, std::span<const double> ts);

private:
    struct ResBlock {
        Conv1d c1;
        BatchNorm1d b1;
        Linear tproj;
        ReLU r1;
        Conv1d c2;
        BatchNorm1d b2;
        std::optional<Conv1d> skip;
        ReLU r2;

        ResBlock() = default;
        ResBlock(int in_ch, int out_ch, int temb_dim, RandomStream& rng);
        Tensor forward(const Tensor& x, const Tensor& temb, Mode mode);
        Tensor backward(const Tensor& gy, Tensor& gtemb);
        void collect(const std::string& prefix, std::vector<ParamRef>& out);
    };

    UNetConfig cfg_;
    int64_t step_counter_ = 0;

    Linear tmlp1_, tmlp2_;
    ReLU trelu_;
    Conv1d stem_;
    std::vector<ResBlock> enc_;
    std::vector<MaxPool1d> pools_;
    ResBlock mid1_, mid2_;
    std::optional<SelfAttention1d> attn_;
    std::vector<ConvTranspose1d> ups_;
    std::vector<ReLU> up_relus_;
    std::vector<ResBlock> dec_;
    Conv1d head_;

    // forward context for the reverse pass
    std::vector<int64_t> in_shape_ctx_;
};

// Inference adapter: raw forward in eval mode plus the parameterization
// inversion. Safe for concurrent reads of a frozen model.
class UNetDenoiser : public Denoiser {
public:
    explicit UNetDenoiser(UNetModel& model) : model_(&model) {}

    Tensor predict_x(const Tensor& z, double t) const override;
    Tensor predict_x_batch(const Tensor& z, std::span<const double> ts) const override;
    std::vector<int64_t> item_shape() const override {
        return {kSliceChannels, kMelBins, kFrameAxis};
    }

private:
    UNetModel* model_;
};

// Converts a raw batched model output into x-predictions, one noise level
// per item.
Tensor x_prediction_batch(const Tensor& raw, ParamKind kind, const Tensor& z,
                          std::span<const double> ts);

} // namespace meldiff
