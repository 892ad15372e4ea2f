#include "meldiff/unet.hpp"

#include <string>

#include "meldiff/errors.hpp"

namespace meldiff {

namespace {

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const int64_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), L = a.dim(2);
    Tensor y({n, ca + cb, L});
    for (int64_t i = 0; i < n; ++i) {
        double* dst = y.data() + i * (ca + cb) * L;
        const double* pa = a.data() + i * ca * L;
        const double* pb = b.data() + i * cb * L;
        std::copy(pa, pa + ca * L, dst);
        std::copy(pb, pb + cb * L, dst + ca * L);
    }
    return y;
}

void split_channels(const Tensor& y, int64_t ca, Tensor& a, Tensor& b) {
    const int64_t n = y.dim(0), c = y.dim(1), L = y.dim(2), cb = c - ca;
    a = Tensor({n, ca, L});
    b = Tensor({n, cb, L});
    for (int64_t i = 0; i < n; ++i) {
        const double* src = y.data() + i * c * L;
        std::copy(src, src + ca * L, a.data() + i * ca * L);
        std::copy(src + ca * L, src + c * L, b.data() + i * cb * L);
    }
}

} // namespace

void UNetConfig::validate() const {
    if (in_channels != kFreqChannels)
        throw InvalidArgument("denoiser expects " + std::to_string(kFreqChannels) +
                              " frequency channels");
    if (depth < 1) throw InvalidArgument("depth must be at least 1");
    if (kFrameAxis % (1 << depth) != 0)
        throw InvalidArgument("frame axis of " + std::to_string(kFrameAxis) +
                              " is not divisible by 2^depth");
    if (base_width < 4) throw InvalidArgument("base width must be at least 4");
    if (time_embed_dim <= 0 || time_embed_dim % 2 != 0)
        throw InvalidArgument("time embedding dimension must be positive and even");
    if (schedule_T < 1) throw InvalidArgument("schedule needs at least one step");
}

int UNetConfig::width(int level) const {
    const int mult = level >= 2 ? 4 : (1 << level);
    return base_width * mult;
}

int UNetConfig::mid_width() const {
    const int mult = depth >= 2 ? 4 : (1 << depth);
    return base_width * mult;
}

UNetModel::ResBlock::ResBlock(int in_ch, int out_ch, int temb_dim, RandomStream& rng)
    : c1(in_ch, out_ch, 3, &rng),
      b1(out_ch),
      tproj(temb_dim, out_ch, &rng),
      c2(out_ch, out_ch, 3, &rng),
      b2(out_ch) {
    if (in_ch != out_ch) skip.emplace(in_ch, out_ch, 1, &rng);
}

Tensor UNetModel::ResBlock::forward(const Tensor& x, const Tensor& temb, Mode mode) {
    Tensor h = c1.forward(x, mode);
    h = b1.forward(h, mode);

    Tensor tp = tproj.forward(temb, mode); // (N, C)
    const int64_t n = h.dim(0), c = h.dim(1), L = h.dim(2);
    for (int64_t b = 0; b < n; ++b)
        for (int64_t ch = 0; ch < c; ++ch) {
            const double add = tp[b * c + ch];
            double* row = h.data() + (b * c + ch) * L;
            for (int64_t l = 0; l < L; ++l) row[l] += add;
        }

    h = r1.forward(h, mode);
    h = c2.forward(h, mode);
    h = b2.forward(h, mode);

    Tensor s = skip ? skip->forward(x, mode) : x;
    for (int64_t i = 0; i < h.size(); ++i) h[i] += s[i];
    return r2.forward(h, mode);
}

Tensor UNetModel::ResBlock::backward(const Tensor& gy, Tensor& gtemb) {
    Tensor g = r2.backward(gy);
    Tensor gh = b2.backward(g);
    gh = c2.backward(gh);
    gh = r1.backward(gh);

    const int64_t n = gh.dim(0), c = gh.dim(1), L = gh.dim(2);
    Tensor gtp({n, c});
    for (int64_t b = 0; b < n; ++b)
        for (int64_t ch = 0; ch < c; ++ch) {
            const double* row = gh.data() + (b * c + ch) * L;
            double s = 0.0;
            for (int64_t l = 0; l < L; ++l) s += row[l];
            gtp[b * c + ch] = s;
        }
    gtemb.add_scaled(tproj.backward(gtp), 1.0);

    gh = b1.backward(gh);
    Tensor gx = c1.backward(gh);
    if (skip)
        gx.add_scaled(skip->backward(g), 1.0);
    else
        gx.add_scaled(g, 1.0);
    return gx;
}

void UNetModel::ResBlock::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    c1.collect(prefix + ".conv1", out);
    b1.collect(prefix + ".norm1", out);
    tproj.collect(prefix + ".time_proj", out);
    c2.collect(prefix + ".conv2", out);
    b2.collect(prefix + ".norm2", out);
    if (skip) skip->collect(prefix + ".skip", out);
}

UNetModel::UNetModel(const UNetConfig& cfg, RandomStream& rng) : cfg_(cfg) {
    cfg_.validate();
    const int E = cfg_.time_embed_dim;
    tmlp1_ = Linear(E, E, &rng);
    tmlp2_ = Linear(E, E, &rng);
    stem_ = Conv1d(cfg_.in_channels, cfg_.base_width, 1, &rng);

    enc_.reserve(static_cast<size_t>(cfg_.depth));
    pools_.resize(static_cast<size_t>(cfg_.depth));
    for (int l = 0; l < cfg_.depth; ++l) {
        const int in = (l == 0) ? cfg_.base_width : cfg_.width(l - 1);
        enc_.emplace_back(in, cfg_.width(l), E, rng);
    }

    mid1_ = ResBlock(cfg_.width(cfg_.depth - 1), cfg_.mid_width(), E, rng);
    if (cfg_.use_attention) attn_.emplace(cfg_.mid_width(), &rng);
    mid2_ = ResBlock(cfg_.mid_width(), cfg_.mid_width(), E, rng);

    ups_.reserve(static_cast<size_t>(cfg_.depth));
    up_relus_.resize(static_cast<size_t>(cfg_.depth));
    dec_.reserve(static_cast<size_t>(cfg_.depth));
    for (int l = cfg_.depth - 1; l >= 0; --l) {
        const int prev = (l == cfg_.depth - 1) ? cfg_.mid_width() : cfg_.width(l + 1);
        ups_.emplace_back(prev, cfg_.width(l), &rng);
        dec_.emplace_back(2 * cfg_.width(l), cfg_.width(l), E, rng);
    }

    const int out_ch = cfg_.in_channels * output_multiplicity(cfg_.kind);
    head_ = Conv1d(cfg_.base_width, out_ch, 1, nullptr); // zero-initialized
}

UNetModel::UNetModel(const UNetModel&) = default;
UNetModel& UNetModel::operator=(const UNetModel&) = default;

std::vector<ParamRef> UNetModel::parameters() {
    std::vector<ParamRef> out;
    tmlp1_.collect("time_mlp.fc1", out);
    tmlp2_.collect("time_mlp.fc2", out);
    stem_.collect("stem", out);
    for (size_t l = 0; l < enc_.size(); ++l)
        enc_[l].collect("enc" + std::to_string(l), out);
    mid1_.collect("mid1", out);
    if (attn_) attn_->collect("mid_attn", out);
    mid2_.collect("mid2", out);
    for (size_t i = 0; i < ups_.size(); ++i) {
        const size_t l = ups_.size() - 1 - i; // constructed from deepest level down
        ups_[i].collect("up" + std::to_string(l), out);
        dec_[i].collect("dec" + std::to_string(l), out);
    }
    head_.collect("head", out);
    return out;
}

Tensor UNetModel::forward_raw(const Tensor& z, std::span<const double> ts, Mode mode) {
    if (z.rank() != 4 || z.dim(1) != kSliceChannels || z.dim(2) != kMelBins ||
        z.dim(3) != kFrameAxis)
        throw InvalidArgument("denoiser input must be (N, 3, 128, 128)");
    const int64_t n = z.dim(0);
    if (static_cast<int64_t>(ts.size()) != n)
        throw InvalidArgument("one fractional time per batch item required");
    for (double t : ts)
        if (!(t >= 0.0 && t <= 1.0))
            throw InvalidArgument("fractional time outside [0,1]");

    Tensor x = z.reshaped({n, cfg_.in_channels, kFrameAxis});

    Tensor temb = sinusoidal_time_embedding(ts, cfg_.time_embed_dim);
    temb = tmlp1_.forward(temb, mode);
    temb = trelu_.forward(temb, mode);
    temb = tmlp2_.forward(temb, mode);

    Tensor h = stem_.forward(x, mode);
    std::vector<Tensor> skips;
    skips.reserve(enc_.size());
    for (size_t l = 0; l < enc_.size(); ++l) {
        h = enc_[l].forward(h, temb, mode);
        skips.push_back(h);
        h = pools_[l].forward(h, mode);
    }

    h = mid1_.forward(h, temb, mode);
    if (attn_) h = attn_->forward(h, mode);
    h = mid2_.forward(h, temb, mode);

    for (size_t i = 0; i < ups_.size(); ++i) {
        const size_t l = ups_.size() - 1 - i;
        Tensor u = ups_[i].forward(h, mode);
        u = up_relus_[i].forward(u, mode);
        h = concat_channels(u, skips[l]);
        h = dec_[i].forward(h, temb, mode);
    }

    Tensor out = head_.forward(h, mode);
    if (mode == Mode::kTrain) in_shape_ctx_ = z.shape();
    const int out_slices = kSliceChannels * output_multiplicity(cfg_.kind);
    return out.reshaped({n, out_slices, kMelBins, kFrameAxis});
}

void UNetModel::backward_raw(const Tensor& grad_out) {
    if (in_shape_ctx_.empty())
        throw NumericFailure("backward_raw without a preceding training-mode forward");
    const int64_t n = in_shape_ctx_[0];
    const int out_ch = cfg_.in_channels * output_multiplicity(cfg_.kind);
    Tensor gh = grad_out.reshaped({n, out_ch, kFrameAxis});
    gh = head_.backward(gh);

    Tensor gtemb({n, cfg_.time_embed_dim});
    std::vector<Tensor> gskips(enc_.size());

    // Decoder stages ran i = 0..D-1 in forward order; undo the last one first.
    for (size_t i = ups_.size(); i-- > 0;) {
        const size_t l = ups_.size() - 1 - i; // encoder level fed by this stage
        gh = dec_[i].backward(gh, gtemb);
        Tensor gu, gskip;
        split_channels(gh, cfg_.width(static_cast<int>(l)), gu, gskip);
        gskips[l] = std::move(gskip);
        gu = up_relus_[i].backward(gu);
        gh = ups_[i].backward(gu);
    }

    gh = mid2_.backward(gh, gtemb);
    if (attn_) gh = attn_->backward(gh);
    gh = mid1_.backward(gh, gtemb);

    for (size_t l = enc_.size(); l-- > 0;) {
        gh = pools_[l].backward(gh);
        gh.add_scaled(gskips[l], 1.0);
        gh = enc_[l].backward(gh, gtemb);
    }
    stem_.backward(gh);

    Tensor gt = tmlp2_.backward(gtemb);
    gt = trelu_.backward(gt);
    tmlp1_.backward(gt);
    in_shape_ctx_.clear();
}

Tensor UNetModel::predict_x_batch(const Tensor& z, std::span<const double> ts) {
    Tensor raw = forward_raw(z, ts, Mode::kEval);
    return x_prediction_batch(raw, cfg_.kind, z, ts);
}

Tensor x_prediction_batch(const Tensor& raw, ParamKind kind, const Tensor& z,
                          std::span<const double> ts) {
    const int64_t n = z.dim(0);
    const int64_t item = z.size() / n;
    const int64_t raw_item = raw.size() / n;
    Tensor x(z.shape());
    std::vector<int64_t> item_shape(z.shape().begin() + 1, z.shape().end());
    std::vector<int64_t> raw_shape(raw.shape().begin() + 1, raw.shape().end());
    for (int64_t b = 0; b < n; ++b) {
        Tensor zi(item_shape);
        std::copy(z.data() + b * item, z.data() + (b + 1) * item, zi.data());
        Tensor oi(raw_shape);
        std::copy(raw.data() + b * raw_item, raw.data() + (b + 1) * raw_item, oi.data());
        const double t = ts[static_cast<size_t>(b)];
        Tensor xi = to_x_prediction(oi, kind, zi, cosine_alpha(t), cosine_sigma(t));
        std::copy(xi.data(), xi.data() + item, x.data() + b * item);
    }
    return x;
}

Tensor UNetDenoiser::predict_x(const Tensor& z, double t) const {
    std::vector<double> ts(static_cast<size_t>(z.dim(0)), t);
    return model_->predict_x_batch(z, ts);
}

Tensor UNetDenoiser::predict_x_batch(const Tensor& z, std::span<const double> ts) const {
    return model_->predict_x_batch(z, ts);
}

} // namespace meldiff
