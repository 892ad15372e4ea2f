#include "meldiff/nn.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "meldiff/errors.hpp"

namespace meldiff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMat>;
using CMapM = Eigen::Map<const RowMat>;

void check_ncl(const Tensor& x, const char* who) {
    if (x.rank() != 3) throw InvalidArgument(std::string(who) + ": expected (N, C, L) input");
}

Tensor init_weights(std::vector<int64_t> shape, int fan_in, RandomStream* rng) {
    Tensor w(std::move(shape));
    if (rng != nullptr) {
        const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (int64_t i = 0; i < w.size(); ++i) w[i] = std * rng->normal();
    }
    return w;
}

} // namespace

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(int in_ch, int out_ch, int kernel, RandomStream* rng)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), pad_(kernel / 2) {
    w_ = init_weights({out_ch, static_cast<int64_t>(in_ch) * kernel}, in_ch * kernel, rng);
    b_ = Tensor({out_ch});
    gw_ = Tensor(w_.shape());
    gb_ = Tensor(b_.shape());
}

Tensor Conv1d::forward(const Tensor& x, Mode mode) {
    check_ncl(x, "Conv1d");
    if (x.dim(1) != in_ch_) throw InvalidArgument("Conv1d: channel count mismatch");
    const int64_t n = x.dim(0), L = x.dim(2);
    Tensor y({n, out_ch_, L});

    CMapM wm(w_.data(), out_ch_, static_cast<int64_t>(in_ch_) * kernel_);
    if (kernel_ == 1) {
        for (int64_t b = 0; b < n; ++b) {
            CMapM xm(x.data() + b * in_ch_ * L, in_ch_, L);
            MapM ym(y.data() + b * out_ch_ * L, out_ch_, L);
            ym.noalias() = wm * xm;
        }
    } else {
        std::vector<double> col(static_cast<size_t>(in_ch_) * kernel_ * L);
        for (int64_t b = 0; b < n; ++b) {
            const double* xb = x.data() + b * in_ch_ * L;
            for (int ci = 0; ci < in_ch_; ++ci)
                for (int j = 0; j < kernel_; ++j) {
                    double* row = col.data() + (static_cast<size_t>(ci) * kernel_ + j) * L;
                    const int off = j - pad_;
                    for (int64_t l = 0; l < L; ++l) {
                        const int64_t src = l + off;
                        row[l] = (src >= 0 && src < L) ? xb[ci * L + src] : 0.0;
                    }
                }
            CMapM cm(col.data(), static_cast<int64_t>(in_ch_) * kernel_, L);
            MapM ym(y.data() + b * out_ch_ * L, out_ch_, L);
            ym.noalias() = wm * cm;
        }
    }
    for (int64_t b = 0; b < n; ++b)
        for (int co = 0; co < out_ch_; ++co) {
            double* row = y.data() + (b * out_ch_ + co) * L;
            const double bias = b_[co];
            for (int64_t l = 0; l < L; ++l) row[l] += bias;
        }

    if (mode == Mode::kTrain) x_ctx_ = x;
    return y;
}

Tensor Conv1d::backward(const Tensor& gy) {
    if (x_ctx_.empty()) throw NumericFailure("Conv1d: backward without cached forward");
    const int64_t n = x_ctx_.dim(0), L = x_ctx_.dim(2);
    Tensor gx(x_ctx_.shape());

    CMapM wm(w_.data(), out_ch_, static_cast<int64_t>(in_ch_) * kernel_);
    MapM gwm(gw_.data(), out_ch_, static_cast<int64_t>(in_ch_) * kernel_);

    std::vector<double> col;
    std::vector<double> gcol;
    if (kernel_ != 1) {
        col.resize(static_cast<size_t>(in_ch_) * kernel_ * L);
        gcol.resize(col.size());
    }

    for (int64_t b = 0; b < n; ++b) {
        CMapM gym(gy.data() + b * out_ch_ * L, out_ch_, L);
        for (int co = 0; co < out_ch_; ++co) {
            const double* row = gy.data() + (b * out_ch_ + co) * L;
            double s = 0.0;
            for (int64_t l = 0; l < L; ++l) s += row[l];
            gb_[co] += s;
        }
        if (kernel_ == 1) {
            CMapM xm(x_ctx_.data() + b * in_ch_ * L, in_ch_, L);
            MapM gxm(gx.data() + b * in_ch_ * L, in_ch_, L);
            gwm.noalias() += gym * xm.transpose();
            gxm.noalias() = wm.transpose() * gym;
        } else {
            const double* xb = x_ctx_.data() + b * in_ch_ * L;
            for (int ci = 0; ci < in_ch_; ++ci)
                for (int j = 0; j < kernel_; ++j) {
                    double* row = col.data() + (static_cast<size_t>(ci) * kernel_ + j) * L;
                    const int off = j - pad_;
                    for (int64_t l = 0; l < L; ++l) {
                        const int64_t src = l + off;
                        row[l] = (src >= 0 && src < L) ? xb[ci * L + src] : 0.0;
                    }
                }
            CMapM cm(col.data(), static_cast<int64_t>(in_ch_) * kernel_, L);
            MapM gcm(gcol.data(), static_cast<int64_t>(in_ch_) * kernel_, L);
            gwm.noalias() += gym * cm.transpose();
            gcm.noalias() = wm.transpose() * gym;
            double* gxb = gx.data() + b * in_ch_ * L;
            for (int ci = 0; ci < in_ch_; ++ci)
                for (int j = 0; j < kernel_; ++j) {
                    const double* row = gcol.data() + (static_cast<size_t>(ci) * kernel_ + j) * L;
                    const int off = j - pad_;
                    for (int64_t l = 0; l < L; ++l) {
                        const int64_t dst = l + off;
                        if (dst >= 0 && dst < L) gxb[ci * L + dst] += row[l];
                    }
                }
        }
    }
    return gx;
}

void Conv1d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".weight", &w_, &gw_, true});
    out.push_back({prefix + ".bias", &b_, &gb_, true});
}

// ------------------------------------------------------- ConvTranspose1d

ConvTranspose1d::ConvTranspose1d(int in_ch, int out_ch, RandomStream* rng)
    : in_ch_(in_ch), out_ch_(out_ch) {
    w_ = init_weights({2, out_ch, in_ch}, in_ch, rng);
    b_ = Tensor({out_ch});
    gw_ = Tensor(w_.shape());
    gb_ = Tensor(b_.shape());
}

Tensor ConvTranspose1d::forward(const Tensor& x, Mode mode) {
    check_ncl(x, "ConvTranspose1d");
    if (x.dim(1) != in_ch_) throw InvalidArgument("ConvTranspose1d: channel count mismatch");
    const int64_t n = x.dim(0), L = x.dim(2), Lo = 2 * L;
    Tensor y({n, out_ch_, Lo});
    std::vector<double> plane(static_cast<size_t>(out_ch_) * L);
    for (int64_t b = 0; b < n; ++b) {
        CMapM xm(x.data() + b * in_ch_ * L, in_ch_, L);
        for (int j = 0; j < 2; ++j) {
            CMapM wj(w_.data() + static_cast<int64_t>(j) * out_ch_ * in_ch_, out_ch_, in_ch_);
            MapM pm(plane.data(), out_ch_, L);
            pm.noalias() = wj * xm;
            double* yb = y.data() + b * out_ch_ * Lo;
            for (int co = 0; co < out_ch_; ++co) {
                const double bias = b_[co];
                for (int64_t l = 0; l < L; ++l)
                    yb[co * Lo + 2 * l + j] = plane[static_cast<size_t>(co) * L + l] + bias;
            }
        }
    }
    if (mode == Mode::kTrain) x_ctx_ = x;
    return y;
}

Tensor ConvTranspose1d::backward(const Tensor& gy) {
    if (x_ctx_.empty()) throw NumericFailure("ConvTranspose1d: backward without cached forward");
    const int64_t n = x_ctx_.dim(0), L = x_ctx_.dim(2), Lo = 2 * L;
    Tensor gx(x_ctx_.shape());
    std::vector<double> gplane(static_cast<size_t>(out_ch_) * L);
    for (int64_t b = 0; b < n; ++b) {
        CMapM xm(x_ctx_.data() + b * in_ch_ * L, in_ch_, L);
        MapM gxm(gx.data() + b * in_ch_ * L, in_ch_, L);
        const double* gyb = gy.data() + b * out_ch_ * Lo;
        for (int j = 0; j < 2; ++j) {
            for (int co = 0; co < out_ch_; ++co) {
                double* row = gplane.data() + static_cast<size_t>(co) * L;
                double bsum = 0.0;
                for (int64_t l = 0; l < L; ++l) {
                    row[l] = gyb[co * Lo + 2 * l + j];
                    bsum += row[l];
                }
                gb_[co] += bsum;
            }
            CMapM gpm(gplane.data(), out_ch_, L);
            MapM gwj(gw_.data() + static_cast<int64_t>(j) * out_ch_ * in_ch_, out_ch_, in_ch_);
            CMapM wj(w_.data() + static_cast<int64_t>(j) * out_ch_ * in_ch_, out_ch_, in_ch_);
            gwj.noalias() += gpm * xm.transpose();
            gxm.noalias() += wj.transpose() * gpm;
        }
    }
    return gx;
}

void ConvTranspose1d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".weight", &w_, &gw_, true});
    out.push_back({prefix + ".bias", &b_, &gb_, true});
}

// ------------------------------------------------------------ BatchNorm1d

BatchNorm1d::BatchNorm1d(int channels) : ch_(channels) {
    gamma_ = Tensor::full({channels}, 1.0);
    beta_ = Tensor({channels});
    ggamma_ = Tensor({channels});
    gbeta_ = Tensor({channels});
    run_mean_ = Tensor({channels});
    run_var_ = Tensor::full({channels}, 1.0);
}

Tensor BatchNorm1d::forward(const Tensor& x, Mode mode) {
    check_ncl(x, "BatchNorm1d");
    if (x.dim(1) != ch_) throw InvalidArgument("BatchNorm1d: channel count mismatch");
    const int64_t n = x.dim(0), L = x.dim(2);
    Tensor y(x.shape());

    if (mode == Mode::kEval) {
        for (int c = 0; c < ch_; ++c) {
            const double scale = gamma_[c] / std::sqrt(run_var_[c] + eps_);
            const double shift = beta_[c] - scale * run_mean_[c];
            for (int64_t b = 0; b < n; ++b) {
                const double* xr = x.data() + (b * ch_ + c) * L;
                double* yr = y.data() + (b * ch_ + c) * L;
                for (int64_t l = 0; l < L; ++l) yr[l] = scale * xr[l] + shift;
            }
        }
        return y;
    }

    const int64_t m = n * L;
    xhat_ctx_ = Tensor(x.shape());
    inv_std_ctx_ = Tensor({ch_});
    ctx_m_ = m;
    for (int c = 0; c < ch_; ++c) {
        double mean = 0.0;
        for (int64_t b = 0; b < n; ++b) {
            const double* xr = x.data() + (b * ch_ + c) * L;
            for (int64_t l = 0; l < L; ++l) mean += xr[l];
        }
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (int64_t b = 0; b < n; ++b) {
            const double* xr = x.data() + (b * ch_ + c) * L;
            for (int64_t l = 0; l < L; ++l) {
                const double d = xr[l] - mean;
                var += d * d;
            }
        }
        var /= static_cast<double>(m);
        const double inv_std = 1.0 / std::sqrt(var + eps_);
        inv_std_ctx_[c] = inv_std;

        const double g = gamma_[c], bt = beta_[c];
        for (int64_t b = 0; b < n; ++b) {
            const double* xr = x.data() + (b * ch_ + c) * L;
            double* hr = xhat_ctx_.data() + (b * ch_ + c) * L;
            double* yr = y.data() + (b * ch_ + c) * L;
            for (int64_t l = 0; l < L; ++l) {
                const double h = (xr[l] - mean) * inv_std;
                hr[l] = h;
                yr[l] = g * h + bt;
            }
        }
        const double unbiased = (m > 1) ? var * static_cast<double>(m) / static_cast<double>(m - 1)
                                        : var;
        run_mean_[c] = (1.0 - momentum_) * run_mean_[c] + momentum_ * mean;
        run_var_[c] = (1.0 - momentum_) * run_var_[c] + momentum_ * unbiased;
    }
    return y;
}

Tensor BatchNorm1d::backward(const Tensor& gy) {
    if (xhat_ctx_.empty()) throw NumericFailure("BatchNorm1d: backward without cached forward");
    const int64_t n = xhat_ctx_.dim(0), L = xhat_ctx_.dim(2);
    const double m = static_cast<double>(ctx_m_);
    Tensor gx(xhat_ctx_.shape());
    for (int c = 0; c < ch_; ++c) {
        double sum_gy = 0.0, sum_gy_h = 0.0;
        for (int64_t b = 0; b < n; ++b) {
            const double* gr = gy.data() + (b * ch_ + c) * L;
            const double* hr = xhat_ctx_.data() + (b * ch_ + c) * L;
            for (int64_t l = 0; l < L; ++l) {
                sum_gy += gr[l];
                sum_gy_h += gr[l] * hr[l];
            }
        }
        ggamma_[c] += sum_gy_h;
        gbeta_[c] += sum_gy;
        const double k = gamma_[c] * inv_std_ctx_[c] / m;
        for (int64_t b = 0; b < n; ++b) {
            const double* gr = gy.data() + (b * ch_ + c) * L;
            const double* hr = xhat_ctx_.data() + (b * ch_ + c) * L;
            double* xr = gx.data() + (b * ch_ + c) * L;
            for (int64_t l = 0; l < L; ++l)
                xr[l] = k * (m * gr[l] - sum_gy - hr[l] * sum_gy_h);
        }
    }
    return gx;
}

void BatchNorm1d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".gamma", &gamma_, &ggamma_, true});
    out.push_back({prefix + ".beta", &beta_, &gbeta_, true});
    out.push_back({prefix + ".running_mean", &run_mean_, nullptr, false});
    out.push_back({prefix + ".running_var", &run_var_, nullptr, false});
}

// ------------------------------------------------------------------ ReLU

Tensor ReLU::forward(const Tensor& x, Mode mode) {
    Tensor y(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    if (mode == Mode::kTrain) mask_ctx_ = y;
    return y;
}

Tensor ReLU::backward(const Tensor& gy) {
    if (mask_ctx_.empty()) throw NumericFailure("ReLU: backward without cached forward");
    Tensor gx(gy.shape());
    for (int64_t i = 0; i < gy.size(); ++i) gx[i] = mask_ctx_[i] > 0.0 ? gy[i] : 0.0;
    return gx;
}

// ------------------------------------------------------------- MaxPool1d

Tensor MaxPool1d::forward(const Tensor& x, Mode mode) {
    check_ncl(x, "MaxPool1d");
    const int64_t n = x.dim(0), c = x.dim(1), L = x.dim(2);
    if (L % 2 != 0) throw InvalidArgument("MaxPool1d: time axis must have even length");
    const int64_t Lo = L / 2;
    Tensor y({n, c, Lo});
    if (mode == Mode::kTrain) {
        argmax_ctx_.assign(static_cast<size_t>(y.size()), 0);
        in_shape_ctx_ = x.shape();
    }
    for (int64_t i = 0; i < n * c; ++i) {
        const double* xr = x.data() + i * L;
        double* yr = y.data() + i * Lo;
        for (int64_t l = 0; l < Lo; ++l) {
            const double a = xr[2 * l], b = xr[2 * l + 1];
            const bool second = b > a;
            yr[l] = second ? b : a;
            if (mode == Mode::kTrain)
                argmax_ctx_[static_cast<size_t>(i * Lo + l)] = second ? 1 : 0;
        }
    }
    return y;
}

Tensor MaxPool1d::backward(const Tensor& gy) {
    if (in_shape_ctx_.empty()) throw NumericFailure("MaxPool1d: backward without cached forward");
    Tensor gx(in_shape_ctx_);
    const int64_t Lo = gy.dim(2), rows = gy.dim(0) * gy.dim(1);
    for (int64_t i = 0; i < rows; ++i) {
        const double* gr = gy.data() + i * Lo;
        double* xr = gx.data() + i * 2 * Lo;
        for (int64_t l = 0; l < Lo; ++l)
            xr[2 * l + argmax_ctx_[static_cast<size_t>(i * Lo + l)]] += gr[l];
    }
    return gx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_dim, int out_dim, RandomStream* rng) : in_dim_(in_dim), out_dim_(out_dim) {
    w_ = init_weights({out_dim, in_dim}, in_dim, rng);
    b_ = Tensor({out_dim});
    gw_ = Tensor(w_.shape());
    gb_ = Tensor(b_.shape());
}

Tensor Linear::forward(const Tensor& x, Mode mode) {
    if (x.rank() != 2 || x.dim(1) != in_dim_) throw InvalidArgument("Linear: expected (N, in)");
    const int64_t n = x.dim(0);
    Tensor y({n, out_dim_});
    CMapM xm(x.data(), n, in_dim_);
    CMapM wm(w_.data(), out_dim_, in_dim_);
    MapM ym(y.data(), n, out_dim_);
    ym.noalias() = xm * wm.transpose();
    for (int64_t b = 0; b < n; ++b)
        for (int o = 0; o < out_dim_; ++o) y[b * out_dim_ + o] += b_[o];
    if (mode == Mode::kTrain) x_ctx_ = x;
    return y;
}

Tensor Linear::backward(const Tensor& gy) {
    if (x_ctx_.empty()) throw NumericFailure("Linear: backward without cached forward");
    const int64_t n = x_ctx_.dim(0);
    Tensor gx(x_ctx_.shape());
    CMapM gym(gy.data(), n, out_dim_);
    CMapM xm(x_ctx_.data(), n, in_dim_);
    CMapM wm(w_.data(), out_dim_, in_dim_);
    MapM gwm(gw_.data(), out_dim_, in_dim_);
    MapM gxm(gx.data(), n, in_dim_);
    gwm.noalias() += gym.transpose() * xm;
    gxm.noalias() = gym * wm;
    for (int64_t b = 0; b < n; ++b)
        for (int o = 0; o < out_dim_; ++o) gb_[o] += gy[b * out_dim_ + o];
    return gx;
}

void Linear::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".weight", &w_, &gw_, true});
    out.push_back({prefix + ".bias", &b_, &gb_, true});
}

// ------------------------------------------------------- SelfAttention1d

SelfAttention1d::SelfAttention1d(int channels, RandomStream* rng)
    : ch_(channels),
      q_(channels, channels, 1, rng),
      k_(channels, channels, 1, rng),
      v_(channels, channels, 1, rng),
      proj_(channels, channels, 1, rng) {}

Tensor SelfAttention1d::forward(const Tensor& x, Mode mode) {
    check_ncl(x, "SelfAttention1d");
    const int64_t n = x.dim(0), L = x.dim(2);
    const double scale = 1.0 / std::sqrt(static_cast<double>(ch_));

    Tensor q = q_.forward(x, mode);
    Tensor k = k_.forward(x, mode);
    Tensor v = v_.forward(x, mode);
    Tensor attn({n, L, L});
    Tensor o(x.shape());

    for (int64_t b = 0; b < n; ++b) {
        CMapM qm(q.data() + b * ch_ * L, ch_, L);
        CMapM km(k.data() + b * ch_ * L, ch_, L);
        CMapM vm(v.data() + b * ch_ * L, ch_, L);
        MapM am(attn.data() + b * L * L, L, L);
        am.noalias() = (qm.transpose() * km) * scale;
        // row-wise softmax over key positions
        for (int64_t i = 0; i < L; ++i) {
            double* row = attn.data() + b * L * L + i * L;
            double mx = row[0];
            for (int64_t j = 1; j < L; ++j) mx = std::max(mx, row[j]);
            double sum = 0.0;
            for (int64_t j = 0; j < L; ++j) {
                row[j] = std::exp(row[j] - mx);
                sum += row[j];
            }
            const double inv = 1.0 / sum;
            for (int64_t j = 0; j < L; ++j) row[j] *= inv;
        }
        MapM om(o.data() + b * ch_ * L, ch_, L);
        CMapM am2(attn.data() + b * L * L, L, L);
        om.noalias() = vm * am2.transpose();
    }

    Tensor y = proj_.forward(o, mode);
    for (int64_t i = 0; i < y.size(); ++i) y[i] += x[i];

    if (mode == Mode::kTrain) {
        q_ctx_ = std::move(q);
        k_ctx_ = std::move(k);
        v_ctx_ = std::move(v);
        attn_ctx_ = std::move(attn);
    }
    return y;
}

Tensor SelfAttention1d::backward(const Tensor& gy) {
    if (attn_ctx_.empty())
        throw NumericFailure("SelfAttention1d: backward without cached forward");
    const int64_t n = q_ctx_.dim(0), L = q_ctx_.dim(2);
    const double scale = 1.0 / std::sqrt(static_cast<double>(ch_));

    Tensor go = proj_.backward(gy);
    Tensor gq(q_ctx_.shape()), gk(k_ctx_.shape()), gv(v_ctx_.shape());

    for (int64_t b = 0; b < n; ++b) {
        CMapM gom(go.data() + b * ch_ * L, ch_, L);
        CMapM qm(q_ctx_.data() + b * ch_ * L, ch_, L);
        CMapM km(k_ctx_.data() + b * ch_ * L, ch_, L);
        CMapM vm(v_ctx_.data() + b * ch_ * L, ch_, L);
        CMapM am(attn_ctx_.data() + b * L * L, L, L);

        MapM gvm(gv.data() + b * ch_ * L, ch_, L);
        gvm.noalias() = gom * am;

        RowMat ga = gom.transpose() * vm; // (L, L)
        RowMat gs(L, L);
        for (int64_t i = 0; i < L; ++i) {
            const double inner = (ga.row(i).array() * am.row(i).array()).sum();
            gs.row(i) = am.row(i).array() * (ga.row(i).array() - inner);
        }
        MapM gqm(gq.data() + b * ch_ * L, ch_, L);
        MapM gkm(gk.data() + b * ch_ * L, ch_, L);
        gqm.noalias() = (km * gs.transpose()) * scale;
        gkm.noalias() = (qm * gs) * scale;
    }

    Tensor gx = q_.backward(gq);
    gx.add_scaled(k_.backward(gk), 1.0);
    gx.add_scaled(v_.backward(gv), 1.0);
    gx.add_scaled(gy, 1.0); // residual
    return gx;
}

void SelfAttention1d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    q_.collect(prefix + ".q", out);
    k_.collect(prefix + ".k", out);
    v_.collect(prefix + ".v", out);
    proj_.collect(prefix + ".proj", out);
}

// -------------------------------------------------------- time embedding

Tensor sinusoidal_time_embedding(std::span<const double> ts, int dim) {
    if (dim <= 0 || dim % 2 != 0)
        throw InvalidArgument("time embedding dimension must be positive and even");
    const int half = dim / 2;
    const double w_min = std::numbers::pi / 2.0;
    const double ratio = 1000.0;
    Tensor e({static_cast<int64_t>(ts.size()), dim});
    for (size_t b = 0; b < ts.size(); ++b) {
        for (int j = 0; j < half; ++j) {
            const double frac = (half > 1) ? static_cast<double>(j) / (half - 1) : 0.0;
            const double w = w_min * std::pow(ratio, frac);
            e[static_cast<int64_t>(b) * dim + j] = std::sin(w * ts[b]);
            e[static_cast<int64_t>(b) * dim + half + j] = std::cos(w * ts[b]);
        }
    }
    return e;
}

// --------------------------------------------------------- TrainableModel

void TrainableModel::zero_grad() {
    for (auto& p : parameters())
        if (p.grad != nullptr) p.grad->zero();
}

int64_t TrainableModel::param_count() {
    int64_t n = 0;
    for (auto& p : parameters())
        if (p.trainable) n += p.value->size();
    return n;
}

} // namespace meldiff
