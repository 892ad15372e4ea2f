#include "meldiff/diffusion.hpp"

#include <cmath>
#include <string>

#include "meldiff/errors.hpp"

namespace meldiff {

namespace {

void check_fraction(double t, const char* who) {
    if (!(t >= 0.0 && t <= 1.0))
        throw InvalidArgument(std::string(who) + ": fractional time " + std::to_string(t) +
                              " outside [0,1]");
}

std::vector<int64_t> batched_shape(int batch, const std::vector<int64_t>& item) {
    std::vector<int64_t> s;
    s.reserve(item.size() + 1);
    s.push_back(batch);
    s.insert(s.end(), item.begin(), item.end());
    return s;
}

} // namespace

Tensor Denoiser::predict_x_batch(const Tensor& z, std::span<const double> ts) const {
    const int64_t n = z.dim(0);
    if (static_cast<int64_t>(ts.size()) != n)
        throw InvalidArgument("predict_x_batch: one fractional time per item required");
    const int64_t stride = z.size() / n;
    Tensor out(z.shape());
    std::vector<int64_t> item(z.shape().begin() + 1, z.shape().end());
    for (int64_t b = 0; b < n; ++b) {
        Tensor zi = Tensor(batched_shape(1, item));
        for (int64_t j = 0; j < stride; ++j) zi[j] = z[b * stride + j];
        Tensor xi = predict_x(zi, ts[static_cast<size_t>(b)]);
        for (int64_t j = 0; j < stride; ++j) out[b * stride + j] = xi[j];
    }
    return out;
}

LatentState q_sample(const Tensor& x0, double t, const Tensor& eps) {
    if (!x0.same_shape(eps)) throw InvalidArgument("q_sample: x0 and eps shapes differ");
    check_fraction(t, "q_sample");
    const double a = cosine_alpha(t);
    const double s = cosine_sigma(t);
    LatentState st;
    st.t = t;
    st.z = Tensor(x0.shape());
    for (int64_t i = 0; i < x0.size(); ++i) st.z[i] = a * x0[i] + s * eps[i];
    return st;
}

LatentState ddim_step(const LatentState& state, const Tensor& x_hat, double t_next) {
    if (!state.z.same_shape(x_hat)) throw InvalidArgument("ddim_step: x_hat shape differs from z");
    check_fraction(state.t, "ddim_step");
    check_fraction(t_next, "ddim_step");
    if (!(t_next < state.t))
        throw InvalidArgument("ddim_step: target time " + std::to_string(t_next) +
                              " must precede current time " + std::to_string(state.t));
    const double a = cosine_alpha(state.t);
    const double s = cosine_sigma(state.t);
    if (s <= 0.0) throw InvalidArgument("ddim_step: sigma is zero at t = 0");
    const double a_next = cosine_alpha(t_next);
    const double s_next = cosine_sigma(t_next);
    const double shrink = s_next / s;

    LatentState out;
    out.t = t_next;
    out.z = Tensor(state.z.shape());
    for (int64_t i = 0; i < state.z.size(); ++i)
        out.z[i] = a_next * x_hat[i] + shrink * (state.z[i] - a * x_hat[i]);
    return out;
}

LatentState ancestral_step(const LatentState& state, const Tensor& x_hat, int i,
                           const NoiseSchedule& s, const Tensor& noise) {
    if (i < 1 || i > s.T)
        throw InvalidArgument("ancestral_step: step index " + std::to_string(i) +
                              " outside [1, T]");
    if (!state.z.same_shape(x_hat) || !state.z.same_shape(noise))
        throw InvalidArgument("ancestral_step: shape mismatch");

    // Cumulative signal powers; beta follows from the alpha recursion.
    const double a_cur = s.alpha[static_cast<size_t>(i)] * s.alpha[static_cast<size_t>(i)];
    const double a_prev = s.alpha[static_cast<size_t>(i - 1)] * s.alpha[static_cast<size_t>(i - 1)];
    const double beta = 1.0 - a_cur / a_prev;
    const double one_minus_cur = 1.0 - a_cur;

    const double coef_x = std::sqrt(a_prev) * beta / one_minus_cur;
    const double coef_z = std::sqrt(a_cur / a_prev) * (1.0 - a_prev) / one_minus_cur;
    const double post_var = (1.0 - a_prev) / one_minus_cur * beta;
    const double post_std = (i > 1) ? std::sqrt(post_var) : 0.0;

    LatentState out;
    out.t = static_cast<double>(i - 1) / static_cast<double>(s.T);
    out.z = Tensor(state.z.shape());
    for (int64_t k = 0; k < state.z.size(); ++k)
        out.z[k] = coef_x * x_hat[k] + coef_z * state.z[k] + post_std * noise[k];
    return out;
}

Tensor sample_ddim(const Denoiser& d, int N, int batch, RandomStream& rng) {
    if (N < 1) throw InvalidArgument("sample_ddim: need at least one step");
    if (batch < 1) throw InvalidArgument("sample_ddim: batch must be positive");

    Tensor z = rng.normal_tensor(batched_shape(batch, d.item_shape()));
    for (int i = N; i >= 1; --i) {
        const double t = static_cast<double>(i) / static_cast<double>(N);
        Tensor x_hat = d.predict_x(z, t);
        if (!x_hat.all_finite())
            throw NumericFailure("sample_ddim: non-finite prediction at step " + std::to_string(i),
                                 i);
        if (i == 1) return x_hat; // final x-prediction; never step to sigma = 0
        const double t_next = static_cast<double>(i - 1) / static_cast<double>(N);
        z = ddim_step({std::move(z), t}, x_hat, t_next).z;
    }
    return z; // unreachable
}

Tensor sample_ancestral(const Denoiser& d, const NoiseSchedule& s, int batch, RandomStream& rng) {
    if (batch < 1) throw InvalidArgument("sample_ancestral: batch must be positive");
    Tensor z = rng.normal_tensor(batched_shape(batch, d.item_shape()));
    Tensor zero_noise(z.shape());
    for (int i = s.T; i >= 1; --i) {
        const double t = static_cast<double>(i) / static_cast<double>(s.T);
        Tensor x_hat = d.predict_x(z, t);
        if (!x_hat.all_finite())
            throw NumericFailure(
                "sample_ancestral: non-finite prediction at step " + std::to_string(i), i);
        const Tensor& noise = (i > 1) ? rng.normal_tensor(z.shape()) : zero_noise;
        z = ancestral_step({std::move(z), t}, x_hat, i, s, noise).z;
    }
    return z;
}

Tensor GaussianAnalyticDenoiser::predict_x(const Tensor& z, double t) const {
    const double a = cosine_alpha(t);
    const double sg = cosine_sigma(t);
    const double s2 = data_std_ * data_std_;
    const double gain = a * s2 / (a * a * s2 + sg * sg);

    const int64_t item = mean_.size();
    if (z.size() % item != 0)
        throw InvalidArgument("analytic denoiser: latent shape incompatible with data mean");
    Tensor x(z.shape());
    const int64_t n = z.size() / item;
    for (int64_t b = 0; b < n; ++b)
        for (int64_t j = 0; j < item; ++j) {
            const double m = mean_[j];
            x[b * item + j] = m + gain * (z[b * item + j] - a * m);
        }
    return x;
}

} // namespace meldiff
