#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "meldiff/rng.hpp"
#include "meldiff/schedule.hpp"
#include "meldiff/tensor.hpp"

namespace meldiff {

// A noisy latent together with its fractional time in [0,1].
struct LatentState {
    Tensor z;
    double t = 0.0;
};

// Inference-side denoiser: everything the samplers and the distiller need.
// Implementations must be safe for concurrent calls on an immutable
// parameter snapshot.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    // Implied clean-data prediction at fractional time t, same shape as z.
    virtual Tensor predict_x(const Tensor& z, double t) const = 0;

    // Batched variant with one fractional time per leading-dim item.
    // Default loops over items; models with a batched forward override it.
    virtual Tensor predict_x_batch(const Tensor& z, std::span<const double> ts) const;

    // Shape of one sample (no batch dim).
    virtual std::vector<int64_t> item_shape() const = 0;
};

// z = alpha_t * x0 + sigma_t * eps.
LatentState q_sample(const Tensor& x0, double t, const Tensor& eps);

// Deterministic update z' = alpha_t' * x_hat + (sigma_t'/sigma_t) * (z - alpha_t * x_hat),
// moving from state.t down to t_next. Requires sigma_t > 0 and t_next < t.
LatentState ddim_step(const LatentState& state, const Tensor& x_hat, double t_next);

// One stochastic reverse step on the discrete schedule: posterior mean from
// x_hat plus the fixed lower-bound posterior standard deviation times noise.
// The noise term is dropped at i = 1.
LatentState ancestral_step(const LatentState& state, const Tensor& x_hat, int i,
                           const NoiseSchedule& s, const Tensor& noise);

// N-step deterministic sampler on the uniform grid t = i/N. Starts from
// standard normal noise at t = 1 and returns the x-prediction of the final
// model call, never touching the sigma = 0 endpoint.
Tensor sample_ddim(const Denoiser& d, int N, int batch, RandomStream& rng);

// Full T-step stochastic sampler on the discrete schedule.
Tensor sample_ancestral(const Denoiser& d, const NoiseSchedule& s, int batch, RandomStream& rng);

// Closed-form posterior-mean denoiser for data ~ N(mean, data_std^2 * I):
//   x_hat = mean + alpha_t * s^2 / (alpha_t^2 * s^2 + sigma_t^2) * (z - alpha_t * mean).
// Exact for Gaussian data; used to exercise the samplers end to end.
class GaussianAnalyticDenoiser : public Denoiser {
public:
    GaussianAnalyticDenoiser(Tensor mean, double data_std)
        : mean_(std::move(mean)), data_std_(data_std) {}

    Tensor predict_x(const Tensor& z, double t) const override;
    std::vector<int64_t> item_shape() const override { return mean_.shape(); }

    const Tensor& mean() const { return mean_; }
    double data_std() const { return data_std_; }

private:
    Tensor mean_;
    double data_std_;
};

} // namespace meldiff
