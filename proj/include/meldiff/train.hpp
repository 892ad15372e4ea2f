#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "meldiff/nn.hpp"
#include "meldiff/param.hpp"
#include "meldiff/rng.hpp"
#include "meldiff/schedule.hpp"
#include "meldiff/tensor.hpp"

namespace meldiff {

// In-memory training set of packed slices, all the same shape.
struct Dataset {
    std::vector<Tensor> items;

    bool empty() const { return items.empty(); }
    size_t size() const { return items.size(); }
};

// On NumericFailure the model still holds the last successfully updated
// parameters; callers checkpoint that state as the rescue copy.
struct TrainConfig {
    double lr = 2e-5;
    int total_steps = 0;
    int batch_size = 8;
    WeightScheme weighting = WeightScheme::SNR_PLUS_ONE;
    uint64_t seed = 0;
    std::string loss_csv_path; // empty: no curve written
};

// lr0 * cos^2(pi/2 * step/total): lr0 at step 0, lr0/2 at the midpoint, 0 at the end.
double cosine_annealed_lr(double lr0, int step, int total_steps);

class Adam {
public:
    Adam() = default;
    explicit Adam(const std::vector<ParamRef>& params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    void step(double lr);
    int64_t steps_taken() const { return t_; }

    // Moment buffers in parameter order, for optional checkpointing.
    std::vector<Tensor>& m() { return m_; }
    std::vector<Tensor>& v() { return v_; }
    void set_steps_taken(int64_t t) { t_ = t; }

private:
    std::vector<ParamRef> params_;
    std::vector<Tensor> m_, v_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    int64_t t_ = 0;
};

// Weighted reconstruction loss in x-space on prepared latents:
//   loss = mean_i w(lambda_{t_i}) * mse(x_hat_i, target_i)
// Runs forward in training mode and accumulates parameter gradients through
// the parameterization inversion. Items at zero weight are skipped entirely,
// so the eps parameterization never divides by alpha = 0 under SNR weighting.
double weighted_x_loss_grad(TrainableModel& model, const Tensor& z, std::span<const double> ts,
                            const Tensor& target, WeightScheme weighting);

// Loss only, no gradients. Eval mode by default; training mode reproduces
// the exact function the gradients differentiate (batch-norm batch
// statistics), which finite-difference checks need.
double weighted_x_loss(TrainableModel& model, const Tensor& z, std::span<const double> ts,
                       const Tensor& target, WeightScheme weighting, Mode mode = Mode::kEval);

using StepCallback = std::function<void(int step, double loss, double lr)>;

// Standard denoiser training: per step draws a batch, a discrete noise level
// i ~ U{1..T} per item, Gaussian noise, forms z_t and regresses the
// x-prediction onto the clean slice. Mutates the model in place.
void train(TrainableModel& model, const Dataset& data, const TrainConfig& cfg,
           const NoiseSchedule& schedule, const StepCallback& on_step = nullptr);

} // namespace meldiff
