#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "meldiff/diffusion.hpp"
#include "meldiff/train.hpp"
#include "meldiff/unet.hpp"

namespace meldiff {

struct DistillConfig {
    int n0 = 64;               // student sampling steps of the first round
    int rounds = 3;            // halvings; round k runs at n0 / 2^k
    int steps_per_round = 10000;
    double lr = 2e-5;
    int batch_size = 8;
    WeightScheme weighting = WeightScheme::SNR_PLUS_ONE;
    ParamKind kind = ParamKind::V;
    uint64_t seed = 0;
    std::string loss_csv_prefix; // empty: no curves written

    void validate() const;
};

// Inverts one student DDIM step: the x that carries z_t to z_t'' in a single
// step. Exposed with explicit coefficients so the degenerate-denominator
// guard is testable; the cosine schedule never triggers it on interior grid
// points.
Tensor invert_student_step(const Tensor& z_tpp, const Tensor& z_t, double a_t, double s_t,
                           double a_tpp, double s_tpp);

// Two teacher DDIM half-steps from t = i/N down to t'' = (i-1)/N, then the
// one-step inversion. The pair (z_t, result) fully determines the student's
// regression target.
Tensor distill_target(const Denoiser& teacher, const LatentState& state, int N);

// Batched variant; one discrete index i in {1..N} per item.
Tensor distill_target_batch(const Denoiser& teacher, const Tensor& z, std::span<const int> is,
                            int N);

// One distillation round at N student steps. The student must already be a
// copy of the teacher; the teacher stays frozen throughout.
void distill_round(const Denoiser& teacher, TrainableModel& student, const Dataset& data, int N,
                   const DistillConfig& cfg, uint64_t round_seed,
                   const std::string& loss_csv_path = {}, const StepCallback& on_step = nullptr);

// Full progressive schedule: returns the student of every round,
// [student@n0, student@n0/2, ...], each round seeded from the previous
// student. on_round fires after each round completes.
std::vector<UNetModel> progressive_distill(
    const UNetModel& model, const Dataset& data, const DistillConfig& cfg,
    const std::function<void(int round, int n_steps, const UNetModel&)>& on_round = nullptr);

} // namespace meldiff
