#pragma once

#include <string>
#include <string_view>

#include "meldiff/tensor.hpp"

namespace meldiff {

// Denoiser output parameterization. V keeps the implied x-prediction
// well-conditioned down to zero SNR; EPS degenerates there and is retained
// for the plain DDPM baseline only.
enum class ParamKind { X, EPS, XEPS, V };

// Reconstruction-loss weighting in x-space. SNR is the standard epsilon-MSE
// equivalent; TRUNCATED_SNR and SNR_PLUS_ONE stay finite at zero SNR and are
// the distillation-safe choices.
enum class WeightScheme { SNR, TRUNCATED_SNR, SNR_PLUS_ONE };

std::string to_string(ParamKind k);
std::string to_string(WeightScheme w);
ParamKind param_kind_from_string(std::string_view s);
WeightScheme weight_scheme_from_string(std::string_view s);

// v = alpha * eps - sigma * x.
Tensor v_from(const Tensor& x, const Tensor& eps, double alpha, double sigma);

// Recovers the x-prediction implied by a raw model output.
//   X:    out
//   EPS:  (z - sigma*out) / alpha          (requires alpha > 0)
//   V:    alpha*z - sigma*out
//   XEPS: sigma^2 * x_tilde + alpha*(z - sigma*eps_tilde), where out stacks
//         (x_tilde, eps_tilde) along its leading axis.
Tensor to_x_prediction(const Tensor& out, ParamKind kind, const Tensor& z, double alpha,
                       double sigma);

// Weight for the x-space reconstruction loss at log SNR lambda. Accepts
// lambda = -inf (zero-SNR endpoint): SNR -> 0, TRUNCATED_SNR -> 1,
// SNR_PLUS_ONE -> 1.
double loss_weight(double lambda, WeightScheme scheme);

// Raw output channels per data channel: 2 for XEPS, 1 otherwise.
int output_multiplicity(ParamKind k);

} // namespace meldiff
