#pragma once

#include <string>
#include <utility>

#include "meldiff/container.hpp"
#include "meldiff/train.hpp"
#include "meldiff/unet.hpp"

namespace meldiff {

inline constexpr int kCheckpointFormatVersion = 1;

// Low-level framing shared by all checkpoint kinds: a JSON metadata blob
// followed by a self-checksummed tensor container.
void write_meta_blob(const std::string& path, const std::string& meta_json,
                     const TensorContainer& tensors);
std::pair<std::string, TensorContainer> read_meta_blob(const std::string& path);

// Self-describing denoiser checkpoint: format version, architecture config,
// parameterization, schedule, snake-layout tag, step counter, parameters and
// optionally Adam state. load(save(m)) is bit-exact on every tensor.
void save_checkpoint(UNetModel& model, const std::string& path, const Adam* optimizer = nullptr);

struct LoadedCheckpoint {
    UNetModel model;
    std::string layout_tag;
    std::string schedule_family;
    bool has_optimizer = false;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Restores Adam moments saved alongside the model; the optimizer must have
// been constructed from the loaded model's parameters.
void load_optimizer_state(const std::string& path, UNetModel& model, Adam& optimizer);

} // namespace meldiff
