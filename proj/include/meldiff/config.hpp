#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "meldiff/audio.hpp"
#include "meldiff/unet.hpp"

namespace meldiff {

// Declarative run configuration: one JSON file with per-command sections,
// every field optional with defaults, unknown keys rejected outright.
// Command-line flags override file values after parsing.
struct RunConfig {
    uint64_t seed = 0;
    std::string out = "out";

    std::string schedule_family = "cosine";
    int schedule_T = 1000;

    UNetConfig model; // param_kind serialized as its enum string

    StftParams stft;
    double log_floor = -80.0;

    struct Ingest {
        std::string audio_dir;
    } ingest;

    struct Train {
        std::string manifest;
        double lr = 2e-5;
        int steps = 10000;
        int batch = 8;
        std::string weighting = "snr_plus_one";
    } train;

    struct Distill {
        std::string teacher;
        std::string manifest;
        int n0 = 64;
        int rounds = 3;
        int steps_per_round = 10000;
        double lr = 2e-5;
        int batch = 8;
        std::string weighting = "snr_plus_one";
    } distill;

    struct Sample {
        std::string checkpoint;
        std::string stats; // norm_stats.json from ingest; empty: full-range default
        int n_steps = 64;
        int count = 4;
        std::string sampler = "ddim"; // or "ancestral" (full-T baseline)
        bool write_wav = true;
        int gl_iters = 64;
    } sample;

    struct Eval {
        std::string generated;  // slices container or manifest.csv
        std::string reference;
        std::string extractor;  // empty: train the stand-in on the fly
        std::string model_id = "model";
        int n_steps = 0;
        int extractor_steps = 600;
    } eval;

    void validate() const;
    std::string to_json() const;
};

// Parses and validates; empty path gives the defaults.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text);

// Writes the post-override configuration next to a command's artifacts so a
// run can be reproduced from the artifact directory alone.
void write_effective_config(const RunConfig& cfg, const std::string& dir);

} // namespace meldiff
