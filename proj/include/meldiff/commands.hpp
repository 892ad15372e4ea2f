#pragma once

#include <string>
#include <vector>

#include "meldiff/config.hpp"
#include "meldiff/train.hpp"

namespace meldiff {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitRuntimeError = 2;
inline constexpr int kExitPartialIngest = 3;

int run_ingest(const RunConfig& cfg);
int run_train(const RunConfig& cfg);
int run_distill(const RunConfig& cfg);
int run_sample(const RunConfig& cfg);
int run_eval(const RunConfig& cfg);
// Round-trips the packing of a tensor file holding "mel" (1, 128, 384) or
// "slice" (3, 128, 128) and writes the counterpart next to the outputs.
int run_pack(const RunConfig& cfg, const std::string& input_path);

// Loads every slice referenced by a manifest written by run_ingest; checks
// the stats file's layout tag against this build.
Dataset load_manifest_dataset(const std::string& manifest_path);

// Loads an evaluation set: either a container with an array "slices"
// (N, 3, 128, 128) or an ingest manifest.
Tensor load_slice_set(const std::string& path);

} // namespace meldiff
