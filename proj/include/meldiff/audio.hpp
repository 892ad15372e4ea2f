#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "meldiff/tensor.hpp"

namespace meldiff {

// Version tag of the snake packing layout; stored in checkpoints and dataset
// stats so a model and a pipeline can never disagree silently.
inline constexpr std::string_view kSnakeLayoutTag = "snake-fwd-rev-fwd-v1";

struct StftParams {
    int sample_rate = 22050;
    int win = 2048; // Hann window, power of two
    int hop = 512;
    int n_mels = 128;
    int frames_per_slice = 384;

    int n_bins() const { return win / 2 + 1; }
    // Samples required for exactly `frames` analysis frames (no centering).
    int64_t samples_for_frames(int64_t frames) const {
        return static_cast<int64_t>(win) + (frames - 1) * hop;
    }
    int64_t frame_count(int64_t samples) const {
        return samples < win ? 0 : 1 + (samples - win) / hop;
    }
};

// Affine map between floored dB values and the normalized [-1, 1] range.
struct NormStats {
    double log_floor = -80.0; // dB floor of the log compression
    double scale_min = -80.0; // dataset-level dB range mapped onto [-1, 1]
    double scale_max = 0.0;
};

struct LongMel {
    Tensor data; // (1, n_mels, 3 * 128) normalized log-mel
    NormStats norm;
};

struct MelSlice {
    Tensor data; // (3, n_mels, 128)
    NormStats norm;
};

// 16-bit PCM WAV only; stereo is downmixed to mono. Values scaled to [-1, 1].
std::vector<double> load_wav_mono(const std::string& path, int* sample_rate_out);
void save_wav_mono(const std::string& path, std::span<const double> wave, int sample_rate);

// Iterative radix-2 complex FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

// Magnitude STFT, frames at k*hop with no centering: (n_bins, frames).
// Magnitudes carry a 2/sum(window) gain so a full-scale sine peaks near 1.
Tensor stft_magnitude(std::span<const double> wave, const StftParams& p);

// Triangular mel filterbank (Slaney scale, area-normalized): (n_mels, n_bins).
Tensor mel_filterbank(const StftParams& p);

// Floored dB log-mel of the whole wave: (n_mels, frames).
Tensor log_mel_frames(std::span<const double> wave, const StftParams& p, double log_floor);

double normalize_db(double db, const NormStats& n);
double denormalize_db(double v, const NormStats& n);
// dB back to linear amplitude; values at the floor collapse to exact silence.
double db_to_amplitude(double db, const NormStats& n);

// Full pipeline for a single slice-length clip: magnitude STFT, mel
// projection, floored log compression, affine normalization, center crop to
// exactly frames_per_slice frames.
LongMel mel_spectrogram(std::span<const double> wave, int sample_rate, const StftParams& p = {},
                        const NormStats& stats = {});

// Boustrophedon rearrangement (1, M, 384) -> (3, M, 128): frame blocks
// [0,128) forward, [128,256) reversed, [256,384) forward, so every channel
// boundary is time-adjacent in the original. Exact index permutation.
MelSlice pack(const LongMel& m);
LongMel unpack(const MelSlice& s);

// Non-overlapping consecutive slice windows of a file's mel frames, trailing
// remainder dropped. Un-normalized dB slices, each (n_mels, frames_per_slice).
std::vector<Tensor> slice_db_mels(const std::string& path, const StftParams& p, double log_floor);

// Same windows, normalized with the given stats.
std::vector<LongMel> slice_audio(const std::string& path, const StftParams& p = {},
                                 const NormStats& stats = {});

// Denormalize, invert the mel projection by multiplicative non-negative
// least squares, then recover phase with the given number of Griffin-Lim
// rounds. Deterministic for a fixed phase seed.
std::vector<double> invert_mel(const LongMel& m, int iterations, const StftParams& p = {},
                               uint64_t phase_seed = 0);

} // namespace meldiff
