#pragma once

#include <string>
#include <vector>

namespace meldiff {

// Band-limited additive waveforms for the synthetic-tone corpora: 4 timbres
// with distinct harmonic stacks, 12 pitch classes per octave.
enum class Timbre { Sine, Square, Sawtooth, Triangle };

inline constexpr int kPitchClasses = 12;
inline constexpr int kTimbreClasses = 4;

std::string to_string(Timbre t);
Timbre timbre_from_index(int i);

// Semitone ladder above A3 = 220 Hz.
double pitch_class_freq(int pitch_class);

// Harmonics are summed only below 0.45 * sample_rate to avoid aliasing.
std::vector<double> synth_tone(double freq, Timbre timbre, double seconds, int sample_rate,
                               double amplitude = 0.5);

} // namespace meldiff
