#include "meldiff/tones.hpp"

#include <cmath>
#include <numbers>

#include "meldiff/errors.hpp"

namespace meldiff {

std::string to_string(Timbre t) {
    switch (t) {
        case Timbre::Sine: return "sine";
        case Timbre::Square: return "square";
        case Timbre::Sawtooth: return "sawtooth";
        case Timbre::Triangle: return "triangle";
    }
    return "?";
}

Timbre timbre_from_index(int i) {
    if (i < 0 || i >= kTimbreClasses) throw InvalidArgument("timbre index outside [0,4)");
    return static_cast<Timbre>(i);
}

double pitch_class_freq(int pitch_class) {
    if (pitch_class < 0 || pitch_class >= kPitchClasses)
        throw InvalidArgument("pitch class outside [0,12)");
    return 220.0 * std::pow(2.0, pitch_class / 12.0);
}

std::vector<double> synth_tone(double freq, Timbre timbre, double seconds, int sample_rate,
                               double amplitude) {
    if (freq <= 0.0 || seconds <= 0.0 || sample_rate <= 0)
        throw InvalidArgument("synth_tone: need positive frequency, duration and sample rate");

    const auto n = static_cast<size_t>(seconds * sample_rate);
    const double nyq_limit = 0.45 * sample_rate;
    std::vector<double> wave(n, 0.0);

    const double w0 = 2.0 * std::numbers::pi * freq / sample_rate;
    const int max_harm = static_cast<int>(nyq_limit / freq);

    auto add_harmonic = [&](int k, double gain) {
        for (size_t i = 0; i < n; ++i) wave[i] += gain * std::sin(w0 * k * static_cast<double>(i));
    };

    switch (timbre) {
        case Timbre::Sine:
            add_harmonic(1, 1.0);
            break;
        case Timbre::Square:
            for (int k = 1; k <= max_harm; k += 2) add_harmonic(k, (4.0 / std::numbers::pi) / k);
            break;
        case Timbre::Sawtooth:
            for (int k = 1; k <= max_harm; ++k)
                add_harmonic(k, (2.0 / std::numbers::pi) * (k % 2 == 0 ? -1.0 : 1.0) / k);
            break;
        case Timbre::Triangle:
            for (int k = 1, s = 1; k <= max_harm; k += 2, s = -s)
                add_harmonic(k, (8.0 / (std::numbers::pi * std::numbers::pi)) * s /
                                    (static_cast<double>(k) * k));
            break;
    }

    double peak = 0.0;
    for (double v : wave) peak = std::max(peak, std::abs(v));
    if (peak > 0.0) {
        const double g = amplitude / peak;
        for (double& v : wave) v *= g;
    }
    return wave;
}

} // namespace meldiff
