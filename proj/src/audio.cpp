#include "meldiff/audio.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "meldiff/errors.hpp"
#include "meldiff/rng.hpp"

namespace meldiff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMat>;
using CMapM = Eigen::Map<const RowMat>;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> hann_window(int win) {
    std::vector<double> w(static_cast<size_t>(win));
    for (int n = 0; n < win; ++n)
        w[static_cast<size_t>(n)] = 0.5 * (1.0 - std::cos(kTwoPi * n / win));
    return w;
}

// Slaney mel scale: linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz) {
    const double f_sp = 200.0 / 3.0;
    const double min_log_hz = 1000.0;
    const double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    if (hz < min_log_hz) return hz / f_sp;
    return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz(double mel) {
    const double f_sp = 200.0 / 3.0;
    const double min_log_hz = 1000.0;
    const double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    if (mel < min_log_mel) return mel * f_sp;
    return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

} // namespace

// -------------------------------------------------------------------- WAV

std::vector<double> load_wav_mono(const std::string& path, int* sample_rate_out) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IngestError("cannot open '" + path + "'");

    auto read_u32 = [&]() {
        uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto read_u16 = [&]() {
        uint16_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 2);
        return v;
    };

    char tag[5] = {0};
    f.read(tag, 4);
    if (!f || std::strncmp(tag, "RIFF", 4) != 0)
        throw IngestError("'" + path + "' is not a RIFF file");
    read_u32(); // overall size
    f.read(tag, 4);
    if (!f || std::strncmp(tag, "WAVE", 4) != 0)
        throw IngestError("'" + path + "' is not a WAV file");

    uint16_t channels = 0, bits = 0, format = 0;
    uint32_t rate = 0;
    std::vector<int16_t> pcm;
    bool have_fmt = false, have_data = false;

    while (f.read(tag, 4)) {
        const uint32_t size = read_u32();
        if (!f) break;
        if (std::strncmp(tag, "fmt ", 4) == 0) {
            format = read_u16();
            channels = read_u16();
            rate = read_u32();
            read_u32(); // byte rate
            read_u16(); // block align
            bits = read_u16();
            if (size > 16) f.seekg(size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::strncmp(tag, "data", 4) == 0) {
            pcm.resize(size / 2);
            f.read(reinterpret_cast<char*>(pcm.data()), static_cast<std::streamsize>(size / 2 * 2));
            if (!f) throw IngestError("'" + path + "': truncated data chunk");
            have_data = true;
        } else {
            f.seekg(size + (size % 2), std::ios::cur);
            continue;
        }
        if (size % 2 == 1) f.seekg(1, std::ios::cur);
    }

    if (!have_fmt || !have_data) throw IngestError("'" + path + "': missing fmt or data chunk");
    if (format != 1 || bits != 16)
        throw IngestError("'" + path + "': only 16-bit PCM WAV is supported");
    if (channels != 1 && channels != 2)
        throw IngestError("'" + path + "': only mono or stereo input is supported");

    const size_t n = pcm.size() / channels;
    std::vector<double> wave(n);
    if (channels == 1) {
        for (size_t i = 0; i < n; ++i) wave[i] = pcm[i] / 32768.0;
    } else {
        for (size_t i = 0; i < n; ++i)
            wave[i] = (pcm[2 * i] / 32768.0 + pcm[2 * i + 1] / 32768.0) * 0.5;
    }
    if (sample_rate_out != nullptr) *sample_rate_out = static_cast<int>(rate);
    return wave;
}

void save_wav_mono(const std::string& path, std::span<const double> wave, int sample_rate) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IngestError("cannot open '" + path + "' for writing");

    const uint32_t data_bytes = static_cast<uint32_t>(wave.size() * 2);
    auto put_u32 = [&](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_u16 = [&](uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); };

    f.write("RIFF", 4);
    put_u32(36 + data_bytes);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    put_u32(16);
    put_u16(1); // PCM
    put_u16(1); // mono
    put_u32(static_cast<uint32_t>(sample_rate));
    put_u32(static_cast<uint32_t>(sample_rate * 2));
    put_u16(2);
    put_u16(16);
    f.write("data", 4);
    put_u32(data_bytes);
    for (double v : wave) {
        const double c = std::clamp(v, -1.0, 1.0);
        const auto s = static_cast<int16_t>(std::lrint(c * 32767.0));
        f.write(reinterpret_cast<const char*>(&s), 2);
    }
}

// -------------------------------------------------------------------- FFT

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw InvalidArgument("FFT size must be a power of two");

    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? kTwoPi : -kTwoPi) / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& v : a) v /= static_cast<double>(n);
}

// ------------------------------------------------------------------- STFT

namespace {

// Complex STFT frames, column f = spectrum of frame f: (n_bins x frames).
std::vector<std::complex<double>> stft_complex(std::span<const double> wave, const StftParams& p) {
    const int64_t frames = p.frame_count(static_cast<int64_t>(wave.size()));
    const int bins = p.n_bins();
    const std::vector<double> w = hann_window(p.win);
    std::vector<std::complex<double>> out(static_cast<size_t>(bins) * frames);
    std::vector<std::complex<double>> buf(static_cast<size_t>(p.win));
    for (int64_t f = 0; f < frames; ++f) {
        const double* src = wave.data() + f * p.hop;
        for (int n = 0; n < p.win; ++n)
            buf[static_cast<size_t>(n)] = src[n] * w[static_cast<size_t>(n)];
        fft_inplace(buf, false);
        for (int k = 0; k < bins; ++k)
            out[static_cast<size_t>(k) * frames + f] = buf[static_cast<size_t>(k)];
    }
    return out;
}

std::vector<double> istft(const std::vector<std::complex<double>>& spec, int64_t frames,
                          const StftParams& p) {
    const int bins = p.n_bins();
    const std::vector<double> w = hann_window(p.win);
    const int64_t out_len = static_cast<int64_t>(p.win) + (frames - 1) * p.hop;
    std::vector<double> num(static_cast<size_t>(out_len), 0.0);
    std::vector<double> den(static_cast<size_t>(out_len), 0.0);
    std::vector<std::complex<double>> buf(static_cast<size_t>(p.win));
    for (int64_t f = 0; f < frames; ++f) {
        for (int k = 0; k < bins; ++k) buf[static_cast<size_t>(k)] = spec[static_cast<size_t>(k) * frames + f];
        for (int k = bins; k < p.win; ++k)
            buf[static_cast<size_t>(k)] = std::conj(buf[static_cast<size_t>(p.win - k)]);
        fft_inplace(buf, true);
        const int64_t off = f * p.hop;
        for (int n = 0; n < p.win; ++n) {
            const double wn = w[static_cast<size_t>(n)];
            num[static_cast<size_t>(off + n)] += wn * buf[static_cast<size_t>(n)].real();
            den[static_cast<size_t>(off + n)] += wn * wn;
        }
    }
    std::vector<double> y(static_cast<size_t>(out_len));
    for (int64_t n = 0; n < out_len; ++n)
        y[static_cast<size_t>(n)] =
            num[static_cast<size_t>(n)] / std::max(den[static_cast<size_t>(n)], 1e-8);
    return y;
}

} // namespace

Tensor stft_magnitude(std::span<const double> wave, const StftParams& p) {
    const int64_t frames = p.frame_count(static_cast<int64_t>(wave.size()));
    const int bins = p.n_bins();
    const std::vector<double> w = hann_window(p.win);
    double wsum = 0.0;
    for (double v : w) wsum += v;
    const double gain = 2.0 / wsum;

    Tensor mag({bins, frames});
    if (frames == 0) return mag;
    const std::vector<std::complex<double>> spec = stft_complex(wave, p);
    for (int64_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(spec[static_cast<size_t>(i)]) * gain;
    return mag;
}

Tensor mel_filterbank(const StftParams& p) {
    const int bins = p.n_bins();
    const double f_max = p.sample_rate / 2.0;
    std::vector<double> pts(static_cast<size_t>(p.n_mels) + 2);
    const double mel_max = hz_to_mel(f_max);
    for (size_t i = 0; i < pts.size(); ++i)
        pts[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(pts.size() - 1));

    Tensor fb({p.n_mels, bins});
    for (int m = 0; m < p.n_mels; ++m) {
        const double lo = pts[static_cast<size_t>(m)];
        const double mid = pts[static_cast<size_t>(m) + 1];
        const double hi = pts[static_cast<size_t>(m) + 2];
        const double norm = 2.0 / (hi - lo); // area normalization
        for (int k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * p.sample_rate / p.win;
            double v = 0.0;
            if (f > lo && f < hi)
                v = (f <= mid) ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
            fb[static_cast<int64_t>(m) * bins + k] = v * norm;
        }
    }
    return fb;
}

Tensor log_mel_frames(std::span<const double> wave, const StftParams& p, double log_floor) {
    const Tensor mag = stft_magnitude(wave, p);
    const Tensor fb = mel_filterbank(p);
    const int64_t frames = mag.dim(1);
    Tensor mel({p.n_mels, frames});
    if (frames > 0) {
        CMapM fbm(fb.data(), p.n_mels, p.n_bins());
        CMapM magm(mag.data(), p.n_bins(), frames);
        MapM melm(mel.data(), p.n_mels, frames);
        melm.noalias() = fbm * magm;
    }
    const double amp_floor = std::pow(10.0, log_floor / 20.0);
    for (int64_t i = 0; i < mel.size(); ++i)
        mel[i] = 20.0 * std::log10(std::max(mel[i], amp_floor));
    return mel;
}

// ---------------------------------------------------------- normalization

double normalize_db(double db, const NormStats& n) {
    if (!(n.scale_max > n.scale_min))
        throw InvalidArgument("normalization stats need scale_min < scale_max");
    const double v = 2.0 * (db - n.scale_min) / (n.scale_max - n.scale_min) - 1.0;
    return std::clamp(v, -1.0, 1.0);
}

double denormalize_db(double v, const NormStats& n) {
    if (!(n.scale_max > n.scale_min))
        throw InvalidArgument("normalization stats need scale_min < scale_max");
    return (v + 1.0) * 0.5 * (n.scale_max - n.scale_min) + n.scale_min;
}

double db_to_amplitude(double db, const NormStats& n) {
    if (db <= n.log_floor + 1e-9) return 0.0; // the floor denotes exact silence
    return std::pow(10.0, db / 20.0);
}

// ------------------------------------------------------------ slice level

LongMel mel_spectrogram(std::span<const double> wave, int sample_rate, const StftParams& p,
                        const NormStats& stats) {
    if (sample_rate != p.sample_rate)
        throw InvalidArgument("sample rate " + std::to_string(sample_rate) +
                              " does not match the configured " + std::to_string(p.sample_rate));
    const int64_t needed = p.samples_for_frames(p.frames_per_slice);
    if (static_cast<int64_t>(wave.size()) < needed)
        throw InvalidArgument("input too short: need at least " + std::to_string(needed) +
                              " samples for " + std::to_string(p.frames_per_slice) + " frames");

    Tensor mel = log_mel_frames(wave, p, stats.log_floor);
    const int64_t frames = mel.dim(1);
    const int64_t off = (frames - p.frames_per_slice) / 2; // center crop

    LongMel out;
    out.norm = stats;
    out.data = Tensor({1, p.n_mels, p.frames_per_slice});
    for (int m = 0; m < p.n_mels; ++m)
        for (int f = 0; f < p.frames_per_slice; ++f)
            out.data[static_cast<int64_t>(m) * p.frames_per_slice + f] =
                normalize_db(mel[static_cast<int64_t>(m) * frames + off + f], stats);
    return out;
}

MelSlice pack(const LongMel& m) {
    if (m.data.rank() != 3 || m.data.dim(0) != 1 || m.data.dim(2) % 3 != 0)
        throw InvalidArgument("pack: expected a (1, M, 3*F) long mel");
    const int64_t mels = m.data.dim(1);
    const int64_t block = m.data.dim(2) / 3;

    MelSlice s;
    s.norm = m.norm;
    s.data = Tensor({3, mels, block});
    const int64_t total = m.data.dim(2);
    for (int64_t r = 0; r < mels; ++r) {
        const double* src = m.data.data() + r * total;
        for (int64_t j = 0; j < block; ++j) {
            s.data[(0 * mels + r) * block + j] = src[j];                       // forward
            s.data[(1 * mels + r) * block + j] = src[2 * block - 1 - j];      // reversed
            s.data[(2 * mels + r) * block + j] = src[2 * block + j];          // forward
        }
    }
    return s;
}

LongMel unpack(const MelSlice& s) {
    if (s.data.rank() != 3 || s.data.dim(0) != 3)
        throw InvalidArgument("unpack: expected a (3, M, F) slice");
    const int64_t mels = s.data.dim(1);
    const int64_t block = s.data.dim(2);

    LongMel m;
    m.norm = s.norm;
    m.data = Tensor({1, mels, 3 * block});
    const int64_t total = 3 * block;
    for (int64_t r = 0; r < mels; ++r) {
        double* dst = m.data.data() + r * total;
        for (int64_t j = 0; j < block; ++j) {
            dst[j] = s.data[(0 * mels + r) * block + j];
            dst[2 * block - 1 - j] = s.data[(1 * mels + r) * block + j];
            dst[2 * block + j] = s.data[(2 * mels + r) * block + j];
        }
    }
    return m;
}

std::vector<Tensor> slice_db_mels(const std::string& path, const StftParams& p, double log_floor) {
    int sr = 0;
    const std::vector<double> wave = load_wav_mono(path, &sr);
    if (sr != p.sample_rate)
        throw IngestError("'" + path + "': sample rate " + std::to_string(sr) +
                          " does not match the configured " + std::to_string(p.sample_rate));

    const Tensor mel = log_mel_frames(wave, p, log_floor);
    const int64_t frames = mel.dim(1);
    const int64_t count = frames / p.frames_per_slice;

    std::vector<Tensor> out;
    out.reserve(static_cast<size_t>(count));
    for (int64_t k = 0; k < count; ++k) {
        Tensor s({p.n_mels, p.frames_per_slice});
        const int64_t off = k * p.frames_per_slice;
        for (int m = 0; m < p.n_mels; ++m)
            for (int f = 0; f < p.frames_per_slice; ++f)
                s[static_cast<int64_t>(m) * p.frames_per_slice + f] =
                    mel[static_cast<int64_t>(m) * frames + off + f];
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<LongMel> slice_audio(const std::string& path, const StftParams& p,
                                 const NormStats& stats) {
    std::vector<Tensor> db = slice_db_mels(path, p, stats.log_floor);
    std::vector<LongMel> out;
    out.reserve(db.size());
    for (Tensor& s : db) {
        LongMel m;
        m.norm = stats;
        m.data = Tensor({1, p.n_mels, p.frames_per_slice});
        for (int64_t i = 0; i < s.size(); ++i) m.data[i] = normalize_db(s[i], stats);
        out.push_back(std::move(m));
    }
    return out;
}

// -------------------------------------------------------------- inversion

std::vector<double> invert_mel(const LongMel& m, int iterations, const StftParams& p,
                               uint64_t phase_seed) {
    if (iterations < 1) throw InvalidArgument("invert_mel: need at least one iteration");
    if (m.data.rank() != 3 || m.data.dim(0) != 1 || m.data.dim(1) != p.n_mels)
        throw InvalidArgument("invert_mel: long mel shape mismatch");

    const int64_t frames = m.data.dim(2);
    const int bins = p.n_bins();

    // Target mel amplitudes.
    Tensor amp({p.n_mels, frames});
    for (int64_t i = 0; i < amp.size(); ++i)
        amp[i] = db_to_amplitude(denormalize_db(m.data[i], m.norm), m.norm);

    // Multiplicative-update non-negative least squares for the linear
    // spectrogram S >= 0 minimizing ||fb * S - amp||^2.
    const Tensor fb = mel_filterbank(p);
    CMapM fbm(fb.data(), p.n_mels, bins);
    CMapM ampm(amp.data(), p.n_mels, frames);

    RowMat numer = fbm.transpose() * ampm;  // (bins, frames), non-negative
    RowMat S = numer;
    RowMat denom(bins, frames);
    constexpr int kNnlsIters = 40;
    for (int it = 0; it < kNnlsIters; ++it) {
        denom.noalias() = fbm.transpose() * (fbm * S);
        S.array() *= numer.array() / (denom.array() + 1e-12);
    }

    // The analysis magnitudes carry a 2/sum(window) gain; Griffin-Lim pins
    // raw FFT magnitudes, so convert the target back to FFT units.
    const std::vector<double> win = hann_window(p.win);
    double wsum = 0.0;
    for (double v : win) wsum += v;
    S *= wsum / 2.0;

    // Griffin-Lim phase recovery at fixed magnitude.
    RandomStream rng(phase_seed, "griffin-lim/phase");
    std::vector<std::complex<double>> spec(static_cast<size_t>(bins) * frames);
    for (size_t i = 0; i < spec.size(); ++i) {
        const double phi = rng.uniform() * kTwoPi;
        spec[i] = std::polar(S(static_cast<int64_t>(i) / frames,
                               static_cast<int64_t>(i) % frames),
                             phi);
    }

    std::vector<double> y;
    for (int it = 0; it < iterations; ++it) {
        y = istft(spec, frames, p);
        const std::vector<std::complex<double>> re = stft_complex(y, p);
        for (size_t i = 0; i < spec.size(); ++i) {
            const double mag = std::abs(re[i]);
            const double target = S(static_cast<int64_t>(i) / frames,
                                    static_cast<int64_t>(i) % frames);
            spec[i] = (mag > 1e-12) ? re[i] * (target / mag)
                                    : std::complex<double>(target, 0.0);
        }
    }
    return istft(spec, frames, p);
}

} // namespace meldiff
