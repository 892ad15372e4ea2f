#include "meldiff/metrics.hpp"

#include <cmath>
#include <iostream>

#include <nlohmann/json.hpp>

#include "meldiff/checkpoint.hpp"
#include "meldiff/errors.hpp"
#include "meldiff/tones.hpp"
#include "meldiff/train.hpp"
#include "meldiff/unet.hpp"

using json = nlohmann::json;

namespace meldiff {

EmbeddingStats fit_gaussian(const Eigen::MatrixXd& embeddings) {
    const int64_t n = embeddings.rows();
    if (n < 2) throw InvalidArgument("fit_gaussian: need at least two samples");
    EmbeddingStats s;
    s.n = n;
    s.mean = embeddings.colwise().mean();
    const Eigen::MatrixXd centered = embeddings.rowwise() - s.mean.transpose();
    s.cov = centered.transpose() * centered / static_cast<double>(n - 1);
    if (s.deficient())
        std::cerr << "fit_gaussian: " << n << " samples for dimension " << s.dim()
                  << "; covariance estimate is rank-deficient\n";
    return s;
}

namespace {

// Clips spectrum noise per the tolerance rule and counts the events.
Eigen::VectorXd clip_eigenvalues(const Eigen::VectorXd& ev, int* clipped, const char* what) {
    const double max_ev = ev.size() > 0 ? ev.maxCoeff() : 0.0;
    const double tol = 1e-8 * std::max(max_ev, 1.0);
    Eigen::VectorXd out = ev;
    for (int64_t i = 0; i < ev.size(); ++i) {
        if (ev[i] < 0.0) {
            if (ev[i] < -tol)
                throw NumericFailure(std::string(what) +
                                     ": eigenvalue " + std::to_string(ev[i]) +
                                     " is too negative to be roundoff");
            out[i] = 0.0;
            if (clipped != nullptr) ++*clipped;
            std::cerr << what << ": clipped eigenvalue " << ev[i] << " to zero\n";
        }
    }
    return out;
}

} // namespace

double frechet_distance(const EmbeddingStats& a, const EmbeddingStats& b, int* clipped) {
    if (a.dim() != b.dim()) throw InvalidArgument("frechet_distance: dimension mismatch");
    if (!a.mean.allFinite() || !b.mean.allFinite() || !a.cov.allFinite() || !b.cov.allFinite())
        throw NumericFailure("frechet_distance: non-finite statistics");

    const Eigen::MatrixXd A = 0.5 * (a.cov + a.cov.transpose());
    const Eigen::MatrixXd B = 0.5 * (b.cov + b.cov.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_a(A);
    const Eigen::VectorXd ev_a = clip_eigenvalues(es_a.eigenvalues(), clipped, "frechet sqrt(A)");
    const Eigen::MatrixXd root_a = es_a.eigenvectors() *
                                   ev_a.array().sqrt().matrix().asDiagonal() *
                                   es_a.eigenvectors().transpose();

    const Eigen::MatrixXd M_raw = root_a * B * root_a;
    const Eigen::MatrixXd M = 0.5 * (M_raw + M_raw.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_m(M);
    const Eigen::VectorXd ev_m = clip_eigenvalues(es_m.eigenvalues(), clipped, "frechet sqrt(AB)");

    const double mean_term = (a.mean - b.mean).squaredNorm();
    const double trace_term = A.trace() + B.trace() - 2.0 * ev_m.array().sqrt().sum();
    return std::max(0.0, mean_term + trace_term);
}

double inception_score(const Eigen::MatrixXd& probs) {
    const int64_t n = probs.rows(), c = probs.cols();
    if (n < 1 || c < 1) throw InvalidArgument("inception_score: empty probability matrix");
    for (int64_t i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            if (probs(i, j) < 0.0)
                throw InvalidArgument("inception_score: negative probability");
            row_sum += probs(i, j);
        }
        if (std::abs(row_sum - 1.0) > 1e-6)
            throw InvalidArgument("inception_score: row " + std::to_string(i) +
                                  " sums to " + std::to_string(row_sum));
    }

    const Eigen::VectorXd marginal = probs.colwise().mean();
    double mean_kl = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double kl = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            const double p = probs(i, j);
            if (p > 0.0) kl += p * (std::log(p) - std::log(marginal[j]));
        }
        mean_kl += kl;
    }
    return std::exp(mean_kl / static_cast<double>(n));
}

double mmd2_imq(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double gamma_sq) {
    const int64_t m = X.rows(), n = Y.rows();
    if (m < 2 || n < 2) throw InvalidArgument("mmd2_imq: need at least two samples per set");
    if (X.cols() != Y.cols()) throw InvalidArgument("mmd2_imq: dimension mismatch");

    const auto kernel = [gamma_sq](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return 1.0 / (1.0 + (a - b).squaredNorm() / (2.0 * gamma_sq));
    };

    double xx = 0.0;
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < m; ++j)
            if (i != j) xx += kernel(X.row(i), X.row(j));
    xx /= static_cast<double>(m) * static_cast<double>(m - 1);

    double yy = 0.0;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j)
            if (i != j) yy += kernel(Y.row(i), Y.row(j));
    yy /= static_cast<double>(n) * static_cast<double>(n - 1);

    double xy = 0.0;
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) xy += kernel(X.row(i), Y.row(j));
    xy *= 2.0 / (static_cast<double>(m) * static_cast<double>(n));

    return xx + yy - xy;
}

// ------------------------------------------------------------ tone corpus

ToneCorpus make_tone_corpus(int variants_per_class, uint64_t seed, const StftParams& p) {
    if (variants_per_class < 1)
        throw InvalidArgument("make_tone_corpus: need at least one variant per class");
    RandomStream rng(seed, "tones/corpus");
    const int total = kPitchClasses * kTimbreClasses * variants_per_class;
    const double seconds =
        static_cast<double>(p.samples_for_frames(p.frames_per_slice) + p.hop) / p.sample_rate;

    ToneCorpus corpus;
    corpus.slices = Tensor({total, 3, p.n_mels, p.frames_per_slice / 3});
    const int64_t item = corpus.slices.size() / total;

    int idx = 0;
    for (int pc = 0; pc < kPitchClasses; ++pc)
        for (int tb = 0; tb < kTimbreClasses; ++tb)
            for (int v = 0; v < variants_per_class; ++v) {
                const double amp = 0.3 + 0.4 * rng.uniform();
                const double detune = std::pow(2.0, (rng.uniform() - 0.5) * 0.3 / 12.0);
                const std::vector<double> wave = synth_tone(
                    pitch_class_freq(pc) * detune, timbre_from_index(tb), seconds, p.sample_rate,
                    amp);
                const MelSlice slice = pack(mel_spectrogram(wave, p.sample_rate, p));
                std::copy(slice.data.data(), slice.data.data() + item,
                          corpus.slices.data() + static_cast<int64_t>(idx) * item);
                corpus.pitch.push_back(pc);
                corpus.timbre.push_back(tb);
                ++idx;
            }
    return corpus;
}

// -------------------------------------------------------------- extractor

StandinExtractor::StandinExtractor(const Config& cfg, RandomStream& rng) : cfg_(cfg) {
    stem_ = Conv1d(kFreqChannels, cfg_.width, 1, &rng);
    c1_ = Conv1d(cfg_.width, cfg_.width, 3, &rng);
    b1_ = BatchNorm1d(cfg_.width);
    c2_ = Conv1d(cfg_.width, cfg_.embed_dim, 3, &rng);
    b2_ = BatchNorm1d(cfg_.embed_dim);
    head_pitch_ = Linear(cfg_.embed_dim, kPitchClasses, &rng);
    head_instr_ = Linear(cfg_.embed_dim, kTimbreClasses, &rng);
}

StandinExtractor::Heads StandinExtractor::forward(const Tensor& slices, Mode mode) {
    if (slices.rank() != 4 || slices.dim(1) != kSliceChannels || slices.dim(2) != kMelBins)
        throw InvalidArgument("extractor input must be (N, 3, 128, 128)");
    const int64_t n = slices.dim(0);
    Tensor h = slices.reshaped({n, kFreqChannels, slices.dim(3)});

    h = stem_.forward(h, mode);
    h = r0_.forward(h, mode);
    h = c1_.forward(h, mode);
    h = b1_.forward(h, mode);
    h = r1_.forward(h, mode);
    h = p1_.forward(h, mode);
    h = c2_.forward(h, mode);
    h = b2_.forward(h, mode);
    h = r2_.forward(h, mode);
    h = p2_.forward(h, mode);

    // global average pool over the time axis
    const int64_t c = h.dim(1), L = h.dim(2);
    gap_len_ctx_ = L;
    Heads out;
    out.feats = Tensor({n, c});
    for (int64_t b = 0; b < n; ++b)
        for (int64_t ch = 0; ch < c; ++ch) {
            const double* row = h.data() + (b * c + ch) * L;
            double s = 0.0;
            for (int64_t l = 0; l < L; ++l) s += row[l];
            out.feats[b * c + ch] = s / static_cast<double>(L);
        }
    out.pitch_logits = head_pitch_.forward(out.feats, mode);
    out.instr_logits = head_instr_.forward(out.feats, mode);
    return out;
}

void StandinExtractor::backward(const Tensor& gp, const Tensor& gi) {
    Tensor gfeat = head_pitch_.backward(gp);
    gfeat.add_scaled(head_instr_.backward(gi), 1.0);

    const int64_t n = gfeat.dim(0), c = gfeat.dim(1), L = gap_len_ctx_;
    Tensor gh({n, c, L});
    for (int64_t b = 0; b < n; ++b)
        for (int64_t ch = 0; ch < c; ++ch) {
            const double g = gfeat[b * c + ch] / static_cast<double>(L);
            double* row = gh.data() + (b * c + ch) * L;
            for (int64_t l = 0; l < L; ++l) row[l] = g;
        }

    gh = p2_.backward(gh);
    gh = r2_.backward(gh);
    gh = b2_.backward(gh);
    gh = c2_.backward(gh);
    gh = p1_.backward(gh);
    gh = r1_.backward(gh);
    gh = b1_.backward(gh);
    gh = c1_.backward(gh);
    gh = r0_.backward(gh);
    stem_.backward(gh);
}

std::vector<ParamRef> StandinExtractor::parameters() {
    std::vector<ParamRef> out;
    stem_.collect("stem", out);
    c1_.collect("conv1", out);
    b1_.collect("norm1", out);
    c2_.collect("conv2", out);
    b2_.collect("norm2", out);
    head_pitch_.collect("head_pitch", out);
    head_instr_.collect("head_instr", out);
    return out;
}

namespace {

// Row-wise softmax of logits.
Eigen::MatrixXd softmax_rows(const Tensor& logits) {
    const int64_t n = logits.dim(0), c = logits.dim(1);
    Eigen::MatrixXd p(n, c);
    for (int64_t i = 0; i < n; ++i) {
        double mx = logits[i * c];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, logits[i * c + j]);
        double sum = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            p(i, j) = std::exp(logits[i * c + j] - mx);
            sum += p(i, j);
        }
        p.row(i) /= sum;
    }
    return p;
}

// Mean cross-entropy plus its logit gradient (softmax - onehot) / n.
double cross_entropy(const Tensor& logits, std::span<const int> labels, Tensor& grad) {
    const int64_t n = logits.dim(0), c = logits.dim(1);
    const Eigen::MatrixXd p = softmax_rows(logits);
    grad = Tensor(logits.shape());
    double loss = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const int y = labels[static_cast<size_t>(i)];
        loss -= std::log(std::max(p(i, y), 1e-300));
        for (int64_t j = 0; j < c; ++j)
            grad[i * c + j] = (p(i, j) - (j == y ? 1.0 : 0.0)) / static_cast<double>(n);
    }
    return loss / static_cast<double>(n);
}

} // namespace

double StandinExtractor::train_step(const Tensor& slices, std::span<const int> pitch,
                                    std::span<const int> timbre, Adam& opt, double lr) {
    for (auto& pr : parameters())
        if (pr.grad != nullptr) pr.grad->zero();
    Heads h = forward(slices, Mode::kTrain);
    Tensor gp, gi;
    const double loss =
        cross_entropy(h.pitch_logits, pitch, gp) + cross_entropy(h.instr_logits, timbre, gi);
    backward(gp, gi);
    opt.step(lr);
    return loss;
}

namespace {
constexpr int64_t kEmbedChunk = 16;
}

Eigen::MatrixXd StandinExtractor::embed(const Tensor& slices) {
    const int64_t n = slices.dim(0);
    Eigen::MatrixXd out(n, cfg_.embed_dim);
    const int64_t item = slices.size() / n;
    for (int64_t at = 0; at < n; at += kEmbedChunk) {
        const int64_t cnt = std::min(kEmbedChunk, n - at);
        std::vector<int64_t> shape = slices.shape();
        shape[0] = cnt;
        Tensor chunk(shape);
        std::copy(slices.data() + at * item, slices.data() + (at + cnt) * item, chunk.data());
        Heads h = forward(chunk, Mode::kEval);
        for (int64_t i = 0; i < cnt; ++i)
            for (int j = 0; j < cfg_.embed_dim; ++j)
                out(at + i, j) = h.feats[i * cfg_.embed_dim + j];
    }
    return out;
}

Eigen::MatrixXd StandinExtractor::pitch_probs(const Tensor& slices) {
    const int64_t n = slices.dim(0);
    Eigen::MatrixXd out(n, kPitchClasses);
    const int64_t item = slices.size() / n;
    for (int64_t at = 0; at < n; at += kEmbedChunk) {
        const int64_t cnt = std::min(kEmbedChunk, n - at);
        std::vector<int64_t> shape = slices.shape();
        shape[0] = cnt;
        Tensor chunk(shape);
        std::copy(slices.data() + at * item, slices.data() + (at + cnt) * item, chunk.data());
        Heads h = forward(chunk, Mode::kEval);
        out.middleRows(at, cnt) = softmax_rows(h.pitch_logits);
    }
    return out;
}

Eigen::MatrixXd StandinExtractor::instrument_probs(const Tensor& slices) {
    const int64_t n = slices.dim(0);
    Eigen::MatrixXd out(n, kTimbreClasses);
    const int64_t item = slices.size() / n;
    for (int64_t at = 0; at < n; at += kEmbedChunk) {
        const int64_t cnt = std::min(kEmbedChunk, n - at);
        std::vector<int64_t> shape = slices.shape();
        shape[0] = cnt;
        Tensor chunk(shape);
        std::copy(slices.data() + at * item, slices.data() + (at + cnt) * item, chunk.data());
        Heads h = forward(chunk, Mode::kEval);
        out.middleRows(at, cnt) = softmax_rows(h.instr_logits);
    }
    return out;
}

void StandinExtractor::save(const std::string& path) {
    json meta = {{"format_version", kCheckpointFormatVersion},
                 {"kind", "extractor"},
                 {"width", cfg_.width},
                 {"embed_dim", cfg_.embed_dim}};
    TensorContainer tensors;
    for (const auto& p : parameters()) tensors.add(p.name, *p.value);
    write_meta_blob(path, meta.dump(), tensors);
}

StandinExtractor StandinExtractor::load(const std::string& path) {
    auto [text, tensors] = read_meta_blob(path);
    json meta = json::parse(text, nullptr, false);
    if (meta.is_discarded()) throw CorruptFile("extractor metadata in '" + path + "' is not JSON");
    if (meta.value("format_version", -1) != kCheckpointFormatVersion)
        throw IncompatibleCheckpoint("unsupported extractor format version in '" + path + "'");
    if (meta.value("kind", "") != "extractor")
        throw IncompatibleCheckpoint("'" + path + "' is not an extractor checkpoint");

    Config cfg;
    cfg.width = meta.at("width").get<int>();
    cfg.embed_dim = meta.at("embed_dim").get<int>();
    RandomStream rng(0, "extractor/shape-init");
    StandinExtractor ex(cfg, rng);
    for (const auto& p : ex.parameters()) {
        if (!tensors.has(p.name))
            throw IncompatibleCheckpoint("extractor checkpoint is missing '" + p.name + "'");
        const Tensor& src = tensors.get(p.name);
        if (!src.same_shape(*p.value))
            throw IncompatibleCheckpoint("extractor parameter '" + p.name +
                                         "' has the wrong shape");
        *p.value = src;
    }
    return ex;
}

StandinExtractor train_standin_extractor(uint64_t seed, int steps, int batch, double lr,
                                         int variants_per_class) {
    const ToneCorpus corpus = make_tone_corpus(variants_per_class, seed);
    RandomStream init_rng(seed, "extractor/init");
    StandinExtractor ex(StandinExtractor::Config{}, init_rng);
    Adam opt(ex.parameters());
    RandomStream pick(seed, "extractor/batch");

    const int64_t n = corpus.slices.dim(0);
    const int64_t item = corpus.slices.size() / n;
    for (int step = 0; step < steps; ++step) {
        Tensor xb({batch, 3, kMelBins, kFrameAxis});
        std::vector<int> pb(static_cast<size_t>(batch)), tb(static_cast<size_t>(batch));
        for (int b = 0; b < batch; ++b) {
            const auto idx = static_cast<size_t>(pick.uniform_int(0, n - 1));
            std::copy(corpus.slices.data() + static_cast<int64_t>(idx) * item,
                      corpus.slices.data() + static_cast<int64_t>(idx + 1) * item,
                      xb.data() + static_cast<int64_t>(b) * item);
            pb[static_cast<size_t>(b)] = corpus.pitch[idx];
            tb[static_cast<size_t>(b)] = corpus.timbre[idx];
        }
        ex.train_step(xb, pb, tb, opt, cosine_annealed_lr(lr, step, steps));
    }
    return ex;
}

ExtractorAccuracy classification_accuracy(StandinExtractor& ex, const ToneCorpus& corpus) {
    const Eigen::MatrixXd pp = ex.pitch_probs(corpus.slices);
    const Eigen::MatrixXd ip = ex.instrument_probs(corpus.slices);
    const int64_t n = pp.rows();
    int64_t pc = 0, ic = 0;
    for (int64_t i = 0; i < n; ++i) {
        Eigen::Index pj, ij;
        pp.row(i).maxCoeff(&pj);
        ip.row(i).maxCoeff(&ij);
        if (static_cast<int>(pj) == corpus.pitch[static_cast<size_t>(i)]) ++pc;
        if (static_cast<int>(ij) == corpus.timbre[static_cast<size_t>(i)]) ++ic;
    }
    return {static_cast<double>(pc) / static_cast<double>(n),
            static_cast<double>(ic) / static_cast<double>(n)};
}

} // namespace meldiff
