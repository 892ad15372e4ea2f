#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "meldiff/audio.hpp"
#include "meldiff/nn.hpp"
#include "meldiff/rng.hpp"
#include "meldiff/tensor.hpp"

namespace meldiff {

// Gaussian fitted to an embedding set.
struct EmbeddingStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    int64_t n = 0;

    int64_t dim() const { return mean.size(); }
    // Too few samples for a full-rank covariance estimate.
    bool deficient() const { return n < dim() + 1; }
};

// Sample mean and unbiased sample covariance; n >= 2 required.
EmbeddingStats fit_gaussian(const Eigen::MatrixXd& embeddings);

// ||mu_a - mu_b||^2 + tr(Sa + Sb - 2*sqrt(Sa*Sb)), with the matrix square
// root taken through the symmetrized product Sa^{1/2} Sb Sa^{1/2}.
// Eigenvalues in (-1e-8 * max, 0) are clipped to zero (and counted in
// *clipped when given); anything more negative raises NumericFailure.
double frechet_distance(const EmbeddingStats& a, const EmbeddingStats& b, int* clipped = nullptr);

// exp(E_x[KL(p(y|x) || p(y))]) with the marginal taken as the row mean.
// Every row must sum to 1 within 1e-6. Natural log; 0*log(0) = 0.
double inception_score(const Eigen::MatrixXd& probs);

// Unbiased squared MMD between the rows of X and Y under the inverse
// multi-quadratic kernel k(a,b) = 1/(1 + ||a-b||^2 / (2*gamma_sq)).
// The diagonal is excluded from the two within-set sums; the estimate may be
// slightly negative.
double mmd2_imq(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double gamma_sq = 8.0);

// Labeled synthetic-tone slices for training and validating the stand-in
// classifier: every (pitch, timbre) pair appears variants_per_class times
// with seeded amplitude and sub-semitone detune variation.
struct ToneCorpus {
    Tensor slices; // (N, 3, 128, 128)
    std::vector<int> pitch;
    std::vector<int> timbre;
};

ToneCorpus make_tone_corpus(int variants_per_class, uint64_t seed, const StftParams& p = {});

// Small convolutional classifier over packed slices with pitch and
// instrument heads. Embeddings come from the penultimate (pooled) layer,
// probabilities from the final softmax; inference is deterministic.
class StandinExtractor {
public:
    struct Config {
        int width = 32;
        int embed_dim = 64;
    };

    StandinExtractor() = default;
    StandinExtractor(const Config& cfg, RandomStream& rng);

    // slices: (N, 3, 128, 128)
    Eigen::MatrixXd embed(const Tensor& slices);
    Eigen::MatrixXd pitch_probs(const Tensor& slices);
    Eigen::MatrixXd instrument_probs(const Tensor& slices);

    // One Adam update on summed pitch + instrument cross-entropy; returns the loss.
    double train_step(const Tensor& slices, std::span<const int> pitch,
                      std::span<const int> timbre, class Adam& opt, double lr);

    std::vector<ParamRef> parameters();
    const Config& config() const { return cfg_; }

    void save(const std::string& path);
    static StandinExtractor load(const std::string& path);

private:
    struct Heads {
        Tensor feats;        // (N, embed_dim)
        Tensor pitch_logits; // (N, 12)
        Tensor instr_logits; // (N, 4)
    };
    Heads forward(const Tensor& slices, Mode mode);
    void backward(const Tensor& gp, const Tensor& gi);

    Config cfg_;
    Conv1d stem_;
    ReLU r0_;
    Conv1d c1_;
    BatchNorm1d b1_;
    ReLU r1_;
    MaxPool1d p1_;
    Conv1d c2_;
    BatchNorm1d b2_;
    ReLU r2_;
    MaxPool1d p2_;
    Linear head_pitch_, head_instr_;
    int64_t gap_len_ctx_ = 0;
};

// Trains a fresh stand-in on a seeded tone corpus. Deterministic in (seed,
// steps, batch).
StandinExtractor train_standin_extractor(uint64_t seed, int steps = 600, int batch = 16,
                                         double lr = 1e-3, int variants_per_class = 4);

// Fraction of items whose argmax matches the label, for both heads.
struct ExtractorAccuracy {
    double pitch = 0.0;
    double instrument = 0.0;
};
ExtractorAccuracy classification_accuracy(StandinExtractor& ex, const ToneCorpus& corpus);

} // namespace meldiff
