#include "meldiff/param.hpp"

#include <algorithm>
#include <cmath>

#include "meldiff/errors.hpp"

namespace meldiff {

std::string to_string(ParamKind k) {
    switch (k) {
        case ParamKind::X: return "x";
        case ParamKind::EPS: return "eps";
        case ParamKind::XEPS: return "xeps";
        case ParamKind::V: return "v";
    }
    return "?";
}

std::string to_string(WeightScheme w) {
    switch (w) {
        case WeightScheme::SNR: return "snr";
        case WeightScheme::TRUNCATED_SNR: return "snr_trunc";
        case WeightScheme::SNR_PLUS_ONE: return "snr_plus_one";
    }
    return "?";
}

ParamKind param_kind_from_string(std::string_view s) {
    if (s == "x") return ParamKind::X;
    if (s == "eps") return ParamKind::EPS;
    if (s == "xeps") return ParamKind::XEPS;
    if (s == "v") return ParamKind::V;
    throw InvalidArgument("unknown parameterization '" + std::string(s) + "'");
}

WeightScheme weight_scheme_from_string(std::string_view s) {
    if (s == "snr") return WeightScheme::SNR;
    if (s == "snr_trunc") return WeightScheme::TRUNCATED_SNR;
    if (s == "snr_plus_one") return WeightScheme::SNR_PLUS_ONE;
    throw InvalidArgument("unknown weighting '" + std::string(s) + "'");
}

int output_multiplicity(ParamKind k) { return k == ParamKind::XEPS ? 2 : 1; }

Tensor v_from(const Tensor& x, const Tensor& eps, double alpha, double sigma) {
    if (!x.same_shape(eps)) throw InvalidArgument("v_from: x and eps shapes differ");
    Tensor v(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) v[i] = alpha * eps[i] - sigma * x[i];
    return v;
}

Tensor to_x_prediction(const Tensor& out, ParamKind kind, const Tensor& z, double alpha,
                       double sigma) {
    if (kind == ParamKind::XEPS) {
        if (out.rank() < 1 || out.dim(0) % 2 != 0 || out.size() != 2 * z.size())
            throw InvalidArgument("to_x_prediction: XEPS output must stack two predictions");
    } else if (!out.same_shape(z)) {
        throw InvalidArgument("to_x_prediction: output and z shapes differ");
    }

    Tensor x(z.shape());
    switch (kind) {
        case ParamKind::X:
            x = out;
            break;
        case ParamKind::EPS: {
            if (alpha == 0.0)
                throw SingularParameterization(
                    "eps parameterization cannot recover x at alpha = 0");
            const double inv_a = 1.0 / alpha;
            for (int64_t i = 0; i < z.size(); ++i) x[i] = (z[i] - sigma * out[i]) * inv_a;
            break;
        }
        case ParamKind::V:
            for (int64_t i = 0; i < z.size(); ++i) x[i] = alpha * z[i] - sigma * out[i];
            break;
        case ParamKind::XEPS: {
            const int64_t n = z.size();
            const double s2 = sigma * sigma;
            const double* xt = out.data();      // first half: x_tilde
            const double* et = out.data() + n;  // second half: eps_tilde
            for (int64_t i = 0; i < n; ++i) x[i] = s2 * xt[i] + alpha * (z[i] - sigma * et[i]);
            break;
        }
    }
    return x;
}

double loss_weight(double lambda, WeightScheme scheme) {
    const double snr = std::exp(lambda); // exp(-inf) = 0, so the endpoint needs no special case
    switch (scheme) {
        case WeightScheme::SNR: return snr;
        case WeightScheme::TRUNCATED_SNR: return std::max(snr, 1.0);
        case WeightScheme::SNR_PLUS_ONE: return snr + 1.0;
    }
    return 0.0;
}

} // namespace meldiff
