#include "meldiff/train.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "meldiff/errors.hpp"

namespace meldiff {

double cosine_annealed_lr(double lr0, int step, int total_steps) {
    if (total_steps <= 0) return lr0;
    double x = static_cast<double>(step) / static_cast<double>(total_steps);
    x = std::clamp(x, 0.0, 1.0);
    const double c = std::cos(std::numbers::pi / 2.0 * x);
    return lr0 * c * c;
}

Adam::Adam(const std::vector<ParamRef>& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params)
        if (p.trainable) params_.push_back(p);
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p.value->shape());
        v_.emplace_back(p.value->shape());
    }
}

void Adam::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor& theta = *params_[i].value;
        const Tensor& g = *params_[i].grad;
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (int64_t j = 0; j < theta.size(); ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            theta[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

namespace {

// Shared forward path of the weighted loss. Fills grad_out (same shape as
// raw output) unless null.
double weighted_x_loss_impl(TrainableModel& model, const Tensor& z, std::span<const double> ts,
                            const Tensor& target, WeightScheme weighting, Mode mode,
                            Tensor* grad_out_store) {
    if (!z.same_shape(target)) throw InvalidArgument("loss: z and target shapes differ");
    const int64_t n = z.dim(0);
    const int64_t item = z.size() / n;
    const ParamKind kind = model.param_kind();

    Tensor raw = model.forward_raw(z, ts, mode);
    const int64_t raw_item = raw.size() / n;

    Tensor grad_out;
    if (grad_out_store != nullptr) grad_out = Tensor(raw.shape());

    double loss = 0.0;
    for (int64_t b = 0; b < n; ++b) {
        const double t = ts[static_cast<size_t>(b)];
        const double w = loss_weight(log_snr_at(t), weighting);
        if (w == 0.0) continue; // zero-SNR endpoint under SNR weighting

        const double a = cosine_alpha(t);
        const double s = cosine_sigma(t);
        const double* zb = z.data() + b * item;
        const double* tb = target.data() + b * item;
        const double* rb = raw.data() + b * raw_item;

        if (kind == ParamKind::EPS && a == 0.0)
            throw SingularParameterization("eps parameterization cannot recover x at alpha = 0");

        double item_loss = 0.0;
        const double gscale = 2.0 * w / (static_cast<double>(n) * static_cast<double>(item));
        double* gb = grad_out_store != nullptr ? grad_out.data() + b * raw_item : nullptr;
        for (int64_t j = 0; j < item; ++j) {
            double xhat;
            switch (kind) {
                case ParamKind::X: xhat = rb[j]; break;
                case ParamKind::EPS: xhat = (zb[j] - s * rb[j]) / a; break;
                case ParamKind::V: xhat = a * zb[j] - s * rb[j]; break;
                case ParamKind::XEPS:
                    xhat = s * s * rb[j] + a * (zb[j] - s * rb[item + j]);
                    break;
                default: xhat = 0.0; break;
            }
            const double d = xhat - tb[j];
            item_loss += d * d;
            if (gb != nullptr) {
                const double gx = gscale * d;
                switch (kind) {
                    case ParamKind::X: gb[j] = gx; break;
                    case ParamKind::EPS: gb[j] = -(s / a) * gx; break;
                    case ParamKind::V: gb[j] = -s * gx; break;
                    case ParamKind::XEPS:
                        gb[j] = s * s * gx;
                        gb[item + j] = -a * s * gx;
                        break;
                    default: break;
                }
            }
        }
        item_loss *= w / static_cast<double>(item);
        if (!std::isfinite(item_loss))
            throw NumericFailure("non-finite loss at t = " + std::to_string(t));
        loss += item_loss;
    }
    loss /= static_cast<double>(n);

    if (grad_out_store != nullptr) *grad_out_store = std::move(grad_out);
    return loss;
}

} // namespace

double weighted_x_loss_grad(TrainableModel& model, const Tensor& z, std::span<const double> ts,
                            const Tensor& target, WeightScheme weighting) {
    Tensor grad_out;
    const double loss =
        weighted_x_loss_impl(model, z, ts, target, weighting, Mode::kTrain, &grad_out);
    model.backward_raw(grad_out);
    return loss;
}

double weighted_x_loss(TrainableModel& model, const Tensor& z, std::span<const double> ts,
                       const Tensor& target, WeightScheme weighting, Mode mode) {
    return weighted_x_loss_impl(model, z, ts, target, weighting, mode, nullptr);
}

void train(TrainableModel& model, const Dataset& data, const TrainConfig& cfg,
           const NoiseSchedule& schedule, const StepCallback& on_step) {
    if (data.empty()) throw InvalidArgument("train: dataset is empty");
    if (cfg.batch_size < 1) throw InvalidArgument("train: batch size must be positive");
    if (cfg.lr <= 0.0) throw InvalidArgument("train: learning rate must be positive");
    if (cfg.total_steps == 0) return;

    Adam adam(model.parameters());
    RandomStream pick_rng(cfg.seed, "train/batch");
    RandomStream time_rng(cfg.seed, "train/time");
    RandomStream noise_rng(cfg.seed, "train/noise");

    std::ofstream csv;
    if (!cfg.loss_csv_path.empty()) {
        csv.open(cfg.loss_csv_path);
        csv << "step,loss,lr\n";
    }

    const std::vector<int64_t>& item_shape = data.items.front().shape();
    const int64_t item = data.items.front().size();
    std::vector<int64_t> batch_shape;
    batch_shape.push_back(cfg.batch_size);
    batch_shape.insert(batch_shape.end(), item_shape.begin(), item_shape.end());

    for (int step = 0; step < cfg.total_steps; ++step) {
        const double lr = cosine_annealed_lr(cfg.lr, step, cfg.total_steps);

        Tensor x0(batch_shape);
        Tensor z(batch_shape);
        std::vector<double> ts(static_cast<size_t>(cfg.batch_size));
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto idx =
                static_cast<size_t>(pick_rng.uniform_int(0, static_cast<int64_t>(data.size()) - 1));
            const Tensor& src = data.items[idx];
            const int64_t i = time_rng.uniform_int(1, schedule.T);
            const double t = static_cast<double>(i) / static_cast<double>(schedule.T);
            ts[static_cast<size_t>(b)] = t;
            const double a = cosine_alpha(t);
            const double s = cosine_sigma(t);
            double* xb = x0.data() + b * item;
            double* zb = z.data() + b * item;
            for (int64_t j = 0; j < item; ++j) {
                xb[j] = src[j];
                zb[j] = a * src[j] + s * noise_rng.normal();
            }
        }

        model.zero_grad();
        const double loss = weighted_x_loss_grad(model, z, ts, x0, cfg.weighting);
        adam.step(lr);

        if (csv.is_open()) csv << step << ',' << loss << ',' << lr << '\n';
        if (on_step) on_step(step, loss, lr);
    }
}

} // namespace meldiff
