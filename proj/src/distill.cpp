#include "meldiff/distill.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "meldiff/errors.hpp"

namespace meldiff {

void DistillConfig::validate() const {
    if (n0 < 2) throw InvalidArgument("distill: initial step count must be at least 2");
    if (rounds < 1) throw InvalidArgument("distill: need at least one round");
    if (rounds >= 31 || n0 % (1 << rounds) != 0)
        throw InvalidArgument("distill: n0 = " + std::to_string(n0) +
                              " is not divisible by 2^" + std::to_string(rounds));
    if (steps_per_round < 1) throw InvalidArgument("distill: steps_per_round must be positive");
    if (batch_size < 1) throw InvalidArgument("distill: batch size must be positive");
    if (lr <= 0.0) throw InvalidArgument("distill: learning rate must be positive");
}

Tensor invert_student_step(const Tensor& z_tpp, const Tensor& z_t, double a_t, double s_t,
                           double a_tpp, double s_tpp) {
    if (!z_tpp.same_shape(z_t)) throw InvalidArgument("invert_student_step: shape mismatch");
    const double ratio = s_tpp / s_t;
    const double denom = a_tpp - ratio * a_t;
    if (std::abs(denom) < 1e-12)
        throw DegenerateTarget("student step inversion denominator " + std::to_string(denom) +
                               " below 1e-12; schedule is degenerate here");
    const double inv = 1.0 / denom;
    Tensor x(z_t.shape());
    for (int64_t j = 0; j < x.size(); ++j) x[j] = (z_tpp[j] - ratio * z_t[j]) * inv;
    return x;
}

namespace {

struct GridTimes {
    double t, t_half, t_next; // i/N, (2i-1)/(2N), (i-1)/N
};

GridTimes grid_times(int i, int N) {
    GridTimes g;
    g.t = static_cast<double>(i) / static_cast<double>(N);
    g.t_half = static_cast<double>(2 * i - 1) / static_cast<double>(2 * N);
    g.t_next = static_cast<double>(i - 1) / static_cast<double>(N);
    return g;
}

} // namespace

Tensor distill_target_batch(const Denoiser& teacher, const Tensor& z, std::span<const int> is,
                            int N) {
    const int64_t n = z.dim(0);
    if (static_cast<int64_t>(is.size()) != n)
        throw InvalidArgument("distill_target_batch: one step index per item required");
    for (int i : is)
        if (i < 1 || i > N)
            throw InvalidArgument("distill_target_batch: step index " + std::to_string(i) +
                                  " outside {1.." + std::to_string(N) + "}");
    const int64_t item = z.size() / n;

    std::vector<double> ts(static_cast<size_t>(n)), ths(static_cast<size_t>(n));
    for (int64_t b = 0; b < n; ++b) {
        const GridTimes g = grid_times(is[static_cast<size_t>(b)], N);
        ts[static_cast<size_t>(b)] = g.t;
        ths[static_cast<size_t>(b)] = g.t_half;
    }

    // First teacher half-step: t -> t - 0.5/N.
    Tensor x1 = teacher.predict_x_batch(z, ts);
    Tensor z_half(z.shape());
    for (int64_t b = 0; b < n; ++b) {
        const GridTimes g = grid_times(is[static_cast<size_t>(b)], N);
        const double a = cosine_alpha(g.t), s = cosine_sigma(g.t);
        const double ah = cosine_alpha(g.t_half), sh = cosine_sigma(g.t_half);
        const double shrink = sh / s;
        const double* zb = z.data() + b * item;
        const double* xb = x1.data() + b * item;
        double* hb = z_half.data() + b * item;
        for (int64_t j = 0; j < item; ++j) hb[j] = ah * xb[j] + shrink * (zb[j] - a * xb[j]);
    }

    // Second teacher half-step: t - 0.5/N -> t - 1/N.
    Tensor x2 = teacher.predict_x_batch(z_half, ths);
    Tensor target(z.shape());
    for (int64_t b = 0; b < n; ++b) {
        const GridTimes g = grid_times(is[static_cast<size_t>(b)], N);
        const double a = cosine_alpha(g.t), s = cosine_sigma(g.t);
        const double ah = cosine_alpha(g.t_half), sh = cosine_sigma(g.t_half);
        const double an = cosine_alpha(g.t_next), sn = cosine_sigma(g.t_next);
        const double shrink = sn / sh;
        const double* hb = z_half.data() + b * item;
        const double* xb = x2.data() + b * item;

        const double ratio = sn / s;
        const double denom = an - ratio * a;
        if (std::abs(denom) < 1e-12)
            throw DegenerateTarget("student step inversion denominator below 1e-12 at i = " +
                                   std::to_string(is[static_cast<size_t>(b)]));
        const double inv = 1.0 / denom;

        const double* zb = z.data() + b * item;
        double* tb = target.data() + b * item;
        for (int64_t j = 0; j < item; ++j) {
            const double z_next = an * xb[j] + shrink * (hb[j] - ah * xb[j]);
            tb[j] = (z_next - ratio * zb[j]) * inv;
        }
    }
    return target;
}

Tensor distill_target(const Denoiser& teacher, const LatentState& state, int N) {
    if (N < 1) throw InvalidArgument("distill_target: N must be positive");
    const double scaled = state.t * static_cast<double>(N);
    const int i = static_cast<int>(std::lround(scaled));
    if (i < 1 || i > N || std::abs(scaled - static_cast<double>(i)) > 1e-9)
        throw InvalidArgument("distill_target: state time " + std::to_string(state.t) +
                              " is not on the i/N grid");
    std::vector<int64_t> batched;
    batched.push_back(1);
    for (int64_t d : state.z.shape()) batched.push_back(d);
    const int is[1] = {i};
    Tensor out = distill_target_batch(teacher, state.z.reshaped(batched), is, N);
    return out.reshaped(state.z.shape());
}

void distill_round(const Denoiser& teacher, TrainableModel& student, const Dataset& data, int N,
                   const DistillConfig& cfg, uint64_t round_seed, const std::string& loss_csv_path,
                   const StepCallback& on_step) {
    if (data.empty()) throw InvalidArgument("distill_round: dataset is empty");
    if (N < 1) throw InvalidArgument("distill_round: N must be positive");
    if (cfg.steps_per_round == 0) return; // student stays the teacher copy

    Adam adam(student.parameters());
    RandomStream pick_rng(round_seed, "distill/batch");
    RandomStream time_rng(round_seed, "distill/time");
    RandomStream noise_rng(round_seed, "distill/noise");

    std::ofstream csv;
    if (!loss_csv_path.empty()) {
        csv.open(loss_csv_path);
        csv << "step,loss,lr\n";
    }

    const std::vector<int64_t>& item_shape = data.items.front().shape();
    const int64_t item = data.items.front().size();
    std::vector<int64_t> batch_shape;
    batch_shape.push_back(cfg.batch_size);
    batch_shape.insert(batch_shape.end(), item_shape.begin(), item_shape.end());

    for (int step = 0; step < cfg.steps_per_round; ++step) {
        const double lr = cosine_annealed_lr(cfg.lr, step, cfg.steps_per_round);

        Tensor z(batch_shape);
        std::vector<double> ts(static_cast<size_t>(cfg.batch_size));
        std::vector<int> is(static_cast<size_t>(cfg.batch_size));
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto idx =
                static_cast<size_t>(pick_rng.uniform_int(0, static_cast<int64_t>(data.size()) - 1));
            const Tensor& src = data.items[idx];
            const int i = static_cast<int>(time_rng.uniform_int(1, N));
            is[static_cast<size_t>(b)] = i;
            const double t = static_cast<double>(i) / static_cast<double>(N);
            ts[static_cast<size_t>(b)] = t;
            const double a = cosine_alpha(t);
            const double s = cosine_sigma(t);
            double* zb = z.data() + b * item;
            for (int64_t j = 0; j < item; ++j) zb[j] = a * src[j] + s * noise_rng.normal();
        }

        Tensor targets = distill_target_batch(teacher, z, is, N);

        student.zero_grad();
        const double loss = weighted_x_loss_grad(student, z, ts, targets, cfg.weighting);
        adam.step(lr);

        if (csv.is_open()) csv << step << ',' << loss << ',' << lr << '\n';
        if (on_step) on_step(step, loss, lr);
    }
}

std::vector<UNetModel> progressive_distill(
    const UNetModel& model, const Dataset& data, const DistillConfig& cfg,
    const std::function<void(int round, int n_steps, const UNetModel&)>& on_round) {
    cfg.validate();

    std::vector<UNetModel> students;
    students.reserve(static_cast<size_t>(cfg.rounds));

    UNetModel teacher = model;
    int n = cfg.n0;
    for (int round = 0; round < cfg.rounds; ++round) {
        UNetModel student = teacher; // initialize student from teacher
        UNetDenoiser teacher_view(teacher);
        const uint64_t round_seed =
            derive_stream_seed(cfg.seed, "distill/round" + std::to_string(round));
        std::string csv;
        if (!cfg.loss_csv_prefix.empty())
            csv = cfg.loss_csv_prefix + "N" + std::to_string(n) + ".csv";
        distill_round(teacher_view, student, data, n, cfg, round_seed, csv);
        if (on_round) on_round(round, n, student);
        students.push_back(student);
        teacher = std::move(student);
        n /= 2;
    }
    return students;
}

} // namespace meldiff
