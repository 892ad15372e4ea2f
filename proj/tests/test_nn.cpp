#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "meldiff/errors.hpp"
#include "meldiff/nn.hpp"
#include "meldiff/rng.hpp"

using namespace meldiff;

namespace {

// Scalar probe loss: fixed random projection of the layer output.
template <typename Layer>
void run_layer_gradcheck(Layer& layer, Tensor x, RandomStream& rng, double tol = 1e-4) {
    Tensor probe;
    {
        const Tensor y = layer.forward(x, Mode::kTrain);
        probe = rng.normal_tensor(y.shape());
    }
    auto loss = [&]() { return dot(layer.forward(x, Mode::kTrain), probe); };

    std::vector<ParamRef> params;
    layer.collect("L", params);
    for (auto& p : params)
        if (p.grad != nullptr) p.grad->zero();

    layer.forward(x, Mode::kTrain);
    const Tensor gx = layer.backward(probe);

    const auto pr = gradcheck::check_params(params, loss);
    INFO("worst param: " << pr.worst_name << " err " << pr.worst);
    CHECK(pr.worst <= tol);

    const auto ir = gradcheck::check_input(x, gx, loss);
    INFO("worst input: " << ir.worst_name << " err " << ir.worst);
    CHECK(ir.worst <= tol);
}

} // namespace

TEST_CASE("conv gradient matches finite differences") {
    RandomStream rng(31, "test/conv");
    Conv1d conv(3, 4, 3, &rng);
    run_layer_gradcheck(conv, rng.normal_tensor({2, 3, 8}), rng);
}

TEST_CASE("pointwise conv gradient matches finite differences") {
    RandomStream rng(32, "test/conv1");
    Conv1d conv(5, 3, 1, &rng);
    run_layer_gradcheck(conv, rng.normal_tensor({2, 5, 6}), rng);
}

TEST_CASE("transposed conv gradient matches finite differences") {
    RandomStream rng(33, "test/tconv");
    ConvTranspose1d tconv(3, 4, &rng);
    run_layer_gradcheck(tconv, rng.normal_tensor({2, 3, 6}), rng);
}

TEST_CASE("batch norm gradient matches finite differences in training mode") {
    RandomStream rng(34, "test/bn");
    BatchNorm1d bn(4);
    run_layer_gradcheck(bn, rng.normal_tensor({3, 4, 5}), rng);
}

TEST_CASE("linear gradient matches finite differences") {
    RandomStream rng(35, "test/lin");
    Linear lin(6, 4, &rng);
    run_layer_gradcheck(lin, rng.normal_tensor({3, 6}), rng);
}

TEST_CASE("attention gradient matches finite differences") {
    RandomStream rng(36, "test/attn");
    SelfAttention1d attn(4, &rng);
    run_layer_gradcheck(attn, rng.normal_tensor({2, 4, 6}), rng);
}

TEST_CASE("relu and max pool route gradients to the right inputs") {
    RandomStream rng(37, "test/pool");
    Tensor x = rng.normal_tensor({2, 3, 8});
    ReLU relu;
    MaxPool1d pool;
    Tensor probe;
    {
        Tensor y = pool.forward(relu.forward(x, Mode::kTrain), Mode::kTrain);
        probe = rng.normal_tensor(y.shape());
    }
    auto loss = [&]() {
        return dot(pool.forward(relu.forward(x, Mode::kTrain), Mode::kTrain), probe);
    };
    loss();
    const Tensor gx = relu.backward(pool.backward(probe));
    const auto r = gradcheck::check_input(x, gx, loss);
    INFO("worst: " << r.worst_name << " err " << r.worst);
    CHECK(r.worst <= 1e-4);
}

TEST_CASE("max pool needs an even time axis") {
    MaxPool1d pool;
    Tensor x({1, 2, 5});
    CHECK_THROWS_AS(pool.forward(x, Mode::kEval), InvalidArgument);
}

TEST_CASE("batch norm inference is a pure function of parameters and input") {
    RandomStream rng(38, "test/bn-eval");
    BatchNorm1d bn(3);
    const Tensor x = rng.normal_tensor({2, 3, 4});
    const Tensor a = bn.forward(x, Mode::kEval);
    const Tensor b = bn.forward(x, Mode::kEval);
    for (int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("batch norm running statistics converge to the batch distribution") {
    RandomStream rng(39, "test/bn-run");
    BatchNorm1d bn(2);
    const Tensor x = rng.normal_tensor({4, 2, 64});
    for (int k = 0; k < 200; ++k) bn.forward(x, Mode::kTrain);
    // after convergence the eval output matches the train output closely
    const Tensor tr = bn.forward(x, Mode::kTrain);
    const Tensor ev = bn.forward(x, Mode::kEval);
    for (int64_t i = 0; i < tr.size(); ++i) CHECK(ev[i] == doctest::Approx(tr[i]).epsilon(0.05));
}

TEST_CASE("time embedding at t = 0 is all zeros then all ones") {
    const double t0 = 0.0;
    const Tensor e = sinusoidal_time_embedding(std::span<const double>(&t0, 1), 16);
    for (int j = 0; j < 8; ++j) {
        CHECK(e[j] == 0.0);
        CHECK(e[8 + j] == 1.0);
    }
}

TEST_CASE("time embedding norm is bounded by sqrt(dim)") {
    std::vector<double> ts = {0.0, 0.1, 0.5, 0.77, 1.0};
    const int dim = 32;
    const Tensor e = sinusoidal_time_embedding(ts, dim);
    for (size_t b = 0; b < ts.size(); ++b) {
        double norm = 0.0;
        for (int j = 0; j < dim; ++j) {
            const double v = e[static_cast<int64_t>(b) * dim + j];
            norm += v * v;
        }
        CHECK(std::sqrt(norm) <= std::sqrt(static_cast<double>(dim)) + 1e-12);
    }
}

TEST_CASE("time embedding is injective on a dense grid") {
    const int dim = 16;
    const int grid = 10000;
    std::vector<double> ts(static_cast<size_t>(grid));
    for (int i = 0; i < grid; ++i) ts[static_cast<size_t>(i)] = static_cast<double>(i) / (grid - 1);
    const Tensor e = sinusoidal_time_embedding(ts, dim);
    // the lowest frequency is pi/2, so sin(w0 t) alone is strictly monotone
    for (int i = 1; i < grid; ++i)
        CHECK(e[static_cast<int64_t>(i) * dim] > e[static_cast<int64_t>(i - 1) * dim]);
}

TEST_CASE("time embedding rejects odd dimensions") {
    const double t = 0.5;
    CHECK_THROWS_AS(sinusoidal_time_embedding(std::span<const double>(&t, 1), 7),
                    InvalidArgument);
}
