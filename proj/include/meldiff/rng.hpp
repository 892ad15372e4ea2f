#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "meldiff/tensor.hpp"

namespace meldiff {

// Derives an independent stream seed from a master seed and a label.
// Adding a new labeled stream never perturbs existing ones.
uint64_t derive_stream_seed(uint64_t master, std::string_view label);

// Seeded random stream; one per subsystem, derived from the run's master seed.
class RandomStream {
public:
    RandomStream(uint64_t master, std::string_view label)
        : engine_(derive_stream_seed(master, label)) {}
    explicit RandomStream(uint64_t raw_seed) : engine_(raw_seed) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    // Inclusive on both ends.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return std::uniform_int_distribution<int64_t>(lo, hi)(engine_);
    }
    uint64_t next_u64() { return engine_(); }

    Tensor normal_tensor(std::vector<int64_t> shape) {
        Tensor t(std::move(shape));
        for (int64_t i = 0; i < t.size(); ++i) t[i] = normal();
        return t;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

} // namespace meldiff
