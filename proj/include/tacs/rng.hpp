#pragma once

#include <cstdint>
#include <random>

namespace tacs {

// Deterministic random stream. Every stochastic routine takes one of these
// by reference; (seed, call order) fully determines each draw, which is the
// backbone of the reproducibility and degeneracy tests.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }

    // [0, 1)
    double uniform() { return uniform_(engine_); }

    // inclusive on both ends
    int uniform_int(int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(engine_);
    }

    std::uint64_t next_u64() { return engine_(); }

    // Child stream, e.g. one per sampling chain. Chains seeded up front this
    // way can run in any order (or in parallel) without changing results.
    Rng spawn() { return Rng(engine_()); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

} // namespace tacs
