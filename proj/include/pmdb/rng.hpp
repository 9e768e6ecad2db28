// Seeded random streams with deterministic substream derivation.
//
// Every stochastic routine in the library draws from an RngStream handed in
// by the caller. Substreams derived from (seed, id) pairs make independent
// components (episodes, bootstrap members, sample banks) reproducible
// independently of evaluation order.
#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "pmdb/common.hpp"

namespace pmdb {

class RngStream {
public:
    explicit RngStream(uint64_t seed);

    /// Deterministically derives an independent stream for component `id`.
    RngStream substream(uint64_t id) const;

    uint64_t seed() const { return seed_; }

    /// Uniform double in [0, 1).
    double uniform01();

    /// Uniform integer in [0, n).
    int uniform_int(int n);

    /// Index draw proportional to non-negative weights (sum must be > 0).
    int categorical(std::span<const double> weights);

    /// Standard normal via Box-Muller (two uniforms per draw, no cache).
    double normal();

    /// Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
    double gamma(double shape);

    /// Writes a Dirichlet(concentration) draw into out.
    void dirichlet(std::span<const double> concentration, std::span<double> out);

private:
    uint64_t next_raw();

    uint64_t seed_ = 0;
    std::mt19937_64 engine_;
};

}  // namespace pmdb
