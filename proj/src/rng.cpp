#include "pmdb/rng.hpp"

#include <cmath>

namespace pmdb {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

RngStream::RngStream(uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

RngStream RngStream::substream(uint64_t id) const {
    return RngStream(splitmix64(seed_ ^ splitmix64(id + 1)));
}

uint64_t RngStream::next_raw() { return engine_(); }

double RngStream::uniform01() {
    // 53 random bits scaled into [0, 1).
    return static_cast<double>(next_raw() >> 11) * 0x1.0p-53;
}

int RngStream::uniform_int(int n) {
    check_input(n > 0, "uniform_int: n must be positive");
    // Rejection-free for our purposes: n is tiny relative to 2^64, the
    // modulo bias is below 2^-50 and irrelevant at desk scale.
    return static_cast<int>(next_raw() % static_cast<uint64_t>(n));
}

int RngStream::categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
        check_input(w >= 0.0, "categorical: negative weight");
        total += w;
    }
    check_input(total > 0.0, "categorical: zero total weight");
    double u = uniform01() * total;
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return static_cast<int>(i);
    }
    // Rounding can leave u barely above the accumulated total; return the
    // last index with positive weight.
    for (size_t i = weights.size(); i-- > 0;)
        if (weights[i] > 0.0) return static_cast<int>(i);
    return 0;
}

double RngStream::normal() {
    // Box-Muller; u1 shifted away from 0 so log stays finite.
    double u1 = 1.0 - uniform01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

double RngStream::gamma(double shape) {
    check_input(shape > 0.0, "gamma: shape must be positive");
    if (shape < 1.0) {
        // Boost: Gamma(a) = Gamma(a + 1) * U^(1/a).
        double u = 1.0 - uniform01();
        return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    // Marsaglia-Tsang squeeze.
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        double u = 1.0 - uniform01();
        double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
}

void RngStream::dirichlet(std::span<const double> concentration,
                          std::span<double> out) {
    check_input(concentration.size() == out.size(),
                "dirichlet: length mismatch");
    double total = 0.0;
    for (size_t i = 0; i < concentration.size(); ++i) {
        check_input(concentration[i] > 0.0,
                    "dirichlet: concentrations must be positive");
        out[i] = gamma(concentration[i]);
        total += out[i];
    }
    check_input(total > 0.0, "dirichlet: degenerate draw");
    for (double& v : out) v /= total;
}

}  // namespace pmdb
