#include "pmdb/common.hpp"

#include <algorithm>
#include <cassert>

namespace pmdb {

double sup_norm_diff(std::span<const double> a, std::span<const double> b) {
    check_input(a.size() == b.size(), "sup_norm_diff: length mismatch");
    double d = 0.0;
    for (size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

double max_abs(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

double pairwise_sum(std::span<const double> x) {
    // Recursive halving with a small base case; the reduction tree depends
    // only on the length, so the result is independent of chunking.
    if (x.size() <= 8) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    }
    size_t half = x.size() / 2;
    return pairwise_sum(x.subspan(0, half)) + pairwise_sum(x.subspan(half));
}

double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double log_sum_exp(std::span<const double> x) {
    if (x.empty()) return -std::numeric_limits<double>::infinity();
    double m = -std::numeric_limits<double>::infinity();
    for (double v : x) m = std::max(m, v);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double v : x) s += std::exp(v - m);
    return m + std::log(s);
}

double log_mean_exp(std::span<const double> mu, std::span<const double> q,
                    double alpha) {
    check_input(mu.size() == q.size(), "log_mean_exp: length mismatch");
    check_input(alpha > 0.0, "log_mean_exp: alpha must be positive");
    double m = -std::numeric_limits<double>::infinity();
    for (size_t a = 0; a < q.size(); ++a)
        if (mu[a] > 0.0) m = std::max(m, q[a] / alpha);
    if (!std::isfinite(m))
        throw invalid_input("log_mean_exp: distribution has empty support");
    double s = 0.0;
    for (size_t a = 0; a < q.size(); ++a)
        if (mu[a] > 0.0) s += mu[a] * std::exp(q[a] / alpha - m);
    return alpha * (m + std::log(s));
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    check_input(p.size() == q.size(), "kl_divergence: length mismatch");
    double kl = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        check_input(q[i] > 0.0,
                    "kl_divergence: q lacks support where p has mass");
        kl += p[i] * std::log(p[i] / q[i]);
    }
    // Rounding can push a tiny negative value for p == q.
    return std::max(kl, 0.0);
}

void tilted_distribution(std::span<const double> mu, std::span<const double> q,
                         double alpha, std::span<double> out) {
    check_input(mu.size() == q.size() && mu.size() == out.size(),
                "tilted_distribution: length mismatch");
    check_input(alpha > 0.0, "tilted_distribution: alpha must be positive");
    double m = -std::numeric_limits<double>::infinity();
    for (size_t a = 0; a < q.size(); ++a)
        if (mu[a] > 0.0) m = std::max(m, std::log(mu[a]) + q[a] / alpha);
    if (!std::isfinite(m))
        throw invalid_input("tilted_distribution: empty support");
    double z = 0.0;
    for (size_t a = 0; a < q.size(); ++a) {
        out[a] = mu[a] > 0.0 ? std::exp(std::log(mu[a]) + q[a] / alpha - m) : 0.0;
        z += out[a];
    }
    for (size_t a = 0; a < out.size(); ++a) out[a] /= z;
}

void floor_and_normalize(std::span<double> p, double floor_value) {
    double s = 0.0;
    for (double& v : p) {
        v = std::max(v, floor_value);
        s += v;
    }
    check_input(s > 0.0, "floor_and_normalize: non-positive mass");
    for (double& v : p) v /= s;
}

}  // namespace pmdb
