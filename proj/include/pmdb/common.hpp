// Shared numeric primitives for the pmdb library.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmdb {

/// Default numeric vector type used throughout the library.
using numvec = std::vector<double>;

/// Thrown when inputs violate a documented precondition.
class invalid_input : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterative solver fails to meet its convergence contract.
class solver_failure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void check_input(bool cond, const std::string& message) {
    if (!cond) throw invalid_input(message);
}

/// Sup-norm distance between two arrays of equal length.
double sup_norm_diff(std::span<const double> a, std::span<const double> b);

/// Largest absolute entry (0 for an empty array).
double max_abs(std::span<const double> x);

/// Pairwise (cascade) summation in a fixed order; deterministic reduction
/// independent of any parallel schedule.
double pairwise_sum(std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);

/// log(sum_i exp(x_i)) with max-subtraction; -inf for an empty span.
double log_sum_exp(std::span<const double> x);

/// alpha * log( sum_a mu[a] * exp(q[a] / alpha) ).
/// Zero-weight entries are skipped, so mu need not have full support.
double log_mean_exp(std::span<const double> mu, std::span<const double> q,
                    double alpha);

/// KL(p || q). Entries with p[a] == 0 contribute nothing; p[a] > 0 with
/// q[a] == 0 is rejected (infinite divergence).
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Writes the normalized tilt mu[a] * exp(q[a] / alpha) into out.
/// Computed in the log domain with max-subtraction so large q/alpha is safe.
void tilted_distribution(std::span<const double> mu, std::span<const double> q,
                         double alpha, std::span<double> out);

/// Floors every entry at `floor_value` and renormalizes to sum 1.
void floor_and_normalize(std::span<double> p, double floor_value);

/// Minimum probability kept in any stored policy row.
inline constexpr double kPolicyFloor = 1e-12;

}  // namespace pmdb
