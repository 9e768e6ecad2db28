// Generic synchronous fixed-point driver shared by every evaluation operator.
#pragma once

#include <cmath>
#include <limits>
#include <utility>

#include "pmdb/mdp.hpp"

namespace pmdb {

struct FixedPointOptions {
    double tol = 1e-12;        // contract: final residual < tol
    long max_sweeps = 1000000; // hard cap; hitting it is an error
};

struct FixedPointOutcome {
    QTable q;
    double residual = 0.0;
    long sweeps = 0;
};

/// Iterates `backup` (QTable -> QTable) from `q0` until the sup-norm residual
/// drops below an effective tolerance. The effective tolerance tightens the
/// contract tolerance by (1 - gamma) so the distance to the true fixed point
/// — bounded by residual * gamma / (1 - gamma) for a gamma-contraction — ends
/// up near the contract tolerance itself, with a floor at a few ulps of the
/// iterate. A stall guard accepts early termination only when the contract
/// tolerance is already met.
template <class BackupFn>
FixedPointOutcome iterate_fixed_point(BackupFn&& backup, QTable q0, double gamma,
                                      FixedPointOptions opt = {}) {
    check_input(gamma >= 0.0 && gamma < 1.0,
                "iterate_fixed_point: discount must lie in [0, 1)");
    check_input(opt.tol > 0.0, "iterate_fixed_point: tolerance must be positive");
    constexpr double eps = std::numeric_limits<double>::epsilon();

    QTable q = std::move(q0);
    double best = std::numeric_limits<double>::infinity();
    long since_best = 0;
    for (long sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
        QTable next = backup(q);
        double residual = sup_norm_diff(next.values, q.values);
        q = std::move(next);

        double floor_tol = 8.0 * eps * (1.0 + max_abs(q.values));
        double target = std::max(opt.tol * (1.0 - gamma), floor_tol);
        if (residual <= target) return {std::move(q), residual, sweep};

        if (residual < best) {
            best = residual;
            since_best = 0;
        } else if (++since_best >= 128) {
            if (residual <= opt.tol) return {std::move(q), residual, sweep};
            throw solver_failure(
                "iterate_fixed_point: residual stalled at " +
                std::to_string(residual) + " above tolerance");
        }
    }
    throw solver_failure("iterate_fixed_point: sweep cap " +
                         std::to_string(opt.max_sweeps) +
                         " hit before meeting tolerance");
}

}  // namespace pmdb
