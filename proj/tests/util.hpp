// Shared helpers for the test suite: small random instances and independent
// reference computations kept deliberately separate from the library code
// paths they are used to check.
#pragma once

#include <cmath>
#include <vector>

#include "pmdb/belief.hpp"
#include "pmdb/mdp.hpp"
#include "pmdb/rng.hpp"

namespace testutil {

using namespace pmdb;

inline TransitionModel random_model(int S, int A, RngStream& rng) {
    TransitionModel model = TransitionModel::zeros(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            auto row = model.row(s, a);
            double total = 0.0;
            for (int sn = 0; sn < S; ++sn) {
                row[sn] = -std::log(1.0 - rng.uniform01());
                total += row[sn];
            }
            for (int sn = 0; sn < S; ++sn) row[sn] /= total;
        }
    return model;
}

inline StochasticPolicy random_policy(int S, int A, RngStream& rng) {
    StochasticPolicy pi;
    pi.num_states = S;
    pi.num_actions = A;
    pi.p.resize(static_cast<size_t>(S) * A);
    for (int s = 0; s < S; ++s) {
        auto row = pi.row(s);
        double total = 0.0;
        for (int a = 0; a < A; ++a) {
            row[a] = 0.05 + rng.uniform01();
            total += row[a];
        }
        for (int a = 0; a < A; ++a) row[a] /= total;
    }
    return pi;
}

inline TabularMDP random_mdp(int S, int A, double discount, RngStream& rng) {
    TabularMDP mdp;
    mdp.num_states = S;
    mdp.num_actions = A;
    mdp.discount = discount;
    mdp.reward.resize(static_cast<size_t>(S) * A);
    for (double& r : mdp.reward) r = rng.uniform01();
    mdp.initial_dist.assign(S, 1.0 / S);
    return mdp;
}

inline QTable random_q(int S, int A, double scale, RngStream& rng) {
    QTable q = QTable::zeros(S, A);
    for (double& v : q.values) v = scale * (2.0 * rng.uniform01() - 1.0);
    return q;
}

inline EnsembleBelief random_ensemble(int S, int A, int M, RngStream& rng,
                                      bool uniform_weights = false) {
    EnsembleBelief belief;
    numvec w(M);
    double total = 0.0;
    for (int m = 0; m < M; ++m) {
        belief.members.push_back(random_model(S, A, rng));
        w[m] = uniform_weights ? 1.0 : 0.2 + rng.uniform01();
        total += w[m];
    }
    for (double& v : w) v /= total;
    belief.weights = w;
    return belief;
}

/// Q-space policy evaluation by dense Gaussian elimination:
/// (I - discount * M_pi) q = r with M[(s,a),(s',a')] = P(s'|s,a) pi(a'|s').
/// Independent of the library's iterative solver.
inline numvec solve_q_linear(const TabularMDP& mdp, const TransitionModel& model,
                             const StochasticPolicy& pi) {
    const int S = mdp.num_states, A = mdp.num_actions, n = S * A;
    std::vector<double> mat(static_cast<size_t>(n) * n, 0.0);
    numvec rhs(n);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const int i = s * A + a;
            mat[static_cast<size_t>(i) * n + i] += 1.0;
            rhs[i] = mdp.reward_at(s, a);
            if (mdp.terminal(s)) {
                // absorbing continuation: q(s,a) = r + discount * v(s)
                for (int an = 0; an < A; ++an)
                    mat[static_cast<size_t>(i) * n + s * A + an] -=
                        mdp.discount * pi(s, an);
                continue;
            }
            auto row = model.row(s, a);
            for (int sn = 0; sn < S; ++sn)
                for (int an = 0; an < A; ++an)
                    mat[static_cast<size_t>(i) * n + sn * A + an] -=
                        mdp.discount * row[sn] * pi(sn, an);
        }
    // partial-pivot elimination
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(mat[static_cast<size_t>(r) * n + col]) >
                std::abs(mat[static_cast<size_t>(piv) * n + col]))
                piv = r;
        if (piv != col) {
            for (int c = 0; c < n; ++c)
                std::swap(mat[static_cast<size_t>(col) * n + c],
                          mat[static_cast<size_t>(piv) * n + c]);
            std::swap(rhs[col], rhs[piv]);
        }
        const double d = mat[static_cast<size_t>(col) * n + col];
        for (int r = col + 1; r < n; ++r) {
            const double f = mat[static_cast<size_t>(r) * n + col] / d;
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c)
                mat[static_cast<size_t>(r) * n + c] -=
                    f * mat[static_cast<size_t>(col) * n + c];
            rhs[r] -= f * rhs[col];
        }
    }
    numvec q(n);
    for (int r = n - 1; r >= 0; --r) {
        double acc = rhs[r];
        for (int c = r + 1; c < n; ++c)
            acc -= mat[static_cast<size_t>(r) * n + c] * q[c];
        q[r] = acc / mat[static_cast<size_t>(r) * n + r];
    }
    return q;
}

}  // namespace testutil
