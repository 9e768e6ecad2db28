// Tabular MDP primitives: dense tables, validation, exact policy evaluation.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pmdb/common.hpp"

namespace pmdb {

/// Dense state-action value table, row-major over (state, action).
struct QTable {
    int num_states = 0;
    int num_actions = 0;
    numvec values;

    static QTable zeros(int num_states, int num_actions);

    double operator()(int s, int a) const {
        return values[static_cast<size_t>(s) * num_actions + a];
    }
    double& operator()(int s, int a) {
        return values[static_cast<size_t>(s) * num_actions + a];
    }
    std::span<const double> row(int s) const {
        return {values.data() + static_cast<size_t>(s) * num_actions,
                static_cast<size_t>(num_actions)};
    }
    std::span<double> row(int s) {
        return {values.data() + static_cast<size_t>(s) * num_actions,
                static_cast<size_t>(num_actions)};
    }
    bool same_shape(const QTable& o) const {
        return num_states == o.num_states && num_actions == o.num_actions;
    }
};

/// One complete transition table, row-major over (state, action, next state).
struct TransitionModel {
    int num_states = 0;
    int num_actions = 0;
    numvec p;

    static TransitionModel zeros(int num_states, int num_actions);

    std::span<const double> row(int s, int a) const {
        return {p.data() +
                    (static_cast<size_t>(s) * num_actions + a) * num_states,
                static_cast<size_t>(num_states)};
    }
    std::span<double> row(int s, int a) {
        return {p.data() +
                    (static_cast<size_t>(s) * num_actions + a) * num_states,
                static_cast<size_t>(num_states)};
    }

    /// Rejects negative entries and rows whose mass deviates from 1 by more
    /// than `tol`, naming the offending (s, a).
    void validate(double tol = 1e-12) const;
};

/// Row-stochastic policy table.
struct StochasticPolicy {
    int num_states = 0;
    int num_actions = 0;
    numvec p;

    static StochasticPolicy uniform(int num_states, int num_actions);

    double operator()(int s, int a) const {
        return p[static_cast<size_t>(s) * num_actions + a];
    }
    std::span<const double> row(int s) const {
        return {p.data() + static_cast<size_t>(s) * num_actions,
                static_cast<size_t>(num_actions)};
    }
    std::span<double> row(int s) {
        return {p.data() + static_cast<size_t>(s) * num_actions,
                static_cast<size_t>(num_actions)};
    }

    void validate(double tol = 1e-12, bool strictly_positive = false) const;
};

/// Reward/discount/initial-state specification. Transition dynamics are kept
/// separate so one MDP can be paired with many models or beliefs.
struct TabularMDP {
    int num_states = 0;
    int num_actions = 0;
    numvec reward;  // row-major (s, a)
    double discount = 0.99;
    numvec initial_dist;
    std::vector<uint8_t> terminal_mask;

    double reward_at(int s, int a) const {
        return reward[static_cast<size_t>(s) * num_actions + a];
    }
    bool terminal(int s) const {
        return !terminal_mask.empty() && terminal_mask[s] != 0;
    }

    /// Shape/range checks plus the terminal contract: terminal states carry
    /// zero reward in every action.
    void validate() const;

    /// Additionally requires absorbing rows at terminal states of `model`.
    void check_pairing(const TransitionModel& model) const;

    std::pair<double, double> reward_bounds() const;
};

struct EvalResult {
    QTable q;
    double j = 0.0;         // E over initial states and policy of Q(s0, a0)
    double residual = 0.0;  // final sup-norm backup residual
    long sweeps = 0;
};

/// One synchronous Bellman evaluation sweep.
/// Terminal states are treated as absorbing regardless of the model row,
/// which keeps the operator consistent with beliefs that cannot represent an
/// exactly absorbing row.
QTable bellman_backup(const QTable& q, const TabularMDP& mdp,
                      const TransitionModel& model, const StochasticPolicy& pi);

/// Iterates bellman_backup from Q = 0 to the stated residual tolerance.
EvalResult evaluate_policy_exact(const TabularMDP& mdp,
                                 const TransitionModel& model,
                                 const StochasticPolicy& pi,
                                 double tol = 1e-12,
                                 long max_sweeps = 1000000);

/// Deterministic greedy policy; ties break toward the lowest action index.
StochasticPolicy greedy_policy(const QTable& q);

/// J = E_{s0 ~ initial_dist, a0 ~ pi} [ Q(s0, a0) ].
double policy_return(const TabularMDP& mdp, const QTable& q,
                     const StochasticPolicy& pi);

}  // namespace pmdb
