#include "pmdb/mdp.hpp"

#include <algorithm>
#include <cmath>

#include "pmdb/fixed_point.hpp"

namespace pmdb {

namespace {

std::string sa_label(int s, int a) {
    return "(s=" + std::to_string(s) + ", a=" + std::to_string(a) + ")";
}

void check_distribution(std::span<const double> row, double tol,
                        const std::string& what) {
    double total = 0.0;
    for (double v : row) {
        check_input(v >= 0.0, what + ": negative probability");
        total += v;
    }
    check_input(std::abs(total - 1.0) <= tol,
                what + ": row mass " + std::to_string(total) + " is not 1");
}

}  // namespace

QTable QTable::zeros(int num_states, int num_actions) {
    check_input(num_states > 0 && num_actions > 0, "QTable: empty shape");
    QTable q;
    q.num_states = num_states;
    q.num_actions = num_actions;
    q.values.assign(static_cast<size_t>(num_states) * num_actions, 0.0);
    return q;
}

TransitionModel TransitionModel::zeros(int num_states, int num_actions) {
    check_input(num_states > 0 && num_actions > 0, "TransitionModel: empty shape");
    TransitionModel t;
    t.num_states = num_states;
    t.num_actions = num_actions;
    t.p.assign(static_cast<size_t>(num_states) * num_actions * num_states, 0.0);
    return t;
}

void TransitionModel::validate(double tol) const {
    check_input(num_states > 0 && num_actions > 0, "TransitionModel: empty shape");
    check_input(p.size() ==
                    static_cast<size_t>(num_states) * num_actions * num_states,
                "TransitionModel: table size does not match shape");
    for (int s = 0; s < num_states; ++s)
        for (int a = 0; a < num_actions; ++a)
            check_distribution(row(s, a), tol,
                               "TransitionModel row " + sa_label(s, a));
}

StochasticPolicy StochasticPolicy::uniform(int num_states, int num_actions) {
    check_input(num_states > 0 && num_actions > 0, "StochasticPolicy: empty shape");
    StochasticPolicy pi;
    pi.num_states = num_states;
    pi.num_actions = num_actions;
    pi.p.assign(static_cast<size_t>(num_states) * num_actions,
                1.0 / num_actions);
    return pi;
}

void StochasticPolicy::validate(double tol, bool strictly_positive) const {
    check_input(num_states > 0 && num_actions > 0, "StochasticPolicy: empty shape");
    check_input(p.size() == static_cast<size_t>(num_states) * num_actions,
                "StochasticPolicy: table size does not match shape");
    for (int s = 0; s < num_states; ++s) {
        check_distribution(row(s), tol,
                           "StochasticPolicy row s=" + std::to_string(s));
        if (strictly_positive)
            for (double v : row(s))
                check_input(v > 0.0, "StochasticPolicy row s=" +
                                         std::to_string(s) +
                                         " must be strictly positive");
    }
}

void TabularMDP::validate() const {
    check_input(num_states > 0 && num_actions > 0, "TabularMDP: empty shape");
    check_input(reward.size() == static_cast<size_t>(num_states) * num_actions,
                "TabularMDP: reward table size does not match shape");
    check_input(discount >= 0.0 && discount < 1.0,
                "TabularMDP: discount must lie in [0, 1)");
    check_input(initial_dist.size() == static_cast<size_t>(num_states),
                "TabularMDP: initial distribution size mismatch");
    check_distribution(initial_dist, 1e-12, "TabularMDP initial distribution");
    check_input(terminal_mask.empty() ||
                    terminal_mask.size() == static_cast<size_t>(num_states),
                "TabularMDP: terminal mask size mismatch");
    for (int s = 0; s < num_states; ++s)
        if (terminal(s))
            for (int a = 0; a < num_actions; ++a)
                check_input(reward_at(s, a) == 0.0,
                            "TabularMDP: terminal state must have zero reward at " +
                                sa_label(s, a));
}

void TabularMDP::check_pairing(const TransitionModel& model) const {
    check_input(model.num_states == num_states &&
                    model.num_actions == num_actions,
                "TabularMDP: paired model shape mismatch");
    model.validate();
    for (int s = 0; s < num_states; ++s) {
        if (!terminal(s)) continue;
        for (int a = 0; a < num_actions; ++a) {
            auto r = model.row(s, a);
            for (int sn = 0; sn < num_states; ++sn) {
                double want = sn == s ? 1.0 : 0.0;
                check_input(std::abs(r[sn] - want) <= 1e-12,
                            "TabularMDP: terminal state must be absorbing at " +
                                sa_label(s, a));
            }
        }
    }
}

std::pair<double, double> TabularMDP::reward_bounds() const {
    double lo = reward.empty() ? 0.0 : reward[0];
    double hi = lo;
    for (double r : reward) {
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    return {lo, hi};
}

QTable bellman_backup(const QTable& q, const TabularMDP& mdp,
                      const TransitionModel& model, const StochasticPolicy& pi) {
    const int S = mdp.num_states, A = mdp.num_actions;
    check_input(q.num_states == S && q.num_actions == A,
                "bellman_backup: value table shape mismatch");
    check_input(model.num_states == S && model.num_actions == A,
                "bellman_backup: model shape mismatch");
    check_input(pi.num_states == S && pi.num_actions == A,
                "bellman_backup: policy shape mismatch");

    numvec v(S);
    for (int s = 0; s < S; ++s) v[s] = dot(pi.row(s), q.row(s));

    QTable out = QTable::zeros(S, A);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            double cont = mdp.terminal(s) ? v[s] : dot(model.row(s, a), v);
            out(s, a) = mdp.reward_at(s, a) + mdp.discount * cont;
        }
    }
    return out;
}

EvalResult evaluate_policy_exact(const TabularMDP& mdp,
                                 const TransitionModel& model,
                                 const StochasticPolicy& pi, double tol,
                                 long max_sweeps) {
    mdp.validate();
    mdp.check_pairing(model);
    pi.validate();
    check_input(pi.num_states == mdp.num_states &&
                    pi.num_actions == mdp.num_actions,
                "evaluate_policy_exact: policy shape mismatch");

    auto out = iterate_fixed_point(
        [&](const QTable& q) { return bellman_backup(q, mdp, model, pi); },
        QTable::zeros(mdp.num_states, mdp.num_actions), mdp.discount,
        {tol, max_sweeps});
    double j = policy_return(mdp, out.q, pi);
    return {std::move(out.q), j, out.residual, out.sweeps};
}

StochasticPolicy greedy_policy(const QTable& q) {
    check_input(q.num_states > 0 && q.num_actions > 0, "greedy_policy: empty table");
    StochasticPolicy pi;
    pi.num_states = q.num_states;
    pi.num_actions = q.num_actions;
    pi.p.assign(static_cast<size_t>(q.num_states) * q.num_actions, 0.0);
    for (int s = 0; s < q.num_states; ++s) {
        int best = 0;
        for (int a = 1; a < q.num_actions; ++a)
            if (q(s, a) > q(s, best)) best = a;
        pi.row(s)[best] = 1.0;
    }
    return pi;
}

double policy_return(const TabularMDP& mdp, const QTable& q,
                     const StochasticPolicy& pi) {
    check_input(q.num_states == mdp.num_states &&
                    q.num_actions == mdp.num_actions,
                "policy_return: value table shape mismatch");
    numvec terms(static_cast<size_t>(mdp.num_states), 0.0);
    for (int s = 0; s < mdp.num_states; ++s)
        terms[s] = mdp.initial_dist[s] * dot(pi.row(s), q.row(s));
    return pairwise_sum(terms);
}

}  // namespace pmdb
