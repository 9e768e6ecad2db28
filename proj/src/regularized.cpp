#include "pmdb/regularized.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pmdb {

void RegularizationConfig::validate() const {
    check_input(alpha > 0.0, "RegularizationConfig: alpha must be positive");
    check_input(alpha_floor > 0.0,
                "RegularizationConfig: alpha floor must be positive");
    check_input(kl_budget > 0.0,
                "RegularizationConfig: KL budget must be positive");
}

StochasticPolicy boltzmann_policy(const StochasticPolicy& mu, const QTable& q,
                                  double alpha) {
    check_input(mu.num_states == q.num_states && mu.num_actions == q.num_actions,
                "boltzmann_policy: shape mismatch");
    check_input(alpha > 0.0, "boltzmann_policy: alpha must be positive");
    StochasticPolicy pi = mu;
    for (int s = 0; s < mu.num_states; ++s) {
        tilted_distribution(mu.row(s), q.row(s), alpha, pi.row(s));
        floor_and_normalize(pi.row(s), kPolicyFloor);
    }
    return pi;
}

namespace {

void check_soft_inputs(const StochasticPolicy& mu, const DynamicsBelief& belief,
                       const PessimismConfig& cfg,
                       const RegularizationConfig& reg, const TabularMDP& mdp) {
    mdp.validate();
    mu.validate(1e-12, /*strictly_positive=*/true);
    validate_belief(belief);
    cfg.validate();
    reg.validate();
    check_input(mu.num_states == mdp.num_states &&
                    mu.num_actions == mdp.num_actions,
                "soft backup: reference policy shape mismatch");
    check_input(belief_num_states(belief) == mdp.num_states &&
                    belief_num_actions(belief) == mdp.num_actions,
                "soft backup: belief shape mismatch");
}

}  // namespace

QTable soft_pessimistic_backup(const QTable& q, const StochasticPolicy& mu,
                               const DynamicsBelief& belief,
                               const PessimismConfig& cfg,
                               const RegularizationConfig& reg,
                               const TabularMDP& mdp,
                               const FrozenSampleBank* bank) {
    check_soft_inputs(mu, belief, cfg, reg, mdp);
    check_input(q.num_states == mdp.num_states &&
                    q.num_actions == mdp.num_actions,
                "soft backup: value table shape mismatch");

    PessimisticInner inner(belief, cfg, mdp, bank);
    const int S = mdp.num_states, A = mdp.num_actions;
    numvec v(S);
    for (int s = 0; s < S; ++s)
        v[s] = log_mean_exp(mu.row(s), q.row(s), reg.alpha);

    QTable out = QTable::zeros(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            out(s, a) = mdp.reward_at(s, a) + mdp.discount * inner(s, a, v);
    return out;
}

RegularizedSolve solve_regularized(const StochasticPolicy& mu,
                                   const DynamicsBelief& belief,
                                   const PessimismConfig& cfg,
                                   const RegularizationConfig& reg,
                                   const TabularMDP& mdp,
                                   const FrozenSampleBank* bank) {
    check_soft_inputs(mu, belief, cfg, reg, mdp);

    PessimisticInner inner(belief, cfg, mdp, bank);
    const int S = mdp.num_states, A = mdp.num_actions;
    numvec v(S);
    auto backup = [&](const QTable& q) {
        for (int s = 0; s < S; ++s)
            v[s] = log_mean_exp(mu.row(s), q.row(s), reg.alpha);
        QTable out = QTable::zeros(S, A);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                out(s, a) = mdp.reward_at(s, a) + mdp.discount * inner(s, a, v);
        return out;
    };
    auto fp = iterate_fixed_point(backup, QTable::zeros(S, A), mdp.discount);
    StochasticPolicy pi = boltzmann_policy(mu, fp.q, reg.alpha);
    return {std::move(fp.q), std::move(pi), fp.residual, fp.sweeps};
}

RegularizedEval evaluate_regularized(const StochasticPolicy& pi,
                                     const StochasticPolicy& mu,
                                     const DynamicsBelief& belief,
                                     const PessimismConfig& cfg,
                                     const RegularizationConfig& reg,
                                     const TabularMDP& mdp,
                                     const FrozenSampleBank* bank) {
    check_soft_inputs(mu, belief, cfg, reg, mdp);
    pi.validate();
    check_input(pi.num_states == mdp.num_states &&
                    pi.num_actions == mdp.num_actions,
                "evaluate_regularized: policy shape mismatch");

    const int S = mdp.num_states, A = mdp.num_actions;
    numvec kl(S);
    for (int s = 0; s < S; ++s) kl[s] = kl_divergence(pi.row(s), mu.row(s));

    PessimisticInner inner(belief, cfg, mdp, bank);
    numvec v(S);
    auto backup = [&](const QTable& q) {
        for (int s = 0; s < S; ++s)
            v[s] = dot(pi.row(s), q.row(s)) - reg.alpha * kl[s];
        QTable out = QTable::zeros(S, A);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                out(s, a) = mdp.reward_at(s, a) + mdp.discount * inner(s, a, v);
        return out;
    };
    auto fp = iterate_fixed_point(backup, QTable::zeros(S, A), mdp.discount);

    numvec terms(static_cast<size_t>(S), 0.0);
    for (int s = 0; s < S; ++s)
        terms[s] = mdp.initial_dist[s] *
                   (dot(pi.row(s), fp.q.row(s)) - reg.alpha * kl[s]);
    double j_reg = pairwise_sum(terms);
    return {std::move(fp.q), j_reg, fp.residual, fp.sweeps};
}

double auto_alpha(const QTable& q, const StochasticPolicy& mu, int s,
                  const RegularizationConfig& reg) {
    reg.validate();
    check_input(q.num_states == mu.num_states &&
                    q.num_actions == mu.num_actions,
                "auto_alpha: shape mismatch");
    check_input(s >= 0 && s < q.num_states, "auto_alpha: state out of range");
    auto mu_row = mu.row(s);
    auto q_row = q.row(s);
    for (double w : mu_row)
        check_input(w > 0.0, "auto_alpha: reference row must be strictly positive");

    numvec tilt(q_row.size());
    tilted_distribution(mu_row, q_row, reg.alpha_floor, tilt);
    double gap = dot(tilt, q_row) - dot(mu_row, q_row);
    return std::max(gap / reg.kl_budget, reg.alpha_floor);
}

namespace {

std::string format_trace(const RpoTrace& trace) {
    std::ostringstream out;
    for (const auto& it : trace.iterations)
        out << "  iter " << it.iter << ": J = " << it.j
            << ", residual = " << it.residual << "\n";
    return out.str();
}

}  // namespace

RpoTrace iterate_rpo(const StochasticPolicy& pi0, const DynamicsBelief& belief,
                     const PessimismConfig& cfg, const RegularizationConfig& reg,
                     const TabularMDP& mdp, int num_iters,
                     const FrozenSampleBank* bank) {
    check_input(num_iters >= 1, "iterate_rpo: need at least one iteration");
    check_soft_inputs(pi0, belief, cfg, reg, mdp);

    RpoTrace trace;
    {
        auto ev = evaluate_policy_pessimistic(pi0, belief, cfg, mdp, bank);
        trace.iterations.push_back({0, ev.j, 0.0, pi0, QTable()});
    }

    RegularizationConfig step_reg = reg;
    StochasticPolicy mu = pi0;
    int flat_count = 0;
    for (int i = 1; i <= num_iters; ++i) {
        if (reg.auto_alpha && !trace.iterations.back().q_soft.values.empty()) {
            // Global schedule: max of the per-state temperatures under the
            // previous sub-problem's fixed point.
            double a = reg.alpha_floor;
            for (int s = 0; s < mdp.num_states; ++s)
                a = std::max(a, auto_alpha(trace.iterations.back().q_soft, mu, s,
                                           reg));
            step_reg.alpha = a;
        }

        auto solve = solve_regularized(mu, belief, cfg, step_reg, mdp, bank);
        auto ev = evaluate_policy_pessimistic(solve.pi, belief, cfg, mdp, bank);

        double prev_j = trace.iterations.back().j;
        trace.iterations.push_back(
            {i, ev.j, solve.residual, solve.pi, std::move(solve.q)});

        if (ev.j < prev_j - 1e-9)
            throw solver_failure(
                "iterate_rpo: return decreased beyond tolerance at iteration " +
                std::to_string(i) + " (" + std::to_string(prev_j) + " -> " +
                std::to_string(ev.j) + ")\ntrace:\n" + format_trace(trace));

        flat_count = ev.j - prev_j < 1e-10 ? flat_count + 1 : 0;
        mu = trace.iterations.back().policy;
        if (flat_count >= 3) break;
    }
    return trace;
}

}  // namespace pmdb
