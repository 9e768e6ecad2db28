#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pmdb/regularized.hpp"
#include "util.hpp"

using namespace pmdb;
using namespace testutil;

namespace {

/// Long-double reference for one sweep of the soft optimality backup with
/// exhaustive M^N enumeration of the candidate tuples.
QTable soft_backup_reference(const QTable& q, const StochasticPolicy& mu,
                             const EnsembleBelief& belief, int n, int k,
                             double alpha, const TabularMDP& mdp) {
    const int S = mdp.num_states, A = mdp.num_actions;
    const int M = belief.num_members();
    std::vector<long double> v(S);
    for (int sn = 0; sn < S; ++sn) {
        long double acc = 0.0L;
        for (int a = 0; a < A; ++a)
            acc += static_cast<long double>(mu(sn, a)) *
                   std::exp(static_cast<long double>(q(sn, a)) / alpha);
        v[sn] = alpha * std::log(acc);
    }
    long tuples = 1;
    for (int i = 0; i < n; ++i) tuples *= M;

    QTable out = QTable::zeros(S, A);
    std::vector<long double> g(M), vals(n);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            long double inner = 0.0L;
            if (mdp.terminal(s)) {
                inner = v[s];
            } else {
                for (int m = 0; m < M; ++m) {
                    auto row = belief.member_row(m, s, a);
                    long double acc = 0.0L;
                    for (int sn = 0; sn < S; ++sn) acc += row[sn] * v[sn];
                    g[m] = acc;
                }
                for (long code = 0; code < tuples; ++code) {
                    long c = code;
                    long double p = 1.0L;
                    for (int i = 0; i < n; ++i) {
                        vals[i] = g[c % M];
                        p *= belief.weights[c % M];
                        c /= M;
                    }
                    std::nth_element(vals.begin(), vals.begin() + (k - 1),
                                     vals.end());
                    inner += p * vals[k - 1];
                }
            }
            out(s, a) = static_cast<double>(mdp.reward_at(s, a) +
                                            mdp.discount * inner);
        }
    return out;
}

/// Standard optimal value iteration in V-space under an explicit model;
/// independent of the library's Q-space machinery.
double optimal_return_reference(const TabularMDP& mdp,
                                const TransitionModel& model) {
    const int S = mdp.num_states, A = mdp.num_actions;
    numvec v(S, 0.0), next(S);
    for (int sweep = 0; sweep < 200000; ++sweep) {
        for (int s = 0; s < S; ++s) {
            double best = -1e300;
            for (int a = 0; a < A; ++a) {
                double cont = mdp.terminal(s) ? v[s] : dot(model.row(s, a), v);
                best = std::max(best, mdp.reward_at(s, a) + mdp.discount * cont);
            }
            next[s] = best;
        }
        double res = sup_norm_diff(next, v);
        v = next;
        if (res < 1e-14) break;
    }
    double j = 0.0;
    for (int s = 0; s < S; ++s) j += mdp.initial_dist[s] * v[s];
    return j;
}

}  // namespace

TEST_CASE("boltzmann_policy closed form and positivity") {
    StochasticPolicy mu = StochasticPolicy::uniform(1, 2);
    QTable q = QTable::zeros(1, 2);
    const double alpha = 0.23;
    q(0, 1) = alpha * std::log(3.0);  // tilt 1:3
    StochasticPolicy pi = boltzmann_policy(mu, q, alpha);
    CHECK(pi(0, 0) == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(pi(0, 1) == doctest::Approx(0.75).epsilon(1e-13));
    pi.validate(1e-12, true);

    // extreme advantage keeps rows valid through the probability floor
    q(0, 1) = 1e9;
    StochasticPolicy hard = boltzmann_policy(mu, q, alpha);
    hard.validate(1e-12, true);
    CHECK(hard(0, 1) > 1.0 - 1e-9);
}

TEST_CASE("soft backup agrees with a long-double enumeration reference") {
    RngStream rng(401);
    const int S = 4, A = 3;
    TabularMDP mdp = random_mdp(S, A, 0.9, rng);
    mdp.terminal_mask.assign(S, 0);
    mdp.terminal_mask[3] = 1;
    for (int a = 0; a < A; ++a) mdp.reward[3 * A + a] = 0.0;

    for (int trial = 0; trial < 6; ++trial) {
        EnsembleBelief belief = random_ensemble(S, A, 3, rng);
        StochasticPolicy mu = random_policy(S, A, rng);
        QTable q = random_q(S, A, 2.0, rng);
        for (double alpha : {0.05, 0.5, 5.0}) {
            RegularizationConfig reg;
            reg.alpha = alpha;
            PessimismConfig cfg{3, 2, 32};
            QTable fast = soft_pessimistic_backup(q, mu, belief, cfg, reg, mdp);
            QTable ref = soft_backup_reference(q, mu, belief, 3, 2, alpha, mdp);
            CHECK(sup_norm_diff(fast.values, ref.values) < 1e-11);
        }
    }
}

TEST_CASE("the soft optimality backup is a discount contraction") {
    RngStream rng(402);
    const int S = 5, A = 3;
    TabularMDP mdp = random_mdp(S, A, 0.9, rng);
    EnsembleBelief belief = random_ensemble(S, A, 4, rng);
    StochasticPolicy mu = random_policy(S, A, rng);
    RegularizationConfig reg;
    PessimismConfig cfg{5, 2, 32};
    for (int trial = 0; trial < 40; ++trial) {
        QTable qa = random_q(S, A, 8.0, rng);
        QTable qb = random_q(S, A, 8.0, rng);
        QTable ba = soft_pessimistic_backup(qa, mu, belief, cfg, reg, mdp);
        QTable bb = soft_pessimistic_backup(qb, mu, belief, cfg, reg, mdp);
        CHECK(sup_norm_diff(ba.values, bb.values) <=
              mdp.discount * sup_norm_diff(qa.values, qb.values) + 1e-12);
    }
}

TEST_CASE("regularized evaluation at the reference policy is unregularized") {
    RngStream rng(403);
    const int S = 5, A = 3;
    TabularMDP mdp = random_mdp(S, A, 0.95, rng);
    EnsembleBelief belief = random_ensemble(S, A, 4, rng);
    StochasticPolicy pi = random_policy(S, A, rng);
    PessimismConfig cfg{4, 2, 32};
    RegularizationConfig reg;
    reg.alpha = 0.3;

    RegularizedEval reg_eval =
        evaluate_regularized(pi, pi, belief, cfg, reg, mdp);
    PessimisticEval plain = evaluate_policy_pessimistic(pi, belief, cfg, mdp);
    CHECK(sup_norm_diff(reg_eval.q.values, plain.q.values) < 1e-13);
    CHECK(reg_eval.j_reg == doctest::Approx(plain.j).epsilon(1e-13));
}

TEST_CASE("solving the regularized problem beats every fixed policy's value") {
    RngStream rng(404);
    const int S = 4, A = 3;
    TabularMDP mdp = random_mdp(S, A, 0.93, rng);
    EnsembleBelief belief = random_ensemble(S, A, 4, rng);
    StochasticPolicy mu = random_policy(S, A, rng);
    PessimismConfig cfg{3, 2, 32};
    RegularizationConfig reg;
    reg.alpha = 0.2;

    RegularizedSolve solved = solve_regularized(mu, belief, cfg, reg, mdp);
    CHECK(solved.residual < 1e-12);
    solved.pi.validate(1e-12, true);

    // the solved policy's own regularized evaluation reproduces the soft
    // optimum, and any other policy evaluates no higher
    RegularizedEval at_opt =
        evaluate_regularized(solved.pi, mu, belief, cfg, reg, mdp);
    double j_opt = policy_return(mdp, solved.q, solved.pi);
    // j under the soft table vs the evaluation path: identical fixed points
    CHECK(sup_norm_diff(at_opt.q.values, solved.q.values) < 1e-9);

    for (int trial = 0; trial < 10; ++trial) {
        StochasticPolicy other = random_policy(S, A, rng);
        RegularizedEval e = evaluate_regularized(other, mu, belief, cfg, reg, mdp);
        CHECK(e.j_reg <= at_opt.j_reg + 1e-9);
    }
    (void)j_opt;
}

TEST_CASE("iterated optimization never loses return") {
    RngStream rng(405);
    for (int trial = 0; trial < 4; ++trial) {
        const int S = 5, A = 3, M = 4;
        TabularMDP mdp = random_mdp(S, A, 0.95, rng);
        EnsembleBelief belief = random_ensemble(S, A, M, rng);
        StochasticPolicy pi0 = StochasticPolicy::uniform(S, A);
        PessimismConfig cfg{4, 2, 32};
        RegularizationConfig reg;
        reg.alpha = 0.1;

        RpoTrace trace = iterate_rpo(pi0, belief, cfg, reg, mdp, 12);
        REQUIRE(trace.iterations.size() >= 2);
        CHECK(trace.iterations[0].iter == 0);
        for (size_t i = 1; i < trace.iterations.size(); ++i)
            CHECK(trace.iterations[i].j >= trace.iterations[i - 1].j - 1e-9);
        CHECK(trace.final().j > trace.iterations[0].j);
    }
}

TEST_CASE("single-candidate optimization approaches plain value iteration") {
    RngStream rng(406);
    const int S = 6, A = 3;
    TabularMDP mdp = random_mdp(S, A, 0.95, rng);
    EnsembleBelief belief = random_ensemble(S, A, 4, rng);
    StochasticPolicy pi0 = StochasticPolicy::uniform(S, A);
    PessimismConfig cfg{1, 1, 32};
    RegularizationConfig reg;
    reg.alpha = 0.005;

    RpoTrace trace = iterate_rpo(pi0, belief, cfg, reg, mdp, 60);
    double j_star = optimal_return_reference(mdp, belief_mean_model(belief));
    CHECK(trace.final().j <= j_star + 1e-9);
    CHECK(trace.final().j == doctest::Approx(j_star).epsilon(1e-7));
}

TEST_CASE("automatic temperature respects the divergence budget") {
    RngStream rng(407);
    RegularizationConfig reg;
    reg.alpha_floor = 1e-3;
    reg.kl_budget = 0.25;
    reg.auto_alpha = true;
    const int A = 5;
    for (int trial = 0; trial < 100; ++trial) {
        StochasticPolicy mu = random_policy(1, A, rng);
        QTable q = random_q(1, A, 3.0, rng);
        double alpha = auto_alpha(q, mu, 0, reg);
        CHECK(alpha >= reg.alpha_floor);

        numvec tilt(A);
        tilted_distribution(mu.row(0), q.row(0), alpha, tilt);
        CHECK(kl_divergence(tilt, mu.row(0)) <= reg.kl_budget + 1e-9);
    }
}

TEST_CASE("auto-alpha optimization stays monotone") {
    RngStream rng(408);
    const int S = 5, A = 3;
    TabularMDP mdp = random_mdp(S, A, 0.95, rng);
    EnsembleBelief belief = random_ensemble(S, A, 4, rng);
    StochasticPolicy pi0 = StochasticPolicy::uniform(S, A);
    PessimismConfig cfg{4, 2, 32};
    RegularizationConfig reg;
    reg.auto_alpha = true;
    reg.alpha_floor = 5e-3;
    reg.kl_budget = 0.5;
    RpoTrace trace = iterate_rpo(pi0, belief, cfg, reg, mdp, 10);
    for (size_t i = 1; i < trace.iterations.size(); ++i)
        CHECK(trace.iterations[i].j >= trace.iterations[i - 1].j - 1e-9);
    CHECK(trace.final().j > trace.iterations[0].j);
}

TEST_CASE("regularized sweeps keep the lattice monotone") {
    RngStream rng(409);
    const int S = 5, A = 2;
    TabularMDP mdp = random_mdp(S, A, 0.95, rng);
    EnsembleBelief belief = random_ensemble(S, A, 5, rng);
    StochasticPolicy pi = random_policy(S, A, rng);
    StochasticPolicy mu = random_policy(S, A, rng);
    SweepRegularization reg{&mu, 0.15};

    for (SweepGrid grid : {SweepGrid{SweepRule::kFixedK, 2, 2, 6},
                           SweepGrid{SweepRule::kFixedN, 6, 1, 6},
                           SweepGrid{SweepRule::kDiagonal, 0, 1, 6}}) {
        SweepResult res =
            sweep_monotonicity(pi, belief, mdp, grid, 1e-9, nullptr, &reg);
        CHECK(res.monotone);
    }
}

TEST_CASE("regularization config validation") {
    RegularizationConfig reg;
    reg.alpha = 0.0;
    CHECK_THROWS_AS(reg.validate(), invalid_input);
    reg.alpha = 0.1;
    reg.kl_budget = -1.0;
    CHECK_THROWS_AS(reg.validate(), invalid_input);
    reg.kl_budget = 1.0;
    reg.alpha_floor = 0.0;
    CHECK_THROWS_AS(reg.validate(), invalid_input);
}
