#include <doctest.h>

#include <cmath>
#include <string>

#include "pmdb/fixed_point.hpp"
#include "pmdb/mdp.hpp"
#include "util.hpp"

using namespace pmdb;
using namespace testutil;

TEST_CASE("iterative evaluation matches a dense linear solve") {
    RngStream rng(101);
    TabularMDP mdp = random_mdp(8, 3, 0.5, rng);
    TransitionModel model = random_model(8, 3, rng);
    StochasticPolicy pi = random_policy(8, 3, rng);

    numvec q_ref = solve_q_linear(mdp, model, pi);
    EvalResult res = evaluate_policy_exact(mdp, model, pi, 1e-15);
    REQUIRE(res.q.values.size() == q_ref.size());
    CHECK(sup_norm_diff(res.q.values, q_ref) < 1e-14);
    CHECK(res.residual < 1e-12);

    // J agrees with the explicit double expectation over s0 and a0
    double j_ref = 0.0;
    for (int s = 0; s < 8; ++s)
        for (int a = 0; a < 3; ++a)
            j_ref += mdp.initial_dist[s] * pi(s, a) * q_ref[s * 3 + a];
    CHECK(policy_return(mdp, res.q, pi) == doctest::Approx(j_ref).epsilon(1e-13));
}

TEST_CASE("bellman_backup is a discount-factor contraction") {
    RngStream rng(102);
    TabularMDP mdp = random_mdp(6, 4, 0.9, rng);
    TransitionModel model = random_model(6, 4, rng);
    StochasticPolicy pi = random_policy(6, 4, rng);
    for (int trial = 0; trial < 50; ++trial) {
        QTable qa = random_q(6, 4, 10.0, rng);
        QTable qb = random_q(6, 4, 10.0, rng);
        double dist = sup_norm_diff(qa.values, qb.values);
        QTable ba = bellman_backup(qa, mdp, model, pi);
        QTable bb = bellman_backup(qb, mdp, model, pi);
        CHECK(sup_norm_diff(ba.values, bb.values) <= mdp.discount * dist + 1e-12);
    }
}

TEST_CASE("terminal states are absorbing for the evaluation operator") {
    RngStream rng(103);
    TabularMDP mdp = random_mdp(5, 2, 0.9, rng);
    TransitionModel model = random_model(5, 2, rng);
    StochasticPolicy pi = random_policy(5, 2, rng);
    mdp.terminal_mask.assign(5, 0);
    mdp.terminal_mask[3] = 1;
    mdp.reward[3 * 2 + 0] = 0.0;
    mdp.reward[3 * 2 + 1] = 0.0;

    // the backup itself ignores the model row at a terminal state: two models
    // differing only there produce identical sweeps
    QTable q = random_q(5, 2, 3.0, rng);
    TransitionModel other = model;
    auto garbled = other.row(3, 0);
    garbled[0] = 1.0;
    for (size_t i = 1; i < garbled.size(); ++i) garbled[i] = 0.0;
    QTable ba = bellman_backup(q, mdp, model, pi);
    QTable bb = bellman_backup(q, mdp, other, pi);
    CHECK(sup_norm_diff(ba.values, bb.values) == 0.0);

    // end-to-end evaluation requires a properly paired (absorbing) model
    for (int a = 0; a < 2; ++a) {
        auto row = model.row(3, a);
        for (size_t i = 0; i < row.size(); ++i) row[i] = i == 3 ? 1.0 : 0.0;
    }
    EvalResult res = evaluate_policy_exact(mdp, model, pi, 1e-15);
    CHECK(std::abs(res.q(3, 0)) < 1e-12);
    CHECK(std::abs(res.q(3, 1)) < 1e-12);
    numvec q_ref = solve_q_linear(mdp, model, pi);
    CHECK(sup_norm_diff(res.q.values, q_ref) < 1e-13);
}

TEST_CASE("monte-carlo rollouts agree with the exact evaluation") {
    RngStream rng(104);
    const int S = 6, A = 3;
    TabularMDP mdp = random_mdp(S, A, 0.95, rng);
    TransitionModel model = random_model(S, A, rng);
    StochasticPolicy pi = random_policy(S, A, rng);
    EvalResult res = evaluate_policy_exact(mdp, model, pi);

    const long episodes = 4000, horizon = 500;
    double sum = 0.0, sumsq = 0.0;
    RngStream sim(900);
    for (long e = 0; e < episodes; ++e) {
        RngStream er = sim.substream(static_cast<uint64_t>(e));
        int s = er.categorical(mdp.initial_dist);
        double ret = 0.0, disc = 1.0;
        for (long t = 0; t < horizon; ++t) {
            int a = er.categorical(pi.row(s));
            ret += disc * mdp.reward_at(s, a);
            disc *= mdp.discount;
            s = er.categorical(model.row(s, a));
        }
        sum += ret;
        sumsq += ret * ret;
    }
    double mean = sum / episodes;
    double se = std::sqrt((sumsq / episodes - mean * mean) / episodes);
    double truncation = std::pow(mdp.discount, double(horizon)) /
                        (1.0 - mdp.discount);
    CHECK(std::abs(mean - res.j) < 3.0 * se + truncation);
}

TEST_CASE("greedy_policy is deterministic with lowest-index ties") {
    QTable q = QTable::zeros(2, 3);
    q(0, 0) = 1.0;
    q(0, 1) = 5.0;
    q(0, 2) = 5.0;  // tie with action 1
    q(1, 0) = 2.0;
    q(1, 1) = 2.0;
    q(1, 2) = 1.0;  // tie with action 0
    StochasticPolicy g = greedy_policy(q);
    CHECK(g(0, 1) == 1.0);
    CHECK(g(0, 2) == 0.0);
    CHECK(g(1, 0) == 1.0);
}

TEST_CASE("validation rejects malformed inputs with informative errors") {
    TransitionModel model = TransitionModel::zeros(2, 2);
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) model.row(s, a)[0] = 1.0;
    model.row(1, 0)[0] = 0.7;  // mass 0.7 != 1
    try {
        model.validate();
        FAIL("expected invalid_input");
    } catch (const invalid_input& e) {
        CHECK(std::string(e.what()).find("(s=1, a=0)") != std::string::npos);
    }

    RngStream rng(105);
    TabularMDP mdp = random_mdp(3, 2, 0.9, rng);
    mdp.terminal_mask.assign(3, 0);
    mdp.terminal_mask[1] = 1;
    CHECK(mdp.reward_at(1, 0) > 0.0);
    CHECK_THROWS_AS(mdp.validate(), invalid_input);  // terminal reward not zero
    mdp.reward[1 * 2 + 0] = 0.0;
    mdp.reward[1 * 2 + 1] = 0.0;
    mdp.validate();

    // pairing requires an absorbing explicit row at the terminal state
    TransitionModel m2 = random_model(3, 2, rng);
    CHECK_THROWS_AS(mdp.check_pairing(m2), invalid_input);
    for (int a = 0; a < 2; ++a) {
        auto row = m2.row(1, a);
        row[0] = 0.0;
        row[1] = 1.0;
        row[2] = 0.0;
    }
    mdp.check_pairing(m2);

    StochasticPolicy pi = StochasticPolicy::uniform(3, 2);
    pi.p[0] = 0.0;
    pi.p[1] = 1.0;
    pi.validate();  // zero entries allowed by default
    CHECK_THROWS_AS(pi.validate(1e-12, true), invalid_input);
}

TEST_CASE("fixed-point driver enforces its convergence contract") {
    RngStream rng(106);
    TabularMDP mdp = random_mdp(4, 2, 0.99, rng);
    TransitionModel model = random_model(4, 2, rng);
    StochasticPolicy pi = random_policy(4, 2, rng);
    // a 3-sweep cap cannot reach 1e-12 at discount 0.99
    CHECK_THROWS_AS(evaluate_policy_exact(mdp, model, pi, 1e-12, 3),
                    solver_failure);
    CHECK_THROWS_AS(
        iterate_fixed_point([](const QTable& q) { return q; },
                            QTable::zeros(1, 1), 1.5),
        invalid_input);
}
