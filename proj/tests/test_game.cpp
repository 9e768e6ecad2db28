#include <doctest.h>

#include <cmath>

#include "pmdb/game.hpp"
#include "util.hpp"

using namespace pmdb;
using namespace testutil;

TEST_CASE("table-scale defaults are pinned") {
    CHECK(kDefaultHorizon == 1000);
    CHECK(kDefaultExploration == 0.1);
}

TEST_CASE("episodes are deterministic given the stream") {
    RngStream rng(501);
    const int S = 5, A = 2;
    TabularMDP mdp = random_mdp(S, A, 0.9, rng);
    EnsembleBelief belief = random_ensemble(S, A, 4, rng);
    StochasticPolicy pi = random_policy(S, A, rng);
    PessimismConfig cfg{4, 2, 32};
    PessimisticEval pess = evaluate_policy_pessimistic(pi, belief, cfg, mdp);

    SecondaryPolicy secondary;
    secondary.mode = SecondaryMode::kEpsilonExplore;
    secondary.epsilon = 0.2;
    secondary.q = &pess.q;
    secondary.policy = &pi;

    RngStream g1(77), g2(77);
    EpisodeResult e1 = play_episode(mdp, belief, pi, secondary, cfg, 50, g1);
    EpisodeResult e2 = play_episode(mdp, belief, pi, secondary, cfg, 50, g2);
    CHECK(e1.discounted_return == e2.discounted_return);
    REQUIRE(e1.trajectory.size() == e2.trajectory.size());
    CHECK(e1.trajectory.size() == 50);
    for (size_t i = 0; i < e1.trajectory.size(); ++i) {
        CHECK(e1.trajectory[i].s == e2.trajectory[i].s);
        CHECK(e1.trajectory[i].a == e2.trajectory[i].a);
        CHECK(e1.trajectory[i].chosen_candidate == e2.trajectory[i].chosen_candidate);
        CHECK(e1.trajectory[i].chosen_candidate >= 0);
        CHECK(e1.trajectory[i].chosen_candidate < 4);
    }

    // the recorded records compose a consistent chain
    double ret = 0.0, disc = 1.0;
    int prev_next = e1.trajectory.front().s;
    for (const auto& rec : e1.trajectory) {
        CHECK(rec.s == prev_next);
        CHECK(rec.r == mdp.reward_at(rec.s, rec.a));
        ret += disc * rec.r;
        disc *= mdp.discount;
        prev_next = rec.s_next;
    }
    CHECK(ret == doctest::Approx(e1.discounted_return).epsilon(1e-13));
}

TEST_CASE("degenerate single-member games reproduce the exact mdp return") {
    RngStream rng(502);
    const int S = 5, A = 2;
    TabularMDP mdp = random_mdp(S, A, 0.9, rng);
    mdp.discount = 0.9;
    EnsembleBelief belief = random_ensemble(S, A, 1, rng);
    StochasticPolicy pi = random_policy(S, A, rng);
    PessimismConfig cfg{3, 1, 32};
    EvalResult exact = evaluate_policy_exact(mdp, belief.members[0], pi);

    SecondaryPolicy secondary;
    secondary.mode = SecondaryMode::kExactKthMin;
    secondary.epsilon = 0.0;
    secondary.q = &exact.q;
    secondary.policy = &pi;

    const long horizon = 300, episodes = 3000;
    RngStream sim(503);
    ReturnEstimate est = estimate_return(mdp, belief, pi, secondary, cfg,
                                         horizon, episodes, sim);
    CHECK(est.episodes == episodes);
    CHECK(std::abs(est.mean - exact.j) <
          3.0 * est.std_error + est.truncation_bias_bound);
    CHECK(est.truncation_bias_bound ==
          doctest::Approx(std::pow(0.9, 300.0) *
                          mdp.reward_bounds().second / 0.1)
              .epsilon(1e-12));
}

TEST_CASE("exact secondary play recovers the pessimistic fixed point") {
    RngStream rng(504);
    const int S = 5, A = 2;
    TabularMDP mdp = random_mdp(S, A, 0.95, rng);
    EnsembleBelief belief = random_ensemble(S, A, 5, rng);
    StochasticPolicy pi = random_policy(S, A, rng);
    PessimismConfig cfg{5, 2, 32};
    PessimisticEval pess = evaluate_policy_pessimistic(pi, belief, cfg, mdp);

    SecondaryPolicy secondary;
    secondary.mode = SecondaryMode::kExactKthMin;
    secondary.epsilon = 0.0;
    secondary.q = &pess.q;
    secondary.policy = &pi;

    RngStream sim(505);
    ReturnEstimate est =
        estimate_return(mdp, belief, pi, secondary, cfg, 600, 6000, sim);
    CHECK(std::abs(est.mean - pess.j) <
          3.0 * est.std_error + est.truncation_bias_bound);
}

TEST_CASE("full exploration turns the game into the belief-mean mdp") {
    RngStream rng(506);
    const int S = 4, A = 2;
    TabularMDP mdp = random_mdp(S, A, 0.95, rng);
    EnsembleBelief belief = random_ensemble(S, A, 4, rng);
    StochasticPolicy pi = random_policy(S, A, rng);
    PessimismConfig cfg{5, 2, 32};
    PessimisticEval pess = evaluate_policy_pessimistic(pi, belief, cfg, mdp);
    EvalResult mean_eval =
        evaluate_policy_exact(mdp, belief_mean_model(belief), pi);

    SecondaryPolicy secondary;
    secondary.mode = SecondaryMode::kEpsilonExplore;
    secondary.epsilon = 1.0;  // candidate choice ignores the ranking entirely
    secondary.q = &pess.q;
    secondary.policy = &pi;

    RngStream sim(507);
    ReturnEstimate est =
        estimate_return(mdp, belief, pi, secondary, cfg, 600, 6000, sim);
    CHECK(std::abs(est.mean - mean_eval.j) <
          3.0 * est.std_error + est.truncation_bias_bound);
}

TEST_CASE("terminal entry ends an episode early") {
    RngStream rng(508);
    const int S = 3, A = 2;
    TabularMDP mdp = random_mdp(S, A, 0.9, rng);
    mdp.terminal_mask.assign(S, 0);
    mdp.terminal_mask[2] = 1;
    for (int a = 0; a < A; ++a) mdp.reward[2 * A + a] = 0.0;
    // every member funnels straight into the terminal state
    EnsembleBelief belief = random_ensemble(S, A, 2, rng);
    for (auto& member : belief.members)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                auto row = member.row(s, a);
                row[0] = row[1] = 0.0;
                row[2] = 1.0;
            }
    StochasticPolicy pi = StochasticPolicy::uniform(S, A);
    QTable q = QTable::zeros(S, A);
    SecondaryPolicy secondary;
    secondary.mode = SecondaryMode::kExactKthMin;
    secondary.epsilon = 0.0;
    secondary.q = &q;
    secondary.policy = &pi;
    PessimismConfig cfg{2, 1, 32};
    RngStream g(509);
    EpisodeResult e = play_episode(mdp, belief, pi, secondary, cfg, 100, g);
    CHECK(e.trajectory.size() <= 2);
    CHECK(e.trajectory.back().s_next == 2);
}

TEST_CASE("secondary policy validation") {
    TabularMDP mdp;
    mdp.num_states = 2;
    mdp.num_actions = 2;
    mdp.reward = {0, 0, 0, 0};
    mdp.initial_dist = {0.5, 0.5};
    QTable q = QTable::zeros(2, 2);
    StochasticPolicy pi = StochasticPolicy::uniform(2, 2);

    SecondaryPolicy sec;
    sec.mode = SecondaryMode::kExactKthMin;
    sec.epsilon = 0.3;  // exploration is incompatible with exact play
    sec.q = &q;
    sec.policy = &pi;
    CHECK_THROWS_AS(sec.validate(mdp), invalid_input);

    sec.epsilon = 0.0;
    sec.q = nullptr;
    CHECK_THROWS_AS(sec.validate(mdp), invalid_input);

    sec.q = &q;
    sec.validate(mdp);
}

TEST_CASE("return estimation needs at least two episodes") {
    RngStream rng(510);
    TabularMDP mdp = random_mdp(2, 2, 0.9, rng);
    EnsembleBelief belief = random_ensemble(2, 2, 2, rng);
    StochasticPolicy pi = StochasticPolicy::uniform(2, 2);
    QTable q = QTable::zeros(2, 2);
    SecondaryPolicy sec;
    sec.mode = SecondaryMode::kEpsilonExplore;
    sec.epsilon = 0.5;
    sec.q = &q;
    sec.policy = &pi;
    PessimismConfig cfg{2, 1, 32};
    RngStream sim(511);
    CHECK_THROWS_AS(estimate_return(mdp, belief, pi, sec, cfg, 10, 1, sim),
                    invalid_input);
}
