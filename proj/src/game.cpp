#include "pmdb/game.hpp"

#include <algorithm>
#include <cmath>

namespace pmdb {

void SecondaryPolicy::validate(const TabularMDP& mdp) const {
    check_input(q != nullptr && policy != nullptr,
                "SecondaryPolicy: value source (q, policy) is required");
    check_input(q->num_states == mdp.num_states &&
                    q->num_actions == mdp.num_actions,
                "SecondaryPolicy: value table shape mismatch");
    check_input(policy->num_states == mdp.num_states &&
                    policy->num_actions == mdp.num_actions,
                "SecondaryPolicy: policy shape mismatch");
    if (mode == SecondaryMode::kExactKthMin)
        check_input(epsilon == 0.0,
                    "SecondaryPolicy: exact mode requires epsilon = 0");
    else
        check_input(epsilon >= 0.0 && epsilon <= 1.0,
                    "SecondaryPolicy: epsilon outside [0, 1]");
    if (soft_alpha)
        check_input(*soft_alpha > 0.0,
                    "SecondaryPolicy: soft continuation needs positive alpha");
}

namespace {

/// Continuation value per next state under the secondary's value source.
numvec continuation_values(const TabularMDP& mdp, const SecondaryPolicy& sec) {
    numvec v(static_cast<size_t>(mdp.num_states));
    for (int s = 0; s < mdp.num_states; ++s) {
        v[s] = sec.soft_alpha
                   ? log_mean_exp(sec.policy->row(s), sec.q->row(s),
                                  *sec.soft_alpha)
                   : dot(sec.policy->row(s), sec.q->row(s));
    }
    return v;
}

/// Index of the candidate whose continuation ranks k-th smallest; among
/// candidates sharing that value the lowest index wins.
int kth_min_index(const numvec& values, int k) {
    numvec copy = values;
    std::nth_element(copy.begin(), copy.begin() + (k - 1), copy.end());
    double kth = copy[k - 1];
    for (size_t i = 0; i < values.size(); ++i)
        if (values[i] == kth) return static_cast<int>(i);
    return 0;  // unreachable: kth is an element of values
}

}  // namespace

EpisodeResult play_episode(const TabularMDP& mdp, const DynamicsBelief& belief,
                           const StochasticPolicy& pi,
                           const SecondaryPolicy& secondary,
                           const PessimismConfig& cfg, long horizon,
                           RngStream& rng) {
    mdp.validate();
    pi.validate();
    validate_belief(belief);
    cfg.validate();
    secondary.validate(mdp);
    check_input(pi.num_states == mdp.num_states &&
                    pi.num_actions == mdp.num_actions,
                "play_episode: policy shape mismatch");
    check_input(belief_num_states(belief) == mdp.num_states &&
                    belief_num_actions(belief) == mdp.num_actions,
                "play_episode: belief shape mismatch");
    check_input(horizon >= 0, "play_episode: negative horizon");

    // The value table is fixed for the whole episode, so per-state
    // continuations are computed once.
    const numvec v = continuation_values(mdp, secondary);

    EpisodeResult episode;
    int s = rng.categorical(mdp.initial_dist);
    double disc = 1.0;
    numvec g(static_cast<size_t>(cfg.n));
    for (long t = 0; t < horizon; ++t) {
        if (mdp.terminal(s)) break;
        const int a = rng.categorical(pi.row(s));
        const double r = mdp.reward_at(s, a);
        episode.discounted_return += disc * r;

        CandidateSet set = sample_candidate_set(belief, s, a, cfg.n, rng);
        int chosen;
        if (secondary.mode == SecondaryMode::kEpsilonExplore &&
            rng.uniform01() < secondary.epsilon) {
            chosen = rng.uniform_int(cfg.n);
        } else {
            for (int i = 0; i < cfg.n; ++i) g[i] = dot(set.rows[i], v);
            chosen = kth_min_index(g, cfg.k);
        }
        const int s_next = rng.categorical(set.rows[chosen]);

        episode.trajectory.push_back({t, s, a, r, chosen, s_next});
        disc *= mdp.discount;
        s = s_next;
    }
    return episode;
}

ReturnEstimate estimate_return(const TabularMDP& mdp,
                               const DynamicsBelief& belief,
                               const StochasticPolicy& pi,
                               const SecondaryPolicy& secondary,
                               const PessimismConfig& cfg, long horizon,
                               long episodes, RngStream& rng) {
    check_input(episodes >= 2, "estimate_return: need at least two episodes");

    numvec returns(static_cast<size_t>(episodes));
    for (long e = 0; e < episodes; ++e) {
        RngStream ep_rng = rng.substream(static_cast<uint64_t>(e));
        returns[e] =
            play_episode(mdp, belief, pi, secondary, cfg, horizon, ep_rng)
                .discounted_return;
    }

    const double mean = pairwise_sum(returns) / static_cast<double>(episodes);
    numvec sq(returns.size());
    for (size_t i = 0; i < returns.size(); ++i) {
        double d = returns[i] - mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / static_cast<double>(episodes - 1);

    const auto [r_lo, r_hi] = mdp.reward_bounds();
    const double r_max = std::max(std::abs(r_lo), std::abs(r_hi));
    ReturnEstimate est;
    est.mean = mean;
    est.std_error = std::sqrt(var / static_cast<double>(episodes));
    est.episodes = episodes;
    est.truncation_bias_bound = std::pow(mdp.discount, horizon) * r_max /
                                (1.0 - mdp.discount);
    return est;
}

}  // namespace pmdb
