// Alternating Markov game simulator.
//
// Each step the primary player picks an action from its policy; a secondary
// player then receives N transition rows drawn i.i.d. from the belief and
// selects the one whose continuation value ranks k-th smallest (or explores
// uniformly with probability epsilon). The next state is drawn from the
// selected row. Monte-Carlo returns of this game estimate the pessimistic
// fixed-point return when the secondary plays exactly against a converged
// value table.
#pragma once

#include <optional>

#include "pmdb/belief.hpp"
#include "pmdb/pessimistic.hpp"

namespace pmdb {

/// Table-scale simulation defaults.
inline constexpr long kDefaultHorizon = 1000;
inline constexpr double kDefaultExploration = 0.1;

struct GameState {
    int current_state = 0;
    long step = 0;
    double discount_accum = 1.0;
};

enum class SecondaryMode {
    kExactKthMin,    // always pick the candidate with k-th smallest continuation
    kEpsilonExplore, // exact with probability 1 - epsilon, else uniform
};

/// The secondary player's selection rule. `q` and `policy` define the
/// continuation value of a candidate row tau as E_{tau}[ v ] with
/// v(s') = E_{policy}[ q(s', .) ], or the soft value
/// v(s') = soft_alpha * log E_{policy}[ exp(q(s', .) / soft_alpha) ] when
/// soft_alpha is set.
struct SecondaryPolicy {
    SecondaryMode mode = SecondaryMode::kEpsilonExplore;
    double epsilon = kDefaultExploration;
    const QTable* q = nullptr;
    const StochasticPolicy* policy = nullptr;
    std::optional<double> soft_alpha;

    void validate(const TabularMDP& mdp) const;
};

struct StepRecord {
    long step = 0;
    int s = 0;
    int a = 0;
    double r = 0.0;
    int chosen_candidate = 0;
    int s_next = 0;
};

struct EpisodeResult {
    std::vector<StepRecord> trajectory;
    double discounted_return = 0.0;
};

/// Plays one episode from s0 ~ initial_dist up to `horizon` steps; stops
/// early upon entering a terminal state. Candidate ties break toward the
/// lowest candidate index.
EpisodeResult play_episode(const TabularMDP& mdp, const DynamicsBelief& belief,
                           const StochasticPolicy& pi,
                           const SecondaryPolicy& secondary,
                           const PessimismConfig& cfg, long horizon,
                           RngStream& rng);

struct ReturnEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long episodes = 0;
    /// Upper bound on the truncation bias: discount^horizon * r_max / (1 - discount).
    double truncation_bias_bound = 0.0;
};

/// Monte-Carlo mean return over independent episodes (substream per episode,
/// pairwise-summed in fixed order, so the result is schedule-independent).
ReturnEstimate estimate_return(const TabularMDP& mdp,
                               const DynamicsBelief& belief,
                               const StochasticPolicy& pi,
                               const SecondaryPolicy& secondary,
                               const PessimismConfig& cfg, long horizon,
                               long episodes, RngStream& rng);

}  // namespace pmdb
