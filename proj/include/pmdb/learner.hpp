// Stochastic tabular learner on the alternating Markov game.
//
// Runs C parallel games against the belief. Each step: the primary samples
// actions from the Boltzmann tilt of the live value table against the
// reference policy; fresh candidate sets overwrite a per-game buffer; the
// value table takes one gradient step on two squared losses (a sampled
// k-th-min game target over the buffered candidates plus a soft Bellman
// target on dataset transitions); the policy moves toward the Boltzmann
// target; the secondary advances every game; slow moving averages track the
// reference policy and target value table.
#pragma once

#include "pmdb/belief.hpp"
#include "pmdb/game.hpp"
#include "pmdb/pessimistic.hpp"

namespace pmdb {

struct LearnerConfig {
    double q_lr = 0.1;
    double policy_lr = 0.05;
    int batch_size_mdp = 128;
    int parallel_games = 128;  // C
    double epsilon = kDefaultExploration;
    double omega1 = 1e-5;  // reference-policy moving average
    double omega2 = 5e-3;  // target value table moving average
    double alpha = 0.1;
    double amg_loss_weight = 1.0;
    double mdp_loss_weight = 1.0;
    int n = 10;
    int k = 2;
    long max_steps = 1000000;
    long horizon = kDefaultHorizon;  // maximal game length before a reset
    bool secondary_on_target = false;  // exploit with target table instead of live
    long eval_every = 10000;

    void validate() const;
};

/// Buffered game transition: the latest (s, a, candidate set) per game.
struct AmgSample {
    int s = 0;
    int a = 0;
    double r = 0.0;
    CandidateSet candidates;
};

struct LearnerState {
    QTable q;
    QTable q_target;
    StochasticPolicy policy;
    StochasticPolicy policy_ref;
    std::vector<GameState> games;
    std::vector<AmgSample> amg_buffer;  // one entry per game
    long step_count = 0;
};

struct StepMetrics {
    long step = 0;
    double q_loss_amg = 0.0;
    double q_loss_mdp = 0.0;
    double mean_q = 0.0;            // over buffered (s, a) cells
    double mean_uncertainty = 0.0;  // mean log-std of candidate mean state index
};

/// Uniform tables, zero values, games started at dataset states.
LearnerState init_learner(const TabularMDP& mdp, const Dataset& data,
                          const DynamicsBelief& belief, const LearnerConfig& cfg,
                          RngStream& rng);

StepMetrics learner_step(LearnerState& state, const Dataset& data,
                         const DynamicsBelief& belief, const LearnerConfig& cfg,
                         const TabularMDP& mdp, RngStream& rng);

struct CurvePoint {
    long step = 0;
    double j_amg = 0.0;   // pessimistic fixed-point return of policy_ref
    double j_true = 0.0;  // exact return under the true model (NaN if absent)
    double mean_q = 0.0;
    double mean_uncertainty = 0.0;
};

struct TrainResult {
    StochasticPolicy policy_ref;
    std::vector<CurvePoint> curve;
};

/// Runs max_steps learner steps, evaluating policy_ref every eval_every steps
/// (and at the final step) on the game and, when `true_model` is given, on
/// the ground-truth dynamics.
TrainResult train(LearnerState& state, const Dataset& data,
                  const DynamicsBelief& belief, const LearnerConfig& cfg,
                  const TabularMDP& mdp, RngStream& rng,
                  const TransitionModel* true_model = nullptr,
                  const FrozenSampleBank* eval_bank = nullptr);

}  // namespace pmdb
