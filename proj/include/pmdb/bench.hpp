// Instance generators, the robust value-iteration baseline, and end-to-end
// experiment orchestration.
#pragma once

#include <string>

#include "pmdb/learner.hpp"
#include "pmdb/regularized.hpp"

namespace pmdb {

struct GeneratedMdp {
    TabularMDP mdp;
    TransitionModel model;  // ground-truth dynamics
};

/// Random instance: rewards i.i.d. uniform in [0, 1]; each (s, a) transition
/// supported on `branching` distinct states with a flat-Dirichlet mass split;
/// uniform initial distribution; no terminal states.
GeneratedMdp gen_random_mdp(int num_states, int num_actions, int branching,
                            uint64_t seed, double discount = 0.99);

/// Behavior rollouts through the true dynamics. Episodes run to `horizon`
/// steps or a terminal entry, whichever comes first; records carry the
/// done flag of the state entered.
Dataset collect_dataset(const TabularMDP& mdp, const TransitionModel& model,
                        const StochasticPolicy& behavior, long episodes,
                        long horizon, uint64_t seed);

enum class RobustMode {
    kEvaluate,  // fixed policy
    kOptimize,  // greedy over actions
};

enum class EnsembleExtreme {
    kWorst,  // min over members: the rectangular robust baseline
    kBest,   // max over members: the optimistic upper envelope
};

struct RobustResult {
    QTable q;
    StochasticPolicy policy;  // greedy policy (optimize) or the input (evaluate)
    double j = 0.0;
    double residual = 0.0;
    long sweeps = 0;
};

/// Rectangular worst-case (or best-case) value iteration over the ensemble,
/// treating all members as a weightless uncertainty set.
RobustResult robust_value_iteration(const EnsembleBelief& belief,
                                    const TabularMDP& mdp, RobustMode mode,
                                    const StochasticPolicy* pi = nullptr,
                                    EnsembleExtreme extreme = EnsembleExtreme::kWorst);

// ---------------------------------------------------------------------------
// Experiment orchestration.

struct GeneratorSpec {
    int num_states = 10;
    int num_actions = 3;
    int branching = 4;
    double discount = 0.99;
};

struct DatasetSpec {
    long episodes = 200;
    long horizon = 100;
};

struct BeliefSpec {
    std::string kind = "ensemble";  // "ensemble" | "dirichlet"
    int members = 8;
    double smoothing = 0.1;
    double prior = 1.0;
    int mc_sets = 32;
};

struct SimulationSpec {
    long episodes = 2000;
    long horizon = kDefaultHorizon;
    double epsilon = kDefaultExploration;
};

/// Declarative experiment description; mirrors the JSON interface one-to-one.
struct ExperimentSpec {
    std::string mdp_file;  // load instead of generating when non-empty
    GeneratorSpec generator;
    DatasetSpec dataset;
    BeliefSpec belief;
    PessimismConfig pessimism;
    RegularizationConfig regularization;
    LearnerConfig learner;
    SimulationSpec simulation;
    int rpo_iters = 20;
    std::vector<std::string> stages = {"gen", "collect", "fit", "eval"};
    uint64_t seed = 1;
    std::string out_dir = "out";

    void validate() const;
};

struct ExperimentReport {
    bool all_passed = true;
    std::vector<std::string> output_files;
    std::vector<std::pair<std::string, bool>> checks;  // (name, passed)
};

/// Runs the requested stages, writes per-stage artifacts plus report.csv and
/// manifest.json under spec.out_dir, and returns the invariant summary.
ExperimentReport run_experiment(const ExperimentSpec& spec);

}  // namespace pmdb
