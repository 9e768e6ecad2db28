// Command-line front end. Every subcommand assembles an ExperimentSpec and
// routes it through run_experiment, so CLI runs and programmatic runs share
// one code path. Exit status is 0 only when every registered invariant check
// of the requested stages passed.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "pmdb/bench.hpp"
#include "pmdb/io.hpp"

namespace {

using namespace pmdb;

void add_generator_options(CLI::App* cmd, ExperimentSpec& spec) {
    cmd->add_option("--mdp", spec.mdp_file,
                    "load the instance from a JSON file instead of generating");
    cmd->add_option("--states", spec.generator.num_states, "number of states");
    cmd->add_option("--actions", spec.generator.num_actions,
                    "number of actions");
    cmd->add_option("--branching", spec.generator.branching,
                    "successor states per (state, action)");
    cmd->add_option("--discount", spec.generator.discount, "discount factor");
}

void add_dataset_options(CLI::App* cmd, ExperimentSpec& spec) {
    cmd->add_option("--episodes", spec.dataset.episodes,
                    "behavior-policy episodes to collect");
    cmd->add_option("--horizon", spec.dataset.horizon,
                    "maximum steps per collected episode");
}

void add_belief_options(CLI::App* cmd, ExperimentSpec& spec) {
    cmd->add_option("--belief", spec.belief.kind,
                    "belief kind: ensemble or dirichlet")
        ->check(CLI::IsMember({"ensemble", "dirichlet"}));
    cmd->add_option("--members", spec.belief.members,
                    "bootstrap ensemble size");
    cmd->add_option("--smoothing", spec.belief.smoothing,
                    "additive smoothing for bootstrap counts");
    cmd->add_option("--prior", spec.belief.prior,
                    "symmetric concentration prior for the dirichlet belief");
    cmd->add_option("--mc-sets", spec.belief.mc_sets,
                    "frozen candidate sets per (state, action)");
}

void add_pessimism_options(CLI::App* cmd, ExperimentSpec& spec) {
    cmd->add_option("-N,--candidates", spec.pessimism.n,
                    "candidate transitions drawn per backup");
    cmd->add_option("-k,--order", spec.pessimism.k,
                    "order statistic picked from the candidates");
}

void add_regularization_options(CLI::App* cmd, ExperimentSpec& spec) {
    cmd->add_option("--alpha", spec.regularization.alpha,
                    "KL regularization temperature");
    cmd->add_flag("--auto-alpha", spec.regularization.auto_alpha,
                  "pick the temperature from a KL budget per state");
    cmd->add_option("--kl-budget", spec.regularization.kl_budget,
                    "per-state KL budget used with --auto-alpha");
}

void add_learner_options(CLI::App* cmd, ExperimentSpec& spec) {
    cmd->add_option("--max-steps", spec.learner.max_steps,
                    "optimization steps for the game learner");
    cmd->add_option("--q-lr", spec.learner.q_lr, "value table step size");
    cmd->add_option("--policy-lr", spec.learner.policy_lr,
                    "policy table step size");
    cmd->add_option("--games", spec.learner.parallel_games,
                    "number of parallel games (AMG batch size)");
    cmd->add_option("--batch", spec.learner.batch_size_mdp,
                    "dataset minibatch size for the MDP loss");
    cmd->add_option("--epsilon", spec.learner.epsilon,
                    "secondary-player exploration rate");
    cmd->add_option("--omega1", spec.learner.omega1,
                    "reference-policy moving-average rate");
    cmd->add_option("--omega2", spec.learner.omega2,
                    "target-value moving-average rate");
    cmd->add_option("--learner-alpha", spec.learner.alpha,
                    "sampling temperature for the primary player");
    cmd->add_option("--amg-weight", spec.learner.amg_loss_weight,
                    "weight of the game-transition loss");
    cmd->add_option("--mdp-weight", spec.learner.mdp_loss_weight,
                    "weight of the dataset-transition loss");
    cmd->add_option("--eval-every", spec.learner.eval_every,
                    "steps between learning-curve evaluations");
    cmd->add_flag("--secondary-on-target", spec.learner.secondary_on_target,
                  "advance games with the slow target table");
}

void add_simulation_options(CLI::App* cmd, ExperimentSpec& spec) {
    cmd->add_option("--sim-episodes", spec.simulation.episodes,
                    "Monte Carlo episodes for return estimation");
    cmd->add_option("--sim-horizon", spec.simulation.horizon,
                    "truncation horizon per simulated episode");
    cmd->add_option("--sim-epsilon", spec.simulation.epsilon,
                    "secondary exploration rate in the simulator");
}

int finish(const ExperimentReport& report) {
    for (const auto& [name, ok] : report.checks)
        std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", name.c_str());
    for (const auto& path : report.output_files)
        std::printf("wrote %s\n", path.c_str());
    return report.all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "pmdb: pessimism-modulated dynamics-belief toolkit for tabular "
        "offline reinforcement learning"};
    app.require_subcommand(1);

    ExperimentSpec spec;
    spec.out_dir = "out";
    std::string spec_file;

    struct Cmd {
        const char* name;
        const char* help;
        std::vector<std::string> stages;
    };
    const Cmd commands[] = {
        {"gen-mdp", "generate a random tabular MDP instance", {"gen"}},
        {"collect", "generate an instance and collect a behavior dataset",
         {"gen", "collect"}},
        {"fit-belief", "fit a dynamics belief to a collected dataset",
         {"gen", "collect", "fit"}},
        {"eval", "pessimistic policy evaluation under the fitted belief",
         {"gen", "collect", "fit", "eval"}},
        {"optimize", "iterated regularized policy optimization",
         {"gen", "collect", "fit", "optimize"}},
        {"learn", "stochastic game learner (twin-loss tabular training)",
         {"gen", "collect", "fit", "learn"}},
        {"simulate", "Monte Carlo rollout of the pessimism game",
         {"gen", "collect", "fit", "eval", "simulate"}},
        {"sweep", "monotonicity sweeps over the (N, k) lattice",
         {"gen", "collect", "fit", "sweep"}},
    };

    for (const auto& cmd : commands) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->add_option("--seed", spec.seed, "root random seed");
        sub->add_option("--out", spec.out_dir, "output directory");
        add_generator_options(sub, spec);
        if (cmd.stages.size() > 1) add_dataset_options(sub, spec);
        if (cmd.stages.size() > 2) {
            add_belief_options(sub, spec);
            add_pessimism_options(sub, spec);
        }
        const std::string last = cmd.stages.back();
        if (last == "optimize") {
            add_regularization_options(sub, spec);
            sub->add_option("--iters", spec.rpo_iters,
                            "policy improvement iterations");
        }
        if (last == "learn") add_learner_options(sub, spec);
        if (last == "simulate") add_simulation_options(sub, spec);
        sub->callback([&spec, &cmd]() { spec.stages = cmd.stages; });
    }

    CLI::App* run = app.add_subcommand(
        "run", "run a staged experiment described by a JSON spec");
    run->add_option("--spec", spec_file, "experiment spec JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    auto* run_seed = run->add_option("--seed", "root random seed override");
    auto* run_out = run->add_option("--out", "output directory override");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            spec = experiment_spec_from_json(read_file(spec_file));
            if (run_seed->count()) spec.seed = std::stoull(run_seed->as<std::string>());
            if (run_out->count()) spec.out_dir = run_out->as<std::string>();
        }
        return finish(run_experiment(spec));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
