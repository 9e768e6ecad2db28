#include "pmdb/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pmdb {

void LearnerConfig::validate() const {
    check_input(q_lr > 0.0 && q_lr <= 1.0, "LearnerConfig: q_lr outside (0, 1]");
    check_input(policy_lr > 0.0 && policy_lr <= 1.0,
                "LearnerConfig: policy_lr outside (0, 1]");
    check_input(batch_size_mdp >= 1, "LearnerConfig: batch_size_mdp < 1");
    check_input(parallel_games >= 1, "LearnerConfig: parallel_games < 1");
    check_input(epsilon >= 0.0 && epsilon <= 1.0,
                "LearnerConfig: epsilon outside [0, 1]");
    check_input(omega1 > 0.0 && omega1 <= 1.0,
                "LearnerConfig: omega1 outside (0, 1]");
    check_input(omega2 > 0.0 && omega2 <= 1.0,
                "LearnerConfig: omega2 outside (0, 1]");
    check_input(alpha > 0.0, "LearnerConfig: alpha must be positive");
    check_input(amg_loss_weight >= 0.0 && mdp_loss_weight >= 0.0,
                "LearnerConfig: negative loss weight");
    check_input(amg_loss_weight + mdp_loss_weight > 0.0,
                "LearnerConfig: at least one loss weight must be positive");
    check_input(n >= 1 && k >= 1 && k <= n, "LearnerConfig: bad (n, k)");
    check_input(max_steps >= 1, "LearnerConfig: max_steps < 1");
    check_input(horizon >= 1, "LearnerConfig: horizon < 1");
    check_input(eval_every >= 1, "LearnerConfig: eval_every < 1");
}

namespace {

int fresh_dataset_state(const Dataset& data, RngStream& rng) {
    return data[rng.uniform_int(static_cast<int>(data.size()))].s;
}

/// Soft state values alpha * log E_mu exp(q / alpha) for every state.
void soft_values(const QTable& q, const StochasticPolicy& mu, double alpha,
                 numvec& out) {
    out.resize(static_cast<size_t>(q.num_states));
    for (int s = 0; s < q.num_states; ++s)
        out[s] = log_mean_exp(mu.row(s), q.row(s), alpha);
}

}  // namespace

LearnerState init_learner(const TabularMDP& mdp, const Dataset& data,
                          const DynamicsBelief& belief, const LearnerConfig& cfg,
                          RngStream& rng) {
    mdp.validate();
    cfg.validate();
    validate_belief(belief);
    check_input(!data.empty(), "init_learner: dataset must be non-empty");
    validate_dataset(data, mdp.num_states, mdp.num_actions);
    check_input(belief_num_states(belief) == mdp.num_states &&
                    belief_num_actions(belief) == mdp.num_actions,
                "init_learner: belief shape mismatch");
    for (const auto& rec : data)
        check_input(!mdp.terminal(rec.s),
                    "init_learner: dataset contains decisions at terminal states");

    LearnerState state;
    state.q = QTable::zeros(mdp.num_states, mdp.num_actions);
    state.q_target = state.q;
    state.policy = StochasticPolicy::uniform(mdp.num_states, mdp.num_actions);
    state.policy_ref = state.policy;
    state.games.resize(cfg.parallel_games);
    state.amg_buffer.resize(cfg.parallel_games);
    for (auto& game : state.games)
        game = {fresh_dataset_state(data, rng), 0, 1.0};
    return state;
}

StepMetrics learner_step(LearnerState& state, const Dataset& data,
                         const DynamicsBelief& belief, const LearnerConfig& cfg,
                         const TabularMDP& mdp, RngStream& rng) {
    const int S = mdp.num_states, A = mdp.num_actions;
    const int C = cfg.parallel_games;
    check_input(static_cast<int>(state.games.size()) == C,
                "learner_step: state does not match config");
    check_input(!data.empty(), "learner_step: dataset must be non-empty");

    StepMetrics metrics;
    metrics.step = state.step_count + 1;

    // (a) primary actions from the tilted live table, (b) fresh candidates.
    numvec tilt(static_cast<size_t>(A));
    for (int i = 0; i < C; ++i) {
        const int s = state.games[i].current_state;
        tilted_distribution(state.policy_ref.row(s), state.q.row(s), cfg.alpha,
                            tilt);
        const int a = rng.categorical(tilt);
        state.amg_buffer[i] = {s, a, mdp.reward_at(s, a),
                               sample_candidate_set(belief, s, a, cfg.n, rng)};
    }

    // (c) one gradient step on the two squared losses, both targets built
    // from the slow tables. Gradients for the value step and the policy step
    // are all evaluated at the pre-update tables and applied together.
    numvec lme_target(static_cast<size_t>(S));
    soft_values(state.q_target, state.policy_ref, cfg.alpha, lme_target);

    QTable delta = QTable::zeros(S, A);
    std::vector<int> touched;
    touched.reserve(static_cast<size_t>(C) + cfg.batch_size_mdp);

    numvec g(static_cast<size_t>(cfg.n));
    numvec uncertainty(static_cast<size_t>(C));
    numvec buffer_q(static_cast<size_t>(C));
    double loss_amg = 0.0;
    for (int i = 0; i < C; ++i) {
        const AmgSample& sample = state.amg_buffer[i];
        for (int c = 0; c < cfg.n; ++c)
            g[c] = dot(sample.candidates.rows[c], lme_target);
        const double target =
            sample.r + mdp.discount * kth_min(g, cfg.k);
        const double err = target - state.q(sample.s, sample.a);
        loss_amg += err * err;
        delta(sample.s, sample.a) +=
            cfg.amg_loss_weight * err / static_cast<double>(C);
        touched.push_back(sample.s * A + sample.a);

        buffer_q[i] = state.q(sample.s, sample.a);
        // Spread of the candidates' mean next-state index, in log scale.
        double mean_idx = 0.0;
        numvec idx(static_cast<size_t>(cfg.n));
        for (int c = 0; c < cfg.n; ++c) {
            double e = 0.0;
            for (int sn = 0; sn < S; ++sn)
                e += sample.candidates.rows[c][sn] * sn;
            idx[c] = e;
            mean_idx += e / cfg.n;
        }
        double var = 0.0;
        for (int c = 0; c < cfg.n; ++c)
            var += (idx[c] - mean_idx) * (idx[c] - mean_idx) / cfg.n;
        uncertainty[i] = std::log(std::max(std::sqrt(var), 1e-12));
    }

    double loss_mdp = 0.0;
    for (int b = 0; b < cfg.batch_size_mdp; ++b) {
        const DatasetRecord& rec =
            data[rng.uniform_int(static_cast<int>(data.size()))];
        const double target = rec.r + mdp.discount * lme_target[rec.s_next];
        const double err = target - state.q(rec.s, rec.a);
        loss_mdp += err * err;
        delta(rec.s, rec.a) += cfg.mdp_loss_weight * err /
                               static_cast<double>(cfg.batch_size_mdp);
        touched.push_back(rec.s * A + rec.a);
    }
    metrics.q_loss_amg = loss_amg / C;
    metrics.q_loss_mdp = loss_mdp / cfg.batch_size_mdp;
    metrics.mean_q = pairwise_sum(buffer_q) / C;
    metrics.mean_uncertainty = pairwise_sum(uncertainty) / C;

    // (d) policy targets for every visited state, from the pre-update live
    // table, applied after the value step below.
    std::vector<int> visited = touched;
    for (int& cell : visited) cell /= A;
    std::sort(visited.begin(), visited.end());
    visited.erase(std::unique(visited.begin(), visited.end()), visited.end());
    std::vector<numvec> policy_targets(visited.size(), numvec(A));
    for (size_t i = 0; i < visited.size(); ++i)
        tilted_distribution(state.policy_ref.row(visited[i]),
                            state.q.row(visited[i]), cfg.alpha,
                            policy_targets[i]);

    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (int cell : touched)
        state.q.values[cell] += cfg.q_lr * delta.values[cell];

    for (size_t i = 0; i < visited.size(); ++i) {
        auto row = state.policy.row(visited[i]);
        for (int a = 0; a < A; ++a)
            row[a] = (1.0 - cfg.policy_lr) * row[a] +
                     cfg.policy_lr * policy_targets[i][a];
        floor_and_normalize(row, kPolicyFloor);
    }

    // (e) the secondary advances every game on the post-update tables.
    numvec lme_exploit(static_cast<size_t>(S));
    soft_values(cfg.secondary_on_target ? state.q_target : state.q,
                state.policy_ref, cfg.alpha, lme_exploit);
    for (int i = 0; i < C; ++i) {
        const AmgSample& sample = state.amg_buffer[i];
        int chosen;
        if (rng.uniform01() < cfg.epsilon) {
            chosen = rng.uniform_int(cfg.n);
        } else {
            for (int c = 0; c < cfg.n; ++c)
                g[c] = dot(sample.candidates.rows[c], lme_exploit);
            double kth = kth_min(g, cfg.k);
            chosen = 0;
            for (int c = 0; c < cfg.n; ++c)
                if (g[c] == kth) {
                    chosen = c;
                    break;
                }
        }
        const int s_next = rng.categorical(sample.candidates.rows[chosen]);

        // (f) terminal or horizon-expired games restart from dataset states.
        GameState& game = state.games[i];
        game.current_state = s_next;
        game.step += 1;
        game.discount_accum *= mdp.discount;
        if (mdp.terminal(s_next) || game.step >= cfg.horizon)
            game = {fresh_dataset_state(data, rng), 0, 1.0};
    }

    // (g) slow moving averages. omega = 1 short-circuits to an exact copy so
    // the "target equals live" identity holds bit-for-bit.
    if (cfg.omega1 == 1.0) {
        state.policy_ref = state.policy;
    } else {
        for (int s = 0; s < S; ++s) {
            auto ref = state.policy_ref.row(s);
            auto live = state.policy.row(s);
            for (int a = 0; a < A; ++a)
                ref[a] = cfg.omega1 * live[a] + (1.0 - cfg.omega1) * ref[a];
            floor_and_normalize(ref, kPolicyFloor);
        }
    }
    if (cfg.omega2 == 1.0) {
        state.q_target = state.q;
    } else {
        for (size_t i = 0; i < state.q_target.values.size(); ++i)
            state.q_target.values[i] = cfg.omega2 * state.q.values[i] +
                                       (1.0 - cfg.omega2) *
                                           state.q_target.values[i];
    }

    state.step_count += 1;
    return metrics;
}

TrainResult train(LearnerState& state, const Dataset& data,
                  const DynamicsBelief& belief, const LearnerConfig& cfg,
                  const TabularMDP& mdp, RngStream& rng,
                  const TransitionModel* true_model,
                  const FrozenSampleBank* eval_bank) {
    cfg.validate();
    PessimismConfig eval_cfg;
    eval_cfg.n = cfg.n;
    eval_cfg.k = cfg.k;

    TrainResult result;
    StepMetrics metrics;
    for (long step = 1; step <= cfg.max_steps; ++step) {
        metrics = learner_step(state, data, belief, cfg, mdp, rng);
        if (step % cfg.eval_every == 0 || step == cfg.max_steps) {
            CurvePoint point;
            point.step = step;
            point.j_amg = evaluate_policy_pessimistic(state.policy_ref, belief,
                                                      eval_cfg, mdp, eval_bank)
                              .j;
            point.j_true =
                true_model
                    ? evaluate_policy_exact(mdp, *true_model, state.policy_ref).j
                    : std::numeric_limits<double>::quiet_NaN();
            point.mean_q = metrics.mean_q;
            point.mean_uncertainty = metrics.mean_uncertainty;
            result.curve.push_back(point);
        }
    }
    result.policy_ref = state.policy_ref;
    return result;
}

}  // namespace pmdb
