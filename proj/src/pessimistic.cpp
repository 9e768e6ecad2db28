#include "pmdb/pessimistic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pmdb/regularized.hpp"

namespace pmdb {

void PessimismConfig::validate() const {
    check_input(n >= 1, "PessimismConfig: need n >= 1");
    check_input(k >= 1 && k <= n, "PessimismConfig: require 1 <= k <= n");
    check_input(mc_sets >= 1, "PessimismConfig: need mc_sets >= 1");
}

FrozenSampleBank build_sample_bank(const DynamicsBelief& belief, int n,
                                   int mc_sets, uint64_t seed) {
    check_input(n >= 1 && mc_sets >= 1, "build_sample_bank: bad shape");
    validate_belief(belief);
    const int S = belief_num_states(belief), A = belief_num_actions(belief);

    FrozenSampleBank bank;
    bank.num_states = S;
    bank.num_actions = A;
    bank.n = n;
    bank.mc_sets = mc_sets;
    bank.seed = seed;
    bank.sets.reserve(static_cast<size_t>(S) * A * mc_sets);

    RngStream root(seed);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            // One substream per (s, a) so banks are reproducible cell-wise.
            RngStream cell = root.substream(static_cast<uint64_t>(s) * A + a);
            for (int b = 0; b < mc_sets; ++b)
                bank.sets.push_back(sample_candidate_set(belief, s, a, n, cell));
        }
    }
    return bank;
}

PessimisticInner::PessimisticInner(const DynamicsBelief& belief,
                                   const PessimismConfig& cfg,
                                   const TabularMDP& mdp,
                                   const FrozenSampleBank* bank)
    : mdp_(&mdp), order_stat_(cfg.n, cfg.k) {
    cfg.validate();
    if (const auto* ens = std::get_if<EnsembleBelief>(&belief)) {
        ensemble_ = ens;
        g_.resize(ens->num_members());
        order_.resize(ens->num_members());
    } else {
        check_input(bank != nullptr,
                    "pessimistic evaluation on a Dirichlet belief requires a "
                    "frozen sample bank");
        check_input(bank->n == cfg.n,
                    "sample bank candidate count does not match config");
        check_input(bank->num_states == belief_num_states(belief) &&
                        bank->num_actions == belief_num_actions(belief),
                    "sample bank shape does not match belief");
        bank_ = bank;
        g_.resize(cfg.n);
    }
}

double PessimisticInner::operator()(int s, int a, const numvec& v) const {
    if (mdp_->terminal(s)) return v[s];
    return ensemble_ ? ensemble_inner(s, a, v) : bank_inner(s, a, v);
}

double PessimisticInner::ensemble_inner(int s, int a, const numvec& v) const {
    const int m_count = ensemble_->num_members();
    for (int m = 0; m < m_count; ++m)
        g_[m] = dot(ensemble_->member_row(m, s, a), v);
    std::iota(order_.begin(), order_.end(), 0);
    std::sort(order_.begin(), order_.end(), [&](int i, int j) {
        return g_[i] != g_[j] ? g_[i] < g_[j] : i < j;
    });

    // Walk tie groups in ascending indicator order; the expected k-th order
    // statistic is the sum of support values weighted by binomial-tail
    // differences at the cumulative prior mass.
    double expectation = 0.0, cdf = 0.0, prev_tail = 0.0;
    int i = 0;
    while (i < m_count) {
        const double gv = g_[order_[i]];
        while (i < m_count && g_[order_[i]] == gv) {
            cdf += ensemble_->weights[order_[i]];
            ++i;
        }
        const double level = i == m_count ? 1.0 : std::min(cdf, 1.0);
        const double tail = order_stat_.tail_prob(level);
        expectation += (tail - prev_tail) * gv;
        prev_tail = tail;
    }
    return expectation;
}

double PessimisticInner::bank_inner(int s, int a, const numvec& v) const {
    const int k = order_stat_.k();
    double acc = 0.0;
    for (int b = 0; b < bank_->mc_sets; ++b) {
        const CandidateSet& set = bank_->set(s, a, b);
        for (int i = 0; i < set.size(); ++i) g_[i] = dot(set.rows[i], v);
        std::nth_element(g_.begin(), g_.begin() + (k - 1), g_.end());
        acc += g_[k - 1];
    }
    return acc / bank_->mc_sets;
}

namespace {

void check_backup_shapes(const QTable& q, const StochasticPolicy& pi,
                         const DynamicsBelief& belief, const TabularMDP& mdp) {
    const int S = mdp.num_states, A = mdp.num_actions;
    check_input(q.num_states == S && q.num_actions == A,
                "pessimistic backup: value table shape mismatch");
    check_input(pi.num_states == S && pi.num_actions == A,
                "pessimistic backup: policy shape mismatch");
    check_input(belief_num_states(belief) == S &&
                    belief_num_actions(belief) == A,
                "pessimistic backup: belief shape mismatch");
}

}  // namespace

QTable pessimistic_backup(const QTable& q, const StochasticPolicy& pi,
                          const DynamicsBelief& belief,
                          const PessimismConfig& cfg, const TabularMDP& mdp,
                          const FrozenSampleBank* bank) {
    check_backup_shapes(q, pi, belief, mdp);
    PessimisticInner inner(belief, cfg, mdp, bank);

    const int S = mdp.num_states, A = mdp.num_actions;
    numvec v(S);
    for (int s = 0; s < S; ++s) v[s] = dot(pi.row(s), q.row(s));

    QTable out = QTable::zeros(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            out(s, a) = mdp.reward_at(s, a) + mdp.discount * inner(s, a, v);
    return out;
}

PessimisticEval evaluate_policy_pessimistic(const StochasticPolicy& pi,
                                            const DynamicsBelief& belief,
                                            const PessimismConfig& cfg,
                                            const TabularMDP& mdp,
                                            const FrozenSampleBank* bank,
                                            const FixedPointOptions& opt) {
    mdp.validate();
    pi.validate();
    validate_belief(belief);
    cfg.validate();
    check_backup_shapes(QTable::zeros(mdp.num_states, mdp.num_actions), pi,
                        belief, mdp);

    PessimisticInner inner(belief, cfg, mdp, bank);
    const int S = mdp.num_states, A = mdp.num_actions;
    numvec v(S);
    auto backup = [&](const QTable& q) {
        for (int s = 0; s < S; ++s) v[s] = dot(pi.row(s), q.row(s));
        QTable out = QTable::zeros(S, A);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                out(s, a) = mdp.reward_at(s, a) + mdp.discount * inner(s, a, v);
        return out;
    };
    auto fp = iterate_fixed_point(backup, QTable::zeros(S, A), mdp.discount, opt);
    double j = policy_return(mdp, fp.q, pi);
    return {std::move(fp.q), j, fp.residual, fp.sweeps};
}

numvec equivalent_transition_row(const EnsembleBelief& belief, int s, int a,
                                 const QTable& q_fixedpoint,
                                 const StochasticPolicy& pi,
                                 const PessimismConfig& cfg) {
    cfg.validate();
    auto dist = indicator_distribution(belief, s, a, q_fixedpoint, pi);
    numvec lambda = pmdb_weights(dist, cfg.n, cfg.k);
    const int S = belief.num_states();
    numvec row(static_cast<size_t>(S), 0.0);
    for (int m = 0; m < belief.num_members(); ++m) {
        if (lambda[m] == 0.0) continue;
        auto member = belief.member_row(m, s, a);
        for (int sn = 0; sn < S; ++sn) row[sn] += lambda[m] * member[sn];
    }
    return row;
}

TransitionModel equivalent_transition(const EnsembleBelief& belief,
                                      const QTable& q_fixedpoint,
                                      const StochasticPolicy& pi,
                                      const PessimismConfig& cfg,
                                      const TabularMDP& mdp) {
    mdp.validate();
    belief.validate();
    QTable backed =
        pessimistic_backup(q_fixedpoint, pi, DynamicsBelief(belief), cfg, mdp);
    double residual = sup_norm_diff(backed.values, q_fixedpoint.values);
    check_input(residual <= 1e-8,
                "equivalent_transition: value table is not a fixed point "
                "(backup residual " +
                    std::to_string(residual) + ")");

    const int S = mdp.num_states, A = mdp.num_actions;
    TransitionModel model = TransitionModel::zeros(S, A);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            auto out = model.row(s, a);
            if (mdp.terminal(s)) {
                out[s] = 1.0;
                continue;
            }
            numvec row = equivalent_transition_row(belief, s, a, q_fixedpoint,
                                                   pi, cfg);
            std::copy(row.begin(), row.end(), out.begin());
        }
    }
    return model;
}

std::vector<std::pair<int, int>> SweepGrid::points() const {
    check_input(lo >= 1 && hi >= lo, "SweepGrid: bad range");
    std::vector<std::pair<int, int>> pts;
    switch (rule) {
        case SweepRule::kFixedK:
            check_input(fixed >= 1, "SweepGrid: bad fixed k");
            for (int n = std::max(lo, fixed); n <= hi; ++n)
                pts.emplace_back(n, fixed);
            break;
        case SweepRule::kFixedN:
            check_input(fixed >= 1, "SweepGrid: bad fixed N");
            for (int k = lo; k <= std::min(hi, fixed); ++k)
                pts.emplace_back(fixed, k);
            break;
        case SweepRule::kDiagonal:
            for (int n = lo; n <= hi; ++n) pts.emplace_back(n, n);
            break;
    }
    check_input(!pts.empty(), "SweepGrid: empty grid");
    return pts;
}

SweepResult sweep_monotonicity(const StochasticPolicy& pi,
                               const DynamicsBelief& belief,
                               const TabularMDP& mdp, const SweepGrid& grid,
                               double slack, const FrozenSampleBank* bank,
                               const SweepRegularization* reg) {
    SweepResult result;
    result.grid = grid;

    // Direction of the element-wise claim: deeper pessimism (larger N at
    // fixed k) lowers the fixed point; larger k or a larger matched N = k
    // raises it.
    const bool expect_decreasing = grid.rule == SweepRule::kFixedK;

    FrozenSampleBank rebuilt;
    for (auto [n, k] : grid.points()) {
        PessimismConfig cfg;
        cfg.n = n;
        cfg.k = k;
        const FrozenSampleBank* use_bank = bank;
        if (bank && bank->n != n) {
            rebuilt = build_sample_bank(belief, n, bank->mc_sets, bank->seed);
            use_bank = &rebuilt;
        }

        QTable q;
        double j, residual;
        long sweeps;
        if (reg && reg->mu) {
            RegularizationConfig rc;
            rc.alpha = reg->alpha;
            auto ev = evaluate_regularized(pi, *reg->mu, belief, cfg, rc, mdp,
                                           use_bank);
            q = std::move(ev.q);
            j = ev.j_reg;
            residual = ev.residual;
            sweeps = ev.sweeps;
        } else {
            auto ev = evaluate_policy_pessimistic(pi, belief, cfg, mdp, use_bank);
            q = std::move(ev.q);
            j = ev.j;
            residual = ev.residual;
            sweeps = ev.sweeps;
        }
        (void)sweeps;

        SweepRow row{n, k, j, residual, true};
        if (!result.rows.empty()) {
            const QTable& prev = result.q_tables.back();
            bool ok = true;
            for (size_t i = 0; i < q.values.size(); ++i) {
                double delta = q.values[i] - prev.values[i];
                if (expect_decreasing ? delta > slack : delta < -slack) {
                    ok = false;
                    break;
                }
            }
            double jdelta = j - result.rows.back().j;
            if (expect_decreasing ? jdelta > slack : jdelta < -slack) ok = false;
            row.monotone_vs_prev = ok;
            result.monotone = result.monotone && ok;
        }
        result.rows.push_back(row);
        result.q_tables.push_back(std::move(q));
    }
    return result;
}

}  // namespace pmdb
