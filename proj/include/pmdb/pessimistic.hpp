// (N, k)-pessimistic policy evaluation.
//
// The backup replaces the usual expected continuation with the expectation of
// the k-th smallest continuation among N transition rows drawn i.i.d. from
// the belief at each (s, a):
//
//   (B Q)(s, a) = r(s, a) + discount * E[ k-th min over N draws of
//                                         E_{row, pi}[ Q(s', a') ] ]
//
// For ensemble beliefs the expectation is evaluated exactly through the
// discrete k-th order statistic law; for Dirichlet beliefs it is replaced by
// an average over a frozen bank of pre-drawn candidate sets so the operator
// stays deterministic (and a contraction) during fixed-point iteration.
#pragma once

#include <optional>

#include "pmdb/belief.hpp"
#include "pmdb/fixed_point.hpp"
#include "pmdb/mdp.hpp"

namespace pmdb {

struct PessimismConfig {
    int n = 10;       // candidate set size
    int k = 2;        // order statistic picked by the secondary player
    int mc_sets = 32; // frozen candidate sets per (s, a) on the Dirichlet path

    void validate() const;
};

/// Pre-drawn candidate sets, mc_sets of them per (s, a), plus the seed that
/// produced them. Rebuilding from the stored seed reproduces the bank
/// bit-exactly.
struct FrozenSampleBank {
    int num_states = 0;
    int num_actions = 0;
    int n = 0;
    int mc_sets = 0;
    uint64_t seed = 0;
    std::vector<CandidateSet> sets;  // [(s * A + a) * mc_sets + b]

    const CandidateSet& set(int s, int a, int b) const {
        return sets[(static_cast<size_t>(s) * num_actions + a) * mc_sets + b];
    }
};

FrozenSampleBank build_sample_bank(const DynamicsBelief& belief, int n,
                                   int mc_sets, uint64_t seed);

/// Evaluates the expected k-th smallest continuation at one (s, a) given the
/// per-state continuation values v. Holds scratch buffers; one instance per
/// solve, not thread-safe.
class PessimisticInner {
public:
    PessimisticInner(const DynamicsBelief& belief, const PessimismConfig& cfg,
                     const TabularMDP& mdp, const FrozenSampleBank* bank);

    double operator()(int s, int a, const numvec& v) const;

private:
    double ensemble_inner(int s, int a, const numvec& v) const;
    double bank_inner(int s, int a, const numvec& v) const;

    const EnsembleBelief* ensemble_ = nullptr;
    const FrozenSampleBank* bank_ = nullptr;
    const TabularMDP* mdp_;
    BinomialOrderStat order_stat_;
    mutable numvec g_;           // indicator values scratch
    mutable std::vector<int> order_;
};

/// One synchronous sweep of the pessimistic evaluation operator.
QTable pessimistic_backup(const QTable& q, const StochasticPolicy& pi,
                          const DynamicsBelief& belief,
                          const PessimismConfig& cfg, const TabularMDP& mdp,
                          const FrozenSampleBank* bank = nullptr);

struct PessimisticEval {
    QTable q;
    double j = 0.0;
    double residual = 0.0;
    long sweeps = 0;
};

/// Fixed point of pessimistic_backup from Q = 0; also reports
/// J = E_{s0, a0}[Q]. Dirichlet beliefs require a sample bank.
PessimisticEval evaluate_policy_pessimistic(const StochasticPolicy& pi,
                                            const DynamicsBelief& belief,
                                            const PessimismConfig& cfg,
                                            const TabularMDP& mdp,
                                            const FrozenSampleBank* bank = nullptr,
                                            const FixedPointOptions& opt = {});

/// Reweighted belief mixture at one (s, a): sum_m lambda_m * member_row_m,
/// with lambda = pmdb_weights of the indicator law under q_fixedpoint.
numvec equivalent_transition_row(const EnsembleBelief& belief, int s, int a,
                                 const QTable& q_fixedpoint,
                                 const StochasticPolicy& pi,
                                 const PessimismConfig& cfg);

/// Full equivalent transition table. Standard policy evaluation under the
/// returned model reproduces the pessimistic fixed point. Rejects a value
/// table whose pessimistic backup residual exceeds 1e-8 (not converged).
TransitionModel equivalent_transition(const EnsembleBelief& belief,
                                      const QTable& q_fixedpoint,
                                      const StochasticPolicy& pi,
                                      const PessimismConfig& cfg,
                                      const TabularMDP& mdp);

// ---------------------------------------------------------------------------
// Monotonicity sweeps over the (N, k) lattice.

enum class SweepRule {
    kFixedK,    // k fixed, N ascending; fixed points must not increase
    kFixedN,    // N fixed, k ascending; fixed points must not decrease
    kDiagonal,  // N = k ascending;      fixed points must not decrease
};

struct SweepGrid {
    SweepRule rule = SweepRule::kFixedK;
    int fixed = 2;  // the fixed k (kFixedK) or fixed N (kFixedN); unused for diagonal
    int lo = 2;
    int hi = 8;

    std::vector<std::pair<int, int>> points() const;  // (N, k) list
};

struct SweepRow {
    int n = 0;
    int k = 0;
    double j = 0.0;
    double residual = 0.0;
    bool monotone_vs_prev = true;  // element-wise Q and J claim vs previous row
};

struct SweepResult {
    SweepGrid grid;
    std::vector<SweepRow> rows;
    std::vector<QTable> q_tables;
    bool monotone = true;
};

/// Regularized-evaluation parameters for the sweep variant that exercises the
/// soft operator (see regularized.hpp); null means unregularized.
struct SweepRegularization {
    const StochasticPolicy* mu = nullptr;
    double alpha = 0.1;
};

/// Solves the fixed point at every grid (N, k) and checks the rule's
/// element-wise monotonicity claim with `slack`.
SweepResult sweep_monotonicity(const StochasticPolicy& pi,
                               const DynamicsBelief& belief,
                               const TabularMDP& mdp, const SweepGrid& grid,
                               double slack = 1e-9,
                               const FrozenSampleBank* bank = nullptr,
                               const SweepRegularization* reg = nullptr);

}  // namespace pmdb
