// Beliefs over dynamics and the exact order-statistic machinery behind
// pessimism-modulated reweighting.
//
// A belief assigns probability to transition rows independently per (s, a)
// (rectangular structure). Two representations are supported:
//   - EnsembleBelief: M complete transition tables with prior weights; all
//     per-(s, a) laws are finite and admit exact order-statistic math.
//   - DirichletBelief: per-(s, a) Dirichlet posteriors; continuous, handled
//     by Monte-Carlo candidate sampling (see FrozenSampleBank).
#pragma once

#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "pmdb/dataset.hpp"
#include "pmdb/mdp.hpp"
#include "pmdb/rng.hpp"

namespace pmdb {

struct EnsembleBelief {
    std::vector<TransitionModel> members;
    numvec weights;  // prior mass per member, sums to 1

    int num_members() const { return static_cast<int>(members.size()); }
    int num_states() const { return members.empty() ? 0 : members[0].num_states; }
    int num_actions() const {
        return members.empty() ? 0 : members[0].num_actions;
    }
    std::span<const double> member_row(int m, int s, int a) const {
        return members[m].row(s, a);
    }

    /// Rejects empty ensembles, shape mismatches between members, and weight
    /// vectors that are not a probability distribution.
    void validate() const;
};

struct DirichletBelief {
    int num_states = 0;
    int num_actions = 0;
    numvec concentration;  // row-major (s, a, s'), all entries > 0

    std::span<const double> row(int s, int a) const {
        return {concentration.data() +
                    (static_cast<size_t>(s) * num_actions + a) * num_states,
                static_cast<size_t>(num_states)};
    }
    std::span<double> row(int s, int a) {
        return {concentration.data() +
                    (static_cast<size_t>(s) * num_actions + a) * num_states,
                static_cast<size_t>(num_states)};
    }
    /// Posterior mean transition row.
    void mean_row(int s, int a, std::span<double> out) const;

    void validate() const;
};

using DynamicsBelief = std::variant<EnsembleBelief, DirichletBelief>;

int belief_num_states(const DynamicsBelief& belief);
int belief_num_actions(const DynamicsBelief& belief);
void validate_belief(const DynamicsBelief& belief);

/// Belief-mean transition table (exact for both representations).
TransitionModel belief_mean_model(const DynamicsBelief& belief);

/// An ordered list of N sampled transition rows for one (s, a).
struct CandidateSet {
    int num_states = 0;
    std::vector<numvec> rows;

    int size() const { return static_cast<int>(rows.size()); }
};

/// Draws N i.i.d. candidate rows from the belief at (s, a).
CandidateSet sample_candidate_set(const DynamicsBelief& belief, int s, int a,
                                  int n, RngStream& rng);

/// k-th smallest of `values` (k is 1-based, counted with multiplicity).
double kth_min(std::span<const double> values, int k);

/// The finite law of the scalar indicator g(tau) = E_{tau, pi}[Q] induced by
/// an ensemble belief at (s, a). Support values are ascending and distinct;
/// member_map lists, per support value, the (member index, prior weight)
/// pairs that map onto it (grouped by exact equality).
struct DiscreteIndicatorDistribution {
    int num_members = 0;
    numvec support;
    numvec probs;
    std::vector<std::vector<std::pair<int, double>>> member_map;
};

DiscreteIndicatorDistribution indicator_distribution(const EnsembleBelief& belief,
                                                     int s, int a,
                                                     const QTable& q,
                                                     const StochasticPolicy& pi);

/// Exact tail probabilities P(Bin(N, F) >= k) for fixed (N, k), evaluated in
/// the log domain with max-subtraction so N up to ~64 stays stable. This is
/// the CDF of the k-th order statistic of N i.i.d. draws:
/// P(X_(k) <= g) = P(Bin(N, F(g)) >= k).
class BinomialOrderStat {
public:
    BinomialOrderStat(int n, int k);

    double tail_prob(double cdf_value) const;
    int n() const { return n_; }
    int k() const { return k_; }

private:
    int n_;
    int k_;
    numvec log_choose_;  // C(n, j) for j = k..n
};

/// E[k-th smallest of N i.i.d. draws] from a finite law, computed exactly via
/// binomial tail differences over the support.
double kth_order_statistic_expectation(const DiscreteIndicatorDistribution& dist,
                                       int n, int k);

/// Per-member reweighting lambda with sum 1 and
/// sum_m lambda_m * g_m = kth_order_statistic_expectation(dist, n, k).
/// Ties (members sharing a support value) split the order-statistic mass in
/// proportion to their prior weights.
numvec pmdb_weights(const DiscreteIndicatorDistribution& dist, int n, int k);

/// Continuous reweighting kernel w(F; k, N) = F^(k-1) * (1-F)^(N-k),
/// the density shape of the k-th order statistic as a function of the CDF
/// level. Unimodal with maximum at F = (k-1)/(N-1).
double reweight_kernel(double cdf_value, int k, int n);

/// Dirichlet posterior from transition counts plus a symmetric prior.
/// Terminal states (if a mask is given) get concentration that is entirely
/// self-directed so posterior means stay absorbing.
DirichletBelief fit_dirichlet(const Dataset& data, int num_states,
                              int num_actions, double prior_pseudocount,
                              const std::vector<uint8_t>* terminal_mask = nullptr);

/// Bootstrap-resampled smoothed maximum-likelihood ensemble. Each member is
/// the smoothed empirical transition table of an independent resample of the
/// dataset (with replacement, same size); weights are uniform. Pairs never
/// observed fall back to the uniform row.
EnsembleBelief bootstrap_ensemble(const Dataset& data, int num_states,
                                  int num_actions, int num_members,
                                  double smoothing, RngStream& rng,
                                  const std::vector<uint8_t>* terminal_mask = nullptr);

}  // namespace pmdb
