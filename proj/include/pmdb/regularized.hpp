// KL-regularized pessimistic policy optimization.
//
// The soft backup replaces the policy expectation over next actions with a
// log-mean-exp against a reference policy mu:
//
//   (B Q)(s, a) = r(s, a) + discount * E[ k-th min over N draws of
//                   E_row[ alpha * log E_{a' ~ mu}[ exp(Q(s', a') / alpha) ] ] ]
//
// Its fixed point is the optimal value of the KL-towards-mu regularized
// problem, with closed-form optimum pi*(a|s) proportional to
// mu(a|s) * exp(Q*(s, a) / alpha). Re-solving with mu set to the previous
// optimum yields a policy sequence whose unregularized pessimistic return
// never decreases.
#pragma once

#include "pmdb/pessimistic.hpp"

namespace pmdb {

struct RegularizationConfig {
    double alpha = 0.1;        // KL temperature
    double alpha_floor = 1e-3; // lower bound used by the automatic schedule
    double kl_budget = 1.0;    // target divergence d for auto_alpha
    bool auto_alpha = false;   // recompute alpha per outer iteration

    void validate() const;
};

/// Normalized mu[a] * exp(q[a] / alpha); the closed-form optimal policy row
/// for a converged soft fixed point.
StochasticPolicy boltzmann_policy(const StochasticPolicy& mu, const QTable& q,
                                  double alpha);

/// One synchronous sweep of the soft pessimistic optimality operator.
QTable soft_pessimistic_backup(const QTable& q, const StochasticPolicy& mu,
                               const DynamicsBelief& belief,
                               const PessimismConfig& cfg,
                               const RegularizationConfig& reg,
                               const TabularMDP& mdp,
                               const FrozenSampleBank* bank = nullptr);

struct RegularizedSolve {
    QTable q;                // soft optimal fixed point
    StochasticPolicy pi;     // closed-form optimal policy
    double residual = 0.0;
    long sweeps = 0;
};

/// Fixed point of soft_pessimistic_backup from Q = 0 plus the induced policy.
/// Requires mu strictly positive.
RegularizedSolve solve_regularized(const StochasticPolicy& mu,
                                   const DynamicsBelief& belief,
                                   const PessimismConfig& cfg,
                                   const RegularizationConfig& reg,
                                   const TabularMDP& mdp,
                                   const FrozenSampleBank* bank = nullptr);

struct RegularizedEval {
    QTable q;          // regularized evaluation fixed point for pi
    double j_reg = 0.0;  // E[Q(s0, a0)] - alpha * E[KL(pi || mu) at s0]
    double residual = 0.0;
    long sweeps = 0;
};

/// Evaluation counterpart: fixed policy pi, KL penalty against mu folded into
/// every continuation. With pi == mu this reduces to plain pessimistic
/// evaluation and j_reg equals the unregularized J.
RegularizedEval evaluate_regularized(const StochasticPolicy& pi,
                                     const StochasticPolicy& mu,
                                     const DynamicsBelief& belief,
                                     const PessimismConfig& cfg,
                                     const RegularizationConfig& reg,
                                     const TabularMDP& mdp,
                                     const FrozenSampleBank* bank = nullptr);

/// Per-state automatic temperature: the smallest alpha >= alpha_floor whose
/// Boltzmann tilt of q against mu provably keeps KL(tilt || mu) within the
/// divergence budget. Uses the surrogate
///   alpha = max( (E_tilt_floor[q] - E_mu[q]) / kl_budget, alpha_floor ).
double auto_alpha(const QTable& q, const StochasticPolicy& mu, int s,
                  const RegularizationConfig& reg);

struct RpoIteration {
    int iter = 0;
    double j = 0.0;          // unregularized pessimistic J of this policy
    double residual = 0.0;   // soft-solve residual that produced the policy
    StochasticPolicy policy;
    QTable q_soft;           // soft fixed point of the producing sub-problem
};

struct RpoTrace {
    std::vector<RpoIteration> iterations;  // entry 0 is the initial policy

    const RpoIteration& final() const { return iterations.back(); }
};

/// Iterated regularized policy optimization: mu_0 = pi0, then repeatedly
/// solve the regularized sub-problem and feed the optimum back as the next
/// reference. J must never decrease by more than 1e-9 per step; a violation
/// aborts with the trace serialized into the error. Stops early once the
/// improvement stays below 1e-10 for three consecutive iterations.
RpoTrace iterate_rpo(const StochasticPolicy& pi0, const DynamicsBelief& belief,
                     const PessimismConfig& cfg, const RegularizationConfig& reg,
                     const TabularMDP& mdp, int num_iters,
                     const FrozenSampleBank* bank = nullptr);

}  // namespace pmdb
