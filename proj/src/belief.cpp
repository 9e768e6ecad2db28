#include "pmdb/belief.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pmdb {

void EnsembleBelief::validate() const {
    check_input(!members.empty(), "EnsembleBelief: no members");
    check_input(weights.size() == members.size(),
                "EnsembleBelief: weight count does not match member count");
    double total = 0.0;
    for (double w : weights) {
        check_input(w >= 0.0, "EnsembleBelief: negative member weight");
        total += w;
    }
    check_input(std::abs(total - 1.0) <= 1e-12,
                "EnsembleBelief: member weights must sum to 1");
    const int S = members[0].num_states, A = members[0].num_actions;
    for (const auto& m : members) {
        check_input(m.num_states == S && m.num_actions == A,
                    "EnsembleBelief: member shape mismatch");
        m.validate();
    }
}

void DirichletBelief::mean_row(int s, int a, std::span<double> out) const {
    auto c = row(s, a);
    check_input(out.size() == c.size(), "DirichletBelief: output size mismatch");
    double total = 0.0;
    for (double v : c) total += v;
    for (size_t i = 0; i < c.size(); ++i) out[i] = c[i] / total;
}

void DirichletBelief::validate() const {
    check_input(num_states > 0 && num_actions > 0, "DirichletBelief: empty shape");
    check_input(concentration.size() == static_cast<size_t>(num_states) *
                                            num_actions * num_states,
                "DirichletBelief: concentration size does not match shape");
    for (double v : concentration)
        check_input(v > 0.0, "DirichletBelief: concentrations must be positive");
}

int belief_num_states(const DynamicsBelief& belief) {
    if (const auto* ens = std::get_if<EnsembleBelief>(&belief))
        return ens->num_states();
    return std::get<DirichletBelief>(belief).num_states;
}

int belief_num_actions(const DynamicsBelief& belief) {
    if (const auto* ens = std::get_if<EnsembleBelief>(&belief))
        return ens->num_actions();
    return std::get<DirichletBelief>(belief).num_actions;
}

void validate_belief(const DynamicsBelief& belief) {
    std::visit([](const auto& b) { b.validate(); }, belief);
}

TransitionModel belief_mean_model(const DynamicsBelief& belief) {
    validate_belief(belief);
    const int S = belief_num_states(belief), A = belief_num_actions(belief);
    TransitionModel mean = TransitionModel::zeros(S, A);
    if (const auto* ens = std::get_if<EnsembleBelief>(&belief)) {
        for (int m = 0; m < ens->num_members(); ++m) {
            double w = ens->weights[m];
            for (size_t i = 0; i < mean.p.size(); ++i)
                mean.p[i] += w * ens->members[m].p[i];
        }
    } else {
        const auto& dir = std::get<DirichletBelief>(belief);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) dir.mean_row(s, a, mean.row(s, a));
    }
    return mean;
}

CandidateSet sample_candidate_set(const DynamicsBelief& belief, int s, int a,
                                  int n, RngStream& rng) {
    check_input(n >= 1, "sample_candidate_set: need at least one candidate");
    const int S = belief_num_states(belief);
    check_input(s >= 0 && s < S && a >= 0 && a < belief_num_actions(belief),
                "sample_candidate_set: (s, a) out of range");
    CandidateSet set;
    set.num_states = S;
    set.rows.reserve(n);
    if (const auto* ens = std::get_if<EnsembleBelief>(&belief)) {
        for (int i = 0; i < n; ++i) {
            int m = rng.categorical(ens->weights);
            auto r = ens->member_row(m, s, a);
            set.rows.emplace_back(r.begin(), r.end());
        }
    } else {
        const auto& dir = std::get<DirichletBelief>(belief);
        for (int i = 0; i < n; ++i) {
            numvec row(S);
            rng.dirichlet(dir.row(s, a), row);
            set.rows.push_back(std::move(row));
        }
    }
    return set;
}

double kth_min(std::span<const double> values, int k) {
    check_input(!values.empty(), "kth_min: empty input");
    check_input(k >= 1 && k <= static_cast<int>(values.size()),
                "kth_min: k out of range");
    numvec copy(values.begin(), values.end());
    std::nth_element(copy.begin(), copy.begin() + (k - 1), copy.end());
    return copy[k - 1];
}

DiscreteIndicatorDistribution indicator_distribution(const EnsembleBelief& belief,
                                                     int s, int a,
                                                     const QTable& q,
                                                     const StochasticPolicy& pi) {
    belief.validate();
    const int S = belief.num_states(), M = belief.num_members();
    check_input(q.num_states == S && pi.num_states == S &&
                    q.num_actions == belief.num_actions() &&
                    pi.num_actions == belief.num_actions(),
                "indicator_distribution: shape mismatch");
    check_input(s >= 0 && s < S && a >= 0 && a < belief.num_actions(),
                "indicator_distribution: (s, a) out of range");

    numvec v(S);
    for (int sn = 0; sn < S; ++sn) v[sn] = dot(pi.row(sn), q.row(sn));

    numvec g(M);
    for (int m = 0; m < M; ++m) g[m] = dot(belief.member_row(m, s, a), v);

    std::vector<int> order(M);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
        return g[i] != g[j] ? g[i] < g[j] : i < j;
    });

    DiscreteIndicatorDistribution dist;
    dist.num_members = M;
    for (int i = 0; i < M;) {
        int j = i;
        double gv = g[order[i]];
        double mass = 0.0;
        std::vector<std::pair<int, double>> group;
        while (j < M && g[order[j]] == gv) {  // exact-equality tie grouping
            group.emplace_back(order[j], belief.weights[order[j]]);
            mass += belief.weights[order[j]];
            ++j;
        }
        dist.support.push_back(gv);
        dist.probs.push_back(mass);
        dist.member_map.push_back(std::move(group));
        i = j;
    }
    return dist;
}

BinomialOrderStat::BinomialOrderStat(int n, int k) : n_(n), k_(k) {
    check_input(n >= 1, "BinomialOrderStat: need n >= 1");
    check_input(k >= 1 && k <= n, "BinomialOrderStat: require 1 <= k <= n");
    log_choose_.resize(n - k + 1);
    for (int j = k; j <= n; ++j)
        log_choose_[j - k] = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) -
                             std::lgamma(n - j + 1.0);
}

double BinomialOrderStat::tail_prob(double cdf_value) const {
    if (cdf_value <= 0.0) return 0.0;
    if (cdf_value >= 1.0) return 1.0;
    const double lf = std::log(cdf_value);
    const double l1mf = std::log1p(-cdf_value);
    // Two passes: find the max log-term, then sum shifted exponentials.
    double m = -std::numeric_limits<double>::infinity();
    for (int j = k_; j <= n_; ++j)
        m = std::max(m, log_choose_[j - k_] + j * lf + (n_ - j) * l1mf);
    double sum = 0.0;
    for (int j = k_; j <= n_; ++j)
        sum += std::exp(log_choose_[j - k_] + j * lf + (n_ - j) * l1mf - m);
    return std::min(1.0, std::exp(m) * sum);
}

namespace {

/// Shared walk over support groups: calls visit(group_index, mass_of_group)
/// where masses are the exact order-statistic probabilities.
template <class Visit>
void order_stat_masses(const DiscreteIndicatorDistribution& dist,
                       const BinomialOrderStat& os, Visit&& visit) {
    double cdf = 0.0, prev_tail = 0.0;
    const size_t last = dist.support.size() - 1;
    for (size_t j = 0; j < dist.support.size(); ++j) {
        cdf += dist.probs[j];
        // Clamp the final level to exactly 1 so no mass is lost to rounding.
        double tail = os.tail_prob(j == last ? 1.0 : std::min(cdf, 1.0));
        visit(j, std::max(tail - prev_tail, 0.0));
        prev_tail = tail;
    }
}

void check_dist(const DiscreteIndicatorDistribution& dist) {
    check_input(!dist.support.empty(),
                "order statistic: empty indicator distribution");
    check_input(dist.support.size() == dist.probs.size() &&
                    dist.support.size() == dist.member_map.size(),
                "order statistic: inconsistent distribution");
}

}  // namespace

double kth_order_statistic_expectation(const DiscreteIndicatorDistribution& dist,
                                       int n, int k) {
    check_dist(dist);
    BinomialOrderStat os(n, k);
    double e = 0.0;
    order_stat_masses(dist, os,
                      [&](size_t j, double mass) { e += mass * dist.support[j]; });
    return e;
}

numvec pmdb_weights(const DiscreteIndicatorDistribution& dist, int n, int k) {
    check_dist(dist);
    check_input(dist.num_members > 0, "pmdb_weights: no members");
    BinomialOrderStat os(n, k);
    numvec lambda(static_cast<size_t>(dist.num_members), 0.0);
    order_stat_masses(dist, os, [&](size_t j, double mass) {
        double group_weight = dist.probs[j];
        if (group_weight <= 0.0) return;
        for (const auto& [member, weight] : dist.member_map[j])
            lambda[member] += mass * weight / group_weight;
    });
    // The masses sum to 1 up to rounding; renormalize so downstream mixtures
    // are exactly stochastic.
    double total = pairwise_sum(lambda);
    check_input(total > 0.0, "pmdb_weights: degenerate reweighting");
    for (double& v : lambda) v /= total;
    return lambda;
}

double reweight_kernel(double cdf_value, int k, int n) {
    check_input(k >= 1 && k <= n, "reweight_kernel: require 1 <= k <= n");
    check_input(cdf_value >= 0.0 && cdf_value <= 1.0,
                "reweight_kernel: CDF level outside [0, 1]");
    // Conventions 0^0 = 1 keep the k = 1 and k = n edges exact.
    if (cdf_value == 0.0) return k == 1 ? 1.0 : 0.0;
    if (cdf_value == 1.0) return k == n ? 1.0 : 0.0;
    return std::exp((k - 1) * std::log(cdf_value) +
                    (n - k) * std::log1p(-cdf_value));
}

DirichletBelief fit_dirichlet(const Dataset& data, int num_states,
                              int num_actions, double prior_pseudocount,
                              const std::vector<uint8_t>* terminal_mask) {
    check_input(num_states > 0 && num_actions > 0, "fit_dirichlet: empty shape");
    check_input(prior_pseudocount > 0.0,
                "fit_dirichlet: prior pseudocount must be positive");
    validate_dataset(data, num_states, num_actions);

    DirichletBelief belief;
    belief.num_states = num_states;
    belief.num_actions = num_actions;
    belief.concentration.assign(static_cast<size_t>(num_states) * num_actions *
                                    num_states,
                                prior_pseudocount);
    for (const auto& rec : data)
        belief.row(rec.s, rec.a)[rec.s_next] += 1.0;

    if (terminal_mask && !terminal_mask->empty()) {
        check_input(terminal_mask->size() == static_cast<size_t>(num_states),
                    "fit_dirichlet: terminal mask size mismatch");
        // Terminal rows are pinned: overwhelming self-mass, vanishing but
        // positive elsewhere (a Dirichlet cannot carry exact zeros).
        for (int s = 0; s < num_states; ++s) {
            if (!(*terminal_mask)[s]) continue;
            for (int a = 0; a < num_actions; ++a) {
                auto row = belief.row(s, a);
                for (int sn = 0; sn < num_states; ++sn)
                    row[sn] = sn == s ? 1e12 : 1e-12;
            }
        }
    }
    return belief;
}

EnsembleBelief bootstrap_ensemble(const Dataset& data, int num_states,
                                  int num_actions, int num_members,
                                  double smoothing, RngStream& rng,
                                  const std::vector<uint8_t>* terminal_mask) {
    check_input(num_states > 0 && num_actions > 0, "bootstrap_ensemble: empty shape");
    check_input(num_members >= 1, "bootstrap_ensemble: need at least one member");
    check_input(smoothing > 0.0, "bootstrap_ensemble: smoothing must be positive");
    validate_dataset(data, num_states, num_actions);
    if (terminal_mask && !terminal_mask->empty())
        check_input(terminal_mask->size() == static_cast<size_t>(num_states),
                    "bootstrap_ensemble: terminal mask size mismatch");

    EnsembleBelief belief;
    belief.weights.assign(static_cast<size_t>(num_members), 1.0 / num_members);
    belief.members.reserve(num_members);

    const size_t n = data.size();
    std::vector<double> counts(static_cast<size_t>(num_states) * num_actions *
                               num_states);
    for (int m = 0; m < num_members; ++m) {
        RngStream member_rng = rng.substream(static_cast<uint64_t>(m));
        std::fill(counts.begin(), counts.end(), 0.0);
        for (size_t i = 0; i < n; ++i) {
            const auto& rec = data[member_rng.uniform_int(static_cast<int>(n))];
            counts[(static_cast<size_t>(rec.s) * num_actions + rec.a) *
                       num_states +
                   rec.s_next] += 1.0;
        }
        TransitionModel model = TransitionModel::zeros(num_states, num_actions);
        for (int s = 0; s < num_states; ++s) {
            for (int a = 0; a < num_actions; ++a) {
                auto out = model.row(s, a);
                if (terminal_mask && !terminal_mask->empty() &&
                    (*terminal_mask)[s]) {
                    out[s] = 1.0;
                    continue;
                }
                const double* c =
                    counts.data() +
                    (static_cast<size_t>(s) * num_actions + a) * num_states;
                double total = 0.0;
                for (int sn = 0; sn < num_states; ++sn) total += c[sn];
                double denom = total + smoothing * num_states;
                for (int sn = 0; sn < num_states; ++sn)
                    out[sn] = (c[sn] + smoothing) / denom;
            }
        }
        belief.members.push_back(std::move(model));
    }
    return belief;
}

}  // namespace pmdb
