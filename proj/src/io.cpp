#include "pmdb/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pmdb {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json nested_transition(const TransitionModel& model) {
    json t = json::array();
    for (int s = 0; s < model.num_states; ++s) {
        json per_a = json::array();
        for (int a = 0; a < model.num_actions; ++a) {
            auto row = model.row(s, a);
            per_a.push_back(json(numvec(row.begin(), row.end())));
        }
        t.push_back(std::move(per_a));
    }
    return t;
}

TransitionModel transition_from_nested(const json& t) {
    check_input(t.is_array() && !t.empty() && t[0].is_array() && !t[0].empty(),
                "transition table: expected nested [s][a][s'] arrays");
    const int S = static_cast<int>(t.size());
    const int A = static_cast<int>(t[0].size());
    TransitionModel model = TransitionModel::zeros(S, A);
    for (int s = 0; s < S; ++s) {
        check_input(static_cast<int>(t[s].size()) == A,
                    "transition table: ragged action dimension");
        for (int a = 0; a < A; ++a) {
            const auto& row = t[s][a];
            check_input(static_cast<int>(row.size()) == S,
                        "transition table: ragged next-state dimension");
            auto out = model.row(s, a);
            for (int sn = 0; sn < S; ++sn) out[sn] = row[sn].get<double>();
        }
    }
    return model;
}

json policy_rows(const StochasticPolicy& pi) {
    json rows = json::array();
    for (int s = 0; s < pi.num_states; ++s) {
        auto row = pi.row(s);
        rows.push_back(json(numvec(row.begin(), row.end())));
    }
    return rows;
}

}  // namespace

std::string mdp_to_json(const TabularMDP& mdp, const TransitionModel* model) {
    json doc;
    doc["num_states"] = mdp.num_states;
    doc["num_actions"] = mdp.num_actions;
    doc["reward"] = mdp.reward;
    doc["discount"] = mdp.discount;
    doc["initial_dist"] = mdp.initial_dist;
    doc["terminal_mask"] = mdp.terminal_mask;
    if (model) doc["transition"] = nested_transition(*model);
    return doc.dump(2) + "\n";
}

TabularMDP mdp_from_json(const std::string& text, TransitionModel* model) {
    json doc = json::parse(text);
    TabularMDP mdp;
    mdp.num_states = doc.at("num_states").get<int>();
    mdp.num_actions = doc.at("num_actions").get<int>();
    mdp.reward = doc.at("reward").get<numvec>();
    mdp.discount = doc.at("discount").get<double>();
    mdp.initial_dist = doc.at("initial_dist").get<numvec>();
    if (doc.contains("terminal_mask"))
        mdp.terminal_mask = doc["terminal_mask"].get<std::vector<uint8_t>>();
    mdp.validate();
    if (model) {
        check_input(doc.contains("transition"),
                    "mdp document lacks a transition table");
        *model = transition_from_nested(doc["transition"]);
        mdp.check_pairing(*model);
    }
    return mdp;
}

std::string belief_to_json(const DynamicsBelief& belief) {
    json doc;
    if (const auto* ens = std::get_if<EnsembleBelief>(&belief)) {
        doc["kind"] = "ensemble";
        doc["weights"] = ens->weights;
        json members = json::array();
        for (const auto& member : ens->members)
            members.push_back(nested_transition(member));
        doc["members"] = std::move(members);
    } else {
        const auto& dir = std::get<DirichletBelief>(belief);
        doc["kind"] = "dirichlet";
        json rows = json::array();
        for (int s = 0; s < dir.num_states; ++s) {
            json per_a = json::array();
            for (int a = 0; a < dir.num_actions; ++a) {
                auto row = dir.row(s, a);
                per_a.push_back(json(numvec(row.begin(), row.end())));
            }
            rows.push_back(std::move(per_a));
        }
        doc["concentration"] = std::move(rows);
    }
    return doc.dump(2) + "\n";
}

DynamicsBelief belief_from_json(const std::string& text) {
    json doc = json::parse(text);
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "ensemble") {
        EnsembleBelief belief;
        belief.weights = doc.at("weights").get<numvec>();
        for (const auto& member : doc.at("members"))
            belief.members.push_back(transition_from_nested(member));
        belief.validate();
        return belief;
    }
    check_input(kind == "dirichlet",
                "belief document: kind must be ensemble or dirichlet");
    const auto& rows = doc.at("concentration");
    check_input(rows.is_array() && !rows.empty() && rows[0].is_array() &&
                    !rows[0].empty(),
                "belief document: expected nested concentration arrays");
    DirichletBelief belief;
    belief.num_states = static_cast<int>(rows.size());
    belief.num_actions = static_cast<int>(rows[0].size());
    belief.concentration.resize(static_cast<size_t>(belief.num_states) *
                                belief.num_actions * belief.num_states);
    for (int s = 0; s < belief.num_states; ++s)
        for (int a = 0; a < belief.num_actions; ++a) {
            const auto& row = rows[s][a];
            check_input(static_cast<int>(row.size()) == belief.num_states,
                        "belief document: ragged concentration row");
            for (int sn = 0; sn < belief.num_states; ++sn)
                belief.row(s, a)[sn] = row[sn].get<double>();
        }
    belief.validate();
    return belief;
}

std::string policy_to_json(const StochasticPolicy& pi) {
    json doc;
    doc["num_states"] = pi.num_states;
    doc["num_actions"] = pi.num_actions;
    doc["rows"] = policy_rows(pi);
    return doc.dump(2) + "\n";
}

StochasticPolicy policy_from_json(const std::string& text) {
    json doc = json::parse(text);
    StochasticPolicy pi;
    pi.num_states = doc.at("num_states").get<int>();
    pi.num_actions = doc.at("num_actions").get<int>();
    pi.p.reserve(static_cast<size_t>(pi.num_states) * pi.num_actions);
    const auto& rows = doc.at("rows");
    check_input(static_cast<int>(rows.size()) == pi.num_states,
                "policy document: row count mismatch");
    for (const auto& row : rows) {
        check_input(static_cast<int>(row.size()) == pi.num_actions,
                    "policy document: ragged row");
        for (const auto& v : row) pi.p.push_back(v.get<double>());
    }
    pi.validate();
    return pi;
}

std::string rpo_trace_to_json(const RpoTrace& trace) {
    json arr = json::array();
    for (const auto& it : trace.iterations) {
        json entry;
        entry["iter"] = it.iter;
        entry["J"] = it.j;
        entry["residual"] = it.residual;
        entry["policy"] = policy_rows(it.policy);
        arr.push_back(std::move(entry));
    }
    return arr.dump(2) + "\n";
}

std::string experiment_spec_to_json(const ExperimentSpec& spec) {
    json doc;
    doc["mdp_file"] = spec.mdp_file;
    doc["generator"] = {{"num_states", spec.generator.num_states},
                        {"num_actions", spec.generator.num_actions},
                        {"branching", spec.generator.branching},
                        {"discount", spec.generator.discount}};
    doc["dataset"] = {{"episodes", spec.dataset.episodes},
                      {"horizon", spec.dataset.horizon}};
    doc["belief"] = {{"kind", spec.belief.kind},
                     {"members", spec.belief.members},
                     {"smoothing", spec.belief.smoothing},
                     {"prior", spec.belief.prior},
                     {"mc_sets", spec.belief.mc_sets}};
    doc["pessimism"] = {{"N", spec.pessimism.n},
                        {"k", spec.pessimism.k},
                        {"mc_sets", spec.pessimism.mc_sets}};
    doc["regularization"] = {{"alpha", spec.regularization.alpha},
                             {"alpha_floor", spec.regularization.alpha_floor},
                             {"kl_budget", spec.regularization.kl_budget},
                             {"auto_alpha", spec.regularization.auto_alpha}};
    doc["learner"] = {{"q_lr", spec.learner.q_lr},
                      {"policy_lr", spec.learner.policy_lr},
                      {"batch_size_mdp", spec.learner.batch_size_mdp},
                      {"parallel_games", spec.learner.parallel_games},
                      {"epsilon", spec.learner.epsilon},
                      {"omega1", spec.learner.omega1},
                      {"omega2", spec.learner.omega2},
                      {"alpha", spec.learner.alpha},
                      {"amg_loss_weight", spec.learner.amg_loss_weight},
                      {"mdp_loss_weight", spec.learner.mdp_loss_weight},
                      {"N", spec.learner.n},
                      {"k", spec.learner.k},
                      {"max_steps", spec.learner.max_steps},
                      {"horizon", spec.learner.horizon},
                      {"secondary_on_target", spec.learner.secondary_on_target},
                      {"eval_every", spec.learner.eval_every}};
    doc["simulation"] = {{"episodes", spec.simulation.episodes},
                         {"horizon", spec.simulation.horizon},
                         {"epsilon", spec.simulation.epsilon}};
    doc["rpo_iters"] = spec.rpo_iters;
    doc["stages"] = spec.stages;
    doc["seed"] = spec.seed;
    doc["out_dir"] = spec.out_dir;
    return doc.dump(2);
}

ExperimentSpec experiment_spec_from_json(const std::string& text) {
    json doc = json::parse(text);
    ExperimentSpec spec;
    spec.mdp_file = doc.value("mdp_file", spec.mdp_file);
    if (doc.contains("generator")) {
        const auto& g = doc["generator"];
        spec.generator.num_states = g.value("num_states", spec.generator.num_states);
        spec.generator.num_actions =
            g.value("num_actions", spec.generator.num_actions);
        spec.generator.branching = g.value("branching", spec.generator.branching);
        spec.generator.discount = g.value("discount", spec.generator.discount);
    }
    if (doc.contains("dataset")) {
        const auto& d = doc["dataset"];
        spec.dataset.episodes = d.value("episodes", spec.dataset.episodes);
        spec.dataset.horizon = d.value("horizon", spec.dataset.horizon);
    }
    if (doc.contains("belief")) {
        const auto& b = doc["belief"];
        spec.belief.kind = b.value("kind", spec.belief.kind);
        spec.belief.members = b.value("members", spec.belief.members);
        spec.belief.smoothing = b.value("smoothing", spec.belief.smoothing);
        spec.belief.prior = b.value("prior", spec.belief.prior);
        spec.belief.mc_sets = b.value("mc_sets", spec.belief.mc_sets);
    }
    if (doc.contains("pessimism")) {
        const auto& p = doc["pessimism"];
        spec.pessimism.n = p.value("N", spec.pessimism.n);
        spec.pessimism.k = p.value("k", spec.pessimism.k);
        spec.pessimism.mc_sets = p.value("mc_sets", spec.pessimism.mc_sets);
    }
    if (doc.contains("regularization")) {
        const auto& r = doc["regularization"];
        spec.regularization.alpha = r.value("alpha", spec.regularization.alpha);
        spec.regularization.alpha_floor =
            r.value("alpha_floor", spec.regularization.alpha_floor);
        spec.regularization.kl_budget =
            r.value("kl_budget", spec.regularization.kl_budget);
        spec.regularization.auto_alpha =
            r.value("auto_alpha", spec.regularization.auto_alpha);
    }
    if (doc.contains("learner")) {
        const auto& l = doc["learner"];
        spec.learner.q_lr = l.value("q_lr", spec.learner.q_lr);
        spec.learner.policy_lr = l.value("policy_lr", spec.learner.policy_lr);
        spec.learner.batch_size_mdp =
            l.value("batch_size_mdp", spec.learner.batch_size_mdp);
        spec.learner.parallel_games =
            l.value("parallel_games", spec.learner.parallel_games);
        spec.learner.epsilon = l.value("epsilon", spec.learner.epsilon);
        spec.learner.omega1 = l.value("omega1", spec.learner.omega1);
        spec.learner.omega2 = l.value("omega2", spec.learner.omega2);
        spec.learner.alpha = l.value("alpha", spec.learner.alpha);
        spec.learner.amg_loss_weight =
            l.value("amg_loss_weight", spec.learner.amg_loss_weight);
        spec.learner.mdp_loss_weight =
            l.value("mdp_loss_weight", spec.learner.mdp_loss_weight);
        spec.learner.n = l.value("N", spec.learner.n);
        spec.learner.k = l.value("k", spec.learner.k);
        spec.learner.max_steps = l.value("max_steps", spec.learner.max_steps);
        spec.learner.horizon = l.value("horizon", spec.learner.horizon);
        spec.learner.secondary_on_target =
            l.value("secondary_on_target", spec.learner.secondary_on_target);
        spec.learner.eval_every = l.value("eval_every", spec.learner.eval_every);
    }
    if (doc.contains("simulation")) {
        const auto& s = doc["simulation"];
        spec.simulation.episodes = s.value("episodes", spec.simulation.episodes);
        spec.simulation.horizon = s.value("horizon", spec.simulation.horizon);
        spec.simulation.epsilon = s.value("epsilon", spec.simulation.epsilon);
    }
    spec.rpo_iters = doc.value("rpo_iters", spec.rpo_iters);
    if (doc.contains("stages"))
        spec.stages = doc["stages"].get<std::vector<std::string>>();
    spec.seed = doc.value("seed", spec.seed);
    spec.out_dir = doc.value("out_dir", spec.out_dir);
    spec.validate();
    return spec;
}

// ---- CSV --------------------------------------------------------------------

std::string dataset_to_csv(const Dataset& data) {
    std::ostringstream out;
    out << "s,a,r,s_next,done\n";
    for (const auto& rec : data)
        out << rec.s << ',' << rec.a << ',' << fmt(rec.r) << ',' << rec.s_next
            << ',' << (rec.done ? 1 : 0) << '\n';
    return out.str();
}

Dataset dataset_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    check_input(static_cast<bool>(std::getline(in, line)), "dataset csv: empty file");
    check_input(line == "s,a,r,s_next,done",
                "dataset csv: unexpected header '" + line + "'");
    Dataset data;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        DatasetRecord rec;
        int done = 0;
        check_input(std::sscanf(line.c_str(), "%d,%d,%lf,%d,%d", &rec.s, &rec.a,
                                &rec.r, &rec.s_next, &done) == 5,
                    "dataset csv: malformed row '" + line + "'");
        rec.done = done != 0;
        data.push_back(rec);
    }
    return data;
}

std::string sweep_to_csv(const SweepResult& sweep) {
    std::ostringstream out;
    out << "N,k,J,sup_norm_residual,monotone_flags\n";
    for (const auto& row : sweep.rows)
        out << row.n << ',' << row.k << ',' << fmt(row.j) << ','
            << fmt(row.residual) << ',' << (row.monotone_vs_prev ? 1 : 0)
            << '\n';
    return out.str();
}

std::string trajectory_to_csv(const EpisodeResult& episode) {
    std::ostringstream out;
    out << "step,s,a,r,chosen_candidate_index,s_next\n";
    for (const auto& rec : episode.trajectory)
        out << rec.step << ',' << rec.s << ',' << rec.a << ',' << fmt(rec.r)
            << ',' << rec.chosen_candidate << ',' << rec.s_next << '\n';
    return out.str();
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
    std::ostringstream out;
    out << "step,J_amg,J_true,mean_q,mean_uncertainty\n";
    for (const auto& point : curve)
        out << point.step << ',' << fmt(point.j_amg) << ',' << fmt(point.j_true)
            << ',' << fmt(point.mean_q) << ',' << fmt(point.mean_uncertainty)
            << '\n';
    return out.str();
}

// ---- files and hashing --------------------------------------------------------

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check_input(in.good(), "cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    check_input(out.good(), "cannot write file: " + path);
    out << content;
}

namespace {

/// Minimal SHA-1 (RFC 3174). Only used for content addressing of small
/// artifact files; no security claims attached.
struct Sha1 {
    uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u,
                     0xC3D2E1F0u};
    uint64_t total = 0;
    unsigned char block[64];
    size_t fill = 0;

    static uint32_t rol(uint32_t x, int s) { return (x << s) | (x >> (32 - s)); }

    void process(const unsigned char* p) {
        uint32_t w[80];
        for (int i = 0; i < 16; ++i)
            w[i] = (uint32_t(p[4 * i]) << 24) | (uint32_t(p[4 * i + 1]) << 16) |
                   (uint32_t(p[4 * i + 2]) << 8) | uint32_t(p[4 * i + 3]);
        for (int i = 16; i < 80; ++i)
            w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
        uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
        for (int i = 0; i < 80; ++i) {
            uint32_t f, k;
            if (i < 20) {
                f = (b & c) | (~b & d);
                k = 0x5A827999u;
            } else if (i < 40) {
                f = b ^ c ^ d;
                k = 0x6ED9EBA1u;
            } else if (i < 60) {
                f = (b & c) | (b & d) | (c & d);
                k = 0x8F1BBCDCu;
            } else {
                f = b ^ c ^ d;
                k = 0xCA62C1D6u;
            }
            uint32_t t = rol(a, 5) + f + e + k + w[i];
            e = d;
            d = c;
            c = rol(b, 30);
            b = a;
            a = t;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
    }

    void update(const unsigned char* data, size_t len) {
        total += len;
        while (len > 0) {
            size_t take = std::min(len, sizeof(block) - fill);
            std::memcpy(block + fill, data, take);
            fill += take;
            data += take;
            len -= take;
            if (fill == sizeof(block)) {
                process(block);
                fill = 0;
            }
        }
    }

    std::string hex_digest() {
        uint64_t bits = total * 8;
        unsigned char pad = 0x80;
        update(&pad, 1);
        unsigned char zero = 0;
        while (fill != 56) update(&zero, 1);
        unsigned char len[8];
        for (int i = 0; i < 8; ++i)
            len[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
        update(len, 8);
        char out[41];
        for (int i = 0; i < 5; ++i)
            std::snprintf(out + 8 * i, 9, "%08x", h[i]);
        return std::string(out, 40);
    }
};

}  // namespace

std::string content_hash(const std::string& content) {
    Sha1 sha;
    std::string header = "blob " + std::to_string(content.size());
    sha.update(reinterpret_cast<const unsigned char*>(header.data()),
               header.size() + 1);  // include the trailing NUL
    sha.update(reinterpret_cast<const unsigned char*>(content.data()),
               content.size());
    return sha.hex_digest();
}

}  // namespace pmdb
