// File formats: JSON for models/beliefs/policies/specs, CSV for datasets,
// sweeps, trajectories, and learning curves.
#pragma once

#include <string>

#include "pmdb/bench.hpp"
#include "pmdb/game.hpp"

namespace pmdb {

// ---- JSON (documents are objects; all tables are nested arrays) -----------

std::string mdp_to_json(const TabularMDP& mdp, const TransitionModel* model);
/// Parses an MDP document; when the document carries a "transition" table and
/// `model` is non-null it is filled in (otherwise absence is an error only if
/// requested).
TabularMDP mdp_from_json(const std::string& text, TransitionModel* model = nullptr);

std::string belief_to_json(const DynamicsBelief& belief);
DynamicsBelief belief_from_json(const std::string& text);

std::string policy_to_json(const StochasticPolicy& pi);
StochasticPolicy policy_from_json(const std::string& text);

std::string rpo_trace_to_json(const RpoTrace& trace);

std::string experiment_spec_to_json(const ExperimentSpec& spec);
ExperimentSpec experiment_spec_from_json(const std::string& text);

// ---- CSV -------------------------------------------------------------------

std::string dataset_to_csv(const Dataset& data);       // header s,a,r,s_next,done
Dataset dataset_from_csv(const std::string& text);

std::string sweep_to_csv(const SweepResult& sweep);    // N,k,J,sup_norm_residual,monotone_flags
std::string trajectory_to_csv(const EpisodeResult& episode);  // step,s,a,r,chosen_candidate_index,s_next
std::string curve_to_csv(const std::vector<CurvePoint>& curve);  // step,J_amg,J_true,mean_q,mean_uncertainty

// ---- files and hashing ------------------------------------------------------

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// Hex SHA-1 of the blob encoding "blob <size>\0<content>" (content-address
/// style), used by experiment manifests.
std::string content_hash(const std::string& content);

}  // namespace pmdb
