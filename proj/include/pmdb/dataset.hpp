// Offline transition datasets.
#pragma once

#include <vector>

#include "pmdb/common.hpp"

namespace pmdb {

struct DatasetRecord {
    int s = 0;
    int a = 0;
    double r = 0.0;
    int s_next = 0;
    bool done = false;
};

using Dataset = std::vector<DatasetRecord>;

/// Rejects out-of-range indices. Empty datasets are allowed.
void validate_dataset(const Dataset& data, int num_states, int num_actions);

/// Mean observed reward per (s, a); zero where a pair was never seen.
numvec estimate_rewards(const Dataset& data, int num_states, int num_actions);

}  // namespace pmdb
