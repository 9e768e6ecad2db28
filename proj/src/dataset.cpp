#include "pmdb/dataset.hpp"

namespace pmdb {

void validate_dataset(const Dataset& data, int num_states, int num_actions) {
    for (size_t i = 0; i < data.size(); ++i) {
        const auto& rec = data[i];
        check_input(rec.s >= 0 && rec.s < num_states &&
                        rec.s_next >= 0 && rec.s_next < num_states &&
                        rec.a >= 0 && rec.a < num_actions,
                    "dataset record " + std::to_string(i) +
                        " has out-of-range indices");
    }
}

numvec estimate_rewards(const Dataset& data, int num_states, int num_actions) {
    validate_dataset(data, num_states, num_actions);
    numvec sum(static_cast<size_t>(num_states) * num_actions, 0.0);
    std::vector<long> count(sum.size(), 0);
    for (const auto& rec : data) {
        size_t i = static_cast<size_t>(rec.s) * num_actions + rec.a;
        sum[i] += rec.r;
        ++count[i];
    }
    for (size_t i = 0; i < sum.size(); ++i)
        sum[i] = count[i] > 0 ? sum[i] / count[i] : 0.0;
    return sum;
}

}  // namespace pmdb
