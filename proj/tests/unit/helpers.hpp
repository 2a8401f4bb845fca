#pragma once

#include "dpo/envs.hpp"
#include "dpo/mdp.hpp"
#include "dpo/rng.hpp"

#include <vector>

namespace dpo::test {

inline LayeredMDP random_mdp(std::vector<std::size_t> sizes, std::size_t actions, std::uint64_t seed,
                             double concentration = 1.0) {
    InstanceSpec spec;
    spec.layer_sizes = std::move(sizes);
    spec.num_actions = actions;
    spec.concentration = concentration;
    spec.seed = seed;
    return generate_instance(spec).mdp;
}

inline Policy random_policy(const LayerStructure& L, Rng& rng) {
    StateActionTable t(L.num_states(), L.num_actions());
    for (StateId x = 0; x < L.num_states(); ++x) {
        auto p = sample_dirichlet(L.num_actions(), 1.0, rng);
        for (ActionId a = 0; a < L.num_actions(); ++a) t(x, a) = p[a];
    }
    return Policy(t);
}

inline StateActionTable random_table(const LayerStructure& L, Rng& rng, double scale = 1.0) {
    StateActionTable t(L.num_states(), L.num_actions());
    for (StateId x = 0; x < L.num_decision_states(); ++x)
        for (ActionId a = 0; a < L.num_actions(); ++a) t(x, a) = scale * rng.uniform();
    return t;
}

/// Single-state-per-layer chain with `H` decision layers.
inline LayeredMDP line_mdp(std::size_t H, std::size_t actions) {
    std::vector<std::size_t> sizes(H + 1, 1);
    LayerStructure L(sizes, actions);
    std::vector<std::vector<double>> rows(L.num_decision_states() * actions, std::vector<double>{1.0});
    return LayeredMDP(L, rows);
}

} // namespace dpo::test
