#pragma once

#include "dpo/mdp.hpp"

#include <optional>
#include <vector>

namespace dpo {

/// 1 + 1/H.
inline double default_dilation(std::size_t horizon) {
    return 1.0 + 1.0 / static_cast<double>(horizon);
}

/// B(x,a) together with the factor used to build it.
struct DilatedBonusTable {
    StateActionTable B;
    double dilation = 1.0;

    double operator()(StateId x, ActionId a) const { return B(x, a); }
};

/// Solves B(x,a) = b(x,a) + dilation * E_{x'~P} E_{a'~pi}[B(x',a')] backward
/// from the last decision layer. `dilation` defaults to 1 + 1/H; passing 1
/// recovers the ordinary Bellman equation. Throws InputError on negative b.
DilatedBonusTable dilated_bonus_exact(const LayeredMDP& mdp, const Policy& policy,
                                      const StateActionTable& bonus,
                                      std::optional<double> dilation = std::nullopt);

/// sum_a pi(a|x_0) B(x_0,a).
double dilated_value(const LayeredMDP& mdp, const Policy& policy, const StateActionTable& bonus);

/// sum_a pi(a|x) B(x,a).
double policy_average(const Policy& policy, const StateActionTable& table, StateId x);

struct SandwichReport {
    /// sum_a pi B - V(x;b); must be >= 0.
    std::vector<double> lower_slack;
    /// dilation^{H-1-h} V(x;b) - sum_a pi B; must be >= 0.
    std::vector<double> upper_slack;
    std::size_t violations = 0;
    double min_slack = 0.0; // smallest slack over both sides
    /// dilated_value <= e * V(x_0; b).
    bool within_e_bound = true;
};

/// Checks V(x;b) <= sum_a pi(a|x) B(x,a) <= dilation^{H-1-h} V(x;b) at every
/// non-terminal state, with `tolerance` absolute slack. Violations are
/// reported, never thrown.
SandwichReport check_dilation_sandwich(const LayeredMDP& mdp, const Policy& policy,
                                       const StateActionTable& bonus, double tolerance = 1e-9);

} // namespace dpo
