#include "dpo/bonus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace dpo {

namespace {

void check_nonnegative(const StateActionTable& bonus) {
    for (double v : bonus.values())
        if (!(v >= 0.0)) throw InputError("bonus must be nonnegative");
}

} // namespace

double policy_average(const Policy& policy, const StateActionTable& table, StateId x) {
    double v = 0.0;
    for (ActionId a = 0; a < policy.num_actions(); ++a) v += policy(x, a) * table(x, a);
    return v;
}

DilatedBonusTable dilated_bonus_exact(const LayeredMDP& mdp, const Policy& policy,
                                      const StateActionTable& bonus,
                                      std::optional<double> dilation) {
    if (bonus.num_states() != mdp.num_states() || bonus.num_actions() != mdp.num_actions() ||
        policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions())
        throw StructuralError("bonus/policy shape does not match the mdp");
    check_nonnegative(bonus);
    const auto& L = mdp.layers();
    DilatedBonusTable out{StateActionTable(L.num_states(), L.num_actions()),
                          dilation.value_or(default_dilation(L.horizon()))};
    std::vector<double> avg(L.num_states(), 0.0);
    for (std::size_t h = L.horizon(); h-- > 0;) {
        const StateId next0 = L.first_state(h + 1);
        for (std::size_t i = 0; i < L.layer_size(h); ++i) {
            const StateId x = L.state(h, i);
            for (ActionId a = 0; a < L.num_actions(); ++a) {
                const auto p = mdp.next_distribution(x, a);
                double cont = 0.0;
                for (std::size_t j = 0; j < p.size(); ++j) cont += p[j] * avg[next0 + j];
                out.B(x, a) = bonus(x, a) + out.dilation * cont;
            }
            avg[x] = policy_average(policy, out.B, x);
        }
    }
    return out;
}

double dilated_value(const LayeredMDP& mdp, const Policy& policy, const StateActionTable& bonus) {
    const auto table = dilated_bonus_exact(mdp, policy, bonus);
    return policy_average(policy, table.B, mdp.layers().initial_state());
}

SandwichReport check_dilation_sandwich(const LayeredMDP& mdp, const Policy& policy,
                                       const StateActionTable& bonus, double tolerance) {
    const auto& L = mdp.layers();
    const std::size_t H = L.horizon();
    const auto table = dilated_bonus_exact(mdp, policy, bonus);
    const auto plain = evaluate(mdp, policy, bonus);

    SandwichReport report;
    report.lower_slack.assign(L.num_states(), 0.0);
    report.upper_slack.assign(L.num_states(), 0.0);
    report.min_slack = std::numeric_limits<double>::infinity();
    for (StateId x = 0; x < L.num_decision_states(); ++x) {
        const std::size_t h = L.layer_of(x);
        const double avg = policy_average(policy, table.B, x);
        const double factor = std::pow(table.dilation, static_cast<double>(H - 1 - h));
        report.lower_slack[x] = avg - plain.V[x];
        report.upper_slack[x] = factor * plain.V[x] - avg;
        const double worst = std::min(report.lower_slack[x], report.upper_slack[x]);
        report.min_slack = std::min(report.min_slack, worst);
        if (report.lower_slack[x] < -tolerance) ++report.violations;
        if (report.upper_slack[x] < -tolerance) ++report.violations;
    }
    const StateId x0 = L.initial_state();
    report.within_e_bound =
        policy_average(policy, table.B, x0) <= std::numbers::e * plain.V[x0] + tolerance;
    return report;
}

} // namespace dpo
