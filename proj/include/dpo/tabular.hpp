#pragma once

#include "dpo/bonus.hpp"
#include "dpo/mdp.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace dpo {

class LossSchedule;
struct ExperimentRecord;

enum class Optimize { max, min };

/// Visit and transition counters with the doubling-epoch schedule.
///
/// Counters are cumulative over the whole run. `previous` holds the visit
/// counts at the start of the current epoch; a new epoch begins once some
/// visited pair reaches max{1, 2 * previous}.
class EpochCounters {
public:
    EpochCounters() = default;
    explicit EpochCounters(const LayerStructure& layers);

    const LayerStructure& layers() const { return layers_; }
    std::size_t epoch() const { return epoch_; }

    std::uint64_t visits(StateId x, ActionId a) const { return visits_[x * layers_.num_actions() + a]; }
    std::uint64_t previous_visits(StateId x, ActionId a) const {
        return previous_[x * layers_.num_actions() + a];
    }
    /// N(x,a,x') over the local indices of the next layer.
    std::span<const std::uint64_t> transitions(StateId x, ActionId a) const {
        return transitions_[x * layers_.num_actions() + a];
    }

    /// Adds one episode; returns true when the epoch advanced.
    bool record(const Trajectory& trajectory);

private:
    LayerStructure layers_;
    std::vector<std::uint64_t> visits_;
    std::vector<std::uint64_t> previous_;
    std::vector<std::vector<std::uint64_t>> transitions_;
    std::size_t epoch_ = 1;
};

/// Box {P : |P(x'|x,a) - center(x'|x,a)| <= width(x'|x,a)} intersected with
/// the simplex, one row per non-terminal (x,a).
class ConfidenceSet {
public:
    ConfidenceSet() = default;
    ConfidenceSet(LayerStructure layers, std::vector<std::vector<double>> center,
                  std::vector<std::vector<double>> width, std::size_t epoch = 1);

    /// The whole simplex in every row.
    static ConfidenceSet unconstrained(const LayerStructure& layers);
    /// Zero widths around the true kernel.
    static ConfidenceSet exact(const LayeredMDP& mdp);

    const LayerStructure& layers() const { return layers_; }
    std::size_t epoch() const { return epoch_; }
    std::span<const double> center(StateId x, ActionId a) const {
        return center_[x * layers_.num_actions() + a];
    }
    std::span<const double> width(StateId x, ActionId a) const {
        return width_[x * layers_.num_actions() + a];
    }

    /// The center kernel as an mdp.
    LayeredMDP center_mdp() const;
    /// True when every P(x'|x,a) of `mdp` lies within the box (plus `tolerance`).
    bool contains(const LayeredMDP& mdp, double tolerance = 1e-12) const;

private:
    LayerStructure layers_;
    std::vector<std::vector<double>> center_;
    std::vector<std::vector<double>> width_;
    std::size_t epoch_ = 1;
};

/// ln(T |X| |A| / delta).
double confidence_log_term(std::size_t T, std::size_t num_states, std::size_t num_actions,
                           double delta);

/// 4 sqrt(p L / max{1,n}) + 28 L / (3 max{1,n}), clipped to [0,1].
double confidence_width(double p, std::uint64_t n, double log_term);

/// Empirical kernel and widths from the counters. Rows never visited are
/// centered on the uniform distribution with width 1, i.e. the whole simplex.
ConfidenceSet confidence_widths(const EpochCounters& counters, std::size_t T, double delta);

/// max (or min) of sum_x' p(x') f(x') over {p in simplex : |p - center| <= width},
/// by two-pointer mass shifting over the sorted values.
double greedy_redistribute(std::span<const double> f, std::span<const double> center,
                           std::span<const double> width, Optimize objective);

/// u_t(x,a) and l_t(x,a).
struct OccupancyBounds {
    StateActionTable upper;
    StateActionTable lower;
};

/// Reach probability bound of `target` from every state, then pi(a|x) f(x_0).
double comp_uob(const Policy& policy, const ConfidenceSet& conf, StateId x, ActionId a);
double comp_lob(const Policy& policy, const ConfidenceSet& conf, StateId x, ActionId a);

/// max (or min) over the confidence set of the probability of reaching
/// `target` from x_0.
double reach_bound(const Policy& policy, const ConfidenceSet& conf, StateId target,
                   Optimize objective);

/// Both bounds for every pair (parallel kernel).
OccupancyBounds occupancy_bounds(const Policy& policy, const ConfidenceSet& conf);

/// Q̂(x,a) = L_h 1{visited} / (u(x,a) + gamma); zero off the trajectory.
StateActionTable q_estimate(const Trajectory& trajectory, const StateActionTable& upper,
                            double gamma);

/// b(x) = E_{a~pi}[(3 gamma H + H (u - l)) / (u + gamma)].
double bonus_b_tabular(StateId x, const Policy& policy, const OccupancyBounds& bounds,
                       double gamma, std::size_t horizon);

/// b(x) broadcast over actions, zero at the terminal state.
StateActionTable bonus_table_tabular(const Policy& policy, const OccupancyBounds& bounds,
                                     double gamma, std::size_t horizon);

/// B(x,a) = b(x,a) + dilation * max_{P in conf} E_{x'~P} E_{a'~pi}[B(x',a')].
DilatedBonusTable dilated_bonus_optimistic(const ConfidenceSet& conf, const Policy& policy,
                                           const StateActionTable& bonus,
                                           std::optional<double> dilation = std::nullopt);

struct TabularParams {
    double delta = 0.01;
    std::optional<double> eta;   // default min{1/(24H^3), 1/sqrt(|X||A|HT)}
    std::optional<double> gamma; // default 2 eta H
    /// Checks l <= q <= u against the true kernel each episode it is inside the set.
    bool check_occupancy_sandwich = true;
};

struct ResolvedTabularParams {
    double delta;
    double eta;
    double gamma;
};

ResolvedTabularParams resolve(const TabularParams& params, const LayerStructure& layers,
                              std::size_t T);

/// Counters gathered while running; all should be zero under default parameters.
struct TabularDiagnostics {
    std::size_t estimate_guard_violations = 0; // eta * Q̂ > 1/2
    std::size_t bonus_guard_violations = 0;    // eta * B > 1/(2H)
    std::size_t episodes_true_kernel_inside = 0;
    std::size_t sandwich_checks = 0;
    std::size_t sandwich_violations = 0; // l <= q <= u fails by more than 1e-9
    double max_eta_estimate = 0.0;
    double max_eta_bonus = 0.0;
};

/// The tabular learner. The true mdp is used to sample episodes and for
/// diagnostics only.
ExperimentRecord run_tabular(const LayeredMDP& mdp, const LossSchedule& schedule, std::size_t T,
                             const TabularParams& params, std::uint64_t seed,
                             TabularDiagnostics* diagnostics = nullptr);

} // namespace dpo
