#pragma once

#include "dpo/errors.hpp"
#include "dpo/rng.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace dpo {

using StateId = std::size_t;
using ActionId = std::size_t;

/// Layer partition X_0..X_H of a finite episodic MDP.
///
/// States are dense ids, contiguous per layer: layer h owns
/// [first_state(h), first_state(h) + layer_size(h)). X_0 = {x_0} and
/// X_H = {x_H} are singletons.
class LayerStructure {
public:
    LayerStructure() = default;
    LayerStructure(std::vector<std::size_t> layer_sizes, std::size_t num_actions);

    /// H, the number of decision layers.
    std::size_t horizon() const { return sizes_.size() - 1; }
    std::size_t num_states() const { return layer_of_.size(); }
    std::size_t num_actions() const { return num_actions_; }
    std::size_t layer_size(std::size_t h) const { return sizes_[h]; }
    StateId first_state(std::size_t h) const { return offsets_[h]; }
    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }

    std::size_t layer_of(StateId x) const { return layer_of_[x]; }
    std::size_t local_index(StateId x) const { return x - offsets_[layer_of_[x]]; }
    StateId state(std::size_t h, std::size_t local) const { return offsets_[h] + local; }

    StateId initial_state() const { return 0; }
    StateId terminal_state() const { return num_states() - 1; }
    bool is_terminal(StateId x) const { return layer_of_[x] == horizon(); }

    /// Number of non-terminal states.
    std::size_t num_decision_states() const { return num_states() - 1; }

    bool operator==(const LayerStructure& other) const {
        return sizes_ == other.sizes_ && num_actions_ == other.num_actions_;
    }

private:
    std::vector<std::size_t> sizes_;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> layer_of_;
    std::size_t num_actions_ = 0;
};

/// Dense table of reals indexed by (state, action).
class StateActionTable {
public:
    StateActionTable() = default;
    StateActionTable(std::size_t num_states, std::size_t num_actions, double fill = 0.0)
        : states_(num_states), actions_(num_actions), values_(num_states * num_actions, fill) {}

    std::size_t num_states() const { return states_; }
    std::size_t num_actions() const { return actions_; }

    double& operator()(StateId x, ActionId a) { return values_[x * actions_ + a]; }
    double operator()(StateId x, ActionId a) const { return values_[x * actions_ + a]; }

    std::span<double> row(StateId x) { return {values_.data() + x * actions_, actions_}; }
    std::span<const double> row(StateId x) const {
        return {values_.data() + x * actions_, actions_};
    }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    StateActionTable& operator+=(const StateActionTable& other);
    StateActionTable& operator*=(double scale);

private:
    std::size_t states_ = 0;
    std::size_t actions_ = 0;
    std::vector<double> values_;
};

/// Per-episode loss l_t(x,a); every entry lies in [0,1].
class LossFunction : public StateActionTable {
public:
    LossFunction() = default;
    explicit LossFunction(StateActionTable table);
};

/// pi(a|x), one probability row per state. The terminal row is unused.
class Policy {
public:
    Policy() = default;
    /// Rows off by at most 1e-9 from summing to one are renormalized.
    explicit Policy(StateActionTable rows);

    static Policy uniform(const LayerStructure& layers);
    /// One-hot rows; `actions[x]` is ignored for the terminal state.
    static Policy deterministic(const LayerStructure& layers, const std::vector<ActionId>& actions);

    std::size_t num_states() const { return rows_.num_states(); }
    std::size_t num_actions() const { return rows_.num_actions(); }
    double operator()(StateId x, ActionId a) const { return rows_(x, a); }
    std::span<const double> row(StateId x) const { return rows_.row(x); }
    const StateActionTable& table() const { return rows_; }

private:
    StateActionTable rows_;
};

/// Uniform-weighted (or arbitrarily weighted) mixture of policies. A mixture
/// is executed by drawing one component per episode.
struct MixturePolicy {
    std::vector<Policy> components;
    std::vector<double> weights;

    static MixturePolicy uniform(std::vector<Policy> components);
};

/// Layered episodic MDP with known structure and transition kernel P.
class LayeredMDP {
public:
    LayeredMDP() = default;
    /// `rows[x * A + a]` is P(.|x,a) over the local indices of layer h(x)+1,
    /// given for every non-terminal x.
    LayeredMDP(LayerStructure layers, std::vector<std::vector<double>> rows);

    const LayerStructure& layers() const { return layers_; }
    std::size_t horizon() const { return layers_.horizon(); }
    std::size_t num_states() const { return layers_.num_states(); }
    std::size_t num_actions() const { return layers_.num_actions(); }

    /// P(.|x,a) over the local indices of the next layer.
    std::span<const double> next_distribution(StateId x, ActionId a) const {
        return rows_[x * layers_.num_actions() + a];
    }
    double transition(StateId x, ActionId a, StateId next) const;

    /// Draws x' ~ P(.|x,a).
    StateId sample_next(StateId x, ActionId a, Rng& rng) const;

private:
    LayerStructure layers_;
    std::vector<std::vector<double>> rows_;
};

struct TrajectoryStep {
    StateId state;
    ActionId action;
    double loss;
};

/// One episode under bandit feedback: only visited losses are recorded.
struct Trajectory {
    std::vector<TrajectoryStep> steps; // steps[h] for h = 0..H-1

    double total_loss() const;
    /// L_h = sum_{i >= h} loss_i.
    double loss_to_go(std::size_t h) const;
};

/// q^pi(x,a).
struct OccupancyMeasure {
    StateActionTable q;

    double operator()(StateId x, ActionId a) const { return q(x, a); }
    /// q^pi(x) = sum_a q(x,a).
    double state(StateId x) const;
};

struct Evaluation {
    std::vector<double> V;  // V(x), V(x_H) = 0
    StateActionTable Q;     // Q(x,a)
};

/// Backward Bellman evaluation of `policy` against an arbitrary table (loss,
/// bonus or summed loss). Throws StructuralError on shape mismatch.
Evaluation evaluate(const LayeredMDP& mdp, const Policy& policy, const StateActionTable& loss);

/// V^pi(x_0; loss) only.
double initial_value(const LayeredMDP& mdp, const Policy& policy, const StateActionTable& loss);

/// Mixture value: weighted sum of component values at x_0.
double initial_value(const LayeredMDP& mdp, const MixturePolicy& policy,
                     const StateActionTable& loss);

/// Forward dynamic program for q^pi.
OccupancyMeasure occupancy(const LayeredMDP& mdp, const Policy& policy);

/// Weighted sum of component occupancies.
OccupancyMeasure occupancy(const LayeredMDP& mdp, const MixturePolicy& policy);

/// Chooses an action given (layer, state); used to run non-tabular or
/// lazily-materialized policies.
using ActionChooser = std::function<ActionId(std::size_t layer, StateId state, Rng& rng)>;

Trajectory sample_episode(const LayeredMDP& mdp, const ActionChooser& choose,
                          const StateActionTable& loss, Rng& rng);

Trajectory sample_episode(const LayeredMDP& mdp, const Policy& policy,
                          const StateActionTable& loss, std::uint64_t seed);

/// Draws the mixture component first, then runs it.
Trajectory sample_episode(const LayeredMDP& mdp, const MixturePolicy& policy,
                          const StateActionTable& loss, std::uint64_t seed);

/// Backward-induction minimizer of V^pi(x_0; summed_loss). Ties go to the
/// lowest action index.
std::pair<Policy, double> optimal_fixed_policy(const LayeredMDP& mdp,
                                               const StateActionTable& summed_loss);

/// pi(a|x) proportional to exp(-eta * score(x,a)), max-shifted per state.
/// Throws InputError on non-finite scores or eta <= 0.
Policy exp_weights_policy(const StateActionTable& cumulative_score, double eta);

/// Softmax of one row, in place of `out`.
void exp_weights_row(std::span<const double> scores, double eta, std::span<double> out);

/// Policy that follows `head` on layers < switch_layer and `tail` on the rest.
Policy compose_by_layer(const LayerStructure& layers, const Policy& head, const Policy& tail,
                        std::size_t switch_layer);

} // namespace dpo
