#pragma once

#include "dpo/features.hpp"
#include "dpo/mdp.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dpo {

enum class LossKind { zero, constant, iid, switching, drifting, custom };

LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind kind);

struct LossScheduleSpec {
    LossKind kind = LossKind::switching;
    /// Switch period for `switching` and cycle length for `drifting`; 0 means T/4.
    std::size_t period = 0;
    /// Loss added to every non-preferred action.
    double gap = 0.5;
    /// Half-width of the per-episode uniform noise for `iid`.
    double noise = 0.25;
    /// Value for `constant`.
    double value = 0.5;
    std::uint64_t seed = 0;
};

/// Oblivious adversary: a pure function of (t, x, a) with values in [0,1].
/// Episodes are numbered from 1.
///
///   iid        mean(x,a) ~ U[0,1], plus U[-noise, noise], clipped
///   switching  base(x,a) ~ U[0, 1-gap] plus gap * 1[a != good_t(x)],
///              good_t(x) = (x + (t-1)/period) mod |A|
///   drifting   base(x,a) ~ U[0, 1-gap] plus gap * (1 + sin(2 pi t/period + phase(x,a)))/2
///
/// In feature-linear mode the same recipe is applied to the coordinates of a
/// per-layer vector g_t(h) in [0,1]^d and l_t(x,a) = phi(x,a)^T g_t(h). This
/// keeps Q functions linear when features are nonnegative and sum to at most 1.
class LossSchedule {
public:
    LossSchedule() = default;
    LossSchedule(LayerStructure layers, LossScheduleSpec spec, std::size_t T);

    /// Cycles through `tables`: l_t = tables[(t-1) mod size].
    static LossSchedule custom(LayerStructure layers, std::vector<StateActionTable> tables);

    /// Feature-linear variant of this schedule.
    LossSchedule linear_in(const FeatureMap& features) const;

    const LayerStructure& layers() const { return layers_; }
    const LossScheduleSpec& spec() const { return spec_; }

    double operator()(std::size_t t, StateId x, ActionId a) const;
    LossFunction at(std::size_t t) const;

private:
    double recipe(std::size_t t, std::uint64_t row, std::uint64_t col, std::size_t modulus) const;

    LayerStructure layers_;
    LossScheduleSpec spec_;
    std::vector<StateActionTable> tables_;
    std::shared_ptr<const FeatureMap> features_;
};

enum class TransitionKind { dirichlet, chain, two_corridor, low_rank };
enum class FeatureKind { one_hot, low_rank, two_corridor };

struct InstanceSpec {
    std::vector<std::size_t> layer_sizes{1, 2, 1};
    std::size_t num_actions = 2;
    TransitionKind transitions = TransitionKind::dirichlet;
    /// Dirichlet concentration for random rows (and low-rank anchors).
    double concentration = 1.0;
    FeatureKind features = FeatureKind::one_hot;
    /// Feature dimension for low-rank instances.
    std::size_t feature_dim = 2;
    std::uint64_t seed = 0;
};

TransitionKind parse_transition_kind(const std::string& name);
FeatureKind parse_feature_kind(const std::string& name);
std::string to_string(TransitionKind kind);
std::string to_string(FeatureKind kind);

struct Instance {
    LayeredMDP mdp;
    FeatureMap features;
    /// For linear-MDP instances: nu[x'] with P(x'|x,a) = phi(x,a)^T nu[x'] for
    /// every x in the layer before x'. Empty otherwise.
    std::vector<Vector> nu;
};

/// Deterministic per seed.
///
///   dirichlet     rows ~ Dirichlet(concentration)
///   chain         (x,a) moves to local index (local(x) + a) mod |X_{h+1}|
///   two_corridor  layers {1,2,1}; only the last action at x_0 reaches the
///                 second layer-1 state, which carries the only mass on e_2
///   low_rank      P(.|x,a) = sum_i phi_i(x,a) mu_i, phi on the simplex of R^d
///
/// Throws InputError on infeasible specs.
Instance generate_instance(const InstanceSpec& spec);

/// Draw from Dirichlet(concentration * 1_n).
std::vector<double> sample_dirichlet(std::size_t n, double concentration, Rng& rng);

} // namespace dpo
