#include "dpo/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace dpo {

namespace {

constexpr double kRenormalizeTolerance = 1e-9;

// Renormalizes a probability row in place; throws if it is too far off.
void normalize_row(std::span<double> row, const std::string& what) {
    double total = 0.0;
    for (double p : row) {
        if (!std::isfinite(p) || p < 0.0)
            throw InputError(what + ": negative or non-finite probability");
        total += p;
    }
    if (std::abs(total - 1.0) > kRenormalizeTolerance)
        throw InputError(what + ": row sums to " + std::to_string(total));
    for (double& p : row) p /= total;
}

void check_shape(const LayeredMDP& mdp, std::size_t states, std::size_t actions,
                 const char* what) {
    if (states != mdp.num_states() || actions != mdp.num_actions())
        throw StructuralError(std::string(what) + " shape (" + std::to_string(states) + "x" +
                              std::to_string(actions) + ") does not match the mdp (" +
                              std::to_string(mdp.num_states()) + "x" +
                              std::to_string(mdp.num_actions()) + ")");
}

} // namespace

// --- LayerStructure ---------------------------------------------------------

LayerStructure::LayerStructure(std::vector<std::size_t> layer_sizes, std::size_t num_actions)
    : sizes_(std::move(layer_sizes)), num_actions_(num_actions) {
    if (sizes_.size() < 2) throw StructuralError("need at least one decision layer");
    if (sizes_.front() != 1 || sizes_.back() != 1)
        throw StructuralError("first and last layers must be singletons");
    if (num_actions_ == 0) throw StructuralError("empty action set");
    offsets_.resize(sizes_.size());
    std::size_t next = 0;
    for (std::size_t h = 0; h < sizes_.size(); ++h) {
        if (sizes_[h] == 0) throw StructuralError("empty layer " + std::to_string(h));
        offsets_[h] = next;
        next += sizes_[h];
        layer_of_.insert(layer_of_.end(), sizes_[h], h);
    }
}

// --- tables -----------------------------------------------------------------

StateActionTable& StateActionTable::operator+=(const StateActionTable& other) {
    if (other.states_ != states_ || other.actions_ != actions_)
        throw StructuralError("adding tables of different shapes");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

StateActionTable& StateActionTable::operator*=(double scale) {
    for (double& v : values_) v *= scale;
    return *this;
}

LossFunction::LossFunction(StateActionTable table) : StateActionTable(std::move(table)) {
    for (double v : values())
        if (!(v >= 0.0 && v <= 1.0)) throw InputError("loss value outside [0,1]");
}

Policy::Policy(StateActionTable rows) : rows_(std::move(rows)) {
    for (StateId x = 0; x < rows_.num_states(); ++x)
        normalize_row(rows_.row(x), "policy row " + std::to_string(x));
}

Policy Policy::uniform(const LayerStructure& layers) {
    return Policy(StateActionTable(layers.num_states(), layers.num_actions(),
                                   1.0 / static_cast<double>(layers.num_actions())));
}

Policy Policy::deterministic(const LayerStructure& layers, const std::vector<ActionId>& actions) {
    StateActionTable rows(layers.num_states(), layers.num_actions());
    for (StateId x = 0; x < layers.num_states(); ++x) {
        if (layers.is_terminal(x)) {
            rows(x, 0) = 1.0;
            continue;
        }
        if (actions.at(x) >= layers.num_actions()) throw InputError("action out of range");
        rows(x, actions[x]) = 1.0;
    }
    return Policy(std::move(rows));
}

MixturePolicy MixturePolicy::uniform(std::vector<Policy> components) {
    MixturePolicy mix;
    const double w = 1.0 / static_cast<double>(components.size());
    mix.weights.assign(components.size(), w);
    mix.components = std::move(components);
    return mix;
}

// --- LayeredMDP -------------------------------------------------------------

LayeredMDP::LayeredMDP(LayerStructure layers, std::vector<std::vector<double>> rows)
    : layers_(std::move(layers)), rows_(std::move(rows)) {
    const std::size_t A = layers_.num_actions();
    const std::size_t expected = layers_.num_decision_states() * A;
    if (rows_.size() < expected)
        throw StructuralError("expected " + std::to_string(expected) + " transition rows, got " +
                              std::to_string(rows_.size()));
    rows_.resize(expected);
    for (StateId x = 0; x < layers_.num_decision_states(); ++x) {
        const std::size_t width = layers_.layer_size(layers_.layer_of(x) + 1);
        for (ActionId a = 0; a < A; ++a) {
            auto& row = rows_[x * A + a];
            if (row.size() != width)
                throw StructuralError("transition row (" + std::to_string(x) + "," +
                                      std::to_string(a) + ") has " + std::to_string(row.size()) +
                                      " entries, next layer has " + std::to_string(width));
            normalize_row(row, "transition row (" + std::to_string(x) + "," + std::to_string(a) +
                                   ")");
        }
    }
}

double LayeredMDP::transition(StateId x, ActionId a, StateId next) const {
    const std::size_t h = layers_.layer_of(x);
    if (layers_.layer_of(next) != h + 1) return 0.0;
    return next_distribution(x, a)[layers_.local_index(next)];
}

StateId LayeredMDP::sample_next(StateId x, ActionId a, Rng& rng) const {
    const std::size_t h = layers_.layer_of(x);
    return layers_.state(h + 1, rng.categorical(next_distribution(x, a)));
}

// --- trajectories -----------------------------------------------------------

double Trajectory::total_loss() const { return loss_to_go(0); }

double Trajectory::loss_to_go(std::size_t h) const {
    double total = 0.0;
    for (std::size_t i = h; i < steps.size(); ++i) total += steps[i].loss;
    return total;
}

double OccupancyMeasure::state(StateId x) const {
    double total = 0.0;
    for (double v : q.row(x)) total += v;
    return total;
}

// --- evaluation -------------------------------------------------------------

Evaluation evaluate(const LayeredMDP& mdp, const Policy& policy, const StateActionTable& loss) {
    check_shape(mdp, policy.num_states(), policy.num_actions(), "policy");
    check_shape(mdp, loss.num_states(), loss.num_actions(), "loss");
    const auto& L = mdp.layers();
    const std::size_t H = L.horizon();
    Evaluation out{std::vector<double>(L.num_states(), 0.0),
                   StateActionTable(L.num_states(), L.num_actions())};
    for (std::size_t h = H; h-- > 0;) {
        const StateId next0 = L.first_state(h + 1);
        for (std::size_t i = 0; i < L.layer_size(h); ++i) {
            const StateId x = L.state(h, i);
            double v = 0.0;
            for (ActionId a = 0; a < L.num_actions(); ++a) {
                const auto p = mdp.next_distribution(x, a);
                double cont = 0.0;
                for (std::size_t j = 0; j < p.size(); ++j) cont += p[j] * out.V[next0 + j];
                out.Q(x, a) = loss(x, a) + cont;
                v += policy(x, a) * out.Q(x, a);
            }
            out.V[x] = v;
        }
    }
    return out;
}

double initial_value(const LayeredMDP& mdp, const Policy& policy, const StateActionTable& loss) {
    return evaluate(mdp, policy, loss).V[mdp.layers().initial_state()];
}

double initial_value(const LayeredMDP& mdp, const MixturePolicy& policy,
                     const StateActionTable& loss) {
    double v = 0.0;
    for (std::size_t i = 0; i < policy.components.size(); ++i)
        v += policy.weights[i] * initial_value(mdp, policy.components[i], loss);
    return v;
}

OccupancyMeasure occupancy(const LayeredMDP& mdp, const Policy& policy) {
    check_shape(mdp, policy.num_states(), policy.num_actions(), "policy");
    const auto& L = mdp.layers();
    std::vector<double> reach(L.num_states(), 0.0);
    reach[L.initial_state()] = 1.0;
    OccupancyMeasure out{StateActionTable(L.num_states(), L.num_actions())};
    for (std::size_t h = 0; h < L.horizon(); ++h) {
        const StateId next0 = L.first_state(h + 1);
        for (std::size_t i = 0; i < L.layer_size(h); ++i) {
            const StateId x = L.state(h, i);
            for (ActionId a = 0; a < L.num_actions(); ++a) {
                const double qa = reach[x] * policy(x, a);
                out.q(x, a) = qa;
                const auto p = mdp.next_distribution(x, a);
                for (std::size_t j = 0; j < p.size(); ++j) reach[next0 + j] += qa * p[j];
            }
        }
    }
    return out;
}

OccupancyMeasure occupancy(const LayeredMDP& mdp, const MixturePolicy& policy) {
    OccupancyMeasure out{StateActionTable(mdp.num_states(), mdp.num_actions())};
    for (std::size_t i = 0; i < policy.components.size(); ++i) {
        auto part = occupancy(mdp, policy.components[i]).q;
        part *= policy.weights[i];
        out.q += part;
    }
    return out;
}

// --- sampling ---------------------------------------------------------------

Trajectory sample_episode(const LayeredMDP& mdp, const ActionChooser& choose,
                          const StateActionTable& loss, Rng& rng) {
    const auto& L = mdp.layers();
    Trajectory traj;
    traj.steps.reserve(L.horizon());
    StateId x = L.initial_state();
    for (std::size_t h = 0; h < L.horizon(); ++h) {
        const ActionId a = choose(h, x, rng);
        traj.steps.push_back({x, a, loss(x, a)});
        x = mdp.sample_next(x, a, rng);
    }
    return traj;
}

Trajectory sample_episode(const LayeredMDP& mdp, const Policy& policy,
                          const StateActionTable& loss, std::uint64_t seed) {
    check_shape(mdp, policy.num_states(), policy.num_actions(), "policy");
    Rng rng(seed);
    return sample_episode(
        mdp, [&](std::size_t, StateId x, Rng& r) { return r.categorical(policy.row(x)); }, loss,
        rng);
}

Trajectory sample_episode(const LayeredMDP& mdp, const MixturePolicy& policy,
                          const StateActionTable& loss, std::uint64_t seed) {
    Rng rng(seed);
    const Policy& pi = policy.components[rng.categorical(policy.weights)];
    return sample_episode(
        mdp, [&](std::size_t, StateId x, Rng& r) { return r.categorical(pi.row(x)); }, loss, rng);
}

// --- optimization primitives -----------------------------------------------

std::pair<Policy, double> optimal_fixed_policy(const LayeredMDP& mdp,
                                               const StateActionTable& summed_loss) {
    check_shape(mdp, summed_loss.num_states(), summed_loss.num_actions(), "summed loss");
    const auto& L = mdp.layers();
    std::vector<double> V(L.num_states(), 0.0);
    std::vector<ActionId> best(L.num_states(), 0);
    for (std::size_t h = L.horizon(); h-- > 0;) {
        const StateId next0 = L.first_state(h + 1);
        for (std::size_t i = 0; i < L.layer_size(h); ++i) {
            const StateId x = L.state(h, i);
            double best_value = std::numeric_limits<double>::infinity();
            for (ActionId a = 0; a < L.num_actions(); ++a) {
                const auto p = mdp.next_distribution(x, a);
                double q = summed_loss(x, a);
                for (std::size_t j = 0; j < p.size(); ++j) q += p[j] * V[next0 + j];
                if (q < best_value) {
                    best_value = q;
                    best[x] = a;
                }
            }
            V[x] = best_value;
        }
    }
    return {Policy::deterministic(L, best), V[L.initial_state()]};
}

void exp_weights_row(std::span<const double> scores, double eta, std::span<double> out) {
    double lo = std::numeric_limits<double>::infinity();
    for (double s : scores) {
        if (!std::isfinite(s)) throw InputError("non-finite cumulative score");
        lo = std::min(lo, s);
    }
    // exp(-eta * s) is largest at the smallest score; shift by it
    double total = 0.0;
    for (std::size_t a = 0; a < scores.size(); ++a) {
        out[a] = std::exp(-eta * (scores[a] - lo));
        total += out[a];
    }
    for (double& p : out) p /= total;
}

Policy exp_weights_policy(const StateActionTable& cumulative_score, double eta) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw InputError("eta must be positive");
    StateActionTable rows(cumulative_score.num_states(), cumulative_score.num_actions());
    for (StateId x = 0; x < rows.num_states(); ++x)
        exp_weights_row(cumulative_score.row(x), eta, rows.row(x));
    return Policy(std::move(rows));
}

Policy compose_by_layer(const LayerStructure& layers, const Policy& head, const Policy& tail,
                        std::size_t switch_layer) {
    StateActionTable rows(layers.num_states(), layers.num_actions());
    for (StateId x = 0; x < layers.num_states(); ++x) {
        const Policy& src = layers.layer_of(x) < switch_layer ? head : tail;
        for (ActionId a = 0; a < layers.num_actions(); ++a) rows(x, a) = src(x, a);
    }
    return Policy(std::move(rows));
}

} // namespace dpo
