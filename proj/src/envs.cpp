#include "dpo/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dpo {

namespace {

template <class E>
E parse_enum(const std::string& name, std::initializer_list<std::pair<const char*, E>> table,
             const char* what) {
    for (const auto& [key, value] : table)
        if (name == key) return value;
    throw InputError(std::string("unknown ") + what + " '" + name + "'");
}

template <class E>
std::string enum_name(E kind, std::initializer_list<std::pair<const char*, E>> table) {
    for (const auto& [key, value] : table)
        if (kind == value) return key;
    return "?";
}

const std::initializer_list<std::pair<const char*, LossKind>> kLossKinds = {
    {"zero", LossKind::zero},           {"constant", LossKind::constant},
    {"iid", LossKind::iid},             {"switching", LossKind::switching},
    {"drifting", LossKind::drifting},   {"custom", LossKind::custom}};

const std::initializer_list<std::pair<const char*, TransitionKind>> kTransitionKinds = {
    {"dirichlet", TransitionKind::dirichlet},
    {"chain", TransitionKind::chain},
    {"two_corridor", TransitionKind::two_corridor},
    {"low_rank", TransitionKind::low_rank}};

const std::initializer_list<std::pair<const char*, FeatureKind>> kFeatureKinds = {
    {"one_hot", FeatureKind::one_hot},
    {"low_rank", FeatureKind::low_rank},
    {"two_corridor", FeatureKind::two_corridor}};

// Streams used by the schedule recipes.
enum : std::uint64_t { kBaseStream = 1, kNoiseStream = 2, kPhaseStream = 3 };

} // namespace

LossKind parse_loss_kind(const std::string& name) { return parse_enum(name, kLossKinds, "loss kind"); }
std::string to_string(LossKind kind) { return enum_name(kind, kLossKinds); }
TransitionKind parse_transition_kind(const std::string& name) {
    return parse_enum(name, kTransitionKinds, "transition kind");
}
FeatureKind parse_feature_kind(const std::string& name) {
    return parse_enum(name, kFeatureKinds, "feature kind");
}
std::string to_string(TransitionKind kind) { return enum_name(kind, kTransitionKinds); }
std::string to_string(FeatureKind kind) { return enum_name(kind, kFeatureKinds); }

// --- loss schedules ---------------------------------------------------------

LossSchedule::LossSchedule(LayerStructure layers, LossScheduleSpec spec, std::size_t T)
    : layers_(std::move(layers)), spec_(spec) {
    if (spec_.kind == LossKind::custom) throw InputError("custom schedules need tables");
    if (spec_.period == 0) spec_.period = std::max<std::size_t>(1, T / 4);
    if (!(spec_.gap >= 0.0 && spec_.gap <= 1.0)) throw InputError("loss gap outside [0,1]");
    if (!(spec_.noise >= 0.0)) throw InputError("negative loss noise");
    if (!(spec_.value >= 0.0 && spec_.value <= 1.0)) throw InputError("constant loss outside [0,1]");
}

LossSchedule LossSchedule::custom(LayerStructure layers, std::vector<StateActionTable> tables) {
    if (tables.empty()) throw InputError("custom schedule without tables");
    LossSchedule s;
    s.layers_ = std::move(layers);
    s.spec_.kind = LossKind::custom;
    for (auto& t : tables) {
        if (t.num_states() != s.layers_.num_states() || t.num_actions() != s.layers_.num_actions())
            throw StructuralError("custom loss table shape mismatch");
        s.tables_.push_back(LossFunction(std::move(t)));
    }
    return s;
}

LossSchedule LossSchedule::linear_in(const FeatureMap& features) const {
    if (spec_.kind == LossKind::custom) throw InputError("custom schedules cannot be made linear");
    if (!(features.layers() == layers_)) throw StructuralError("feature map of another mdp");
    LossSchedule s = *this;
    s.features_ = std::make_shared<const FeatureMap>(features);
    return s;
}

double LossSchedule::recipe(std::size_t t, std::uint64_t row, std::uint64_t col,
                            std::size_t modulus) const {
    const Rng root(spec_.seed);
    switch (spec_.kind) {
    case LossKind::zero:
        return 0.0;
    case LossKind::constant:
        return spec_.value;
    case LossKind::iid: {
        const double mean = root.derive({kBaseStream, row, col}).uniform();
        const double u = root.derive({kNoiseStream, t, row, col}).uniform();
        return std::clamp(mean + spec_.noise * (2.0 * u - 1.0), 0.0, 1.0);
    }
    case LossKind::switching: {
        const double base = (1.0 - spec_.gap) * root.derive({kBaseStream, row, col}).uniform();
        const std::size_t good = (row + (t - 1) / spec_.period) % modulus;
        return base + (col != good ? spec_.gap : 0.0);
    }
    case LossKind::drifting: {
        const double base = (1.0 - spec_.gap) * root.derive({kBaseStream, row, col}).uniform();
        const double phase = 2.0 * std::numbers::pi * root.derive({kPhaseStream, row, col}).uniform();
        const double angle =
            2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(spec_.period);
        return base + spec_.gap * 0.5 * (1.0 + std::sin(angle + phase));
    }
    case LossKind::custom:
        break;
    }
    return 0.0;
}

double LossSchedule::operator()(std::size_t t, StateId x, ActionId a) const {
    if (layers_.is_terminal(x)) return 0.0;
    if (spec_.kind == LossKind::custom) return tables_[(t - 1) % tables_.size()](x, a);
    if (!features_) return recipe(t, x, a, layers_.num_actions());
    const Vector& phi = (*features_)(x, a);
    const std::size_t h = layers_.layer_of(x);
    double v = 0.0;
    for (Eigen::Index i = 0; i < phi.size(); ++i)
        v += phi[i] * recipe(t, h, static_cast<std::uint64_t>(i), static_cast<std::size_t>(phi.size()));
    return std::clamp(v, 0.0, 1.0);
}

LossFunction LossSchedule::at(std::size_t t) const {
    StateActionTable table(layers_.num_states(), layers_.num_actions());
    for (StateId x = 0; x < layers_.num_decision_states(); ++x)
        for (ActionId a = 0; a < layers_.num_actions(); ++a) table(x, a) = (*this)(t, x, a);
    return LossFunction(std::move(table));
}

// --- instances --------------------------------------------------------------

std::vector<double> sample_dirichlet(std::size_t n, double concentration, Rng& rng) {
    std::vector<double> p(n);
    double total = 0.0;
    for (auto& v : p) {
        v = rng.gamma(concentration);
        total += v;
    }
    if (!(total > 0.0)) {
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(n));
        return p;
    }
    for (auto& v : p) v /= total;
    return p;
}

namespace {

Instance two_corridor(const InstanceSpec& spec) {
    if (spec.layer_sizes != std::vector<std::size_t>{1, 2, 1})
        throw InputError("two_corridor needs layer sizes [1,2,1]");
    if (spec.num_actions < 2) throw InputError("two_corridor needs at least two actions");
    const std::size_t A = spec.num_actions;
    LayerStructure layers(spec.layer_sizes, A);
    std::vector<std::vector<double>> rows(layers.num_decision_states() * A);
    for (ActionId a = 0; a < A; ++a) {
        rows[a] = a + 1 == A ? std::vector<double>{0.0, 1.0} : std::vector<double>{1.0, 0.0};
        rows[1 * A + a] = {1.0};
        rows[2 * A + a] = {1.0};
    }
    const Vector e1 = Vector::Unit(2, 0), e2 = Vector::Unit(2, 1);
    std::vector<Vector> phi(layers.num_states() * A, Vector::Zero(2));
    for (ActionId a = 0; a < A; ++a) {
        phi[a] = a + 1 == A ? e2 : e1;
        phi[1 * A + a] = e1;
        phi[2 * A + a] = e2;
    }
    Instance out{LayeredMDP(layers, std::move(rows)), FeatureMap(layers, 2, std::move(phi)), {}};
    out.nu.assign(layers.num_states(), Vector::Zero(2));
    out.nu[1] = e1;
    out.nu[2] = e2;
    out.nu[3] = Vector::Ones(2);
    return out;
}

Instance low_rank(const InstanceSpec& spec, Rng& rng) {
    const std::size_t d = spec.feature_dim;
    if (d == 0) throw InputError("low_rank needs feature_dim >= 1");
    LayerStructure layers(spec.layer_sizes, spec.num_actions);
    const std::size_t A = layers.num_actions();
    const auto D = static_cast<Eigen::Index>(d);

    // mu[h][i] is a distribution over X_{h+1}; nu[x'] collects mu_i(x').
    std::vector<Vector> nu(layers.num_states(), Vector::Zero(D));
    for (std::size_t h = 0; h < layers.horizon(); ++h)
        for (std::size_t i = 0; i < d; ++i) {
            const auto mu = sample_dirichlet(layers.layer_size(h + 1), spec.concentration, rng);
            for (std::size_t j = 0; j < mu.size(); ++j)
                nu[layers.state(h + 1, j)][static_cast<Eigen::Index>(i)] = mu[j];
        }

    std::vector<Vector> phi(layers.num_states() * A, Vector::Zero(D));
    std::vector<std::vector<double>> rows(layers.num_decision_states() * A);
    for (StateId x = 0; x < layers.num_decision_states(); ++x) {
        const std::size_t h = layers.layer_of(x);
        for (ActionId a = 0; a < A; ++a) {
            const auto w = sample_dirichlet(d, spec.concentration, rng);
            Vector& v = phi[x * A + a];
            for (std::size_t i = 0; i < d; ++i) v[static_cast<Eigen::Index>(i)] = w[i];
            auto& row = rows[x * A + a];
            row.resize(layers.layer_size(h + 1));
            for (std::size_t j = 0; j < row.size(); ++j) row[j] = v.dot(nu[layers.state(h + 1, j)]);
        }
    }
    Instance out{LayeredMDP(layers, std::move(rows)), FeatureMap(layers, d, std::move(phi)),
                 std::move(nu)};
    return out;
}

} // namespace

Instance generate_instance(const InstanceSpec& spec) {
    if (!(spec.concentration > 0.0)) throw InputError("concentration must be positive");
    if (spec.features == FeatureKind::low_rank && spec.transitions != TransitionKind::low_rank)
        throw InputError("low_rank features need low_rank transitions");
    if (spec.features == FeatureKind::two_corridor &&
        spec.transitions != TransitionKind::two_corridor)
        throw InputError("two_corridor features need two_corridor transitions");
    Rng rng(spec.seed);

    Instance out;
    if (spec.transitions == TransitionKind::two_corridor) {
        out = two_corridor(spec);
    } else if (spec.transitions == TransitionKind::low_rank) {
        out = low_rank(spec, rng);
    } else {
        LayerStructure layers(spec.layer_sizes, spec.num_actions);
        const std::size_t A = layers.num_actions();
        std::vector<std::vector<double>> rows(layers.num_decision_states() * A);
        for (StateId x = 0; x < layers.num_decision_states(); ++x) {
            const std::size_t n = layers.layer_size(layers.layer_of(x) + 1);
            for (ActionId a = 0; a < A; ++a) {
                if (spec.transitions == TransitionKind::chain) {
                    rows[x * A + a].assign(n, 0.0);
                    rows[x * A + a][(layers.local_index(x) + a) % n] = 1.0;
                } else {
                    rows[x * A + a] = sample_dirichlet(n, spec.concentration, rng);
                }
            }
        }
        out.mdp = LayeredMDP(layers, std::move(rows));
    }
    if (spec.features == FeatureKind::one_hot) {
        out.features = FeatureMap::one_hot(out.mdp.layers());
        out.nu.clear();
    }
    return out;
}

} // namespace dpo
