#include "dpo/tabular.hpp"

#include "dpo/envs.hpp"
#include "dpo/kernels.hpp"
#include "dpo/record.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dpo {

// --- counters ---------------------------------------------------------------

EpochCounters::EpochCounters(const LayerStructure& layers)
    : layers_(layers),
      visits_(layers.num_decision_states() * layers.num_actions(), 0),
      previous_(visits_.size(), 0),
      transitions_(visits_.size()) {
    const std::size_t A = layers.num_actions();
    for (StateId x = 0; x < layers.num_decision_states(); ++x)
        for (ActionId a = 0; a < A; ++a)
            transitions_[x * A + a].assign(layers.layer_size(layers.layer_of(x) + 1), 0);
}

bool EpochCounters::record(const Trajectory& trajectory) {
    const std::size_t A = layers_.num_actions();
    const std::size_t H = layers_.horizon();
    if (trajectory.steps.size() != H) throw StructuralError("trajectory length differs from H");
    bool bump = false;
    for (std::size_t h = 0; h < H; ++h) {
        const auto& step = trajectory.steps[h];
        const StateId next = h + 1 < H ? trajectory.steps[h + 1].state : layers_.terminal_state();
        const std::size_t i = step.state * A + step.action;
        ++visits_[i];
        ++transitions_[i][layers_.local_index(next)];
    }
    // the doubling test runs after the whole episode has been counted
    for (const auto& step : trajectory.steps) {
        const std::size_t i = step.state * A + step.action;
        if (visits_[i] >= std::max<std::uint64_t>(1, 2 * previous_[i])) bump = true;
    }
    if (bump) {
        ++epoch_;
        previous_ = visits_;
    }
    return bump;
}

// --- confidence sets --------------------------------------------------------

ConfidenceSet::ConfidenceSet(LayerStructure layers, std::vector<std::vector<double>> center,
                             std::vector<std::vector<double>> width, std::size_t epoch)
    : layers_(std::move(layers)), center_(std::move(center)), width_(std::move(width)),
      epoch_(epoch) {
    const std::size_t A = layers_.num_actions();
    const std::size_t rows = layers_.num_decision_states() * A;
    if (center_.size() != rows || width_.size() != rows)
        throw StructuralError("confidence set row count mismatch");
    for (StateId x = 0; x < layers_.num_decision_states(); ++x) {
        const std::size_t n = layers_.layer_size(layers_.layer_of(x) + 1);
        for (ActionId a = 0; a < A; ++a) {
            if (center_[x * A + a].size() != n || width_[x * A + a].size() != n)
                throw StructuralError("confidence row width mismatch");
            for (double w : width_[x * A + a])
                if (!(w >= 0.0)) throw InputError("negative confidence width");
        }
    }
}

ConfidenceSet ConfidenceSet::unconstrained(const LayerStructure& layers) {
    const std::size_t A = layers.num_actions();
    std::vector<std::vector<double>> center(layers.num_decision_states() * A), width(center.size());
    for (StateId x = 0; x < layers.num_decision_states(); ++x) {
        const std::size_t n = layers.layer_size(layers.layer_of(x) + 1);
        for (ActionId a = 0; a < A; ++a) {
            center[x * A + a].assign(n, 1.0 / static_cast<double>(n));
            width[x * A + a].assign(n, 1.0);
        }
    }
    return ConfidenceSet(layers, std::move(center), std::move(width), 1);
}

ConfidenceSet ConfidenceSet::exact(const LayeredMDP& mdp) {
    const auto& L = mdp.layers();
    const std::size_t A = L.num_actions();
    std::vector<std::vector<double>> center(L.num_decision_states() * A), width(center.size());
    for (StateId x = 0; x < L.num_decision_states(); ++x)
        for (ActionId a = 0; a < A; ++a) {
            const auto p = mdp.next_distribution(x, a);
            center[x * A + a].assign(p.begin(), p.end());
            width[x * A + a].assign(p.size(), 0.0);
        }
    return ConfidenceSet(L, std::move(center), std::move(width), 1);
}

LayeredMDP ConfidenceSet::center_mdp() const { return LayeredMDP(layers_, center_); }

bool ConfidenceSet::contains(const LayeredMDP& mdp, double tolerance) const {
    if (!(mdp.layers() == layers_)) throw StructuralError("confidence set of another structure");
    const std::size_t A = layers_.num_actions();
    for (StateId x = 0; x < layers_.num_decision_states(); ++x)
        for (ActionId a = 0; a < A; ++a) {
            const auto p = mdp.next_distribution(x, a);
            const auto& c = center_[x * A + a];
            const auto& w = width_[x * A + a];
            for (std::size_t j = 0; j < p.size(); ++j)
                if (std::abs(p[j] - c[j]) > w[j] + tolerance) return false;
        }
    return true;
}

double confidence_log_term(std::size_t T, std::size_t num_states, std::size_t num_actions,
                           double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0,1)");
    return std::log(static_cast<double>(T) * static_cast<double>(num_states) *
                    static_cast<double>(num_actions) / delta);
}

double confidence_width(double p, std::uint64_t n, double log_term) {
    const double m = static_cast<double>(std::max<std::uint64_t>(1, n));
    const double w = 4.0 * std::sqrt(p * log_term / m) + 28.0 * log_term / (3.0 * m);
    return std::clamp(w, 0.0, 1.0);
}

ConfidenceSet confidence_widths(const EpochCounters& counters, std::size_t T, double delta) {
    const auto& L = counters.layers();
    const std::size_t A = L.num_actions();
    const double log_term = confidence_log_term(T, L.num_states(), A, delta);
    std::vector<std::vector<double>> center(L.num_decision_states() * A), width(center.size());
    for (StateId x = 0; x < L.num_decision_states(); ++x)
        for (ActionId a = 0; a < A; ++a) {
            const auto counts = counters.transitions(x, a);
            const std::uint64_t n = counters.visits(x, a);
            auto& c = center[x * A + a];
            auto& w = width[x * A + a];
            if (n == 0) {
                c.assign(counts.size(), 1.0 / static_cast<double>(counts.size()));
                w.assign(counts.size(), 1.0);
                continue;
            }
            c.resize(counts.size());
            w.resize(counts.size());
            for (std::size_t j = 0; j < counts.size(); ++j) {
                c[j] = static_cast<double>(counts[j]) / static_cast<double>(n);
                w[j] = confidence_width(c[j], n, log_term);
            }
        }
    return ConfidenceSet(L, std::move(center), std::move(width), counters.epoch());
}

// --- greedy -----------------------------------------------------------------

double greedy_redistribute(std::span<const double> f, std::span<const double> center,
                           std::span<const double> width, Optimize objective) {
    const std::size_t n = f.size();
    if (center.size() != n || width.size() != n) throw StructuralError("greedy input sizes differ");
    // small fixed buffers cover every realistic layer; fall back to the heap otherwise
    constexpr std::size_t kInline = 16;
    std::size_t order_buf[kInline];
    double p_buf[kInline], eps_buf[kInline];
    std::vector<std::size_t> order_vec;
    std::vector<double> p_vec, eps_vec;
    std::size_t* order = order_buf;
    double* p = p_buf;
    double* eps = eps_buf;
    if (n > kInline) {
        order_vec.resize(n);
        p_vec.resize(n);
        eps_vec.resize(n);
        order = order_vec.data();
        p = p_vec.data();
        eps = eps_vec.data();
    }
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
        p[i] = center[i];
        eps[i] = width[i];
    }
    if (objective == Optimize::max)
        std::stable_sort(order, order + n, [&](std::size_t i, std::size_t j) { return f[i] < f[j]; });
    else
        std::stable_sort(order, order + n, [&](std::size_t i, std::size_t j) { return f[i] > f[j]; });

    std::size_t lo = 0, hi = n == 0 ? 0 : n - 1;
    while (lo < hi) {
        const std::size_t xm = order[lo], xp = order[hi];
        const double dm = std::min(p[xm], eps[xm]);
        const double dp = std::min(1.0 - p[xp], eps[xp]);
        const double move = std::min(dm, dp);
        p[xm] -= move;
        p[xp] += move;
        if (dm <= dp) {
            eps[xp] -= dm;
            ++lo;
        } else {
            eps[xm] -= dp;
            --hi;
        }
    }
    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i) value += p[i] * f[i];
    return value;
}

// --- occupancy bounds -------------------------------------------------------

double reach_bound(const Policy& policy, const ConfidenceSet& conf, StateId target,
                   Optimize objective) {
    const auto& L = conf.layers();
    const std::size_t A = L.num_actions();
    const std::size_t hx = L.layer_of(target);
    std::vector<double> f(L.layer_size(hx), 0.0), g;
    f[L.local_index(target)] = 1.0;
    for (std::size_t h = hx; h-- > 0;) {
        g.assign(L.layer_size(h), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const StateId x = L.state(h, i);
            double v = 0.0;
            for (ActionId a = 0; a < A; ++a) {
                const double pa = policy(x, a);
                if (pa == 0.0) continue;
                v += pa * greedy_redistribute(f, conf.center(x, a), conf.width(x, a), objective);
            }
            g[i] = v;
        }
        f.swap(g);
    }
    return f[0];
}

double comp_uob(const Policy& policy, const ConfidenceSet& conf, StateId x, ActionId a) {
    return policy(x, a) * reach_bound(policy, conf, x, Optimize::max);
}

double comp_lob(const Policy& policy, const ConfidenceSet& conf, StateId x, ActionId a) {
    return policy(x, a) * reach_bound(policy, conf, x, Optimize::min);
}

OccupancyBounds occupancy_bounds(const Policy& policy, const ConfidenceSet& conf) {
    return occupancy_bounds_parallel(policy, conf);
}

// --- estimators and bonuses -------------------------------------------------

StateActionTable q_estimate(const Trajectory& trajectory, const StateActionTable& upper,
                            double gamma) {
    StateActionTable q(upper.num_states(), upper.num_actions());
    for (std::size_t h = 0; h < trajectory.steps.size(); ++h) {
        const auto& s = trajectory.steps[h];
        const double denom = upper(s.state, s.action) + gamma;
        if (!(denom > 0.0)) throw InputError("zero estimator denominator (u + gamma)");
        q(s.state, s.action) = trajectory.loss_to_go(h) / denom;
    }
    return q;
}

double bonus_b_tabular(StateId x, const Policy& policy, const OccupancyBounds& bounds,
                       double gamma, std::size_t horizon) {
    const double H = static_cast<double>(horizon);
    double b = 0.0;
    for (ActionId a = 0; a < policy.num_actions(); ++a) {
        const double pa = policy(x, a);
        if (pa == 0.0) continue;
        const double u = bounds.upper(x, a), l = bounds.lower(x, a);
        const double denom = u + gamma;
        if (!(denom > 0.0)) throw InputError("zero bonus denominator (u + gamma)");
        b += pa * (3.0 * gamma * H + H * (u - l)) / denom;
    }
    return b;
}

StateActionTable bonus_table_tabular(const Policy& policy, const OccupancyBounds& bounds,
                                     double gamma, std::size_t horizon) {
    StateActionTable b(bounds.upper.num_states(), bounds.upper.num_actions());
    for (StateId x = 0; x + 1 < b.num_states(); ++x) {
        const double v = bonus_b_tabular(x, policy, bounds, gamma, horizon);
        for (ActionId a = 0; a < b.num_actions(); ++a) b(x, a) = v;
    }
    return b;
}

DilatedBonusTable dilated_bonus_optimistic(const ConfidenceSet& conf, const Policy& policy,
                                           const StateActionTable& bonus,
                                           std::optional<double> dilation) {
    const auto& L = conf.layers();
    for (double v : bonus.values())
        if (!(v >= 0.0)) throw InputError("bonus must be nonnegative");
    DilatedBonusTable out{StateActionTable(L.num_states(), L.num_actions()),
                          dilation.value_or(default_dilation(L.horizon()))};
    std::vector<double> f(1, 0.0), g; // f over the next layer; x_H carries 0
    for (std::size_t h = L.horizon(); h-- > 0;) {
        g.assign(L.layer_size(h), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const StateId x = L.state(h, i);
            for (ActionId a = 0; a < L.num_actions(); ++a) {
                const double cont =
                    greedy_redistribute(f, conf.center(x, a), conf.width(x, a), Optimize::max);
                out.B(x, a) = bonus(x, a) + out.dilation * cont;
            }
            g[i] = policy_average(policy, out.B, x);
        }
        f.swap(g);
    }
    return out;
}

// --- learner ----------------------------------------------------------------

ResolvedTabularParams resolve(const TabularParams& params, const LayerStructure& layers,
                              std::size_t T) {
    if (T == 0) throw InputError("T must be positive");
    const double H = static_cast<double>(layers.horizon());
    const double XA = static_cast<double>(layers.num_states() * layers.num_actions());
    ResolvedTabularParams r{};
    r.delta = params.delta;
    if (!(r.delta > 0.0 && r.delta < 1.0)) throw InputError("delta must lie in (0,1)");
    r.eta = params.eta.value_or(
        std::min(1.0 / (24.0 * H * H * H), 1.0 / std::sqrt(XA * H * static_cast<double>(T))));
    r.gamma = params.gamma.value_or(2.0 * r.eta * H);
    if (!(r.eta > 0.0) || !(r.gamma > 0.0)) throw InputError("eta and gamma must be positive");
    return r;
}

ExperimentRecord run_tabular(const LayeredMDP& mdp, const LossSchedule& schedule, std::size_t T,
                             const TabularParams& params, std::uint64_t seed,
                             TabularDiagnostics* diagnostics) {
    const auto& L = mdp.layers();
    if (!(schedule.layers() == L)) throw StructuralError("loss schedule of another structure");
    const auto p = resolve(params, L, T);
    const std::size_t H = L.horizon();
    const Rng root(seed);

    ExperimentRecord record;
    record.algorithm = "tabular";
    record.seed = seed;
    record.set("T", static_cast<double>(T));
    record.set("eta", p.eta);
    record.set("gamma", p.gamma);
    record.set("delta", p.delta);
    record.extra_columns = {"u_minus_l_max", "true_kernel_inside"};

    TabularDiagnostics diag;
    EpochCounters counters(L);
    ConfidenceSet conf = ConfidenceSet::unconstrained(L);
    StateActionTable score(L.num_states(), L.num_actions());

    for (std::size_t t = 1; t <= T; ++t) {
        const Policy policy = exp_weights_policy(score, p.eta);
        const LossFunction loss = schedule.at(t);
        Rng episode_rng = root.derive({t});
        const Trajectory traj = sample_episode(
            mdp, [&](std::size_t, StateId x, Rng& r) { return r.categorical(policy.row(x)); },
            loss, episode_rng);

        const OccupancyBounds bounds = occupancy_bounds(policy, conf);
        const StateActionTable q_hat = q_estimate(traj, bounds.upper, p.gamma);
        const StateActionTable b = bonus_table_tabular(policy, bounds, p.gamma, H);
        const DilatedBonusTable B = dilated_bonus_optimistic(conf, policy, b);

        double mean_bonus = 0.0;
        for (const auto& s : traj.steps) {
            const double eq = p.eta * q_hat(s.state, s.action);
            diag.max_eta_estimate = std::max(diag.max_eta_estimate, eq);
            if (eq > 0.5) ++diag.estimate_guard_violations;
            mean_bonus += B(s.state, s.action) / static_cast<double>(H);
        }
        double gap = 0.0;
        for (StateId x = 0; x < L.num_decision_states(); ++x)
            for (ActionId a = 0; a < L.num_actions(); ++a) {
                const double eb = p.eta * B(x, a);
                diag.max_eta_bonus = std::max(diag.max_eta_bonus, eb);
                if (eb > 0.5 / static_cast<double>(H)) ++diag.bonus_guard_violations;
                gap = std::max(gap, bounds.upper(x, a) - bounds.lower(x, a));
            }

        const bool inside = conf.contains(mdp);
        if (inside) {
            ++diag.episodes_true_kernel_inside;
            if (params.check_occupancy_sandwich) {
                const auto q = occupancy(mdp, policy);
                for (StateId x = 0; x < L.num_decision_states(); ++x)
                    for (ActionId a = 0; a < L.num_actions(); ++a) {
                        ++diag.sandwich_checks;
                        if (bounds.lower(x, a) > q(x, a) + 1e-9 ||
                            q(x, a) > bounds.upper(x, a) + 1e-9)
                            ++diag.sandwich_violations;
                    }
            }
        }

        EpisodeRow row;
        row.episode = t;
        row.realized_loss = traj.total_loss();
        row.true_value = initial_value(mdp, policy, loss);
        row.epoch = conf.epoch();
        row.mean_bonus = mean_bonus;
        row.extras = {gap, inside ? 1.0 : 0.0};
        record.rows.push_back(std::move(row));

        for (std::size_t i = 0; i < score.values().size(); ++i)
            score.values()[i] += q_hat.values()[i] - B.B.values()[i];
        if (counters.record(traj)) conf = confidence_widths(counters, T, p.delta);
    }
    attach_regret(record, mdp, schedule);
    record.set("estimate_guard_violations", static_cast<double>(diag.estimate_guard_violations));
    record.set("bonus_guard_violations", static_cast<double>(diag.bonus_guard_violations));
    record.set("sandwich_violations", static_cast<double>(diag.sandwich_violations));
    if (diagnostics) *diagnostics = diag;
    return record;
}

} // namespace dpo
