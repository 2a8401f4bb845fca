#include "dpo/linear_mdp.hpp"

#include "dpo/bonus.hpp"
#include "dpo/envs.hpp"
#include "dpo/linear_q.hpp"
#include "dpo/record.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dpo {

namespace {

constexpr std::uint64_t kPartition = 5;
constexpr std::uint64_t kCoverPick = 6;

std::size_t ceil_positive(double v, const char* what) {
    if (!std::isfinite(v) || v > 1e15) throw ConfigError(std::string(what) + " is too large; override it");
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(v)));
}

// Adds (1/N0) phi phi^T of every layer of `traj` to `gamma`.
void accumulate(std::vector<Matrix>& gamma, const FeatureMap& features, const Trajectory& traj,
                double scale) {
    for (std::size_t h = 0; h < gamma.size(); ++h) {
        const Vector& v = features(traj.steps[h].state, traj.steps[h].action);
        gamma[h].noalias() += scale * v * v.transpose();
    }
}

} // namespace

double ramp(double z, double y) {
    if (!(z > 0.0)) throw InputError("ramp width must be positive");
    if (y <= -z) return 0.0;
    if (y >= 0.0) return 1.0;
    return y / z + 1.0;
}

EpisodeRunner zero_loss_runner(const LayeredMDP& mdp, std::uint64_t seed) {
    return [&mdp, root = Rng(seed)](const Policy& policy, std::size_t index) {
        Rng r = root.derive({kEpisode, index + 1});
        const StateActionTable zero(mdp.num_states(), mdp.num_actions());
        return sample_episode(
            mdp, [&](std::size_t, StateId x, Rng& g) { return g.categorical(policy.row(x)); }, zero, r);
    };
}

PolicyCover policy_cover(const LayerStructure& L, const FeatureMap& features, std::size_t M0,
                         std::size_t N0, double alpha, double xi, double ramp_width,
                         const EpisodeRunner& run) {
    if (M0 == 0 || N0 == 0) throw InputError("M0 and N0 must be positive");
    const std::size_t H = L.horizon(), A = L.num_actions();
    const auto d = static_cast<Eigen::Index>(features.dim());
    const double Hd = static_cast<double>(H);
    const double inv_n0 = 1.0 / static_cast<double>(N0);

    PolicyCover cover;
    cover.M0 = M0;
    cover.N0 = N0;
    cover.alpha = alpha;
    cover.xi = xi;
    std::vector<Matrix> gamma(H, Matrix::Identity(d, d));
    cover.gamma.push_back(gamma);
    std::vector<Trajectory> past;
    past.reserve(M0 * N0);

    for (std::size_t m = 0; m < M0; ++m) {
        std::vector<double> value(L.num_states(), 0.0);
        std::vector<ActionId> greedy(L.num_states(), 0);
        for (std::size_t h = H; h-- > 0;) {
            const Eigen::LLT<Matrix> chol(gamma[h]);
            Vector target = Vector::Zero(d);
            for (const auto& traj : past) {
                const StateId next = h + 1 < H ? traj.steps[h + 1].state : L.terminal_state();
                target += features(traj.steps[h].state, traj.steps[h].action) * value[next];
            }
            const Vector theta = chol.solve(target * inv_n0);
            for (std::size_t j = 0; j < L.layer_size(h); ++j) {
                const StateId x = L.state(h, j);
                double best = -1.0;
                for (ActionId a = 0; a < A; ++a) {
                    const Vector& v = features(x, a);
                    const double n2 = v.dot(chol.solve(v));
                    const double r = ramp(ramp_width, n2 - alpha / static_cast<double>(M0));
                    const double q = std::min(r + xi * std::sqrt(std::max(n2, 0.0)) + v.dot(theta), Hd);
                    if (q > best) {
                        best = q;
                        greedy[x] = a;
                    }
                }
                value[x] = best;
            }
        }
        cover.policies.push_back(Policy::deterministic(L, greedy));
        for (std::size_t i = 0; i < N0; ++i) {
            past.push_back(run(cover.policies.back(), m * N0 + i));
            accumulate(gamma, features, past.back(), inv_n0);
        }
        cover.gamma.push_back(gamma);
    }
    for (auto& g : gamma) g /= static_cast<double>(M0);
    cover.sigma_cov = std::move(gamma);
    return cover;
}

std::vector<Matrix> fixed_policy_covariance(const LayerStructure& L, const FeatureMap& features,
                                            const Policy& policy, std::size_t M0, std::size_t N0,
                                            const EpisodeRunner& run) {
    const auto d = static_cast<Eigen::Index>(features.dim());
    std::vector<Matrix> gamma(L.horizon(), Matrix::Identity(d, d));
    for (std::size_t i = 0; i < M0 * N0; ++i)
        accumulate(gamma, features, run(policy, i), 1.0 / static_cast<double>(N0));
    for (auto& g : gamma) g /= static_cast<double>(M0);
    return gamma;
}

KnownSet::KnownSet(const std::vector<Matrix>& sigma_cov, const FeatureMap& features, double alpha) {
    const auto& L = features.layers();
    known_.assign(L.num_states(), 1);
    for (std::size_t h = 0; h < L.horizon(); ++h) {
        const Eigen::LLT<Matrix> chol(sigma_cov.at(h));
        if (chol.info() != Eigen::Success) throw StructuralError("cover covariance is not positive definite");
        for (std::size_t j = 0; j < L.layer_size(h); ++j) {
            const StateId x = L.state(h, j);
            for (ActionId a = 0; a < L.num_actions(); ++a) {
                const Vector& v = features(x, a);
                if (v.dot(chol.solve(v)) > alpha) known_[x] = 0;
            }
        }
    }
}

std::size_t KnownSet::size() const {
    return static_cast<std::size_t>(std::count(known_.begin(), known_.end(), 1));
}

std::vector<double> unknown_probability(const LayeredMDP& mdp, const KnownSet& known,
                                        const Policy& policy) {
    const auto& L = mdp.layers();
    const auto q = occupancy(mdp, policy);
    std::vector<double> out(L.horizon(), 0.0);
    for (std::size_t h = 0; h < L.horizon(); ++h)
        for (std::size_t j = 0; j < L.layer_size(h); ++j)
            if (!known(L.state(h, j))) out[h] += q.state(L.state(h, j));
    return out;
}

double dilated_tail(const Trajectory& trajectory, const StateActionTable& bonus, std::size_t h,
                    double dilation) {
    double total = 0.0, factor = 1.0;
    for (std::size_t i = h + 1; i < trajectory.steps.size(); ++i) {
        factor *= dilation;
        total += factor * bonus(trajectory.steps[i].state, trajectory.steps[i].action);
    }
    return total;
}

namespace {

template <class Target>
Vector weighted_batch(const Matrix& sigma_plus, const FeatureMap& features,
                      const std::vector<WeightedEpisode>& episodes, std::size_t h, Target target) {
    Vector acc = Vector::Zero(static_cast<Eigen::Index>(features.dim()));
    if (episodes.empty()) return acc;
    const std::size_t H = features.layers().horizon();
    for (const auto& e : episodes) {
        const double w = estimator_weight(e.explore, h, e.h_star, H);
        if (w == 0.0) continue;
        const auto& s = e.trajectory.steps[h];
        acc += (w * target(e.trajectory)) * features(s.state, s.action);
    }
    return sigma_plus * (acc / static_cast<double>(episodes.size()));
}

} // namespace

Vector lambda_estimate(const Matrix& sigma_plus, const FeatureMap& features,
                       const std::vector<WeightedEpisode>& episodes, const StateActionTable& bonus,
                       std::size_t h) {
    const double dil = default_dilation(features.layers().horizon());
    return weighted_batch(sigma_plus, features, episodes, h,
                          [&](const Trajectory& t) { return dilated_tail(t, bonus, h, dil); });
}

Vector theta_estimate_batch(const Matrix& sigma_plus, const FeatureMap& features,
                            const std::vector<WeightedEpisode>& episodes, std::size_t h) {
    return weighted_batch(sigma_plus, features, episodes, h,
                          [&](const Trajectory& t) { return t.loss_to_go(h); });
}

StateActionTable gated_bonus(const FeatureMap& features, const CovInverseEstimate& sigma_plus,
                             const Policy& policy, const KnownSet& known, double beta) {
    const auto& L = features.layers();
    const std::size_t A = L.num_actions();
    StateActionTable b(L.num_states(), A);
    std::vector<double> quad(A);
    for (StateId x = 0; x < L.num_decision_states(); ++x) {
        if (!known(x)) continue;
        const Matrix& S = sigma_plus[L.layer_of(x)];
        double avg = 0.0;
        for (ActionId a = 0; a < A; ++a) {
            quad[a] = features.quad(x, a, S);
            avg += policy(x, a) * quad[a];
        }
        for (ActionId a = 0; a < A; ++a) b(x, a) = beta * quad[a] + beta * avg;
    }
    return b;
}

ResolvedLinearMDPParams resolve(const LinearMDPParams& params, std::size_t d, std::size_t H,
                                std::size_t T) {
    ResolvedLinearMDPParams r{};
    const double Hd = static_cast<double>(H), H4 = Hd * Hd * Hd * Hd;
    r.delta_e = params.delta_e.value_or(0.1);
    r.beta = params.beta.value_or(0.03);
    if (!(r.delta_e >= 0.0 && r.delta_e < 0.5)) throw InputError("delta_e must lie in [0, 1/2)");
    if (r.delta_e == 0.0 && !params.gamma) throw ConfigError("gamma must be given when delta_e = 0");
    if (!(r.beta > 0.0 && r.beta < 0.5)) throw InputError("beta must lie in (0, 1/2)");
    r.gamma = params.gamma.value_or(36.0 * r.beta * r.beta / r.delta_e);
    r.eta = params.eta.value_or(std::min(r.gamma / (16.0 * H4), r.beta / (40.0 * H4)));
    r.epsilon = params.epsilon.value_or(0.1);
    r.delta = params.delta;
    if (!(r.eta > 0.0)) throw InputError("eta must be positive");
    if (!(r.delta > 0.0 && r.delta < 1.0)) throw InputError("delta must lie in (0,1)");
    if (!params.M || !params.N) {
        const auto f = gr_parameters(r.epsilon, r.gamma, d, H, T, 96.0);
        r.M = params.M.value_or(f.M);
        r.N = params.N.value_or(f.N);
    } else {
        r.M = *params.M;
        r.N = *params.N;
    }
    if (params.N_cap > 0) r.N = std::min(r.N, params.N_cap);
    if (r.M == 0 || r.N == 0) throw InputError("M and N must be positive");
    r.W = 2 * r.M * r.N;
    r.alpha = r.delta_e / (6.0 * r.beta);
    const double log_term = std::log(static_cast<double>(T) / r.delta);
    r.M0 = params.M0 ? *params.M0
                     : ceil_positive(r.alpha * r.alpha * static_cast<double>(d) * Hd * Hd, "M0");
    const double m0 = static_cast<double>(r.M0);
    r.N0 = params.N0 ? *params.N0
                     : ceil_positive(100.0 * m0 * m0 * m0 * m0 * log_term / (r.alpha * r.alpha), "N0");
    if (r.M0 == 0 || r.N0 == 0) throw InputError("M0 and N0 must be positive");
    r.xi = params.xi.value_or(60.0 * static_cast<double>(d) * Hd * std::sqrt(log_term));
    r.T0 = r.M0 * r.N0;
    if (static_cast<double>(r.T0) + static_cast<double>(r.W) > static_cast<double>(T))
        throw ConfigError("T = " + std::to_string(T) + " is below T0 + W = " +
                          std::to_string(r.T0) + " + " + std::to_string(r.W));
    return r;
}

ExperimentRecord run_linear_mdp(const LayeredMDP& mdp, const FeatureMap& features,
                                const LossSchedule& schedule, std::size_t T,
                                const LinearMDPParams& params, std::uint64_t seed,
                                LinearMDPDiagnostics* out) {
    const auto& L = mdp.layers();
    if (!(schedule.layers() == L)) throw StructuralError("loss schedule of another structure");
    if (!(features.layers() == L)) throw StructuralError("feature map of another structure");
    const std::size_t H = L.horizon(), A = L.num_actions();
    const auto p = resolve(params, features.dim(), H, T);
    const Rng root(seed);
    const double H4 = std::pow(static_cast<double>(H), 4);

    ExperimentRecord record;
    record.algorithm = "linear-mdp";
    record.seed = seed;
    record.set("T", static_cast<double>(T));
    for (auto [k, v] : {std::pair{"delta_e", p.delta_e}, {"beta", p.beta}, {"gamma", p.gamma},
                        {"eta", p.eta}, {"epsilon", p.epsilon}, {"delta", p.delta},
                        {"alpha", p.alpha}, {"xi", p.xi}})
        record.set(k, v);
    for (auto [k, v] : {std::pair{"M", p.M}, {"N", p.N}, {"W", p.W}, {"M0", p.M0}, {"N0", p.N0},
                        {"T0", p.T0}})
        record.set(k, static_cast<double>(v));
    record.extra_columns = {"explore", "in_S", "known_fraction_visited", "max_b"};

    LinearMDPDiagnostics diag;
    if (p.gamma < 36.0 * p.beta * p.beta / p.delta_e * (1.0 - 1e-12))
        diag.warnings.push_back("gamma < 36 beta^2 / delta_e: bonuses may exceed 1");
    if (p.beta * p.epsilon > 0.125) diag.warnings.push_back("beta * epsilon > 1/8");
    if (p.eta > p.gamma / (16.0 * H4) * (1.0 + 1e-12)) diag.warnings.push_back("eta > gamma / (16 H^4)");
    if (p.eta > p.beta / (40.0 * H4) * (1.0 + 1e-12)) diag.warnings.push_back("eta > beta / (40 H^4)");

    auto sample = [&](const ActionChooser& act, std::size_t t) {
        Rng r = root.derive({kEpisode, t});
        return sample_episode(mdp, act, schedule.at(t), r);
    };
    auto follow = [](const Policy& pi) -> ActionChooser {
        return [&pi](std::size_t, StateId x, Rng& r) { return r.categorical(pi.row(x)); };
    };

    // cover phase: episodes 1..T0
    const EpisodeRunner runner = [&](const Policy& pi, std::size_t index) {
        const std::size_t t = index + 1;
        Trajectory traj = sample(follow(pi), t);
        EpisodeRow row;
        row.episode = t;
        row.realized_loss = traj.total_loss();
        row.true_value = initial_value(mdp, pi, schedule.at(t));
        row.epoch = 0;
        row.extras = {1.0, 0.0, 0.0, 0.0};
        record.rows.push_back(std::move(row));
        return traj;
    };
    const PolicyCover cover = policy_cover(L, features, p.M0, p.N0, p.alpha, p.xi,
                                           1.0 / static_cast<double>(T), runner);
    const KnownSet known(cover.sigma_cov, features, p.alpha);
    for (const auto& S : cover.sigma_cov) diag.lambda_min_cov.push_back(min_eigenvalue(S));
    for (std::size_t h = 0; h < H; ++h)
        record.set("lambda_min_cov_" + std::to_string(h), diag.lambda_min_cov[h]);
    diag.known_states = known.size();
    record.set("known_states", static_cast<double>(known.size()));

    StateActionTable score(L.num_states(), A);
    const std::size_t K = (T - p.T0) / p.W;
    std::size_t t = p.T0;

    for (std::size_t k = 1; t < T; ++k) {
        const bool update = k <= K;
        const std::size_t length = update ? p.W : T - t;
        const Policy pi_k = exp_weights_policy(score, p.eta);

        // random halves of the epoch; the first half is S
        std::vector<std::size_t> order(length);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle = root.derive({kPartition, k});
        std::shuffle(order.begin(), order.end(), shuffle);
        std::vector<char> in_s(length, 0);
        for (std::size_t i = 0; i < length / 2; ++i) in_s[order[i]] = 1;

        // exact expected loss per episode type, from the occupancy of the randomized strategy
        MixturePolicy mix_s, mix_sp;
        mix_s.components.push_back(pi_k);
        mix_s.weights.push_back(1.0 - p.delta_e);
        mix_sp = mix_s;
        for (const auto& pm : cover.policies) {
            mix_s.components.push_back(pm);
            mix_s.weights.push_back(p.delta_e / static_cast<double>(p.M0));
            for (std::size_t hs = 0; hs < H; ++hs) {
                mix_sp.components.push_back(explore_rollin(L, pm, pi_k, hs));
                mix_sp.weights.push_back(p.delta_e / static_cast<double>(p.M0 * H));
            }
        }
        const OccupancyMeasure q_s = occupancy(mdp, mix_s), q_sp = occupancy(mdp, mix_sp);

        FeatureSamples samples;
        std::vector<WeightedEpisode> second;
        std::vector<std::pair<StateId, ActionId>> visited;
        const std::size_t first_row = record.rows.size();
        for (std::size_t i = 0; i < length; ++i) {
            ++t;
            Rng e = root.derive({kExplore, t});
            const bool explore = e.bernoulli(p.delta_e);
            const std::size_t h_star = e.uniform_index(H);
            const std::size_t m = root.derive({kCoverPick, t}).uniform_index(p.M0);
            const Policy& pm = cover.policies[m];
            ActionChooser act;
            if (!explore) act = follow(pi_k);
            else if (in_s[i]) act = follow(pm);
            else
                act = [&](std::size_t h, StateId x, Rng& r) {
                    return r.categorical(h <= h_star ? pm.row(x) : pi_k.row(x));
                };
            Trajectory traj = sample(act, t);

            const LossFunction loss = schedule.at(t);
            const auto& q = in_s[i] ? q_s : q_sp;
            double value = 0.0;
            for (std::size_t j = 0; j < loss.values().size(); ++j) value += q.q.values()[j] * loss.values()[j];
            std::size_t known_visits = 0;
            for (const auto& s : traj.steps) {
                known_visits += known(s.state);
                visited.emplace_back(s.state, s.action);
            }

            EpisodeRow row;
            row.episode = t;
            row.realized_loss = traj.total_loss();
            row.true_value = value;
            row.epoch = k;
            row.extras = {explore ? 1.0 : 0.0, in_s[i] ? 1.0 : 0.0,
                          static_cast<double>(known_visits) / static_cast<double>(H), 0.0};
            record.rows.push_back(std::move(row));

            if (in_s[i]) {
                std::vector<Vector> phis;
                for (const auto& s : traj.steps) phis.push_back(features(s.state, s.action));
                samples.push_back(std::move(phis));
            } else {
                second.push_back({std::move(traj), explore, h_star});
            }
        }
        if (!update) break;

        const CovInverseEstimate sigma = geometric_resampling(samples, p.M, p.N, p.gamma);
        const StateActionTable b = gated_bonus(features, sigma, pi_k, known, p.beta);
        double max_b = 0.0;
        for (StateId x = 0; x < L.num_decision_states(); ++x)
            for (ActionId a = 0; a < A; ++a) {
                max_b = std::max(max_b, b(x, a));
                if (!known(x) && b(x, a) != 0.0) ++diag.gate_violations;
            }
        diag.max_b = std::max(diag.max_b, max_b);
        for (const auto& [x, a] : visited)
            if (known(x)) {
                diag.max_b_known_visited = std::max(diag.max_b_known_visited, b(x, a));
                ++diag.known_visits;
            }
        for (std::size_t r = first_row; r < record.rows.size(); ++r) record.rows[r].extras[3] = max_b;

        for (std::size_t h = 0; h < H; ++h) {
            const Vector theta = theta_estimate_batch(sigma[h], features, second, h);
            const Vector lambda = lambda_estimate(sigma[h], features, second, b, h);
            const Vector net = theta - lambda;
            for (std::size_t j = 0; j < L.layer_size(h); ++j) {
                const StateId x = L.state(h, j);
                for (ActionId a = 0; a < A; ++a) score(x, a) += features(x, a).dot(net) - b(x, a);
            }
        }
        ++diag.epochs;
    }

    attach_regret(record, mdp, schedule);
    record.set("epochs", static_cast<double>(diag.epochs));
    record.set("max_b_known_visited", diag.max_b_known_visited);
    record.set("gate_violations", static_cast<double>(diag.gate_violations));
    for (std::size_t i = 0; i < diag.warnings.size(); ++i) record.set("warning_" + std::to_string(i), diag.warnings[i]);
    if (out) *out = diag;
    return record;
}

} // namespace dpo
