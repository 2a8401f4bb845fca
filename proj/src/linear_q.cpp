#include "dpo/linear_q.hpp"

#include "dpo/bonus.hpp"
#include "dpo/envs.hpp"
#include "dpo/record.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpo {

namespace {

constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();
constexpr double kMaxResamplePaths = 1e8;

} // namespace

// --- LinearQLearner -----------------------------------------------------------

LinearQLearner::LinearQLearner(const LayeredMDP& mdp, const FeatureMap& features, double eta,
                               double beta, std::uint64_t seed)
    : mdp_(&mdp), features_(&features), simulator_(mdp), eta_(eta), beta_(beta),
      dilation_(default_dilation(mdp.horizon())), root_(seed), cache_(mdp.num_states()) {
    if (!(features.layers() == mdp.layers())) throw StructuralError("feature map of another structure");
    if (!(eta > 0.0) || !(beta >= 0.0)) throw InputError("eta must be positive and beta nonnegative");
    const std::size_t A = mdp.num_actions();
    for (auto& c : cache_) {
        c.rows.assign(A, 1.0 / static_cast<double>(A));
        c.cumulative.assign(A, 0.0);
    }
}

void LinearQLearner::push_episode(CovInverseEstimate sigma_plus, std::vector<Vector> theta) {
    if (sigma_plus.per_layer.size() != mdp_->horizon() || theta.size() != mdp_->horizon())
        throw StructuralError("one estimate per layer expected");
    sigma_plus_.push_back(std::move(sigma_plus));
    theta_.push_back(std::move(theta));
}

bool LinearQLearner::has_bonus(std::size_t t, StateId x, ActionId a) const {
    const auto& memo = cache_[x].memo;
    const std::size_t i = (t - 1) * mdp_->num_actions() + a;
    return i < memo.size() && !std::isnan(memo[i]);
}

void LinearQLearner::extend(StateId x, std::size_t t) {
    const std::size_t A = mdp_->num_actions();
    const std::size_t h = mdp_->layers().layer_of(x);
    std::vector<double> scores(A);
    // rows holds pi_1..pi_k; add pi_{k+1} from episode k's estimates until k+1 = t
    while (cache_[x].rows.size() / A < t) {
        const std::size_t s = cache_[x].rows.size() / A;
        for (ActionId a = 0; a < A; ++a) {
            const double b = bonus(s, x, a);
            cache_[x].cumulative[a] += (*features_)(x, a).dot(theta_[s - 1][h]) - b;
        }
        auto& c = cache_[x];
        const std::size_t offset = c.rows.size();
        c.rows.resize(offset + A);
        exp_weights_row(c.cumulative, eta_, std::span<double>(c.rows.data() + offset, A));
    }
}

std::span<const double> LinearQLearner::policy_row(std::size_t t, StateId x) {
    if (t == 0 || t > episodes() + 1) throw InputError("policy index out of range");
    const std::size_t A = mdp_->num_actions();
    if (!mdp_->layers().is_terminal(x)) extend(x, t);
    else t = 1;
    return {cache_[x].rows.data() + (t - 1) * A, A};
}

Policy LinearQLearner::policy(std::size_t t) {
    const auto& L = mdp_->layers();
    StateActionTable rows(L.num_states(), L.num_actions());
    // deepest layers first so each recursion finds its successors already built
    for (StateId x = L.num_states(); x-- > 0;) {
        const auto row = policy_row(t, x);
        std::copy(row.begin(), row.end(), rows.row(x).begin());
    }
    return Policy(std::move(rows));
}

ActionChooser LinearQLearner::chooser(std::size_t t) {
    return [this, t](std::size_t, StateId x, Rng& rng) { return rng.categorical(policy_row(t, x)); };
}

const double* LinearQLearner::quad_row(std::size_t s, StateId x) {
    const std::size_t A = mdp_->num_actions();
    auto& q = cache_[x].quad;
    if (q.size() < s * A) q.resize(s * A, kAbsent);
    double* row = q.data() + (s - 1) * A;
    if (std::isnan(row[0])) {
        const Matrix& S = sigma_plus_[s - 1][mdp_->layers().layer_of(x)];
        for (ActionId a = 0; a < A; ++a) row[a] = features_->quad(x, a, S);
    }
    return row;
}

double LinearQLearner::bonus(std::size_t t, StateId x, ActionId a) {
    if (t == 0 || t > episodes()) throw InputError("bonus index out of range");
    const auto& L = mdp_->layers();
    if (L.is_terminal(x)) return 0.0;
    const std::size_t A = L.num_actions();
    {
        auto& memo = cache_[x].memo;
        if (memo.size() < t * A) memo.resize(t * A, kAbsent);
        const double hit = memo[(t - 1) * A + a];
        if (!std::isnan(hit)) return hit;
    }

    const auto here = policy_row(t, x);
    const double* quad = quad_row(t, x);
    double own = beta_ * quad[a];
    for (ActionId j = 0; j < A; ++j) own += beta_ * here[j] * quad[j];

    Rng rng = root_.derive({kBonus, t, x, a});
    const StateId next = simulator_.next(x, a, rng);
    double tail = 0.0;
    if (!L.is_terminal(next)) {
        const ActionId a_next = rng.categorical(policy_row(t, next));
        tail = bonus(t, next, a_next);
    }
    const double value = own + dilation_ * tail;
    cache_[x].memo[(t - 1) * A + a] = value;
    return value;
}

// --- estimators and parameters --------------------------------------------------

Vector theta_estimate(const Matrix& sigma_plus, const FeatureMap& features,
                      const Trajectory& trajectory, std::size_t h, double weight) {
    const auto& step = trajectory.steps.at(h);
    const double scale = weight * trajectory.loss_to_go(h);
    if (scale == 0.0) return Vector::Zero(static_cast<Eigen::Index>(features.dim()));
    return sigma_plus * (features(step.state, step.action) * scale);
}

Policy explore_rollin(const LayerStructure& layers, const Policy& exploratory, const Policy& policy,
                      std::size_t h_star) {
    return compose_by_layer(layers, exploratory, policy, h_star + 1);
}

double estimator_weight(bool explore, std::size_t h, std::size_t h_star, std::size_t horizon) {
    if (!explore) return 1.0;
    return h == h_star ? static_cast<double>(horizon) : 0.0;
}

ResolvedLinearQParams resolve(const LinearQParams& params, std::size_t d, std::size_t H,
                              std::size_t T) {
    const double dT = static_cast<double>(d) * static_cast<double>(T);
    const double Hd = static_cast<double>(H);
    ResolvedLinearQParams r{};
    // kept inside (0, 1/2) as the parameter line requires
    r.gamma = params.gamma.value_or(std::min(std::pow(dT, -2.0 / 3.0), 0.49));
    r.beta = params.beta.value_or(std::min(Hd * std::pow(dT, -1.0 / 3.0), 0.49));
    r.epsilon = params.epsilon.value_or(1.0 / (Hd * Hd * Hd * static_cast<double>(T)));
    r.eta = params.eta.value_or(std::min({r.gamma / (2.0 * Hd), 3.0 * r.beta / (8.0 * Hd * Hd),
                                          r.gamma / (12.0 * r.beta * Hd * Hd)}));
    if (!(r.eta > 0.0) || !(r.beta >= 0.0)) throw InputError("eta must be positive, beta nonnegative");
    if (!params.M || !params.N) {
        const auto f = gr_parameters(r.epsilon, r.gamma, d, H, T);
        r.M = params.M.value_or(f.M);
        r.N = params.N.value_or(f.N);
    } else {
        r.M = *params.M;
        r.N = *params.N;
    }
    if (params.N_cap > 0) r.N = std::min(r.N, params.N_cap);
    if (r.M == 0 || r.N == 0) throw InputError("M and N must be positive");
    if (static_cast<double>(r.M) * static_cast<double>(r.N) > kMaxResamplePaths)
        throw ConfigError("M*N resampling paths per episode exceed 1e8; override M or N");
    return r;
}

ResolvedExploratoryParams resolve(const ExploratoryParams& params, const LayeredMDP& mdp,
                                  const FeatureMap& features, std::size_t T) {
    const auto& L = mdp.layers();
    const double H = static_cast<double>(L.horizon());
    const double d = static_cast<double>(features.dim());
    const double Td = static_cast<double>(T);
    ResolvedExploratoryParams r{};
    if (params.lambda_min) {
        r.lambda_min = *params.lambda_min;
    } else {
        const Policy pi0 = params.exploratory.value_or(Policy::uniform(L));
        r.lambda_min = std::numeric_limits<double>::infinity();
        for (const auto& law : feature_laws(mdp, features, pi0))
            r.lambda_min = std::min(r.lambda_min, min_eigenvalue(law.second_moment()));
    }
    if (!(r.lambda_min > 1e-12))
        throw ConfigError("the exploratory policy does not span the features (lambda_min = " +
                          std::to_string(r.lambda_min) + ")");
    const double lam = r.lambda_min;
    r.delta_e = params.delta_e.value_or(std::min(std::sqrt(H * H / (lam * Td * (lam * d * H + 1.0))), 0.5));
    if (!(r.delta_e > 0.0 && r.delta_e <= 1.0)) throw InputError("delta_e must lie in (0,1]");
    r.epsilon = params.epsilon.value_or(1.0 / (H * H * H * H * Td));
    const double rr = r.epsilon * r.delta_e * lam;
    if (!(rr > 0.0 && rr < 1.0)) throw InputError("epsilon * delta_e * lambda must lie in (0,1)");
    const double log_r = std::log(1.0 / rr);
    const double scaled = r.delta_e * lam / log_r;
    r.eta = params.eta.value_or(std::min(scaled / (4.0 * H * H), std::sqrt(scaled / (48.0 * std::pow(H, 5)))));
    r.beta = params.beta.value_or(2.0 * r.eta * H * H * H);
    if (!(r.eta > 0.0) || !(r.beta >= 0.0)) throw InputError("eta must be positive, beta nonnegative");
    if (!params.M || !params.N) {
        const auto f = gr_mixture_parameters(r.epsilon, r.delta_e, lam, features.dim(), L.horizon(), T);
        r.M = params.M.value_or(f.M);
        r.N = params.N.value_or(f.N);
    } else {
        r.M = *params.M;
        r.N = *params.N;
    }
    if (params.N_cap > 0) r.N = std::min(r.N, params.N_cap);
    if (r.M == 0 || r.N == 0) throw InputError("M and N must be positive");
    if (static_cast<double>(r.M) * static_cast<double>(r.N) > kMaxResamplePaths)
        throw ConfigError("M*N resampling paths per episode exceed 1e8; override M or N");
    return r;
}

// --- run loops ----------------------------------------------------------------------

namespace {

struct LoopSettings {
    double eta, beta;
    std::size_t M, N;
    double gamma;                 // standard variant
    bool exploratory = false;
    double delta_e = 0.0;
    const Policy* explorer = nullptr;
};

ExperimentRecord run_loop(const LayeredMDP& mdp, const FeatureMap& features,
                          const LossSchedule& schedule, std::size_t T, const LoopSettings& s,
                          std::uint64_t seed, ExperimentRecord record, LinearQDiagnostics* out) {
    const auto& L = mdp.layers();
    if (!(schedule.layers() == L)) throw StructuralError("loss schedule of another structure");
    if (!(features.layers() == L)) throw StructuralError("feature map of another structure");
    const std::size_t H = L.horizon();
    const Rng root(seed);
    LinearQLearner learner(mdp, features, s.eta, s.beta, seed);
    Simulator& sim = learner.simulator();
    LinearQDiagnostics diag;

    record.seed = seed;
    record.extra_columns = {"simulator_calls", "diagnostic_calls", "mean_op_norm", "explore", "h_star"};

    for (std::size_t t = 1; t <= T; ++t) {
        const std::size_t calls_before = sim.calls();
        const LossFunction loss = schedule.at(t);
        bool explore = false;
        std::size_t h_star = 0;
        if (s.exploratory) {
            Rng e = root.derive({kExplore, t});
            explore = e.bernoulli(s.delta_e);
            h_star = e.uniform_index(H);
        }
        const ActionChooser follow = learner.chooser(t);
        ActionChooser act = follow;
        if (explore)
            act = [&](std::size_t h, StateId x, Rng& r) {
                return h <= h_star ? r.categorical(s.explorer->row(x)) : follow(h, x, r);
            };
        Rng episode_rng = root.derive({kEpisode, t});
        const Trajectory traj = sample_episode(mdp, act, loss, episode_rng);

        CovInverseEstimate sigma;
        if (s.exploratory) {
            const Policy* explorer = s.explorer;
            ActionChooser pi0 = [explorer](std::size_t, StateId x, Rng& r) {
                return r.categorical(explorer->row(x));
            };
            sigma = gr_mixture(sim, features, follow, pi0, s.delta_e, s.M, s.N, root.derive({kResample, t}));
        } else {
            FeatureSamples samples(s.M * s.N);
            for (std::size_t i = 0; i < samples.size(); ++i) {
                Rng r = root.derive({kResample, t, i});
                samples[i] = simulate_features(sim, features, follow, r);
            }
            sigma = geometric_resampling(samples, s.M, s.N, s.gamma);
        }

        std::vector<Vector> theta(H);
        double op_sum = 0.0;
        const double op_bound = sigma.op_norm_bound();
        for (std::size_t h = 0; h < H; ++h) {
            theta[h] = theta_estimate(sigma[h], features, traj, h, estimator_weight(explore, h, h_star, H));
            const double op = sigma.op_norm(h);
            op_sum += op;
            diag.max_op_norm = std::max(diag.max_op_norm, op);
            if (op > op_bound * (1.0 + 1e-9)) ++diag.op_norm_violations;
            for (std::size_t j = 0; j < L.layer_size(h); ++j)
                for (ActionId a = 0; a < L.num_actions(); ++a) {
                    const double v = s.eta * std::abs(features(L.state(h, j), a).dot(theta[h]));
                    diag.max_eta_theta = std::max(diag.max_eta_theta, v);
                    if (v > 0.5) ++diag.theta_guard_violations;
                }
        }
        learner.push_episode(std::move(sigma), std::move(theta));
        const std::size_t learner_calls = sim.calls() - calls_before;

        // everything below is bookkeeping: bonuses it computes are the same
        // values the learner would draw later, but the calls are counted apart
        const std::size_t diag_before = sim.calls();
        double mean_bonus = 0.0;
        for (const auto& step : traj.steps) {
            mean_bonus += learner.bonus(t, step.state, step.action) / static_cast<double>(H);
            for (ActionId a = 0; a < L.num_actions(); ++a) {
                const double v = s.eta * learner.bonus(t, step.state, a);
                diag.max_eta_bonus = std::max(diag.max_eta_bonus, v);
                if (v > 0.5 / static_cast<double>(H)) ++diag.bonus_guard_violations;
            }
        }
        const Policy pi_t = learner.policy(t);
        // expected loss of the randomized strategy, averaged over Y and h*
        double value = initial_value(mdp, pi_t, loss);
        if (s.exploratory) {
            double rollin = 0.0;
            for (std::size_t hs = 0; hs < H; ++hs)
                rollin += initial_value(mdp, explore_rollin(L, *s.explorer, pi_t, hs), loss);
            value = (1.0 - s.delta_e) * value + s.delta_e * rollin / static_cast<double>(H);
        }

        EpisodeRow row;
        row.episode = t;
        row.realized_loss = traj.total_loss();
        row.true_value = value;
        row.epoch = t;
        row.mean_bonus = mean_bonus;
        const std::size_t diagnostic_calls = sim.calls() - diag_before;
        row.extras = {static_cast<double>(learner_calls), static_cast<double>(diagnostic_calls),
                      op_sum / static_cast<double>(H), explore ? 1.0 : 0.0,
                      static_cast<double>(h_star)};
        record.rows.push_back(std::move(row));
        diag.simulator_calls += learner_calls;
        diag.diagnostic_calls += diagnostic_calls;
    }
    attach_regret(record, mdp, schedule);
    record.set("theta_guard_violations", static_cast<double>(diag.theta_guard_violations));
    record.set("bonus_guard_violations", static_cast<double>(diag.bonus_guard_violations));
    record.set("op_norm_violations", static_cast<double>(diag.op_norm_violations));
    if (out) *out = diag;
    return record;
}

} // namespace

ExperimentRecord run_linear_q(const LayeredMDP& mdp, const FeatureMap& features,
                              const LossSchedule& schedule, std::size_t T,
                              const LinearQParams& params, std::uint64_t seed,
                              LinearQDiagnostics* diagnostics) {
    const auto p = resolve(params, features.dim(), mdp.horizon(), T);
    ExperimentRecord record;
    record.algorithm = "linear-q";
    record.set("T", static_cast<double>(T));
    record.set("gamma", p.gamma);
    record.set("beta", p.beta);
    record.set("eta", p.eta);
    record.set("epsilon", p.epsilon);
    record.set("M", static_cast<double>(p.M));
    record.set("N", static_cast<double>(p.N));
    LoopSettings s{p.eta, p.beta, p.M, p.N, p.gamma};
    return run_loop(mdp, features, schedule, T, s, seed, std::move(record), diagnostics);
}

ExperimentRecord run_linear_q_exploratory(const LayeredMDP& mdp, const FeatureMap& features,
                                          const LossSchedule& schedule, std::size_t T,
                                          const ExploratoryParams& params, std::uint64_t seed,
                                          LinearQDiagnostics* diagnostics) {
    const auto p = resolve(params, mdp, features, T);
    const Policy explorer = params.exploratory.value_or(Policy::uniform(mdp.layers()));
    ExperimentRecord record;
    record.algorithm = "linear-q-exploratory";
    record.set("T", static_cast<double>(T));
    record.set("lambda_min", p.lambda_min);
    record.set("delta_e", p.delta_e);
    record.set("epsilon", p.epsilon);
    record.set("eta", p.eta);
    record.set("beta", p.beta);
    record.set("M", static_cast<double>(p.M));
    record.set("N", static_cast<double>(p.N));
    LoopSettings s{p.eta, p.beta, p.M, p.N, 0.0, true, p.delta_e, &explorer};
    return run_loop(mdp, features, schedule, T, s, seed, std::move(record), diagnostics);
}

} // namespace dpo
