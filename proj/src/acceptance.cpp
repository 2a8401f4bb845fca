#include "dpo/acceptance.hpp"

#include "dpo/bonus.hpp"
#include "dpo/envs.hpp"
#include "dpo/geometric_resampling.hpp"
#include "dpo/harness.hpp"
#include "dpo/linear_mdp.hpp"
#include "dpo/linear_q.hpp"
#include "dpo/oracles.hpp"
#include "dpo/tabular.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>

namespace dpo {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

template <class... Args>
std::string cat(const Args&... args) {
    std::ostringstream out;
    out << std::setprecision(6);
    (out << ... << args);
    return out.str();
}

Policy random_policy(const LayerStructure& L, Rng& rng) {
    StateActionTable t(L.num_states(), L.num_actions());
    for (StateId x = 0; x < L.num_states(); ++x) {
        const auto p = sample_dirichlet(L.num_actions(), 1.0, rng);
        std::copy(p.begin(), p.end(), t.row(x).begin());
    }
    return Policy(t);
}

StateActionTable random_table(const LayerStructure& L, Rng& rng, double scale) {
    StateActionTable t(L.num_states(), L.num_actions());
    for (StateId x = 0; x < L.num_decision_states(); ++x)
        for (ActionId a = 0; a < L.num_actions(); ++a) t(x, a) = scale * rng.uniform();
    return t;
}

LayeredMDP random_mdp(std::vector<std::size_t> sizes, std::size_t A, std::uint64_t seed,
                      double concentration = 1.0) {
    InstanceSpec spec;
    spec.layer_sizes = std::move(sizes);
    spec.num_actions = A;
    spec.concentration = concentration;
    spec.seed = seed;
    return generate_instance(spec).mdp;
}

Instance low_rank_instance(std::vector<std::size_t> sizes, std::size_t A, std::uint64_t seed) {
    InstanceSpec spec;
    spec.layer_sizes = std::move(sizes);
    spec.num_actions = A;
    spec.transitions = TransitionKind::low_rank;
    spec.features = FeatureKind::low_rank;
    spec.feature_dim = 2;
    spec.seed = seed;
    return generate_instance(spec);
}

// Runtime-guard tallies shared by every run that counts toward criterion 7.
struct GuardTally {
    std::size_t runs = 0;
    std::size_t tabular_estimate = 0, tabular_bonus = 0;
    std::size_t linear_theta = 0, linear_bonus = 0;
    double max_eta_estimate = 0.0, max_eta_bonus_tabular = 0.0;
    double max_eta_theta = 0.0, max_eta_bonus_linear = 0.0;

    void add(const TabularDiagnostics& d) {
        ++runs;
        tabular_estimate += d.estimate_guard_violations;
        tabular_bonus += d.bonus_guard_violations;
        max_eta_estimate = std::max(max_eta_estimate, d.max_eta_estimate);
        max_eta_bonus_tabular = std::max(max_eta_bonus_tabular, d.max_eta_bonus);
    }
    void add(const LinearQDiagnostics& d) {
        ++runs;
        linear_theta += d.theta_guard_violations;
        linear_bonus += d.bonus_guard_violations;
        max_eta_theta = std::max(max_eta_theta, d.max_eta_theta);
        max_eta_bonus_linear = std::max(max_eta_bonus_linear, d.max_eta_bonus);
    }
    std::size_t total() const { return tabular_estimate + tabular_bonus + linear_theta + linear_bonus; }
};

std::mutex tally_mutex;
GuardTally& tally() {
    static GuardTally t;
    return t;
}
void record_guards(const auto& diag) {
    std::lock_guard lock(tally_mutex);
    tally().add(diag);
}

// --- 1 ---------------------------------------------------------------------

CriterionResult greedy_vs_oracle(bool quick) {
    const std::size_t n = quick ? 1000 : 10000;
    Rng rng(101);
    double worst = 0.0;
    std::size_t bad = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = 1 + rng.uniform_index(5);
        const auto p = sample_dirichlet(k, 0.5 + rng.uniform(), rng);
        std::vector<double> f(k), e(k);
        for (auto& v : f) v = rng.uniform() * 2.0 - 0.5;
        for (auto& v : e) v = rng.uniform() < 0.2 ? 0.0 : rng.uniform() * 0.6;
        if (k > 2 && rng.bernoulli(0.25)) f[1] = f[0];
        for (Optimize o : {Optimize::max, Optimize::min}) {
            const double gap = std::abs(greedy_redistribute(f, p, e, o) - oracle_polytope_optimum(f, p, e, o));
            worst = std::max(worst, gap);
            bad += gap > 1e-9;
        }
    }
    return {1, "greedy vs oracle", bad == 0,
            cat(n, " instances, ", bad, " disagreements, max gap ", worst)};
}

// --- 2 ---------------------------------------------------------------------

struct SandwichData {
    std::size_t runs = 0, checks = 0, violations = 0, inside = 0;
};

const SandwichData& sandwich_runs(bool quick) {
    static std::optional<SandwichData> cache;
    if (cache) return *cache;
    const std::size_t runs = quick ? 8 : 50, T = 2000;
    std::vector<TabularDiagnostics> diags(runs);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < runs; ++i) {
        Rng meta(7000 + i);
        const std::vector<std::size_t> sizes{1, 1 + meta.uniform_index(3), 1 + meta.uniform_index(3), 1};
        const auto mdp = random_mdp(sizes, 2 + meta.uniform_index(2), 7000 + i);
        LossScheduleSpec ls;
        ls.kind = LossKind::iid;
        ls.seed = i;
        const LossSchedule schedule(mdp.layers(), ls, T);
        run_tabular(mdp, schedule, T, TabularParams{}, 1 + i, &diags[i]);
    }
    SandwichData data;
    data.runs = runs;
    for (const auto& d : diags) {
        data.checks += d.sandwich_checks;
        data.violations += d.sandwich_violations;
        data.inside += d.episodes_true_kernel_inside;
        record_guards(d);
    }
    cache = data;
    return *cache;
}

CriterionResult occupancy_sandwich(bool quick) {
    const auto& d = sandwich_runs(quick);
    return {2, "occupancy sandwich", d.violations == 0 && d.checks > 0,
            cat(d.runs, " runs of T=2000, ", d.inside, " episodes with P inside the set, ", d.checks,
                " checks, ", d.violations, " violations")};
}

// --- 3 ---------------------------------------------------------------------

CriterionResult estimator_bias(bool quick) {
    const std::size_t n = quick ? 20000 : 100000;
    const auto mdp = random_mdp({1, 2, 2, 1}, 2, 303);
    const auto& L = mdp.layers();
    Rng rng(304);
    const auto pi = random_policy(L, rng);
    const auto loss = random_table(L, rng, 1.0);
    const auto bounds = occupancy_bounds(pi, ConfidenceSet::exact(mdp));
    const auto Q = evaluate(mdp, pi, loss).Q;

    std::size_t bad_unbiased = 0, bad_shrunk = 0;
    double worst_z = 0.0;
    for (double gamma : {0.0, 0.05}) {
        StateActionTable sum(L.num_states(), 2), sq(L.num_states(), 2);
        for (std::size_t i = 0; i < n; ++i) {
            const auto est = q_estimate(sample_episode(mdp, pi, loss, 5000 + i), bounds.upper, gamma);
            for (std::size_t k = 0; k < est.values().size(); ++k) {
                sum.values()[k] += est.values()[k];
                sq.values()[k] += est.values()[k] * est.values()[k];
            }
        }
        const double nd = static_cast<double>(n);
        for (StateId x = 0; x < L.num_decision_states(); ++x)
            for (ActionId a = 0; a < 2; ++a) {
                const double mean = sum(x, a) / nd;
                const double se = std::sqrt(std::max(sq(x, a) / nd - mean * mean, 0.0) / nd);
                if (gamma == 0.0) {
                    worst_z = std::max(worst_z, std::abs(mean - Q(x, a)) / se);
                    bad_unbiased += std::abs(mean - Q(x, a)) > 3.0 * se;
                } else {
                    bad_shrunk += mean > Q(x, a) + 3.0 * se;
                }
            }
    }
    return {3, "estimator bias", bad_unbiased == 0 && bad_shrunk == 0,
            cat(n, " episodes per gamma; gamma=0: ", bad_unbiased, " pairs outside 3 SE (max |z| ",
                worst_z, "); gamma=0.05: ", bad_shrunk, " pairs above Q + 3 SE")};
}

// --- 4 ---------------------------------------------------------------------

CriterionResult dilation_sandwich(bool) {
    std::size_t violations = 0, e_bound = 0;
    Rng meta(404);
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const std::size_t depth = 1 + meta.uniform_index(4);
        std::vector<std::size_t> sizes{1};
        for (std::size_t h = 0; h < depth; ++h) sizes.push_back(1 + meta.uniform_index(3));
        sizes.push_back(1);
        const auto mdp = random_mdp(sizes, 1 + meta.uniform_index(3), 4000 + seed, 0.3 + meta.uniform());
        Rng rng(9000 + seed);
        const auto pi = random_policy(mdp.layers(), rng);
        const auto report = check_dilation_sandwich(mdp, pi, random_table(mdp.layers(), rng, 2.0));
        violations += report.violations;
        e_bound += !report.within_e_bound;
    }
    double worst = 0.0;
    for (std::size_t H = 1; H <= 6; ++H) {
        std::vector<std::size_t> sizes(H + 1, 2);
        sizes.front() = sizes.back() = 1;
        const auto mdp = random_mdp(sizes, 2, 50 + H);
        const auto& L = mdp.layers();
        Rng rng(60 + H);
        const auto pi = random_policy(L, rng);
        const double c = 0.37;
        StateActionTable b(L.num_states(), 2);
        for (StateId x = 0; x < L.num_decision_states(); ++x) b(x, 0) = b(x, 1) = c;
        double closed = 0.0;
        for (std::size_t h = 0; h < H; ++h) closed += std::pow(1.0 + 1.0 / static_cast<double>(H), h) * c;
        worst = std::max(worst, std::abs(dilated_value(mdp, pi, b) - closed));
    }
    return {4, "dilation sandwich", violations == 0 && e_bound == 0 && worst <= 1e-12,
            cat("500 instances, ", violations, " violations, ", e_bound,
                " e-bound failures; constant-bonus max error ", worst)};
}

// --- 5 ---------------------------------------------------------------------

CriterionResult resampling(bool quick) {
    // (a) one constant feature: every sample agrees, so the output is the series itself
    const FeatureSamples constant(4 * 2, std::vector<Vector>{Vector::Ones(1)});
    const auto est = geometric_resampling(constant, 4, 2, 0.5);
    FeatureLaw one;
    one.support = {Vector::Ones(1)};
    one.weights = {1.0};
    const double closed = 0.5 * (1.0 + 0.25 + 0.0625); // c sum_{n<=N} (1 - c Y)^n, Y = 1.5
    const double err_a = std::max(std::abs(est[0](0, 0) - closed),
                                  std::abs(oracle_expected_sigma_plus(one, 0.5, 2)(0, 0) - closed));

    // (b) analytic bias and (c) sampled norm bound
    Rng rng(505);
    const std::size_t laws = 100;
    double worst_bias = 0.0, worst_norm_ratio = 0.0;
    std::size_t bias_fail = 0, norm_fail = 0, outputs = 0;
    for (std::size_t i = 0; i < laws; ++i) {
        const std::size_t d = 1 + rng.uniform_index(3), support = 1 + rng.uniform_index(5);
        FeatureLaw law;
        for (std::size_t k = 0; k < support; ++k) {
            Vector v(static_cast<Eigen::Index>(d));
            for (auto& e : v) e = rng.uniform() * 2.0 - 1.0;
            law.support.push_back(v / std::max(1.0, v.norm()));
        }
        law.weights = sample_dirichlet(support, 1.0, rng);
        const double gamma = 0.05 + 0.4 * rng.uniform();
        const auto gp = gr_parameters(0.1, gamma, d, 2, 100);
        const double bias = op_norm_symmetric(oracle_expected_sigma_plus(law, gamma, gp.N) -
                                              oracle_regularized_inverse(law, gamma));
        worst_bias = std::max(worst_bias, bias);
        bias_fail += bias > 0.1;

        const std::size_t M = quick ? 4 : 16;
        FeatureSamples samples(M * gp.N);
        for (auto& s : samples) s = {law.support[rng.categorical(law.weights)]};
        const auto sampled = geometric_resampling(samples, M, gp.N, gamma);
        const double bound = std::min(1.0 / gamma, 0.5 * static_cast<double>(gp.N + 1));
        const double norm = sampled.op_norm(0);
        worst_norm_ratio = std::max(worst_norm_ratio, norm / bound);
        norm_fail += norm > bound * (1.0 + 1e-12);
        ++outputs;
    }
    const bool pass = err_a <= 1e-12 && bias_fail == 0 && norm_fail == 0;
    return {5, "geometric resampling", pass,
            cat("(a) error ", err_a, "; (b) ", laws, " laws, max bias ", worst_bias, ", ", bias_fail,
                " above 0.1; (c) ", outputs, " outputs, max norm/bound ", worst_norm_ratio)};
}

// --- 6 ---------------------------------------------------------------------

void push_fixed(LinearQLearner& learner, std::size_t episodes, std::uint64_t seed) {
    const auto& L = learner.features().layers();
    const auto d = static_cast<Eigen::Index>(learner.features().dim());
    Rng rng(seed);
    for (std::size_t t = 0; t < episodes; ++t) {
        CovInverseEstimate e;
        std::vector<Vector> theta;
        for (std::size_t h = 0; h < L.horizon(); ++h) {
            Matrix A(d, d);
            for (auto& v : A.reshaped()) v = rng.uniform() * 2.0 - 1.0;
            e.per_layer.push_back(0.2 * (A * A.transpose()) / static_cast<double>(d) +
                                  0.1 * Matrix::Identity(d, d));
            Vector th(d);
            for (auto& v : th) v = rng.uniform();
            theta.push_back(th);
        }
        learner.push_episode(std::move(e), std::move(theta));
    }
}

CriterionResult virtual_process(bool) {
    const auto mdp = random_mdp({1, 2, 3, 2, 1}, 2, 606);
    const auto& L = mdp.layers();
    const auto f = FeatureMap::one_hot(L);
    LinearQLearner a(mdp, f, 0.3, 0.05, 607);
    push_fixed(a, 8, 1);
    LinearQLearner b(mdp, f, 0.3, 0.05, 607);
    push_fixed(b, 8, 1);
    const std::size_t K = 8;

    std::vector<double> forward, backward;
    for (std::size_t t = 1; t <= K; ++t)
        for (StateId x = 0; x < L.num_states(); ++x)
            for (ActionId c = 0; c < 2; ++c) forward.push_back(a.bonus(t, x, c));
    // reverse order, deepest state first
    for (std::size_t t = K; t >= 1; --t)
        for (StateId x = L.num_states(); x-- > 0;)
            for (ActionId c = 2; c-- > 0;) backward.push_back(b.bonus(t, x, c));
    std::reverse(backward.begin(), backward.end());
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < forward.size(); ++i) mismatches += forward[i] != backward[i];

    // second pass over every key hits the memo
    LinearQLearner fresh(mdp, f, 0.3, 0.05, 608);
    push_fixed(fresh, K, 2);
    auto pass_calls = [&] {
        const auto before = fresh.simulator().calls();
        for (std::size_t t = 1; t <= K; ++t)
            for (StateId x = 0; x < L.num_states(); ++x)
                for (ActionId c = 0; c < 2; ++c) fresh.bonus(t, x, c);
        return fresh.simulator().calls() - before;
    };
    const auto first = pass_calls(), second = pass_calls();
    return {6, "virtual-process determinism", mismatches == 0 && second < first,
            cat(forward.size(), " keys, ", mismatches, " mismatches between orders; simulator calls ",
                first, " on the first pass, ", second, " on the second")};
}

// --- 8 (before 7, which also tallies its runs) -----------------------------

struct SublinearData {
    RegretReport report;
    double uniform_final = 0.0;
    double seconds = 0.0;
};

const SublinearData& sublinear_runs() {
    static std::optional<SublinearData> cache;
    if (cache) return *cache;
    const auto start = Clock::now();
    const RunConfig config = parse_config(tabular_switching_config());
    const auto problem_instance = generate_instance(config.instance);
    const LossSchedule schedule(problem_instance.mdp.layers(), config.losses, config.T);
    std::vector<TabularDiagnostics> diags(config.seeds.size());
    std::vector<ExperimentRecord> records(config.seeds.size());
#pragma omp parallel for schedule(dynamic) num_threads(worker_count())
    for (std::size_t i = 0; i < config.seeds.size(); ++i)
        records[i] = run_tabular(problem_instance.mdp, schedule, config.T, config.tabular,
                                 config.seeds[i], &diags[i]);
    for (const auto& d : diags) record_guards(d);
    SublinearData data;
    data.report = regret_report(records);
    data.uniform_final = uniform_regret_curve(problem_instance.mdp, schedule, records[0]).back();
    data.seconds = seconds_since(start);
    cache = data;
    return *cache;
}

CriterionResult tabular_sublinearity(bool) {
    const auto& d = sublinear_runs();
    const auto& r = d.report;
    const double mean = r.mean.back();
    const bool ratio_ok = mean <= 0.6 * d.uniform_final;
    // checkpoints are T/8, T/4, T/2, T
    const bool decreasing = r.ratio[1] > r.ratio[2] && r.ratio[2] > r.ratio[3];
    const bool fast = d.seconds < 300.0;
    return {8, "tabular sublinearity", ratio_ok && decreasing && fast,
            cat(r.seeds, " seeds, T=", r.T, ": mean regret ", mean, " vs uniform ", d.uniform_final,
                " (ratio ", mean / d.uniform_final, ", limit 0.6); regret/t at T/4, T/2, T = ",
                r.ratio[1], ", ", r.ratio[2], ", ", r.ratio[3], decreasing ? " (decreasing)" : " (NOT decreasing)",
                "; ", d.seconds, " s"),
            d.seconds};
}

// --- 7 ---------------------------------------------------------------------

CriterionResult runtime_guards(bool quick) {
    // tabular acceptance runs
    sandwich_runs(quick);
    sublinear_runs();

    // linear-Q: default step sizes and scales; M (and N) made tractable
    {
        const auto mdp = random_mdp({1, 2, 1}, 2, 707);
        const auto f = FeatureMap::one_hot(mdp.layers());
        const std::size_t T = quick ? 40 : 120;
        LossScheduleSpec ls;
        ls.seed = 708;
        const auto schedule = LossSchedule(mdp.layers(), ls, T).linear_in(f);
        LinearQParams p;
        p.M = 1;
        LinearQDiagnostics d;
        run_linear_q(mdp, f, schedule, T, p, 709, &d);
        record_guards(d);
    }
    {
        const auto inst = low_rank_instance({1, 2, 2, 1}, 3, 710);
        const std::size_t T = quick ? 40 : 120;
        LossScheduleSpec ls;
        ls.seed = 711;
        const auto schedule = LossSchedule(inst.mdp.layers(), ls, T).linear_in(inst.features);
        ExploratoryParams p;
        p.M = 1;
        LinearQDiagnostics d;
        run_linear_q_exploratory(inst.mdp, inst.features, schedule, T, p, 712, &d);
        record_guards(d);
    }
    const auto& t = tally();
    return {7, "runtime guards", t.total() == 0,
            cat(t.runs, " runs; tabular eta*Qhat violations ", t.tabular_estimate, " (max ", t.max_eta_estimate,
                "), eta*B ", t.tabular_bonus, " (max ", t.max_eta_bonus_tabular, "); linear eta|phi theta| ",
                t.linear_theta, " (max ", t.max_eta_theta, "), eta*Bonus ", t.linear_bonus, " (max ",
                t.max_eta_bonus_linear, ")")};
}

// --- 9 ---------------------------------------------------------------------

CriterionResult linear_mdp_bonus(bool quick) {
    const auto inst = low_rank_instance({1, 3, 3, 1}, 3, 909);
    // alpha = delta_e/(6 beta) = 5 so that reachable states become known;
    // gamma stays at its floor 36 beta^2/delta_e and eta at its default
    LinearMDPParams p;
    p.delta_e = 0.3;
    p.beta = 0.01;
    p.M = 8;
    p.N = 100;
    p.N0 = 4;
    const auto r = resolve(p, inst.features.dim(), inst.mdp.horizon(), 1000000);
    const std::size_t epochs = quick ? 3 : 8;
    const std::size_t T = r.T0 + epochs * r.W;
    LossScheduleSpec ls;
    ls.seed = 910;
    const auto schedule = LossSchedule(inst.mdp.layers(), ls, T).linear_in(inst.features);
    LinearMDPDiagnostics d;
    run_linear_mdp(inst.mdp, inst.features, schedule, T, p, 911, &d);
    const bool conditions = r.gamma >= 36.0 * r.beta * r.beta / r.delta_e * (1 - 1e-12) &&
                            r.beta * r.epsilon <= 0.125;
    return {9, "linear-MDP bonus bound",
            conditions && d.known_visits > 0 && d.max_b_known_visited <= 1.0 && d.gate_violations == 0,
            cat("gamma ", r.gamma, ", beta ", r.beta, ", delta_e ", r.delta_e, ", eps ", r.epsilon, "; ",
                d.epochs, " epochs, ", d.known_states, " known states, ", d.known_visits,
                " visited known pairs, max b over them ", d.max_b_known_visited, ", max b overall ",
                d.max_b, ", gate violations ", d.gate_violations)};
}

// --- 10 --------------------------------------------------------------------

CriterionResult cover_coverage(bool) {
    InstanceSpec spec;
    spec.layer_sizes = {1, 2, 1};
    spec.num_actions = 8;
    spec.transitions = TransitionKind::two_corridor;
    spec.features = FeatureKind::two_corridor;
    const auto inst = generate_instance(spec);
    const auto& L = inst.mdp.layers();
    const double alpha = 2.0, xi = 0.5;
    const std::size_t d = 2, H = L.horizon(), T = 10000, N0 = 4;
    const auto M0 = static_cast<std::size_t>(std::ceil(alpha * alpha * static_cast<double>(d * H * H)));

    const auto cover = policy_cover(L, inst.features, M0, N0, alpha, xi, 1.0 / static_cast<double>(T),
                                    zero_loss_runner(inst.mdp, 1001));
    const auto baseline = fixed_policy_covariance(L, inst.features, Policy::uniform(L), M0, N0,
                                                  zero_loss_runner(inst.mdp, 1002));
    const double lc = min_eigenvalue(cover.sigma_cov[1]), lu = min_eigenvalue(baseline[1]);

    const KnownSet known(cover.sigma_cov, inst.features, alpha);
    Rng rng(1003);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto probe = unknown_probability(inst.mdp, known, random_policy(L, rng));
        double total = 0.0;
        for (double v : probe) total += v;
        worst = std::max(worst, std::min(total, 1.0));
    }
    const double bound = 10.0 * static_cast<double>(d * H) / alpha;
    return {10, "policy-cover coverage", lc >= 2.0 * lu && worst <= bound,
            cat("M0=", M0, ", N0=", N0, ": lambda_min of the layer-1 cover covariance ", lc, " vs uniform ", lu,
                " (x", lc / lu, "); max Pr[unknown] over 100 probes ", worst, " (limit ", bound, ")")};
}

// --- 11 --------------------------------------------------------------------

CriterionResult exploratory_identity(bool) {
    const auto mdp = random_mdp({1, 2, 1}, 2, 1101);
    const auto& L = mdp.layers();
    const std::size_t H = L.horizon();
    const auto f = FeatureMap::one_hot(L);
    const auto d = static_cast<Eigen::Index>(f.dim());
    Rng rng(1102);
    const auto pi = random_policy(L, rng), pi0 = random_policy(L, rng);
    const auto loss = random_table(L, rng, 1.0);
    const double de = 0.3;

    // E[w phi_h L_h] over (Y, h*, trajectory), by enumerating the outcome tree
    std::vector<Vector> lhs(H, Vector::Zero(d));
    auto accumulate = [&](const Policy& run, double branch, bool explore, std::size_t h_star) {
        std::vector<std::pair<StateId, ActionId>> path;
        std::function<void(StateId, double)> walk = [&](StateId x, double p) {
            if (L.is_terminal(x)) {
                for (std::size_t h = 0; h < H; ++h) {
                    double tail = 0.0;
                    for (std::size_t i = h; i < H; ++i) tail += loss(path[i].first, path[i].second);
                    const auto [xs, as] = path[h];
                    lhs[h] += branch * p * estimator_weight(explore, h, h_star, H) * tail * f(xs, as);
                }
                return;
            }
            for (ActionId a = 0; a < L.num_actions(); ++a)
                for (StateId y = 0; y < L.num_states(); ++y) {
                    const double q = run(x, a) * mdp.transition(x, a, y);
                    if (q == 0.0) continue;
                    path.emplace_back(x, a);
                    walk(y, p * q);
                    path.pop_back();
                }
        };
        walk(L.initial_state(), 1.0);
    };
    accumulate(pi, 1 - de, false, 0);
    for (std::size_t hs = 0; hs < H; ++hs)
        accumulate(explore_rollin(L, pi0, pi, hs), de / static_cast<double>(H), true, hs);

    const auto Q = evaluate(mdp, pi, loss).Q;
    Vector theta(d);
    for (StateId x = 0; x < L.num_decision_states(); ++x)
        for (ActionId a = 0; a < L.num_actions(); ++a) theta(static_cast<Eigen::Index>(x * L.num_actions() + a)) = Q(x, a);
    const auto laws_pi = feature_laws(mdp, f, pi), laws_0 = feature_laws(mdp, f, pi0);
    double worst = 0.0;
    for (std::size_t h = 0; h < H; ++h) {
        const Matrix mix = (1 - de) * laws_pi[h].second_moment() + de * laws_0[h].second_moment();
        worst = std::max(worst, (lhs[h] - mix * theta).cwiseAbs().maxCoeff());
    }
    return {11, "exploratory unbiasedness", worst <= 1e-9, cat("max entry error ", worst, " over ", H, " layers")};
}

} // namespace

nlohmann::json tabular_switching_config() {
    return {{"algorithm", "tabular"},
            {"T", 20000},
            {"instance", {{"layers", {1, 2, 1}}, {"actions", 2}, {"transitions", "dirichlet"}, {"seed", 1}}},
            {"losses", {{"kind", "switching"}, {"gap", 0.5}, {"seed", 1}}},
            {"params", nlohmann::json::object()},
            {"seeds", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}},
            {"output", {{"dir", "runs/tabular_switching"}}}};
}

CriterionResult run_criterion(int id, bool quick) {
    static const std::vector<std::function<CriterionResult(bool)>> table = {
        greedy_vs_oracle,    occupancy_sandwich, estimator_bias,   dilation_sandwich,
        resampling,          virtual_process,    runtime_guards,   tabular_sublinearity,
        linear_mdp_bonus,    cover_coverage,     exploratory_identity};
    if (id < 1 || id > kCriteria) throw InputError("no criterion " + std::to_string(id));
    const auto start = Clock::now();
    CriterionResult r;
    try {
        r = table[static_cast<std::size_t>(id - 1)](quick);
    } catch (const std::exception& e) {
        r = {id, "criterion " + std::to_string(id), false, std::string("threw: ") + e.what()};
    }
    // cached runs report the time they took when first computed
    r.seconds = std::max(r.seconds, seconds_since(start));
    return r;
}

std::vector<CriterionResult> run_acceptance(const std::vector<int>& ids, bool quick) {
    std::vector<int> order = ids;
    if (order.empty())
        for (int i = 1; i <= kCriteria; ++i) order.push_back(i);
    std::vector<CriterionResult> out;
    for (int id : order) out.push_back(run_criterion(id, quick));
    return out;
}

std::string format_result(const CriterionResult& r) {
    std::ostringstream out;
    out << (r.pass ? "[PASS] " : "[FAIL] ") << r.id << ' ' << r.name << " (" << std::fixed
        << std::setprecision(2) << r.seconds << " s): " << r.detail;
    return out.str();
}

} // namespace dpo
