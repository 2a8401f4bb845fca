#include "doctest.h"
#include "helpers.hpp"

#include "dpo/envs.hpp"
#include "dpo/linear_mdp.hpp"
#include "dpo/oracles.hpp"
#include "dpo/record.hpp"

#include <cmath>

using namespace dpo;
using dpo::test::line_mdp;
using dpo::test::random_policy;

namespace {

// Layers {1,1,1}, two actions, d = 2; action a carries `norms[a]` along e_1.
FeatureMap chain_features(const LayerStructure& L, double n0, double n1) {
    std::vector<Vector> phi(L.num_states() * 2, Vector::Zero(2));
    for (StateId x = 0; x < L.num_decision_states(); ++x) {
        phi[x * 2] = Vector::Unit(2, 0) * n0;
        phi[x * 2 + 1] = Vector::Unit(2, 0) * n1;
    }
    return FeatureMap(L, 2, phi);
}

Matrix layer_second_moment(const LayerStructure& L, const FeatureMap& f, const OccupancyMeasure& q,
                           std::size_t h) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(f.dim()), static_cast<Eigen::Index>(f.dim()));
    for (std::size_t j = 0; j < L.layer_size(h); ++j)
        for (ActionId a = 0; a < L.num_actions(); ++a) {
            const StateId x = L.state(h, j);
            out += q(x, a) * f(x, a) * f(x, a).transpose();
        }
    return out;
}

Instance corridor(std::size_t A) {
    InstanceSpec spec;
    spec.layer_sizes = {1, 2, 1};
    spec.num_actions = A;
    spec.transitions = TransitionKind::two_corridor;
    spec.features = FeatureKind::two_corridor;
    return generate_instance(spec);
}

Instance low_rank(std::uint64_t seed) {
    InstanceSpec spec;
    spec.layer_sizes = {1, 3, 3, 1};
    spec.num_actions = 3;
    spec.transitions = TransitionKind::low_rank;
    spec.features = FeatureKind::low_rank;
    spec.feature_dim = 2;
    spec.seed = seed;
    return generate_instance(spec);
}

LinearMDPParams small_params() {
    LinearMDPParams p;
    p.M = 2;
    p.N = 3;
    p.M0 = 2;
    p.N0 = 5;
    p.xi = 0.5;
    return p;
}

} // namespace

TEST_CASE("ramp") {
    const double z = 0.2;
    CHECK(ramp(z, 0.5) == 1.0);
    CHECK(ramp(z, 0.0) == 1.0);
    CHECK(ramp(z, -2 * z) == 0.0);
    CHECK(ramp(z, -z / 2) == doctest::Approx(0.5));
    CHECK_THROWS_AS(ramp(0.0, 0.1), InputError);
    double prev = 0.0;
    for (double y = -0.5; y <= 0.5; y += 0.01) {
        const double r = ramp(z, y);
        CHECK(r >= prev);
        CHECK(r - prev <= 0.01 / z + 1e-12);
        prev = r;
    }
}

TEST_CASE("known set") {
    const auto mdp = line_mdp(2, 2);
    const auto& L = mdp.layers();
    const std::vector<Matrix> eye(2, Matrix::Identity(2, 2));

    const auto small = chain_features(L, std::sqrt(0.3), std::sqrt(0.3));
    const KnownSet k1(eye, small, 0.5);
    CHECK(k1(0));
    CHECK(k1(1));

    const auto mixed = chain_features(L, std::sqrt(0.3), std::sqrt(0.6));
    const KnownSet k2(eye, mixed, 0.5);
    CHECK_FALSE(k2(0));
    CHECK_FALSE(k2(1));
    CHECK(k2.size() == 1); // the terminal state

    // alpha >= sup ||phi||^2 ||Sigma^{-1}||
    const std::vector<Matrix> shrunk(2, 0.5 * Matrix::Identity(2, 2));
    const KnownSet k3(shrunk, mixed, 0.6 * 2.0);
    CHECK(k3.size() == L.num_states());

    const auto prob = unknown_probability(mdp, k2, Policy::uniform(L));
    CHECK(prob[0] == doctest::Approx(1.0));
    CHECK(prob[1] == doctest::Approx(1.0));
    CHECK_THROWS_AS(KnownSet(std::vector<Matrix>(2, -Matrix::Identity(2, 2)), mixed, 0.5),
                    StructuralError);
}

TEST_CASE("dilated tail and bonus weight estimate") {
    const double c = 0.4;
    Trajectory traj;
    traj.steps = {{0, 1, 0.2}, {1, 0, 0.3}};
    const auto mdp = line_mdp(2, 2);
    const auto& L = mdp.layers();
    StateActionTable b(L.num_states(), 2);
    b(1, 0) = b(1, 1) = c;
    CHECK(dilated_tail(traj, b, 0, 1.5) == doctest::Approx(1.5 * c));
    CHECK(dilated_tail(traj, b, 1, 1.5) == 0.0);

    const auto f = FeatureMap::one_hot(L);
    const Matrix S = Matrix::Identity(4, 4);
    const std::vector<WeightedEpisode> eps{{traj, false, 0}, {traj, true, 1}};
    // the second episode has weight 0 at h = 0
    const Vector lam0 = lambda_estimate(S, f, eps, b, 0);
    CHECK(lam0(1) == doctest::Approx(1.5 * c / 2));
    CHECK(lam0.sum() == doctest::Approx(1.5 * c / 2));
    CHECK(lambda_estimate(S, f, eps, b, 1).norm() == 0.0);
    CHECK(lambda_estimate(S, f, eps, StateActionTable(L.num_states(), 2), 0).norm() == 0.0);

    // h = 1: weights 1 and H = 2, loss-to-go 0.3 at pair (1,0)
    const Vector th1 = theta_estimate_batch(S, f, eps, 1);
    CHECK(th1(2) == doctest::Approx((0.3 + 2 * 0.3) / 2));
    CHECK(theta_estimate_batch(S, f, {}, 0).norm() == 0.0);
}

TEST_CASE("gated bonus is zero off the known set") {
    const auto inst = low_rank(3);
    const auto& L = inst.mdp.layers();
    Rng rng(5);
    const auto pi = random_policy(L, rng);
    CovInverseEstimate sigma;
    sigma.per_layer.assign(L.horizon(), Matrix::Identity(2, 2) * 2.0);
    std::vector<Matrix> cov(L.horizon(), Matrix::Identity(2, 2));
    // alpha between the smallest and largest squared norm splits the states
    double lo = 1e9, hi = 0.0;
    for (StateId x = 0; x < L.num_decision_states(); ++x) {
        double worst = 0.0;
        for (ActionId a = 0; a < 3; ++a) worst = std::max(worst, inst.features(x, a).squaredNorm());
        lo = std::min(lo, worst);
        hi = std::max(hi, worst);
    }
    REQUIRE(lo < hi);
    const KnownSet known(cov, inst.features, 0.5 * (lo + hi));
    const auto b = gated_bonus(inst.features, sigma, pi, known, 0.1);
    std::size_t gated = 0;
    for (StateId x = 0; x < L.num_states(); ++x)
        for (ActionId a = 0; a < 3; ++a) {
            if (!known(x) || L.is_terminal(x)) {
                CHECK(b(x, a) == 0.0);
                ++gated;
                continue;
            }
            double avg = 0.0;
            for (ActionId c = 0; c < 3; ++c) avg += pi(x, c) * 2.0 * inst.features(x, c).squaredNorm();
            CHECK(b(x, a) == doctest::Approx(0.1 * 2.0 * inst.features(x, a).squaredNorm() + 0.1 * avg));
        }
    CHECK(gated > 3);
}

TEST_CASE("policy cover") {
    SUBCASE("first policy follows the ramp reward under the identity") {
        const auto mdp = line_mdp(3, 2);
        const auto& L = mdp.layers();
        const auto f = chain_features(L, 0.5, 0.9);
        // ramp(0.25 - 0.5) = 0 for action 0 and ramp(0.81 - 0.5) = 1 for action 1
        const auto cover = policy_cover(L, f, 1, 3, 0.5, 0.0, 1e-3, zero_loss_runner(mdp, 1));
        REQUIRE(cover.policies.size() == 1);
        for (StateId x = 0; x < L.num_decision_states(); ++x) CHECK(cover.policies[0](x, 1) == 1.0);
    }
    SUBCASE("identical features shrink monotonically") {
        const auto mdp = line_mdp(2, 2);
        const auto& L = mdp.layers();
        const auto f = chain_features(L, 0.8, 0.8);
        const auto cover = policy_cover(L, f, 4, 3, 0.1, 0.5, 1e-3, zero_loss_runner(mdp, 2));
        const Vector v = f(0, 0);
        double prev = 1e9;
        for (const auto& g : cover.gamma) {
            const double n2 = v.dot(g[0].ldlt().solve(v));
            CHECK(n2 < prev);
            prev = n2;
        }
    }
    SUBCASE("Loewner growth, floor, one-hot rows") {
        const auto inst = low_rank(11);
        const auto& L = inst.mdp.layers();
        const auto cover = policy_cover(L, inst.features, 5, 4, 0.3, 1.0, 1e-2,
                                        zero_loss_runner(inst.mdp, 3));
        REQUIRE(cover.gamma.size() == 6);
        for (std::size_t m = 1; m < cover.gamma.size(); ++m)
            for (std::size_t h = 0; h < L.horizon(); ++h)
                CHECK(min_eigenvalue(cover.gamma[m][h] - cover.gamma[m - 1][h]) > -1e-12);
        for (const auto& S : cover.sigma_cov) {
            CHECK((S - S.transpose()).norm() < 1e-14);
            CHECK(min_eigenvalue(S - Matrix::Identity(2, 2) / 5.0) > -1e-12);
        }
        for (const auto& pi : cover.policies)
            for (StateId x = 0; x < L.num_decision_states(); ++x) {
                double mx = 0.0;
                for (ActionId a = 0; a < 3; ++a) mx = std::max(mx, pi(x, a));
                CHECK(mx == 1.0);
            }
        const auto again = policy_cover(L, inst.features, 5, 4, 0.3, 1.0, 1e-2,
                                        zero_loss_runner(inst.mdp, 3));
        for (std::size_t h = 0; h < L.horizon(); ++h) CHECK(again.sigma_cov[h] == cover.sigma_cov[h]);
    }
}

TEST_CASE("exploration mixes the cover covariance into the sampling covariance") {
    const auto inst = low_rank(21);
    const auto& mdp = inst.mdp;
    const auto& L = mdp.layers();
    Rng rng(22);
    const std::size_t M0 = 3;
    std::vector<Policy> cover;
    for (std::size_t m = 0; m < M0; ++m) cover.push_back(random_policy(L, rng));
    const auto pi_k = random_policy(L, rng);
    const double de = 0.2;

    // sampling law of an S episode, by path enumeration over every branch of (Y, m)
    std::vector<Matrix> sampled(L.horizon(), Matrix::Zero(2, 2));
    const auto q_main = oracle_occupancy_enum(mdp, pi_k);
    for (std::size_t h = 0; h < L.horizon(); ++h) {
        sampled[h] += (1 - de) * layer_second_moment(L, inst.features, q_main, h);
        for (const auto& pm : cover)
            sampled[h] += de / M0 * layer_second_moment(L, inst.features, oracle_occupancy_enum(mdp, pm), h);
    }
    const auto laws_k = feature_laws(mdp, inst.features, pi_k);
    for (std::size_t h = 0; h < L.horizon(); ++h) {
        Matrix cov = Matrix::Zero(2, 2);
        for (const auto& pm : cover) cov += feature_laws(mdp, inst.features, pm)[h].second_moment() / M0;
        const Matrix expected = de * cov + (1 - de) * laws_k[h].second_moment();
        CHECK((sampled[h] - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("linear-mdp parameters") {
    LinearMDPParams p;
    const auto r = resolve(LinearMDPParams{.M = 4, .N = 3, .M0 = 2, .N0 = 5}, 2, 2, 100);
    CHECK(r.delta_e == 0.1);
    CHECK(r.beta == 0.03);
    CHECK(r.gamma == doctest::Approx(36 * 0.03 * 0.03 / 0.1));
    CHECK(r.eta == doctest::Approx(std::min(r.gamma / 256.0, 0.03 / 640.0)));
    CHECK(r.alpha == doctest::Approx(0.1 / 0.18));
    CHECK(r.W == 24);
    CHECK(r.T0 == 10);
    CHECK(r.xi == doctest::Approx(60 * 2 * 2 * std::sqrt(std::log(100 / 0.01))));
    CHECK_THROWS_AS(resolve(LinearMDPParams{.M = 4, .N = 3, .M0 = 2, .N0 = 5}, 2, 2, 33), ConfigError);

    // formula path for the cover sizes
    const auto f = resolve(LinearMDPParams{.M = 1, .N = 1, .xi = 1.0}, 2, 2, 1000000000000ULL);
    CHECK(f.M0 == static_cast<std::size_t>(std::ceil(f.alpha * f.alpha * 8)));
    const double m0 = static_cast<double>(f.M0);
    CHECK(static_cast<double>(f.N0) ==
          doctest::Approx(std::ceil(100 * std::pow(m0, 4) * std::log(1e12 / 0.01) / (f.alpha * f.alpha))));
    CHECK_THROWS_AS(resolve(LinearMDPParams{.delta_e = 0.0}, 2, 2, 100), ConfigError);
    (void)p;
}

TEST_CASE("linear-mdp run") {
    const auto inst = low_rank(31);
    LossScheduleSpec ls;
    ls.seed = 4;
    const std::size_t T = 60;
    const auto schedule = LossSchedule(inst.mdp.layers(), ls, T).linear_in(inst.features);
    const auto p = small_params();

    LinearMDPDiagnostics d;
    const auto a = run_linear_mdp(inst.mdp, inst.features, schedule, T, p, 9, &d);
    const auto b = run_linear_mdp(inst.mdp, inst.features, schedule, T, p, 9);
    CHECK(a == b);
    REQUIRE(a.rows.size() == T);
    CHECK(d.epochs == (T - 10) / 12);
    CHECK(d.warnings.empty());
    CHECK(d.gate_violations == 0);
    CHECK(d.max_b <= 1.0);
    CHECK(d.max_b_known_visited <= d.max_b);
    CHECK(d.lambda_min_cov.size() == 3);

    // every epoch splits evenly
    const auto in_s = a.extra_index("in_S");
    for (std::size_t k = 1; k <= d.epochs; ++k) {
        std::size_t s = 0, total = 0;
        for (const auto& row : a.rows)
            if (row.epoch == k) {
                ++total;
                s += row.extras[in_s] > 0.5;
            }
        CHECK(total == 12);
        CHECK(s == 6);
    }
    // cover episodes run the real schedule and report the exact value of their policy
    for (std::size_t t = 0; t < 10; ++t) CHECK(a.rows[t].epoch == 0);

    const auto other = run_linear_mdp(inst.mdp, inst.features, schedule, T, p, 10);
    CHECK_FALSE(other == a);
}

TEST_CASE("linear-mdp without exploration") {
    const auto inst = low_rank(41);
    LossScheduleSpec ls;
    ls.seed = 5;
    const std::size_t T = 34;
    const auto schedule = LossSchedule(inst.mdp.layers(), ls, T).linear_in(inst.features);
    auto p = small_params();
    p.delta_e = 0.0;
    p.gamma = 0.1;
    LinearMDPDiagnostics d;
    const auto rec = run_linear_mdp(inst.mdp, inst.features, schedule, T, p, 1, &d);
    const auto col = rec.extra_index("explore");
    for (std::size_t t = 10; t < T; ++t) CHECK(rec.rows[t].extras[col] == 0.0);
    // alpha = 0 leaves nothing known, so every bonus is gated off
    CHECK(d.max_b == 0.0);
    CHECK(d.epochs == 2);
}
