#include "doctest.h"
#include "helpers.hpp"

#include "dpo/kernels.hpp"
#include "dpo/oracles.hpp"
#include "dpo/record.hpp"
#include "dpo/tabular.hpp"

#include <cmath>

using namespace dpo;
using dpo::test::random_mdp;
using dpo::test::random_policy;
using dpo::test::random_table;

namespace {

// Confidence set centered on the true kernel with widths drawn in [0, scale].
ConfidenceSet random_conf(const LayeredMDP& mdp, Rng& rng, double scale) {
    const auto& L = mdp.layers();
    std::vector<std::vector<double>> center, width;
    for (StateId x = 0; x < L.num_decision_states(); ++x)
        for (ActionId a = 0; a < L.num_actions(); ++a) {
            auto row = mdp.next_distribution(x, a);
            center.emplace_back(row.begin(), row.end());
            std::vector<double> w(row.size());
            for (double& v : w) v = scale * rng.uniform();
            width.push_back(std::move(w));
        }
    return ConfidenceSet(L, center, width);
}

// A kernel inside the polytope: random convex combination of vertices per row.
LayeredMDP kernel_inside(const ConfidenceSet& conf, Rng& rng) {
    const auto& L = conf.layers();
    std::vector<std::vector<double>> rows;
    for (StateId x = 0; x < L.num_decision_states(); ++x)
        for (ActionId a = 0; a < L.num_actions(); ++a) {
            auto verts = oracle_polytope_vertices(conf.center(x, a), conf.width(x, a));
            auto mix = sample_dirichlet(verts.size(), 1.0, rng);
            std::vector<double> row(verts.front().size(), 0.0);
            for (std::size_t v = 0; v < verts.size(); ++v)
                for (std::size_t j = 0; j < row.size(); ++j) row[j] += mix[v] * verts[v][j];
            rows.push_back(std::move(row));
        }
    return LayeredMDP(L, rows);
}

} // namespace

TEST_CASE("confidence width formula") {
    CHECK(confidence_width(0.25, 100, 4.0) == doctest::Approx(0.4 + 28.0 * 4.0 / 300.0).epsilon(1e-14));
    CHECK(confidence_width(0.25, 100, 4.0) == doctest::Approx(0.773333333333333).epsilon(1e-12));
    CHECK(confidence_width(0.0, 0, 0.05) == doctest::Approx(28.0 * 0.05 / 3.0).epsilon(1e-14));
    CHECK(confidence_width(0.3, 0, 4.0) == 1.0);
    double prev = 1.0;
    for (std::uint64_t n = 1; n < (1u << 24); n *= 2) {
        const double w = confidence_width(0.4, n, 4.0);
        CHECK(w <= prev);
        prev = w;
    }
    CHECK(prev < 0.01);
    CHECK(confidence_log_term(100, 4, 2, 0.01) == doctest::Approx(std::log(100.0 * 8 / 0.01)));
}

TEST_CASE("counters and epoch doubling") {
    auto mdp = dpo::test::line_mdp(2, 1);
    EpochCounters c(mdp.layers());
    StateActionTable loss(3, 1);
    auto pi = Policy::uniform(mdp.layers());
    // visits per pair after episode t are t; epochs start after t = 1, 2, 4, 8
    std::vector<std::size_t> bumps;
    for (std::size_t t = 1; t <= 10; ++t)
        if (c.record(sample_episode(mdp, pi, loss, t))) bumps.push_back(t);
    CHECK(bumps == std::vector<std::size_t>{1, 2, 4, 8});
    CHECK(c.epoch() == 5);
    CHECK(c.visits(0, 0) == 10);
    CHECK(c.transitions(0, 0)[0] == 10);
    CHECK(c.previous_visits(0, 0) == 8);
}

TEST_CASE("empirical confidence set") {
    auto mdp = random_mdp({1, 2, 3, 1}, 2, 3);
    EpochCounters c(mdp.layers());
    auto conf0 = confidence_widths(c, 100, 0.01);
    CHECK(conf0.width(0, 0)[0] == 1.0);
    CHECK(conf0.center(0, 0)[0] == 0.5);
    Rng rng(4);
    auto pi = random_policy(mdp.layers(), rng);
    for (int t = 0; t < 2000; ++t) c.record(sample_episode(mdp, pi, StateActionTable(7, 2), t));
    auto conf = confidence_widths(c, 2000, 0.01);
    const double L = confidence_log_term(2000, 7, 2, 0.01);
    for (StateId x = 0; x < 6; ++x)
        for (ActionId a = 0; a < 2; ++a) {
            const auto n = c.visits(x, a);
            double sum = 0.0;
            for (std::size_t j = 0; j < conf.center(x, a).size(); ++j) {
                sum += conf.center(x, a)[j];
                if (n > 0) {
                    const double p = static_cast<double>(c.transitions(x, a)[j]) / n;
                    CHECK(conf.center(x, a)[j] == doctest::Approx(p));
                    CHECK(conf.width(x, a)[j] == doctest::Approx(confidence_width(p, n, L)));
                }
            }
            CHECK(sum == doctest::Approx(1.0));
        }
    CHECK(ConfidenceSet::unconstrained(mdp.layers()).contains(mdp));
    CHECK(ConfidenceSet::exact(mdp).contains(mdp));
}

TEST_CASE("greedy redistribution") {
    const std::vector<double> f{0.0, 1.0}, p{0.5, 0.5}, e{0.2, 0.2};
    CHECK(greedy_redistribute(f, p, e, Optimize::max) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(greedy_redistribute(f, p, e, Optimize::min) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(oracle_polytope_optimum(f, p, e, Optimize::max) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(oracle_polytope_optimum(f, p, e, Optimize::min) == doctest::Approx(0.3).epsilon(1e-15));

    const std::vector<double> g{0.3, 0.9, 0.1}, q{0.2, 0.5, 0.3}, zero(3, 0.0);
    const double plain = 0.3 * 0.2 + 0.9 * 0.5 + 0.1 * 0.3;
    CHECK(greedy_redistribute(g, q, zero, Optimize::max) == doctest::Approx(plain).epsilon(1e-15));
    CHECK(greedy_redistribute(g, q, zero, Optimize::min) == doctest::Approx(plain).epsilon(1e-15));
}

TEST_CASE("greedy redistribution matches vertex enumeration") {
    Rng rng(99);
    for (int i = 0; i < 2000; ++i) {
        const std::size_t n = 1 + rng.uniform_index(6);
        auto p = sample_dirichlet(n, 0.5 + rng.uniform(), rng);
        std::vector<double> f(n), e(n);
        for (auto& v : f) v = rng.uniform() * 3.0 - 1.0;
        for (auto& v : e) v = rng.uniform() < 0.2 ? 0.0 : rng.uniform() * 0.6;
        // ties in f exercise the sort
        if (n > 2 && rng.bernoulli(0.3)) f[1] = f[0];
        const double mx = greedy_redistribute(f, p, e, Optimize::max);
        const double mn = greedy_redistribute(f, p, e, Optimize::min);
        CHECK(mx >= mn - 1e-12);
        CHECK(std::abs(mx - oracle_polytope_optimum(f, p, e, Optimize::max)) < 1e-9);
        CHECK(std::abs(mn - oracle_polytope_optimum(f, p, e, Optimize::min)) < 1e-9);
    }
}

TEST_CASE("occupancy bounds with zero widths equal the occupancy") {
    auto mdp = random_mdp({1, 3, 2, 1}, 2, 5);
    Rng rng(6);
    auto pi = random_policy(mdp.layers(), rng);
    auto q = occupancy(mdp, pi);
    auto b = occupancy_bounds(pi, ConfidenceSet::exact(mdp));
    for (std::size_t i = 0; i < q.q.values().size(); ++i) {
        CHECK(std::abs(b.upper.values()[i] - q.q.values()[i]) < 1e-12);
        CHECK(std::abs(b.lower.values()[i] - q.q.values()[i]) < 1e-12);
    }
}

TEST_CASE("occupancy bounds with full widths are reachability bounds") {
    auto mdp = random_mdp({1, 3, 2, 1}, 2, 8);
    const auto& L = mdp.layers();
    Rng rng(9);
    auto pi = random_policy(L, rng);
    auto conf = ConfidenceSet::unconstrained(L);
    for (StateId x = 0; x < L.num_decision_states(); ++x)
        for (ActionId a = 0; a < 2; ++a) {
            CHECK(comp_uob(pi, conf, x, a) ==
                  doctest::Approx(oracle_occupancy_bound(pi, conf, x, a, Optimize::max)).epsilon(1e-12));
            CHECK(comp_lob(pi, conf, x, a) ==
                  doctest::Approx(oracle_occupancy_bound(pi, conf, x, a, Optimize::min)).epsilon(1e-12));
            // any state is reachable with probability one by steering every row
            CHECK(comp_uob(pi, conf, x, a) == doctest::Approx(pi(x, a)).epsilon(1e-12));
        }
}

TEST_CASE("occupancy bounds match brute force over vertex kernels") {
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        auto mdp = random_mdp({1, 2, 2, 1}, 2, seed, 0.7);
        Rng rng(seed + 300);
        auto pi = random_policy(mdp.layers(), rng);
        auto conf = random_conf(mdp, rng, 0.4);
        auto b = occupancy_bounds(pi, conf);
        auto q = occupancy(mdp, pi);
        for (StateId x = 0; x < 5; ++x)
            for (ActionId a = 0; a < 2; ++a) {
                CHECK(std::abs(b.upper(x, a) - oracle_occupancy_bound(pi, conf, x, a, Optimize::max)) < 1e-9);
                CHECK(std::abs(b.lower(x, a) - oracle_occupancy_bound(pi, conf, x, a, Optimize::min)) < 1e-9);
                CHECK(b.lower(x, a) <= q(x, a) + 1e-12);
                CHECK(q(x, a) <= b.upper(x, a) + 1e-12);
                CHECK(b.lower(x, a) >= 0.0);
                CHECK(b.upper(x, a) <= 1.0 + 1e-12);
                ++checked;
            }
    }
    CHECK(checked == 2000);
}

TEST_CASE("serial and parallel occupancy kernels agree bitwise") {
    auto mdp = random_mdp({1, 4, 5, 3, 1}, 3, 17);
    Rng rng(18);
    auto pi = random_policy(mdp.layers(), rng);
    auto conf = random_conf(mdp, rng, 0.3);
    auto s = occupancy_bounds_serial(pi, conf), p = occupancy_bounds_parallel(pi, conf);
    CHECK(s.upper.values() == p.upper.values());
    CHECK(s.lower.values() == p.lower.values());
}

TEST_CASE("importance-weighted estimate") {
    Trajectory traj{{{0, 1, 0.5}, {1, 0, 1.5}}};
    StateActionTable upper(3, 2, 0.5);
    auto q = q_estimate(traj, upper, 0.1);
    CHECK(q(1, 0) == doctest::Approx(1.5 / 0.6).epsilon(1e-14));
    CHECK(q(0, 1) == doctest::Approx(2.0 / 0.6).epsilon(1e-14));
    CHECK(q(0, 1) == doctest::Approx(3.3333333333333).epsilon(1e-12));
    CHECK(q(0, 0) == 0.0);
    CHECK(q(1, 1) == 0.0);
}

TEST_CASE("estimate is unbiased with the true kernel and no shift") {
    auto mdp = random_mdp({1, 2, 2, 1}, 2, 55);
    const auto& L = mdp.layers();
    Rng rng(56);
    auto pi = random_policy(L, rng);
    auto loss = random_table(L, rng);
    auto bounds = occupancy_bounds(pi, ConfidenceSet::exact(mdp));
    auto Q = evaluate(mdp, pi, loss).Q;
    const std::size_t n = 100000;
    StateActionTable sum(L.num_states(), 2), sq(L.num_states(), 2);
    for (std::size_t i = 0; i < n; ++i) {
        auto est = q_estimate(sample_episode(mdp, pi, loss, 1000 + i), bounds.upper, 0.0);
        for (std::size_t k = 0; k < est.values().size(); ++k) {
            sum.values()[k] += est.values()[k];
            sq.values()[k] += est.values()[k] * est.values()[k];
        }
    }
    for (StateId x = 0; x < L.num_decision_states(); ++x)
        for (ActionId a = 0; a < 2; ++a) {
            const double mean = sum(x, a) / n;
            const double var = sq(x, a) / n - mean * mean;
            CHECK(std::abs(mean - Q(x, a)) <= 3 * std::sqrt(var / n));
        }
}

TEST_CASE("tabular bonus formula") {
    LayerStructure one({1, 1}, 1);
    OccupancyBounds b{StateActionTable(2, 1, 0.99), StateActionTable(2, 1, 0.99)};
    CHECK(bonus_b_tabular(0, Policy::uniform(one), b, 0.01, 2) == doctest::Approx(0.06).epsilon(1e-14));
    CHECK(bonus_b_tabular(0, Policy::uniform(one), b, 0.0, 2) == 0.0);

    LayerStructure two({1, 1}, 2);
    OccupancyBounds c{StateActionTable(2, 2), StateActionTable(2, 2)};
    c.upper(0, 0) = 0.6;
    c.lower(0, 0) = 0.4;
    c.upper(0, 1) = 0.2;
    c.lower(0, 1) = 0.2;
    const double v = bonus_b_tabular(0, Policy::uniform(two), c, 0.05, 2);
    CHECK(v == doctest::Approx(0.5 * 0.7 / 0.65 + 0.5 * 0.3 / 0.25).epsilon(1e-14));
    CHECK(v == doctest::Approx(1.138461538461538).epsilon(1e-12));
    auto table = bonus_table_tabular(Policy::uniform(two), c, 0.05, 2);
    CHECK(table(0, 0) == table(0, 1));
    CHECK(table(1, 0) == 0.0);
}

TEST_CASE("optimistic dilated bonus") {
    auto mdp = random_mdp({1, 2, 3, 1}, 2, 61);
    const auto& L = mdp.layers();
    Rng rng(62);
    auto pi = random_policy(L, rng);
    auto b = random_table(L, rng);

    auto exact = dilated_bonus_exact(mdp, pi, b);
    auto opt0 = dilated_bonus_optimistic(ConfidenceSet::exact(mdp), pi, b);
    for (std::size_t i = 0; i < exact.B.values().size(); ++i)
        CHECK(std::abs(opt0.B.values()[i] - exact.B.values()[i]) < 1e-12);

    auto zero = dilated_bonus_optimistic(random_conf(mdp, rng, 0.5), pi, StateActionTable(7, 2));
    for (double v : zero.B.values()) CHECK(v == 0.0);

    for (int trial = 0; trial < 10; ++trial) {
        auto conf = random_conf(mdp, rng, 0.5);
        auto opt = dilated_bonus_optimistic(conf, pi, b);
        for (int s = 0; s < 100; ++s) {
            auto kernel = kernel_inside(conf, rng);
            REQUIRE(conf.contains(kernel, 1e-12));
            auto B = dilated_bonus_exact(kernel, pi, b);
            for (std::size_t i = 0; i < B.B.values().size(); ++i)
                CHECK(opt.B.values()[i] >= B.B.values()[i] - 1e-12);
        }
    }
}

TEST_CASE("default parameters") {
    LayerStructure L({1, 2, 1}, 2);
    auto r = resolve(TabularParams{}, L, 20000);
    const double eta = std::min(1.0 / (24.0 * 8.0), 1.0 / std::sqrt(4.0 * 2 * 2 * 20000));
    CHECK(r.eta == doctest::Approx(eta).epsilon(1e-15));
    CHECK(r.gamma == doctest::Approx(2 * eta * 2).epsilon(1e-15));
    CHECK(r.delta == 0.01);
    TabularParams p;
    p.eta = 0.3;
    CHECK(resolve(p, L, 10).gamma == doctest::Approx(1.2));
}

TEST_CASE("tabular run") {
    InstanceSpec spec;
    spec.layer_sizes = {1, 2, 1};
    spec.seed = 3;
    auto inst = generate_instance(spec);
    LossScheduleSpec ls;
    ls.seed = 4;
    LossSchedule schedule(inst.mdp.layers(), ls, 300);

    SUBCASE("first episode plays the uniform policy") {
        auto rec = run_tabular(inst.mdp, schedule, 1, {}, 7);
        REQUIRE(rec.rows.size() == 1);
        const double uniform = initial_value(inst.mdp, Policy::uniform(inst.mdp.layers()), schedule.at(1));
        CHECK(rec.rows[0].true_value == doctest::Approx(uniform).epsilon(1e-14));
    }
    SUBCASE("deterministic per seed, guards hold, sandwich holds when inside") {
        TabularDiagnostics d1, d2;
        auto a = run_tabular(inst.mdp, schedule, 300, {}, 11, &d1);
        auto b = run_tabular(inst.mdp, schedule, 300, {}, 11, &d2);
        CHECK(a == b);
        CHECK(d1.estimate_guard_violations == 0);
        CHECK(d1.bonus_guard_violations == 0);
        CHECK(d1.sandwich_violations == 0);
        CHECK(d1.max_eta_estimate <= 0.5);
        CHECK(d1.max_eta_bonus <= 1.0 / 4.0);
        const double epochs = static_cast<double>(a.rows.back().epoch);
        CHECK(epochs <= 4.0 * 2.0 * std::log2(300.0) + 1.0);
        // the comparator is exact on every prefix
        double cum = 0.0;
        for (const auto& row : a.rows) {
            cum += row.true_value;
            CHECK(std::abs(row.cumulative_regret - (cum - row.best_fixed_cumulative)) < 1e-9);
        }
    }
}
