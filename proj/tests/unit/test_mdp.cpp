#include "doctest.h"
#include "helpers.hpp"

#include "dpo/mdp.hpp"
#include "dpo/oracles.hpp"

#include <cmath>

using namespace dpo;
using dpo::test::random_mdp;
using dpo::test::random_policy;
using dpo::test::random_table;

TEST_CASE("layer structure indexing") {
    LayerStructure L({1, 3, 2, 1}, 2);
    CHECK(L.horizon() == 3);
    CHECK(L.num_states() == 7);
    CHECK(L.first_state(2) == 4);
    CHECK(L.layer_of(5) == 2);
    CHECK(L.local_index(5) == 1);
    CHECK(L.terminal_state() == 6);
    CHECK(L.is_terminal(6));
    CHECK_THROWS_AS(LayerStructure({2, 1}, 2), StructuralError);
    CHECK_THROWS_AS(LayerStructure({1, 2}, 2), StructuralError);
}

TEST_CASE("policy rows are renormalized or rejected") {
    StateActionTable t(2, 2);
    t(0, 0) = 0.5 + 4e-10;
    t(0, 1) = 0.5;
    t(1, 0) = 1.0;
    Policy p(t);
    CHECK(p(0, 0) + p(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
    t(0, 0) = 0.6;
    CHECK_THROWS_AS(Policy{t}, InputError);
}

TEST_CASE("one-step value") {
    auto mdp = dpo::test::line_mdp(1, 2);
    StateActionTable loss(2, 2);
    loss(0, 0) = loss(0, 1) = 0.3;
    Rng rng(1);
    auto pi = random_policy(mdp.layers(), rng);
    auto ev = evaluate(mdp, pi, loss);
    CHECK(ev.V[0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(ev.V[1] == 0.0);
}

TEST_CASE("zero loss gives zero value") {
    auto mdp = random_mdp({1, 3, 2, 1}, 3, 4);
    auto pi = Policy::uniform(mdp.layers());
    auto ev = evaluate(mdp, pi, StateActionTable(mdp.num_states(), mdp.num_actions()));
    for (double v : ev.V) CHECK(v == 0.0);
    for (double q : ev.Q.values()) CHECK(q == 0.0);
}

TEST_CASE("evaluate rejects mismatched shapes") {
    auto mdp = random_mdp({1, 2, 1}, 2, 1);
    auto pi = Policy::uniform(LayerStructure({1, 3, 1}, 2));
    CHECK_THROWS_AS(evaluate(mdp, pi, StateActionTable(4, 2)), StructuralError);
}

TEST_CASE("value equals path enumeration and occupancy inner product") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto mdp = random_mdp({1, 3, 2, 3, 1}, 3, seed);
        Rng rng(seed + 100);
        auto pi = random_policy(mdp.layers(), rng);
        auto loss = random_table(mdp.layers(), rng);
        const double v = initial_value(mdp, pi, loss);
        CHECK(v == doctest::Approx(oracle_path_value(mdp, pi, loss)).epsilon(1e-12));

        auto q = occupancy(mdp, pi);
        auto q_enum = oracle_occupancy_enum(mdp, pi);
        double inner = 0.0;
        for (std::size_t i = 0; i < loss.values().size(); ++i) {
            inner += q.q.values()[i] * loss.values()[i];
            CHECK(std::abs(q.q.values()[i] - q_enum.q.values()[i]) < 1e-12);
        }
        CHECK(std::abs(v - inner) < 1e-9);
    }
}

TEST_CASE("occupancy sums to one per layer and mixes linearly") {
    auto mdp = random_mdp({1, 4, 3, 1}, 2, 7);
    const auto& L = mdp.layers();
    Rng rng(8);
    auto p1 = random_policy(L, rng), p2 = random_policy(L, rng);
    auto q1 = occupancy(mdp, p1), q2 = occupancy(mdp, p2);
    for (std::size_t h = 0; h < L.horizon(); ++h) {
        double s = 0.0;
        for (std::size_t j = 0; j < L.layer_size(h); ++j) s += q1.state(L.state(h, j));
        CHECK(std::abs(s - 1.0) < 1e-10);
    }
    MixturePolicy mix{{p1, p2}, {0.3, 0.7}};
    auto qm = occupancy(mdp, mix);
    for (std::size_t i = 0; i < qm.q.values().size(); ++i)
        CHECK(std::abs(qm.q.values()[i] - (0.3 * q1.q.values()[i] + 0.7 * q2.q.values()[i])) < 1e-12);
    auto loss = random_table(L, rng);
    CHECK(std::abs(initial_value(mdp, mix, loss) -
                   (0.3 * initial_value(mdp, p1, loss) + 0.7 * initial_value(mdp, p2, loss))) < 1e-12);
}

TEST_CASE("uniform policy on a deterministic chain") {
    auto mdp = dpo::test::line_mdp(2, 2);
    auto q = occupancy(mdp, Policy::uniform(mdp.layers()));
    CHECK(q(0, 0) == 0.5);
    CHECK(q(0, 1) == 0.5);
    auto det = occupancy(mdp, Policy::deterministic(mdp.layers(), {1, 0, 0}));
    CHECK(det(0, 1) == 1.0);
    CHECK(det(0, 0) == 0.0);
    CHECK(det(1, 0) == 1.0);
}

TEST_CASE("evaluate is linear in the loss") {
    auto mdp = random_mdp({1, 2, 3, 1}, 3, 11);
    Rng rng(12);
    auto pi = random_policy(mdp.layers(), rng);
    auto l1 = random_table(mdp.layers(), rng), l2 = random_table(mdp.layers(), rng);
    StateActionTable mix = l1;
    mix *= 0.4;
    StateActionTable scaled = l2;
    scaled *= 1.7;
    mix += scaled;
    auto e1 = evaluate(mdp, pi, l1), e2 = evaluate(mdp, pi, l2), em = evaluate(mdp, pi, mix);
    for (std::size_t x = 0; x < em.V.size(); ++x)
        CHECK(std::abs(em.V[x] - (0.4 * e1.V[x] + 1.7 * e2.V[x])) < 1e-9);
}

TEST_CASE("sampling is deterministic per seed and matches occupancy") {
    auto mdp = random_mdp({1, 3, 2, 1}, 2, 21);
    const auto& L = mdp.layers();
    Rng rng(22);
    auto pi = random_policy(L, rng);
    auto loss = random_table(L, rng);
    auto a = sample_episode(mdp, pi, loss, 5), b = sample_episode(mdp, pi, loss, 5);
    REQUIRE(a.steps.size() == L.horizon());
    for (std::size_t h = 0; h < a.steps.size(); ++h) {
        CHECK(a.steps[h].state == b.steps[h].state);
        CHECK(a.steps[h].action == b.steps[h].action);
        CHECK(a.steps[h].loss == b.steps[h].loss);
        CHECK(L.layer_of(a.steps[h].state) == h);
        CHECK(a.steps[h].loss == loss(a.steps[h].state, a.steps[h].action));
    }

    const std::size_t n = 100000;
    StateActionTable freq(L.num_states(), L.num_actions());
    Rng stream(23);
    ActionChooser choose = [&](std::size_t, StateId x, Rng& r) { return r.categorical(pi.row(x)); };
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& s : sample_episode(mdp, choose, loss, stream).steps) freq(s.state, s.action) += 1.0;
    auto q = occupancy(mdp, pi);
    for (StateId x = 0; x < L.num_decision_states(); ++x)
        for (ActionId act = 0; act < L.num_actions(); ++act) {
            const double p = q(x, act);
            const double se = std::sqrt(p * (1 - p) / n);
            CHECK(std::abs(freq(x, act) / n - p) <= 3 * se + 1e-12);
        }
}

TEST_CASE("deterministic mdp and policy give the unique trajectory") {
    auto mdp = dpo::test::line_mdp(3, 2);
    auto pi = Policy::deterministic(mdp.layers(), {1, 0, 1, 0});
    StateActionTable loss(4, 2, 0.1);
    for (std::uint64_t s : {1u, 99u}) {
        auto t = sample_episode(mdp, pi, loss, s);
        CHECK(t.steps[0].action == 1);
        CHECK(t.steps[1].action == 0);
        CHECK(t.steps[2].action == 1);
        CHECK(t.total_loss() == doctest::Approx(0.3));
        CHECK(t.loss_to_go(1) == doctest::Approx(0.2));
    }
}

TEST_CASE("optimal fixed policy") {
    SUBCASE("dominated action") {
        auto mdp = random_mdp({1, 2, 2, 1}, 2, 3);
        StateActionTable loss(mdp.num_states(), 2);
        for (StateId x = 0; x + 1 < mdp.num_states(); ++x) loss(x, 1) = 1.0;
        auto [pi, v] = optimal_fixed_policy(mdp, loss);
        CHECK(v == 0.0);
        for (StateId x = 0; x + 1 < mdp.num_states(); ++x) CHECK(pi(x, 0) == 1.0);
    }
    SUBCASE("constant summed loss") {
        auto mdp = random_mdp({1, 2, 2, 1}, 3, 4);
        const double T = 50, c = 0.4;
        StateActionTable loss(mdp.num_states(), 3, c * T);
        for (ActionId a = 0; a < 3; ++a) loss(mdp.num_states() - 1, a) = 0.0;
        CHECK(optimal_fixed_policy(mdp, loss).second == doctest::Approx(3 * c * T).epsilon(1e-12));
    }
    SUBCASE("matches exhaustive search and beats random probes") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            auto mdp = random_mdp({1, 2, 3, 1}, 2, seed);
            Rng rng(seed + 50);
            auto loss = random_table(mdp.layers(), rng, 30.0);
            const double v = optimal_fixed_policy(mdp, loss).second;
            CHECK(v == doctest::Approx(oracle_best_deterministic(mdp, loss)).epsilon(1e-12));
            for (int i = 0; i < 100; ++i)
                CHECK(v <= initial_value(mdp, random_policy(mdp.layers(), rng), loss) + 1e-9);
        }
    }
}

TEST_CASE("exponential weights") {
    StateActionTable s(2, 2);
    auto u = exp_weights_policy(s, 0.7);
    CHECK(u(0, 0) == 0.5);
    s(0, 1) = 1.0;
    auto p = exp_weights_policy(s, std::log(2.0));
    CHECK(p(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(p(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    StateActionTable shifted = s;
    shifted(0, 0) += 123.0;
    shifted(0, 1) += 123.0;
    auto q = exp_weights_policy(shifted, std::log(2.0));
    CHECK(std::abs(q(0, 0) - p(0, 0)) < 1e-12);

    StateActionTable big(1, 3);
    big(0, 0) = -1e6;
    big(0, 1) = 2e6;
    big(0, 2) = -1e6 + 1.0;
    auto stable = exp_weights_policy(big, 1.0);
    CHECK(std::isfinite(stable(0, 0)));
    CHECK(stable(0, 0) > stable(0, 2));

    s(1, 0) = std::nan("");
    CHECK_THROWS_AS(exp_weights_policy(s, 1.0), InputError);
    CHECK_THROWS_AS(exp_weights_policy(StateActionTable(2, 2), 0.0), InputError);
}

TEST_CASE("exponential weights favour the strict argmin") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        StateActionTable s(1, 4);
        for (auto& v : s.values()) v = rng.uniform() * 10.0;
        auto p = exp_weights_policy(s, 0.1 + rng.uniform());
        ActionId best = 0;
        for (ActionId a = 1; a < 4; ++a)
            if (s(0, a) < s(0, best)) best = a;
        for (ActionId a = 0; a < 4; ++a)
            if (a != best) CHECK(p(0, best) > p(0, a));
    }
}

TEST_CASE("layer composition") {
    LayerStructure L({1, 2, 1}, 2);
    auto head = Policy::deterministic(L, {0, 0, 0, 0});
    auto tail = Policy::deterministic(L, {1, 1, 1, 1});
    auto c = compose_by_layer(L, head, tail, 1);
    CHECK(c(0, 0) == 1.0);
    CHECK(c(1, 1) == 1.0);
    CHECK(c(2, 1) == 1.0);
}
