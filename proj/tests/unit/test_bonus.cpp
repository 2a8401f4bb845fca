#include "doctest.h"
#include "helpers.hpp"

#include "dpo/bonus.hpp"
#include "dpo/oracles.hpp"

#include <cmath>
#include <numbers>

using namespace dpo;
using dpo::test::random_mdp;
using dpo::test::random_policy;
using dpo::test::random_table;

namespace {

StateActionTable constant_bonus(const LayerStructure& L, double c) {
    StateActionTable b(L.num_states(), L.num_actions());
    for (StateId x = 0; x < L.num_decision_states(); ++x)
        for (ActionId a = 0; a < L.num_actions(); ++a) b(x, a) = c;
    return b;
}

} // namespace

TEST_CASE("constant bonus closed form") {
    auto mdp = random_mdp({1, 3, 1}, 2, 5);
    Rng rng(6);
    auto pi = random_policy(mdp.layers(), rng);
    const double c = 0.37;
    auto table = dilated_bonus_exact(mdp, pi, constant_bonus(mdp.layers(), c));
    CHECK(table.dilation == 1.5);
    for (ActionId a = 0; a < 2; ++a) {
        CHECK(table(0, a) == doctest::Approx(2.5 * c).epsilon(1e-14));
        CHECK(table(2, a) == doctest::Approx(c).epsilon(1e-14));
        CHECK(table(4, a) == 0.0);
    }
    CHECK(dilated_value(mdp, pi, constant_bonus(mdp.layers(), c)) ==
          doctest::Approx(2.5 * c).epsilon(1e-14));
}

TEST_CASE("zero bonus is a fixpoint") {
    auto mdp = random_mdp({1, 2, 3, 1}, 3, 7);
    auto pi = Policy::uniform(mdp.layers());
    StateActionTable zero(mdp.num_states(), 3);
    auto table = dilated_bonus_exact(mdp, pi, zero);
    for (double v : table.B.values()) CHECK(v == 0.0);
    CHECK(dilated_value(mdp, pi, zero) == 0.0);
    auto report = check_dilation_sandwich(mdp, pi, zero);
    CHECK(report.violations == 0);
    for (double s : report.lower_slack) CHECK(s == 0.0);
    for (double s : report.upper_slack) CHECK(s == 0.0);
}

TEST_CASE("negative bonus is rejected") {
    auto mdp = random_mdp({1, 2, 1}, 2, 1);
    StateActionTable b(4, 2);
    b(1, 0) = -0.1;
    CHECK_THROWS_AS(dilated_bonus_exact(mdp, Policy::uniform(mdp.layers()), b), InputError);
}

TEST_CASE("backward recursion matches the dense linear solve") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        auto mdp = random_mdp({1, 3, 2, 2, 1}, 3, seed);
        Rng rng(seed + 9);
        auto pi = random_policy(mdp.layers(), rng);
        auto b = random_table(mdp.layers(), rng);
        for (double dil : {1.0, default_dilation(4), 1.9}) {
            auto table = dilated_bonus_exact(mdp, pi, b, dil);
            auto dense = oracle_dilated_solve(mdp, pi, b, dil);
            for (std::size_t i = 0; i < dense.values().size(); ++i)
                CHECK(std::abs(table.B.values()[i] - dense.values()[i]) < 1e-12);
        }
    }
}

TEST_CASE("unit dilation recovers the Bellman equation") {
    auto mdp = random_mdp({1, 2, 2, 1}, 2, 13);
    Rng rng(14);
    auto pi = random_policy(mdp.layers(), rng);
    auto b = random_table(mdp.layers(), rng);
    auto table = dilated_bonus_exact(mdp, pi, b, 1.0);
    auto ev = evaluate(mdp, pi, b);
    for (std::size_t i = 0; i < ev.Q.values().size(); ++i)
        CHECK(std::abs(table.B.values()[i] - ev.Q.values()[i]) < 1e-12);
}

TEST_CASE("dilated value lies between V and the geometric ceiling") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto mdp = random_mdp({1, 2, 3, 2, 1}, 2, seed);
        Rng rng(seed + 77);
        auto pi = random_policy(mdp.layers(), rng);
        auto b = random_table(mdp.layers(), rng);
        const double v = initial_value(mdp, pi, b);
        const double dv = dilated_value(mdp, pi, b);
        CHECK(dv >= v - 1e-12);
        CHECK(dv <= std::pow(1.0 + 1.0 / 3.0, 2) * v + 1e-12);
    }
}

TEST_CASE("sandwich sweep over random instances") {
    std::size_t violations = 0;
    Rng meta(2024);
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const std::size_t depth = 1 + meta.uniform_index(4);
        std::vector<std::size_t> sizes{1};
        for (std::size_t h = 0; h < depth; ++h) sizes.push_back(1 + meta.uniform_index(3));
        sizes.push_back(1);
        auto mdp = random_mdp(sizes, 1 + meta.uniform_index(3), seed, 0.3 + meta.uniform());
        Rng rng(seed + 1000);
        auto pi = random_policy(mdp.layers(), rng);
        auto b = random_table(mdp.layers(), rng, 2.0);
        auto report = check_dilation_sandwich(mdp, pi, b);
        violations += report.violations;
        CHECK(report.within_e_bound);
        CHECK(report.min_slack >= -1e-9);
        CHECK(dilated_value(mdp, pi, b) <= std::numbers::e * initial_value(mdp, pi, b) + 1e-12);
    }
    CHECK(violations == 0);
}

TEST_CASE("constant bonus slack is the geometric gap") {
    auto mdp = random_mdp({1, 2, 2, 1}, 2, 31);
    auto pi = Policy::uniform(mdp.layers());
    const double c = 0.2;
    auto report = check_dilation_sandwich(mdp, pi, constant_bonus(mdp.layers(), c));
    CHECK(report.violations == 0);
    // at x_0 with H=3: V = 3c, dilated = c (1 + 4/3 + 16/9), ceiling = (16/9) 3c
    const double dil = c * (1.0 + 4.0 / 3.0 + 16.0 / 9.0);
    CHECK(report.lower_slack[0] == doctest::Approx(dil - 3 * c).epsilon(1e-12));
    CHECK(report.upper_slack[0] == doctest::Approx(16.0 / 9.0 * 3 * c - dil).epsilon(1e-12));
}

TEST_CASE("monotone and positively homogeneous in the bonus") {
    auto mdp = random_mdp({1, 3, 2, 1}, 2, 41);
    Rng rng(42);
    auto pi = random_policy(mdp.layers(), rng);
    auto b = random_table(mdp.layers(), rng);
    StateActionTable bigger = b;
    bigger += random_table(mdp.layers(), rng, 0.5);
    auto B = dilated_bonus_exact(mdp, pi, b), Bb = dilated_bonus_exact(mdp, pi, bigger);
    for (std::size_t i = 0; i < B.B.values().size(); ++i) CHECK(B.B.values()[i] <= Bb.B.values()[i]);
    StateActionTable scaled = b;
    scaled *= 3.25;
    auto Bs = dilated_bonus_exact(mdp, pi, scaled);
    for (std::size_t i = 0; i < B.B.values().size(); ++i)
        CHECK(std::abs(Bs.B.values()[i] - 3.25 * B.B.values()[i]) <=
              1e-12 * std::abs(3.25 * B.B.values()[i]));
    for (std::size_t i = 0; i < B.B.values().size(); ++i) CHECK(B.B.values()[i] >= b.values()[i]);
}
