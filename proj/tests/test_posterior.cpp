#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <random>

#include "bop2/posterior.hpp"
#include "support/oracles.hpp"

using bop2::BetaParams;
using Catch::Approx;

TEST_CASE("update_posterior is the conjugate count update") {
    const BetaParams uniform{1, 1};
    auto p = bop2::update_posterior(uniform, 0, 0);
    CHECK(p.alpha == 1.0);
    CHECK(p.beta == 1.0);
    p = bop2::update_posterior(uniform, 5, 3);
    CHECK(p.alpha == 6.0);
    CHECK(p.beta == 4.0);
    p = bop2::update_posterior(uniform, 30, 0);
    CHECK(p.alpha == 31.0);
    CHECK(p.beta == 1.0);
    CHECK_THROWS_AS(bop2::update_posterior(uniform, -1, 0), std::domain_error);
}

TEST_CASE("prob_greater matches analytic cases") {
    CHECK(bop2::prob_greater({1, 1}, {1, 1}) == Approx(0.5).margin(1e-13));
    // P(X>Y) = E[X] when Y is uniform
    CHECK(bop2::prob_greater({2, 1}, {1, 1}) == Approx(2.0 / 3.0).margin(1e-13));
    CHECK(bop2::prob_greater({1, 2}, {1, 1}) == Approx(1.0 / 3.0).margin(1e-13));
    CHECK(bop2::prob_greater({1, 2}, {2, 1}) == Approx(1.0 / 6.0).margin(1e-13));
    CHECK_THROWS_AS(bop2::prob_greater({0.0, 1}, {1, 1}), std::domain_error);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(bop2::prob_greater({nan, 1}, {1, 1}), std::domain_error);
}

TEST_CASE("prob_greater agrees with Monte Carlo and quadrature oracles") {
    const BetaParams x{13, 9};
    const BetaParams y{5, 17};
    const double exact = bop2::prob_greater(x, y);
    // frozen from a 40-digit quadrature of the defining integral
    CHECK(exact == Approx(0.99456389567352968422).margin(1e-12));
    const auto mc = oracle::mc_prob_greater(x, y, 10'000'000, 20240811);
    CHECK(std::fabs(exact - mc.value) < 3.0 * mc.std_error);
    CHECK(exact == Approx(oracle::quad_prob_greater(x, y)).margin(1e-10));
}

TEST_CASE("prob_greater non-integer parameters use the quadrature path") {
    const BetaParams x{2.5, 3.5};
    const BetaParams y{4.25, 1.75};
    const double v = bop2::prob_greater(x, y);
    CHECK(v == Approx(oracle::quad_prob_greater(x, y)).margin(1e-9));
    const auto mc = oracle::mc_prob_greater(x, y, 2'000'000, 77);
    CHECK(std::fabs(v - mc.value) < 4.0 * mc.std_error);
}

TEST_CASE("prob_greater complement identity and monotonicity") {
    std::mt19937_64 rng(4242);
    std::uniform_int_distribution<int> param(1, 200);
    for (int rep = 0; rep < 200; ++rep) {
        const BetaParams x{double(param(rng)), double(param(rng))};
        const BetaParams y{double(param(rng)), double(param(rng))};
        const double pxy = bop2::prob_greater(x, y);
        const double pyx = bop2::prob_greater(y, x);
        REQUIRE(pxy >= 0.0);
        REQUIRE(pxy <= 1.0);
        REQUIRE(pxy + pyx == Approx(1.0).margin(1e-9));
        // an extra success can only help
        const double more = bop2::prob_greater({x.alpha + 1, x.beta}, y);
        REQUIRE(more >= pxy - 1e-12);
    }
}

TEST_CASE("prob_max trivial symmetry cases") {
    std::array<BetaParams, 2> two{BetaParams{1, 1}, BetaParams{1, 1}};
    CHECK(bop2::prob_max(0, two) == Approx(0.5).margin(1e-12));
    std::array<BetaParams, 3> three{BetaParams{3, 3}, BetaParams{3, 3}, BetaParams{3, 3}};
    CHECK(bop2::prob_max(1, three) == Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("prob_max rejects unsupported arity") {
    std::vector<BetaParams> arms(5, BetaParams{2, 2});
    CHECK_THROWS_AS(bop2::prob_max(0, arms), std::invalid_argument);
    arms.resize(1);
    CHECK_THROWS_AS(bop2::prob_max(0, arms), std::invalid_argument);
}

TEST_CASE("prob_max agrees with oracles on the three-arm example") {
    std::array<BetaParams, 3> arms{BetaParams{7, 3}, BetaParams{4, 6}, BetaParams{5, 5}};
    const double exact = bop2::prob_max(0, arms);
    CHECK(exact == Approx(0.794041181145771266).margin(1e-12));
    const auto mc = oracle::mc_prob_max(0, arms, 10'000'000, 91);
    CHECK(std::fabs(exact - mc.value) < 3.0 * mc.std_error);
    CHECK(exact == Approx(oracle::quad_prob_max(0, arms)).margin(1e-10));
}

TEST_CASE("prob_max normalization and arity-2 reduction") {
    std::mt19937_64 rng(515151);
    std::uniform_int_distribution<int> param(1, 200);
    std::uniform_int_distribution<int> arity(2, 4);
    for (int rep = 0; rep < 60; ++rep) {
        const int k = arity(rng);
        std::vector<BetaParams> arms;
        for (int j = 0; j < k; ++j) arms.push_back({double(param(rng)), double(param(rng))});
        double sum = 0.0;
        for (int j = 0; j < k; ++j) sum += bop2::prob_max(j, arms);
        REQUIRE(sum == Approx(1.0).margin(1e-9));
        if (k == 2) {
            REQUIRE(bop2::prob_max(0, arms) ==
                    Approx(bop2::prob_greater(arms[0], arms[1])).margin(1e-12));
        }
    }
}

TEST_CASE("oracle agreement on random integer-parameter cases") {
    // 100 random cases vs a 1e6-draw Monte Carlo oracle (3 sigma) and the
    // independent Simpson quadrature (1e-9).
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<int> param(1, 200);
    for (int rep = 0; rep < 100; ++rep) {
        const BetaParams x{double(param(rng)), double(param(rng))};
        const BetaParams y{double(param(rng)), double(param(rng))};
        const double exact = bop2::prob_greater(x, y);
        const auto mc = oracle::mc_prob_greater(x, y, 1'000'000, 1000 + rep);
        REQUIRE(std::fabs(exact - mc.value) <= 3.0 * mc.std_error);
        REQUIRE(exact == Approx(oracle::quad_prob_greater(x, y)).margin(1e-9));
    }
}

TEST_CASE("prob_max four-arm case agrees with quadrature at large parameters") {
    std::array<BetaParams, 4> arms{BetaParams{200, 150}, BetaParams{180, 170},
                                   BetaParams{190, 160}, BetaParams{170, 180}};
    double sum = 0.0;
    for (int j = 0; j < 4; ++j) {
        const double exact = bop2::prob_max(j, arms);
        REQUIRE(exact == Approx(oracle::quad_prob_max(j, arms)).margin(1e-9));
        sum += exact;
    }
    REQUIRE(sum == Approx(1.0).margin(1e-9));
}

TEST_CASE("prob_exceeds_threshold closed-form cases") {
    CHECK(bop2::prob_exceeds_threshold({1, 1}, 0.5) == Approx(0.5).margin(1e-13));
    CHECK(bop2::prob_exceeds_threshold({1, 1}, 0.0) == 1.0);
    CHECK(bop2::prob_exceeds_threshold({2, 2}, 0.5) == Approx(0.5).margin(1e-13));
    CHECK_THROWS_AS(bop2::prob_exceeds_threshold({1, 1}, 1.5), std::domain_error);
    CHECK_THROWS_AS(bop2::prob_exceeds_threshold({1, 1}, -0.1), std::domain_error);
}

TEST_CASE("posterior cache is semantically invisible") {
    bop2::PosteriorCache cache;
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> param(1, 150);
    for (int rep = 0; rep < 50; ++rep) {
        const BetaParams x{double(param(rng)), double(param(rng))};
        const BetaParams y{double(param(rng)), double(param(rng))};
        const double direct = bop2::prob_greater(x, y);
        REQUIRE(cache.prob_greater(x, y) == direct);
        REQUIRE(cache.prob_greater(x, y) == direct);  // hit path
        std::array<BetaParams, 3> arms{x, y, BetaParams{double(param(rng)), double(param(rng))}};
        const auto all = cache.prob_max_all(arms);
        for (int j = 0; j < 3; ++j) REQUIRE(all[j] == bop2::prob_max(j, arms));
        const double thr = 0.45;
        REQUIRE(cache.prob_exceeds(x, thr) == bop2::prob_exceeds_threshold(x, thr));
    }
}
