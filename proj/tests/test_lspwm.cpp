#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <numeric>
#include <random>

#include "cellsim/lspwm.hpp"

using namespace cellsim;

TEST_CASE("sinusoidal duties match reference values and are non-increasing") {
    const DutyCyclePattern d = sinusoidal_duties(2.0, 10.0, 3);
    REQUIRE(d.duties.size() == 3);
    CHECK(d.duties[0] == doctest::Approx(0.9362314391414802).epsilon(1e-12));
    CHECK(d.duties[1] == doctest::Approx(0.8060266319586434).epsilon(1e-12));
    CHECK(d.duties[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(d.non_increasing());

    // levels whose band lies entirely above the reference get zero duty
    const DutyCyclePattern e = sinusoidal_duties(2.0, 3.0, 5);
    CHECK(e.duties[2] == 0.0);  // (2*3-1)*2/(2*3) = 5/3 > 1
    CHECK(e.non_increasing());
}

TEST_CASE("dc duties are piecewise binary with one fractional level") {
    const DutyCyclePattern d = dc_duties(2.0, 5.0, 3);
    REQUIRE(d.duties.size() == 3);
    CHECK(d.duties[0] == doctest::Approx(1.0));
    CHECK(d.duties[1] == doctest::Approx(1.0));
    CHECK(d.duties[2] == doctest::Approx(0.5));
    CHECK(d.non_increasing());

    const DutyCyclePattern e = dc_duties(2.0, 7.0, 3);
    REQUIRE(e.duties.size() == 3);
    for (double v : e.duties) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("achievability examples") {
    DutyCyclePattern d;
    d.duties = {0.8, 0.5, 0.2};
    // top-1 share 2/3 exceeds duty share 0.8/1.5
    CHECK_FALSE(is_achievable(std::vector<double>{2.0, 1.0, 0.0}, d));
    CHECK(is_achievable(std::vector<double>{1.0, 1.0, 1.0}, d));
    CHECK(is_achievable(std::vector<double>{0.0, 0.0, 0.0}, d));

    DutyCyclePattern zero;
    zero.duties = {0.0, 0.0};
    CHECK_FALSE(is_achievable(std::vector<double>{1.0, 0.0}, zero));
    CHECK(is_achievable(std::vector<double>{0.0, 0.0}, zero));
}

TEST_CASE("achievability is invariant under permutation of targets") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        DutyCyclePattern d;
        std::vector<double> gains;
        for (int i = 0; i < 5; ++i) gains.push_back(u(rng));
        std::vector<double> duties;
        for (int i = 0; i < 5; ++i) duties.push_back(u(rng));
        std::sort(duties.rbegin(), duties.rend());
        d.duties = duties;

        const bool base = is_achievable(gains, d);
        std::shuffle(gains.begin(), gains.end(), rng);
        CHECK(is_achievable(gains, d) == base);
    }
}

TEST_CASE("strategy 1 ranks by remaining gain with cyclic tie rotation") {
    const std::vector<double> gains{5.0, 5.0, 3.0};
    const LevelAssignment a0 = assign_strategy1(gains, 0);
    CHECK(a0.level_of_cell == std::vector<int>{0, 1, 2});
    const LevelAssignment a1 = assign_strategy1(gains, 1);
    CHECK(a1.level_of_cell == std::vector<int>{1, 0, 2});
    const LevelAssignment a2 = assign_strategy1(gains, 2);
    CHECK(a2.level_of_cell == std::vector<int>{0, 1, 2});
}

TEST_CASE("strategy 2 direction determines the sort order") {
    const std::vector<double> charge_left{1.0, 3.0, 2.0};
    // charging fills the emptiest cell first
    const LevelAssignment c =
        assign_strategy2(charge_left, FlowDirection::charge, 0);
    CHECK(c.level_of_cell == std::vector<int>{0, 2, 1});
    // discharging drains the fullest cell first
    const LevelAssignment d =
        assign_strategy2(charge_left, FlowDirection::discharge, 0);
    CHECK(d.level_of_cell == std::vector<int>{2, 0, 1});
}

TEST_CASE("strategy 3 mirrors strategy 2 on the soc key") {
    const std::vector<double> soc{0.2, 0.9, 0.5};
    const LevelAssignment c = assign_strategy3(soc, FlowDirection::charge, 0);
    CHECK(c.level_of_cell == std::vector<int>{0, 2, 1});
    const LevelAssignment d = assign_strategy3(soc, FlowDirection::discharge, 0);
    CHECK(d.level_of_cell == std::vector<int>{2, 0, 1});
}

TEST_CASE("step_period conserves the duty-weighted throughput") {
    DutyCyclePattern d;
    d.duties = {1.0, 0.5, 0.25};
    LevelAssignment a;
    a.level_of_cell = {2, 0, 1};
    const auto charge = step_period(a, d, 2.0, 0.5, FlowDirection::charge);
    CHECK(charge[0] == doctest::Approx(2.0 * 0.25 * 0.5));
    CHECK(charge[1] == doctest::Approx(2.0 * 1.0 * 0.5));
    CHECK(charge[2] == doctest::Approx(2.0 * 0.5 * 0.5));

    const auto discharge = step_period(a, d, 2.0, 0.5, FlowDirection::discharge);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(discharge[i] == doctest::Approx(-charge[i]));
}

TEST_CASE("strategy 1 realizes achievable integer targets") {
    // quantized setting: duties scaled so one period moves whole quanta
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> quanta(0, 6);
    for (int trial = 0; trial < 100; ++trial) {
        DutyCyclePattern d;
        d.duties = {1.0, 1.0, 0.0};  // two cells can move per period
        std::vector<double> target(3);
        for (auto& q : target) q = quanta(rng);

        std::vector<double> residual = target;
        std::uint64_t rot = 0;
        for (int period = 0; period < 100; ++period) {
            double left = std::accumulate(residual.begin(), residual.end(), 0.0);
            if (left <= 0.0) break;
            const LevelAssignment a = assign_strategy1(residual, rot++);
            const auto dq = step_period(a, d, 1.0, 1.0);
            for (std::size_t i = 0; i < 3; ++i)
                residual[i] -= std::min(dq[i], residual[i]);
        }
        const double leftover =
            std::accumulate(residual.begin(), residual.end(), 0.0);
        if (is_achievable(target, d)) CHECK(leftover == doctest::Approx(0.0));
    }
}
