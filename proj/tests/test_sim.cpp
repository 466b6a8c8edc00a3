#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <numeric>

#include "cellsim/sim.hpp"

using namespace cellsim;

TEST_CASE("record generator hits the mode split exactly and is deterministic") {
    const auto records = generate_records(42);
    CHECK(records.size() == 255);
    int dc = 0;
    for (const auto& r : records) {
        CHECK(r.end_soc > r.start_soc);
        CHECK(r.duration_h > 0.0);
        if (r.mode == ChargeMode::DC_fast) {
            ++dc;
            CHECK(r.implied_crate() > 0.2);
        }
    }
    CHECK(dc == 81);

    const auto again = generate_records(42);
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(records[i].start_soc == again[i].start_soc);
        CHECK(records[i].gap_to_next_h == again[i].gap_to_next_h);
    }
    const auto other = generate_records(43);
    bool any_diff = false;
    for (std::size_t i = 0; i < records.size(); ++i)
        any_diff = any_diff || records[i].start_soc != other[i].start_soc;
    CHECK(any_diff);
}

TEST_CASE("record stream spans roughly 2.5 years") {
    for (std::uint64_t seed : {1ULL, 9ULL, 77ULL}) {
        const auto records = generate_records(seed);
        double hours = 0.0;
        for (const auto& r : records) hours += r.duration_h + r.gap_to_next_h;
        const double years = hours / (24.0 * 365.0);
        CHECK(years > 2.25);
        CHECK(years < 2.75);
    }
}

TEST_CASE("records csv round trip") {
    const auto records = generate_records(3, 20);
    const std::string path = "records_roundtrip_test.csv";
    write_records_csv(path, records);
    const auto back = read_records_csv(path);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(back[i].start_soc == doctest::Approx(records[i].start_soc).epsilon(1e-10));
        CHECK(back[i].mode == records[i].mode);
        CHECK(back[i].duration_h ==
              doctest::Approx(records[i].duration_h).epsilon(1e-10));
    }
    std::remove(path.c_str());
}

TEST_CASE("scenario config json round trip") {
    ScenarioConfig sc;
    sc.name = "roundtrip";
    sc.chemistry = Chemistry::LMO;
    sc.n_cells = 7;
    sc.soh_noise_std = 0.02;
    sc.strategy = Strategy::soc_balance;
    sc.calendar_scale = 2.0;
    sc.seed = 99;

    const ScenarioConfig back = ScenarioConfig::from_json_string(sc.to_json_string());
    CHECK(back.name == sc.name);
    CHECK(back.chemistry == sc.chemistry);
    CHECK(back.n_cells == sc.n_cells);
    CHECK(back.soh_noise_std == doctest::Approx(sc.soh_noise_std));
    CHECK(back.strategy == sc.strategy);
    CHECK(back.calendar_scale == doctest::Approx(sc.calendar_scale));
    CHECK(back.seed == sc.seed);

    CHECK_THROWS(ScenarioConfig::from_json_string(R"({"chemistry": "nife"})"));
    CHECK_THROWS(ScenarioConfig::from_json_file("no_such_file.json"));
}

TEST_CASE("longterm run produces sane lifetimes and monotone soh") {
    ScenarioConfig sc;
    sc.n_cells = 6;           // small pack keeps this test quick
    sc.cyclic_scale = 40.0;   // accelerated aging
    sc.calendar_scale = 40.0;
    sc.seed = 5;
    sc.strategy = Strategy::soc_balance;

    const SimResult res = run_longterm(sc);
    CHECK(res.lifetime_days > 0.0);
    CHECK(res.lifetime_efc > 0.0);
    REQUIRE(res.soh_samples.size() >= 2);
    for (std::size_t t = 1; t < res.soh_samples.size(); ++t)
        for (std::size_t i = 0; i < res.soh_samples[t].size(); ++i)
            CHECK(res.soh_samples[t][i] <= res.soh_samples[t - 1][i] + 1e-12);

    // identical scenario, identical result (paired-seed discipline)
    const SimResult again = run_longterm(sc);
    CHECK(again.lifetime_days == res.lifetime_days);
    CHECK(again.lifetime_efc == res.lifetime_efc);
}

TEST_CASE("strategies consume identical random streams") {
    ScenarioConfig sc;
    sc.n_cells = 6;
    sc.cyclic_scale = 40.0;
    sc.calendar_scale = 40.0;
    sc.seed = 8;

    sc.strategy = Strategy::soc_balance;
    const SimResult a = run_longterm(sc);
    sc.strategy = Strategy::soc_soh_aware;
    const SimResult b = run_longterm(sc);
    // different allocations, but both finish; the baseline rerun is unchanged
    sc.strategy = Strategy::soc_balance;
    const SimResult a2 = run_longterm(sc);
    CHECK(a.lifetime_days == a2.lifetime_days);
    CHECK(b.lifetime_days > 0.0);
}

TEST_CASE("median helper") {
    CHECK(median({3.0, 1.0, 2.0}) == doctest::Approx(2.0));
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == doctest::Approx(2.5));
    CHECK_THROWS(median({}));
}
