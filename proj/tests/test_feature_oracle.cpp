#include <doctest.h>

#include <cmath>

#include "lonesense/features.hpp"
#include "oracle_helpers.hpp"

using namespace lonesense;

namespace {

// exact for count-like features, 1e-9 otherwise
void compare_maps(const FeatureMap& got, const std::map<std::string, double>& expected) {
    REQUIRE(got.size() == expected.size());
    for (const auto& [name, want] : expected) {
        REQUIRE(got.count(name) == 1);
        const double have = got.at(name);
        const bool count_like = name.find("count") != std::string::npos ||
                                name.find("distinct") != std::string::npos;
        if (count_like) {
            CHECK_MESSAGE(have == want, name);
        } else {
            CHECK_MESSAGE(std::fabs(have - want) <= 1e-9, name, " got ", have, " want ", want);
        }
    }
}

}  // namespace

TEST_CASE("randomized days: every extractor equals its brute-force oracle") {
    ExtractionParams params;
    const int kDays = 300;
    for (int day = 0; day < kDays; ++day) {
        const auto seed = static_cast<std::uint64_t>(day);
        {
            Rng rng(mix64(seed, 1));
            const auto events = oracle::random_screen_day(rng);
            compare_maps(extract_screen(events), oracle::screen(events));
        }
        {
            Rng rng(mix64(seed, 2));
            const auto events = oracle::random_battery_day(rng);
            compare_maps(extract_battery(events), oracle::battery(events));
        }
        {
            Rng rng(mix64(seed, 3));
            const auto events = oracle::random_keyboard_day(rng);
            compare_maps(extract_keyboard(events, params.session_gap_s),
                         oracle::keyboard(events, params.session_gap_s));
        }
        {
            Rng rng(mix64(seed, 4));
            const auto events = oracle::random_calls_day(rng);
            compare_maps(extract_calls(events), oracle::calls(events));
        }
        {
            Rng rng(mix64(seed, 5));
            const auto events = oracle::random_messages_day(rng);
            compare_maps(extract_messages(events), oracle::messages(events));
        }
        {
            Rng rng(mix64(seed, 6));
            const auto events = oracle::random_apps_day(rng);
            compare_maps(extract_applications(events, params),
                         oracle::applications(events, params));
        }
        {
            Rng rng(mix64(seed, 7));
            const auto events = oracle::random_locations_day(rng);
            compare_maps(extract_locations(events, params), oracle::locations(events, params));
        }
    }
}

TEST_CASE("duration features never exceed one day") {
    ExtractionParams params;
    for (int day = 0; day < 100; ++day) {
        Rng rng(mix64(static_cast<std::uint64_t>(day), 99));
        for (const auto& [name, v] : extract_screen(oracle::random_screen_day(rng))) {
            if (name.find("duration") != std::string::npos) {
                CHECK(v >= 0.0);
                CHECK(v <= 86400.0);
            }
        }
        for (const auto& [name, v] : extract_battery(oracle::random_battery_day(rng))) {
            if (name.find("duration") != std::string::npos) {
                CHECK(v >= 0.0);
                CHECK(v <= 86400.0);
            }
        }
    }
}

TEST_CASE("location entropy stays within [0, ln(clusters)]") {
    ExtractionParams params;
    for (int day = 0; day < 200; ++day) {
        Rng rng(mix64(static_cast<std::uint64_t>(day), 77));
        const auto f = extract_locations(oracle::random_locations_day(rng), params);
        const double clusters = f.at("loc_distinct_clusters");
        const double entropy = f.at("loc_entropy");
        CHECK(entropy >= 0.0);
        if (clusters <= 1.0) {
            CHECK(entropy == 0.0);
        } else {
            CHECK(entropy <= std::log(clusters) + 1e-12);
        }
    }
}

TEST_CASE("extractors are pure: identical input, identical output") {
    ExtractionParams params;
    Rng rng(2024);
    const auto events = oracle::random_locations_day(rng);
    CHECK(extract_locations(events, params) == extract_locations(events, params));
}
