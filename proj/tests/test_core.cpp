#include <doctest.h>

#include <algorithm>

#include "lonesense/core.hpp"
#include "lonesense/rng.hpp"

using namespace lonesense;

namespace {
// independent scoring oracle: literal reverse-code-and-sum
int oracle_total(const std::array<int, 8>& v) {
    int t = 0;
    for (int i = 0; i < 8; ++i) {
        const int raw = v[static_cast<std::size_t>(i)];
        t += (i + 1 == 3 || i + 1 == 6) ? 5 - raw : raw;
    }
    return t;
}
}  // namespace

TEST_CASE("score_total forced extremes and hand-sum") {
    CHECK(score_total(std::array<int, 8>{1, 1, 4, 1, 1, 4, 1, 1}) == 8);
    CHECK(score_total(std::array<int, 8>{4, 4, 1, 4, 4, 1, 4, 4}) == 32);
    // 2+3+(5-2)+1+4+(5-3)+2+2 = 19
    CHECK(score_total(std::array<int, 8>{2, 3, 2, 1, 4, 3, 2, 2}) == 19);
}

TEST_CASE("score_total validation names the offending item") {
    std::vector<int> seven{1, 2, 3, 4, 1, 2, 3};
    CHECK_THROWS_AS(score_total(seven), ValidationError);
    std::array<int, 8> bad{1, 1, 1, 1, 0, 1, 1, 1};
    CHECK_THROWS_WITH_AS(score_total(bad), doctest::Contains("item 5"), ValidationError);
    bad[4] = 5;
    CHECK_THROWS_WITH_AS(score_total(bad), doctest::Contains("item 5"), ValidationError);
}

TEST_CASE("score_total agrees with the brute-force oracle on random vectors") {
    Rng rng(42);
    for (int trial = 0; trial < 2000; ++trial) {
        std::array<int, 8> v{};
        for (auto& s : v) s = 1 + static_cast<int>(rng.next_below(4));
        const int total = score_total(v);
        CHECK(total == oracle_total(v));
        CHECK(total >= 8);
        CHECK(total <= 32);
    }
}

TEST_CASE("mirror identity: score(v) + score(5 - v) == 40") {
    Rng rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        std::array<int, 8> v{}, m{};
        for (int i = 0; i < 8; ++i) {
            v[static_cast<std::size_t>(i)] = 1 + static_cast<int>(rng.next_below(4));
            m[static_cast<std::size_t>(i)] = 5 - v[static_cast<std::size_t>(i)];
        }
        CHECK(score_total(v) + score_total(m) == 40);
    }
}

TEST_CASE("total invariant under permuting non-reverse items among themselves") {
    Rng rng(11);
    const std::array<std::size_t, 6> plain{0, 1, 3, 4, 6, 7};  // 0-based non-reverse slots
    for (int trial = 0; trial < 500; ++trial) {
        std::array<int, 8> v{};
        for (auto& s : v) s = 1 + static_cast<int>(rng.next_below(4));
        std::array<int, 8> w = v;
        for (std::size_t k = plain.size(); k > 1; --k) {
            const std::size_t j = rng.next_below(k);
            std::swap(w[plain[k - 1]], w[plain[j]]);
        }
        CHECK(score_total(v) == score_total(w));
    }
}

TEST_CASE("reverse item set is {3, 6}") {
    CHECK(kReverseItems == std::array<int, 2>{3, 6});
    CHECK(is_reverse_item(3));
    CHECK(is_reverse_item(6));
    for (int i : {1, 2, 4, 5, 7, 8}) CHECK_FALSE(is_reverse_item(i));
}

TEST_CASE("item_text returns the exact wording") {
    CHECK(item_text(1) == "I lack companionship.");
    CHECK(item_text(3) == "I am an outgoing person.");
    CHECK(item_text(8) == "People are around me but not with me.");
    CHECK_THROWS_AS(item_text(0), ValidationError);
    CHECK_THROWS_AS(item_text(9), ValidationError);
}

TEST_CASE("sensor names match the prompt vocabulary") {
    CHECK(sensor_name(SensorKind::Applications) == "Applications");
    CHECK(sensor_name(SensorKind::Screen) == "Screen");
    CHECK(kAllSensors.size() == 7);
    CHECK(sensor_from_name("Keyboard") == SensorKind::Keyboard);
    CHECK(sensor_from_name("keyboard") == SensorKind::Keyboard);
    CHECK_FALSE(sensor_from_name("Gyroscope").has_value());
}

TEST_CASE("Uls8Record derives a total in range") {
    const auto r = Uls8Record::from_scores(std::array<int, 8>{2, 2, 3, 2, 2, 3, 2, 2});
    CHECK(r.total == 16);
    CHECK(r.total >= 8);
    CHECK(r.total <= 32);
}
