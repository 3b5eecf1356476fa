#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace lonesense {

struct CivilDate {
    int year = 1970;
    int month = 1;  // 1..12
    int day = 1;    // 1..31

    auto operator<=>(const CivilDate&) const = default;
};

// Days since 1970-01-01 (proleptic Gregorian), and back.
std::int64_t days_from_civil(CivilDate d);
CivilDate civil_from_days(std::int64_t z);

CivilDate add_days(CivilDate d, std::int64_t n);
std::int64_t days_between(CivilDate from, CivilDate to);  // to - from

std::string to_string(CivilDate d);                        // YYYY-MM-DD
std::optional<CivilDate> parse_date(std::string_view s);   // strict YYYY-MM-DD

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

}  // namespace lonesense
