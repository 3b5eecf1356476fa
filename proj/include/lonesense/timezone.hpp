#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lonesense/calendar.hpp"

namespace lonesense {

// UTC, fixed offsets ("UTC+10", "UTC-05:30"), and IANA zones loaded from the
// system zoneinfo database (TZif). Future instants past the last recorded
// transition reuse the last transition's offset.
class TimeZone {
public:
    TimeZone() = default;

    static TimeZone utc();
    static TimeZone fixed(int offset_seconds, std::string id);
    // Throws ValidationError for unknown or unloadable zone ids.
    static TimeZone load(const std::string& id);

    int offset_seconds_at(std::int64_t utc_seconds) const;
    const std::string& id() const { return id_; }

private:
    struct Transition {
        std::int64_t at_utc;  // seconds
        int offset;           // UTC offset in effect from this instant
    };

    std::string id_ = "UTC";
    int initial_offset_ = 0;
    std::vector<Transition> transitions_;  // sorted; empty for fixed zones
};

struct LocalTime {
    CivilDate date;
    int minutes_after_midnight = 0;
    std::int64_t ms_of_day = 0;
};

// Deterministic mapping of an epoch-ms instant into a zone's local calendar.
LocalTime localize(std::int64_t timestamp_ms, const TimeZone& zone);

}  // namespace lonesense
