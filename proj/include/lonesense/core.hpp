#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "lonesense/calendar.hpp"

namespace lonesense {

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Sensors

enum class SensorKind { Applications, Battery, Calls, Keyboard, Locations, Messages, Screen };

inline constexpr std::array<SensorKind, 7> kAllSensors{
    SensorKind::Applications, SensorKind::Battery,   SensorKind::Calls,  SensorKind::Keyboard,
    SensorKind::Locations,    SensorKind::Messages,  SensorKind::Screen,
};

std::string_view sensor_name(SensorKind k);       // "Applications", ... (prompt substitution)
std::string_view sensor_file_stem(SensorKind k);  // "applications", ... (file names)
std::optional<SensorKind> sensor_from_name(std::string_view name);  // accepts either form

enum class ScreenTransition { Unlock, Lock, On, Off };
enum class BatteryState { Charging, Discharging };
enum class CallDirection { Incoming, Outgoing, Missed };
enum class MessageDirection { Sent, Received };

struct ScreenPayload {
    ScreenTransition transition;
    bool operator==(const ScreenPayload&) const = default;
};
struct LocationPayload {
    double latitude = 0;
    double longitude = 0;
    std::optional<double> speed_mps;
    bool operator==(const LocationPayload&) const = default;
};
struct BatteryPayload {
    int level_percent = 0;
    BatteryState state = BatteryState::Discharging;
    bool operator==(const BatteryPayload&) const = default;
};
struct KeyboardPayload {
    int text_length_delta = 0;
    bool operator==(const KeyboardPayload&) const = default;
};
struct CallPayload {
    CallDirection direction = CallDirection::Incoming;
    double duration_s = 0;
    std::string contact_hash;  // opaque pre-hashed token, never a raw identifier
    bool operator==(const CallPayload&) const = default;
};
struct MessagePayload {
    MessageDirection direction = MessageDirection::Sent;
    std::string contact_hash;
    bool operator==(const MessagePayload&) const = default;
};
struct AppPayload {
    std::string package;
    std::int64_t episode_start_ms = 0;
    std::int64_t episode_end_ms = 0;
    bool operator==(const AppPayload&) const = default;
};

using SensorPayload = std::variant<ScreenPayload, LocationPayload, BatteryPayload,
                                   KeyboardPayload, CallPayload, MessagePayload, AppPayload>;

SensorKind payload_kind(const SensorPayload& p);

struct SensorEvent {
    std::string participant_id;
    SensorKind kind = SensorKind::Screen;
    std::int64_t timestamp_ms = 0;  // epoch milliseconds UTC, strictly positive
    SensorPayload payload;

    bool operator==(const SensorEvent&) const = default;
};

// ---------------------------------------------------------------------------
// ULS-8 scale

// 1-indexed positively-worded items, answered on the inverted scale.
// Single source of truth for every module that reverse-codes.
inline constexpr std::array<int, 2> kReverseItems{3, 6};

inline constexpr bool is_reverse_item(int index1) {
    return index1 == kReverseItems[0] || index1 == kReverseItems[1];
}

// Sum of the 8 item responses with items 3 and 6 mapped score -> 5 - score.
// Throws ValidationError naming the offending item on bad arity or range.
int score_total(std::span<const int> item_scores);

// Exact item wording, 1-indexed; embedded verbatim in prompts.
std::string_view item_text(int index1);

struct Uls8Record {
    std::array<int, 8> item_scores{};  // raw responses, each 1..4
    int total = 8;                     // derived, always 8..32

    static Uls8Record from_scores(std::span<const int> scores) {
        Uls8Record r;
        r.total = score_total(scores);  // validates
        for (int i = 0; i < 8; ++i) r.item_scores[static_cast<std::size_t>(i)] = scores[static_cast<std::size_t>(i)];
        return r;
    }
};

enum class Stage { Midterm, EndOfSemester };

inline constexpr std::array<Stage, 2> kAllStages{Stage::Midterm, Stage::EndOfSemester};

std::string_view stage_name(Stage s);  // "midterm" / "end_of_semester"
std::optional<Stage> stage_from_name(std::string_view name);

struct AssessmentPoint {
    std::string participant_id;
    Stage stage = Stage::Midterm;
    CivilDate assessment_date;
    Uls8Record record;
};

}  // namespace lonesense
