#include "lonesense/core.hpp"

#include <algorithm>

namespace lonesense {

std::string_view sensor_name(SensorKind k) {
    switch (k) {
        case SensorKind::Applications: return "Applications";
        case SensorKind::Battery: return "Battery";
        case SensorKind::Calls: return "Calls";
        case SensorKind::Keyboard: return "Keyboard";
        case SensorKind::Locations: return "Locations";
        case SensorKind::Messages: return "Messages";
        case SensorKind::Screen: return "Screen";
    }
    return "Screen";
}

std::string_view sensor_file_stem(SensorKind k) {
    switch (k) {
        case SensorKind::Applications: return "applications";
        case SensorKind::Battery: return "battery";
        case SensorKind::Calls: return "calls";
        case SensorKind::Keyboard: return "keyboard";
        case SensorKind::Locations: return "locations";
        case SensorKind::Messages: return "messages";
        case SensorKind::Screen: return "screen";
    }
    return "screen";
}

std::optional<SensorKind> sensor_from_name(std::string_view name) {
    for (SensorKind k : kAllSensors) {
        if (name == sensor_name(k) || name == sensor_file_stem(k)) return k;
    }
    return std::nullopt;
}

SensorKind payload_kind(const SensorPayload& p) {
    switch (p.index()) {
        case 0: return SensorKind::Screen;
        case 1: return SensorKind::Locations;
        case 2: return SensorKind::Battery;
        case 3: return SensorKind::Keyboard;
        case 4: return SensorKind::Calls;
        case 5: return SensorKind::Messages;
        default: return SensorKind::Applications;
    }
}

int score_total(std::span<const int> item_scores) {
    if (item_scores.size() != 8) {
        throw ValidationError("score_total: expected 8 item scores, got " +
                              std::to_string(item_scores.size()));
    }
    int total = 0;
    for (int i = 0; i < 8; ++i) {
        const int raw = item_scores[static_cast<std::size_t>(i)];
        if (raw < 1 || raw > 4) {
            throw ValidationError("score_total: item " + std::to_string(i + 1) + " score " +
                                  std::to_string(raw) + " outside 1..4");
        }
        total += is_reverse_item(i + 1) ? 5 - raw : raw;
    }
    return total;
}

std::string_view item_text(int index1) {
    static constexpr std::array<std::string_view, 8> kItems{
        "I lack companionship.",
        "There is no one I can turn to.",
        "I am an outgoing person.",
        "I feel left out.",
        "I feel isolated from others.",
        "I can find companionship when I want it.",
        "I am unhappy being so withdrawn.",
        "People are around me but not with me.",
    };
    if (index1 < 1 || index1 > 8) {
        throw ValidationError("item_text: index " + std::to_string(index1) + " outside 1..8");
    }
    return kItems[static_cast<std::size_t>(index1 - 1)];
}

std::string_view stage_name(Stage s) {
    return s == Stage::Midterm ? "midterm" : "end_of_semester";
}

std::optional<Stage> stage_from_name(std::string_view name) {
    if (name == "midterm") return Stage::Midterm;
    if (name == "end_of_semester" || name == "end") return Stage::EndOfSemester;
    return std::nullopt;
}

}  // namespace lonesense
