#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lonesense/core.hpp"
#include "lonesense/timezone.hpp"

namespace lonesense {

enum class LogFormat { DelimitedText, JsonLines };

struct LogSource {
    std::filesystem::path path;
    LogFormat format = LogFormat::DelimitedText;
    SensorKind kind = SensorKind::Screen;
    std::string timezone = "UTC";  // default zone when the roster has no entry
};

struct RejectRecord {
    std::string source;      // file stem
    std::size_t row_number;  // 1-based data row (or line for json-lines)
    std::string reason;      // "schema" | "timestamp" | "range" | "sensor" | "duplicate"
    std::string detail;
};

struct IngestReport {
    std::size_t rows_read = 0;
    std::size_t events_emitted = 0;
    std::vector<RejectRecord> rejects;
    // participant -> local date -> event count (localized per the roster)
    std::map<std::string, std::map<CivilDate, std::size_t>> per_day_counts;
};

// participant -> timezone, with a default for absent participants
class ZoneRoster {
public:
    explicit ZoneRoster(std::string default_zone = "UTC");

    void set(const std::string& participant_id, const std::string& zone_id);
    const TimeZone& zone_for(const std::string& participant_id) const;
    const std::map<std::string, std::string>& entries() const { return zones_; }
    const std::string& default_zone() const { return default_zone_id_; }

private:
    std::string default_zone_id_;
    std::map<std::string, std::string> zones_;
    // lazily loaded zone objects, shared across lookups
    mutable std::map<std::string, std::shared_ptr<const TimeZone>> cache_;
};

// `participant_id,timezone` delimited file.
ZoneRoster load_roster(const std::filesystem::path& path, const std::string& default_zone = "UTC");

struct IngestResult {
    std::vector<SensorEvent> events;  // sorted by (participant, timestamp), file-order tiebreak
    IngestReport report;
};

// Parse one source. Every row becomes exactly one event or one reject;
// duplicates (same participant, timestamp, payload) are rejected as such.
IngestResult parse_log(const LogSource& source, const ZoneRoster& roster);

// Parse several sources and merge into one order-stable stream.
IngestResult parse_logs(const std::vector<LogSource>& sources, const ZoneRoster& roster);

// Canonical delimited header for a sensor's log file.
std::vector<std::string> expected_header(SensorKind kind);

// Payload fields in the canonical column order (everything after
// participant_id,timestamp_ms,sensor).
std::vector<std::string> payload_fields(const SensorEvent& event);

void write_events_csv(const std::filesystem::path& path, SensorKind kind,
                      const std::vector<SensorEvent>& events, const std::string& config_hash = "");

}  // namespace lonesense
