#include "lonesense/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "lonesense/csv.hpp"

namespace lonesense {

namespace {

using json = nlohmann::json;

std::optional<std::int64_t> parse_i64(const std::string& s) {
    if (s.empty()) return std::nullopt;
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<double> parse_f64(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

struct ParsedRow {
    std::size_t row_number = 0;
    SensorEvent event;
};

// Returns the reject reason, or empty when the payload parsed cleanly.
std::string parse_payload(SensorKind kind, const std::vector<std::string>& fields,
                          std::int64_t timestamp_ms, SensorPayload& out) {
    switch (kind) {
        case SensorKind::Screen: {
            const std::string& t = fields[0];
            ScreenTransition tr;
            if (t == "unlock") tr = ScreenTransition::Unlock;
            else if (t == "lock") tr = ScreenTransition::Lock;
            else if (t == "on") tr = ScreenTransition::On;
            else if (t == "off") tr = ScreenTransition::Off;
            else return "schema";
            out = ScreenPayload{tr};
            return "";
        }
        case SensorKind::Locations: {
            auto lat = parse_f64(fields[0]);
            auto lon = parse_f64(fields[1]);
            if (!lat || !lon) return "schema";
            std::optional<double> speed;
            if (!fields[2].empty()) {
                speed = parse_f64(fields[2]);
                if (!speed) return "schema";
            }
            if (*lat < -90.0 || *lat > 90.0 || *lon < -180.0 || *lon > 180.0) return "range";
            if (speed && *speed < 0.0) return "range";
            out = LocationPayload{*lat, *lon, speed};
            return "";
        }
        case SensorKind::Battery: {
            auto level = parse_i64(fields[0]);
            if (!level) return "schema";
            BatteryState st;
            if (fields[1] == "charging") st = BatteryState::Charging;
            else if (fields[1] == "discharging") st = BatteryState::Discharging;
            else return "schema";
            if (*level < 0 || *level > 100) return "range";
            out = BatteryPayload{static_cast<int>(*level), st};
            return "";
        }
        case SensorKind::Keyboard: {
            auto delta = parse_i64(fields[0]);
            if (!delta) return "schema";
            out = KeyboardPayload{static_cast<int>(*delta)};
            return "";
        }
        case SensorKind::Calls: {
            CallDirection dir;
            if (fields[0] == "incoming") dir = CallDirection::Incoming;
            else if (fields[0] == "outgoing") dir = CallDirection::Outgoing;
            else if (fields[0] == "missed") dir = CallDirection::Missed;
            else return "schema";
            auto dur = parse_f64(fields[1]);
            if (!dur) return "schema";
            if (*dur < 0.0) return "range";
            out = CallPayload{dir, *dur, fields[2]};
            return "";
        }
        case SensorKind::Messages: {
            MessageDirection dir;
            if (fields[0] == "sent") dir = MessageDirection::Sent;
            else if (fields[0] == "received") dir = MessageDirection::Received;
            else return "schema";
            out = MessagePayload{dir, fields[1]};
            return "";
        }
        case SensorKind::Applications: {
            auto start = parse_i64(fields[1]);
            auto end = parse_i64(fields[2]);
            if (fields[0].empty() || !start || !end) return "schema";
            if (*start <= 0 || *end < *start) return "range";
            (void)timestamp_ms;
            out = AppPayload{fields[0], *start, *end};
            return "";
        }
    }
    return "schema";
}

std::string dedupe_key(const SensorEvent& e) {
    std::string key = e.participant_id;
    key += '\x1f';
    key += std::to_string(e.timestamp_ms);
    for (const auto& f : payload_fields(e)) {
        key += '\x1f';
        key += f;
    }
    return key;
}

// Parses a source into rows + rejects; no cross-row work.
void parse_rows(const LogSource& source, std::vector<ParsedRow>& rows,
                std::vector<RejectRecord>& rejects, std::size_t& rows_read) {
    const std::string stem = source.path.stem().string();
    std::ifstream in(source.path);
    if (!in) throw IoError("cannot open log source " + source.path.string());

    auto reject = [&](std::size_t row, std::string reason, std::string detail) {
        rejects.push_back({stem, row, std::move(reason), std::move(detail)});
    };

    const auto header = expected_header(source.kind);
    std::string line;
    std::size_t row_number = 0;

    if (source.format == LogFormat::DelimitedText) {
        bool header_seen = false;
        while (std::getline(in, line)) {
            if (!header_seen) {
                if (!line.empty() && line[0] == '#') continue;
                if (split_csv_line(line) != header) {
                    throw ValidationError("header mismatch in " + source.path.string() +
                                          " (expected " + sensor_file_stem(source.kind).data() +
                                          " schema)");
                }
                header_seen = true;
                continue;
            }
            if (line.empty()) continue;
            ++row_number;
            ++rows_read;
            auto fields = split_csv_line(line);
            if (fields.size() != header.size()) {
                reject(row_number, "schema", "expected " + std::to_string(header.size()) +
                                                " fields, got " + std::to_string(fields.size()));
                continue;
            }
            if (fields[0].empty()) {
                reject(row_number, "schema", "empty participant_id");
                continue;
            }
            auto ts = parse_i64(fields[1]);
            if (!ts || *ts <= 0) {
                reject(row_number, "timestamp", "timestamp_ms '" + fields[1] + "'");
                continue;
            }
            if (fields[2] != sensor_file_stem(source.kind)) {
                reject(row_number, "sensor", "sensor column '" + fields[2] + "'");
                continue;
            }
            SensorEvent ev;
            ev.participant_id = fields[0];
            ev.kind = source.kind;
            ev.timestamp_ms = *ts;
            std::vector<std::string> payload(fields.begin() + 3, fields.end());
            const std::string why = parse_payload(source.kind, payload, *ts, ev.payload);
            if (!why.empty()) {
                reject(row_number, why, "payload fields");
                continue;
            }
            rows.push_back({row_number, std::move(ev)});
        }
        if (!header_seen) throw ValidationError("missing header row in " + source.path.string());
        return;
    }

    // json-lines mirror: keys are the delimited header names
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row_number;
        ++rows_read;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            reject(row_number, "schema", "invalid json object");
            continue;
        }
        auto field_str = [&](const std::string& key) -> std::string {
            if (!j.contains(key)) return "";
            const auto& v = j.at(key);
            if (v.is_string()) return v.get<std::string>();
            if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
            if (v.is_number_float()) return fmt_real(v.get<double>());
            return "";
        };
        std::vector<std::string> fields;
        fields.reserve(header.size());
        bool missing = false;
        for (const auto& key : header) {
            if (!j.contains(key) && !(source.kind == SensorKind::Locations && key == "speed")) {
                missing = true;
                break;
            }
            fields.push_back(field_str(key));
        }
        if (missing) {
            reject(row_number, "schema", "missing field");
            continue;
        }
        if (fields[0].empty()) {
            reject(row_number, "schema", "empty participant_id");
            continue;
        }
        auto ts = parse_i64(fields[1]);
        if (!ts || *ts <= 0) {
            reject(row_number, "timestamp", "timestamp_ms '" + fields[1] + "'");
            continue;
        }
        if (fields[2] != sensor_file_stem(source.kind)) {
            reject(row_number, "sensor", "sensor column '" + fields[2] + "'");
            continue;
        }
        SensorEvent ev;
        ev.participant_id = fields[0];
        ev.kind = source.kind;
        ev.timestamp_ms = *ts;
        std::vector<std::string> payload(fields.begin() + 3, fields.end());
        const std::string why = parse_payload(source.kind, payload, *ts, ev.payload);
        if (!why.empty()) {
            reject(row_number, why, "payload fields");
            continue;
        }
        rows.push_back({row_number, std::move(ev)});
    }
}

}  // namespace

ZoneRoster::ZoneRoster(std::string default_zone) : default_zone_id_(std::move(default_zone)) {}

void ZoneRoster::set(const std::string& participant_id, const std::string& zone_id) {
    zones_[participant_id] = zone_id;
}

const TimeZone& ZoneRoster::zone_for(const std::string& participant_id) const {
    auto it = zones_.find(participant_id);
    const std::string& zone_id = it == zones_.end() ? default_zone_id_ : it->second;
    auto cached = cache_.find(zone_id);
    if (cached == cache_.end()) {
        cached = cache_.emplace(zone_id, std::make_shared<TimeZone>(TimeZone::load(zone_id))).first;
    }
    return *cached->second;
}

ZoneRoster load_roster(const std::filesystem::path& path, const std::string& default_zone) {
    ZoneRoster roster(default_zone);
    const CsvTable table = read_csv(path);
    if (table.header != std::vector<std::string>{"participant_id", "timezone"}) {
        throw ValidationError("roster header mismatch in " + path.string());
    }
    for (const auto& row : table.rows) {
        if (row.size() != 2 || row[0].empty()) {
            throw ValidationError("bad roster row in " + path.string());
        }
        roster.set(row[0], row[1]);
    }
    return roster;
}

std::vector<std::string> expected_header(SensorKind kind) {
    std::vector<std::string> h{"participant_id", "timestamp_ms", "sensor"};
    switch (kind) {
        case SensorKind::Screen: h.insert(h.end(), {"transition"}); break;
        case SensorKind::Locations: h.insert(h.end(), {"latitude", "longitude", "speed"}); break;
        case SensorKind::Battery: h.insert(h.end(), {"level", "state"}); break;
        case SensorKind::Keyboard: h.insert(h.end(), {"text_length_delta"}); break;
        case SensorKind::Calls: h.insert(h.end(), {"direction", "duration_s", "contact"}); break;
        case SensorKind::Messages: h.insert(h.end(), {"direction", "contact"}); break;
        case SensorKind::Applications:
            h.insert(h.end(), {"package", "episode_start_ms", "episode_end_ms"});
            break;
    }
    return h;
}

std::vector<std::string> payload_fields(const SensorEvent& event) {
    struct Visitor {
        std::vector<std::string> operator()(const ScreenPayload& p) const {
            switch (p.transition) {
                case ScreenTransition::Unlock: return {"unlock"};
                case ScreenTransition::Lock: return {"lock"};
                case ScreenTransition::On: return {"on"};
                case ScreenTransition::Off: return {"off"};
            }
            return {"lock"};
        }
        std::vector<std::string> operator()(const LocationPayload& p) const {
            return {fmt_real(p.latitude), fmt_real(p.longitude),
                    p.speed_mps ? fmt_real(*p.speed_mps) : std::string()};
        }
        std::vector<std::string> operator()(const BatteryPayload& p) const {
            return {std::to_string(p.level_percent),
                    p.state == BatteryState::Charging ? "charging" : "discharging"};
        }
        std::vector<std::string> operator()(const KeyboardPayload& p) const {
            return {std::to_string(p.text_length_delta)};
        }
        std::vector<std::string> operator()(const CallPayload& p) const {
            const char* dir = p.direction == CallDirection::Incoming   ? "incoming"
                              : p.direction == CallDirection::Outgoing ? "outgoing"
                                                                       : "missed";
            return {dir, fmt_real(p.duration_s), p.contact_hash};
        }
        std::vector<std::string> operator()(const MessagePayload& p) const {
            return {p.direction == MessageDirection::Sent ? "sent" : "received", p.contact_hash};
        }
        std::vector<std::string> operator()(const AppPayload& p) const {
            return {p.package, std::to_string(p.episode_start_ms),
                    std::to_string(p.episode_end_ms)};
        }
    };
    return std::visit(Visitor{}, event.payload);
}

IngestResult parse_logs(const std::vector<LogSource>& sources, const ZoneRoster& roster) {
    IngestResult result;
    std::vector<ParsedRow> rows;
    std::vector<std::string> row_source;  // parallel: source stem per row

    for (const auto& source : sources) {
        std::vector<ParsedRow> file_rows;
        parse_rows(source, file_rows, result.report.rejects, result.report.rows_read);
        const std::string stem = source.path.stem().string();
        for (auto& r : file_rows) {
            rows.push_back(std::move(r));
            row_source.push_back(stem);
        }
    }

    // Drop exact duplicates (participant, timestamp, payload); first file-order
    // occurrence wins.
    std::unordered_set<std::string> seen;
    seen.reserve(rows.size() * 2);
    std::vector<std::size_t> kept;
    kept.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (seen.insert(dedupe_key(rows[i].event)).second) {
            kept.push_back(i);
        } else {
            result.report.rejects.push_back(
                {row_source[i], rows[i].row_number, "duplicate", "identical event already seen"});
        }
    }

    // Merge by timestamp per participant; stable sort keeps file order as the
    // tiebreak so scheduling can never change the output.
    std::stable_sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
        const auto& ea = rows[a].event;
        const auto& eb = rows[b].event;
        if (ea.participant_id != eb.participant_id) return ea.participant_id < eb.participant_id;
        return ea.timestamp_ms < eb.timestamp_ms;
    });

    result.events.reserve(kept.size());
    for (std::size_t i : kept) result.events.push_back(std::move(rows[i].event));
    result.report.events_emitted = result.events.size();

    for (const auto& ev : result.events) {
        const LocalTime lt = localize(ev.timestamp_ms, roster.zone_for(ev.participant_id));
        ++result.report.per_day_counts[ev.participant_id][lt.date];
    }

    if (result.report.rows_read != result.report.events_emitted + result.report.rejects.size()) {
        throw std::logic_error("ingest row accounting does not reconcile");
    }
    return result;
}

IngestResult parse_log(const LogSource& source, const ZoneRoster& roster) {
    return parse_logs(std::vector<LogSource>{source}, roster);
}

void write_events_csv(const std::filesystem::path& path, SensorKind kind,
                      const std::vector<SensorEvent>& events, const std::string& config_hash) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(events.size());
    for (const auto& ev : events) {
        if (ev.kind != kind) throw ValidationError("event sensor mismatch while writing log");
        std::vector<std::string> row{ev.participant_id, std::to_string(ev.timestamp_ms),
                                     std::string(sensor_file_stem(kind))};
        for (auto& f : payload_fields(ev)) row.push_back(std::move(f));
        rows.push_back(std::move(row));
    }
    write_csv(path, expected_header(kind), rows, config_hash);
}

}  // namespace lonesense
