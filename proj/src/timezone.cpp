#include "lonesense/timezone.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include "lonesense/core.hpp"

namespace lonesense {

namespace {

bool parse_fixed_offset(const std::string& id, int& offset_out) {
    // "UTC", "UTC+H", "UTC+HH", "UTC+HH:MM" and the '-' forms
    if (id == "UTC" || id == "Etc/UTC" || id == "Z") {
        offset_out = 0;
        return true;
    }
    if (id.size() < 5 || id.compare(0, 3, "UTC") != 0) return false;
    const char sign_c = id[3];
    if (sign_c != '+' && sign_c != '-') return false;
    const int sign = sign_c == '+' ? 1 : -1;
    std::string rest = id.substr(4);
    int hours = 0, minutes = 0;
    auto colon = rest.find(':');
    std::string hs = colon == std::string::npos ? rest : rest.substr(0, colon);
    std::string ms = colon == std::string::npos ? "" : rest.substr(colon + 1);
    if (hs.empty() || hs.size() > 2) return false;
    for (char c : hs) {
        if (c < '0' || c > '9') return false;
        hours = hours * 10 + (c - '0');
    }
    if (!ms.empty()) {
        if (ms.size() != 2) return false;
        for (char c : ms) {
            if (c < '0' || c > '9') return false;
            minutes = minutes * 10 + (c - '0');
        }
    }
    if (hours > 18 || minutes > 59) return false;
    offset_out = sign * (hours * 3600 + minutes * 60);
    return true;
}

bool valid_iana_id(const std::string& id) {
    if (id.empty() || id.front() == '/' || id.find("..") != std::string::npos) return false;
    for (char c : id) {
        const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                        c == '/' || c == '_' || c == '-' || c == '+';
        if (!ok) return false;
    }
    return true;
}

std::uint32_t read_u32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
           std::uint32_t(p[3]);
}

std::int64_t read_i64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
    return static_cast<std::int64_t>(v);
}

struct TzifBlock {
    std::vector<std::int64_t> transitions;
    std::vector<std::uint8_t> type_idx;
    std::vector<int> offsets;  // per type
    std::vector<bool> isdst;   // per type
};

// RFC 8536 layout. Returns the byte length consumed; fills `block`.
std::size_t parse_tzif_block(const unsigned char* data, std::size_t size, bool wide,
                             TzifBlock& block) {
    if (size < 44 || std::memcmp(data, "TZif", 4) != 0) throw IoError("tzif: bad magic");
    const std::uint32_t isutcnt = read_u32(data + 20);
    const std::uint32_t isstdcnt = read_u32(data + 24);
    const std::uint32_t leapcnt = read_u32(data + 28);
    const std::uint32_t timecnt = read_u32(data + 32);
    const std::uint32_t typecnt = read_u32(data + 36);
    const std::uint32_t charcnt = read_u32(data + 40);
    const std::size_t time_size = wide ? 8 : 4;
    const std::size_t body = timecnt * time_size + timecnt + typecnt * 6 + charcnt +
                             leapcnt * (time_size + 4) + isstdcnt + isutcnt;
    if (44 + body > size) throw IoError("tzif: truncated");

    const unsigned char* p = data + 44;
    block.transitions.resize(timecnt);
    for (std::uint32_t i = 0; i < timecnt; ++i) {
        block.transitions[i] = wide ? read_i64(p) : static_cast<std::int32_t>(read_u32(p));
        p += time_size;
    }
    block.type_idx.assign(p, p + timecnt);
    p += timecnt;
    block.offsets.resize(typecnt);
    block.isdst.resize(typecnt);
    for (std::uint32_t i = 0; i < typecnt; ++i) {
        block.offsets[i] = static_cast<std::int32_t>(read_u32(p));
        block.isdst[i] = p[4] != 0;
        p += 6;
    }
    return 44 + body;
}

}  // namespace

TimeZone TimeZone::utc() { return fixed(0, "UTC"); }

TimeZone TimeZone::fixed(int offset_seconds, std::string id) {
    TimeZone z;
    z.id_ = std::move(id);
    z.initial_offset_ = offset_seconds;
    return z;
}

TimeZone TimeZone::load(const std::string& id) {
    int fixed_offset = 0;
    if (parse_fixed_offset(id, fixed_offset)) return fixed(fixed_offset, id);
    if (!valid_iana_id(id)) throw ValidationError("unknown timezone: " + id);

    const char* tzdir = std::getenv("TZDIR");
    const std::string base = tzdir && *tzdir ? tzdir : "/usr/share/zoneinfo";
    std::ifstream in(base + "/" + id, std::ios::binary);
    if (!in) throw ValidationError("unknown timezone: " + id);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 44) throw ValidationError("unknown timezone: " + id);

    TzifBlock block;
    const char version = static_cast<char>(buf[4]);
    std::size_t consumed = parse_tzif_block(buf.data(), buf.size(), /*wide=*/false, block);
    if (version >= '2' && consumed < buf.size()) {
        // prefer the 64-bit block
        TzifBlock wide_block;
        parse_tzif_block(buf.data() + consumed, buf.size() - consumed, /*wide=*/true, wide_block);
        block = std::move(wide_block);
    }

    TimeZone z;
    z.id_ = id;
    if (block.offsets.empty()) throw ValidationError("unknown timezone: " + id);
    // offset before the first transition: first non-DST type, else type 0
    std::size_t initial_type = 0;
    for (std::size_t i = 0; i < block.isdst.size(); ++i) {
        if (!block.isdst[i]) {
            initial_type = i;
            break;
        }
    }
    z.initial_offset_ = block.offsets[initial_type];
    z.transitions_.reserve(block.transitions.size());
    for (std::size_t i = 0; i < block.transitions.size(); ++i) {
        z.transitions_.push_back({block.transitions[i], block.offsets[block.type_idx[i]]});
    }
    return z;
}

int TimeZone::offset_seconds_at(std::int64_t utc_seconds) const {
    if (transitions_.empty() || utc_seconds < transitions_.front().at_utc) return initial_offset_;
    auto it = std::upper_bound(transitions_.begin(), transitions_.end(), utc_seconds,
                               [](std::int64_t t, const Transition& tr) { return t < tr.at_utc; });
    return std::prev(it)->offset;
}

LocalTime localize(std::int64_t timestamp_ms, const TimeZone& zone) {
    const std::int64_t utc_seconds = floor_div(timestamp_ms, 1000);
    const int offset = zone.offset_seconds_at(utc_seconds);
    const std::int64_t local_ms = timestamp_ms + static_cast<std::int64_t>(offset) * 1000;
    const std::int64_t day = floor_div(local_ms, 86400000);
    LocalTime lt;
    lt.date = civil_from_days(day);
    lt.ms_of_day = local_ms - day * 86400000;
    lt.minutes_after_midnight = static_cast<int>(lt.ms_of_day / 60000);
    return lt;
}

}  // namespace lonesense
