#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lonesense/core.hpp"
#include "lonesense/ingest.hpp"

namespace lonesense {

inline constexpr std::int64_t kDayMs = 86400000;

struct FeatureDef {
    std::string name;         // stable machine id, e.g. "screen_total_unlock_duration"
    SensorKind sensor;
    std::string unit;
    std::string display;      // table label, e.g. "Total Unlock Duration"
    std::string description;  // used verbatim in LLM prompts
};

// Ordered feature catalog; the order defines column order everywhere.
class FeatureCatalog {
public:
    static FeatureCatalog standard(const std::vector<std::string>& app_categories =
                                       default_app_categories());

    static const std::vector<std::string>& default_app_categories();
    static const std::map<std::string, std::string>& default_app_category_map();

    const std::vector<FeatureDef>& defs() const { return defs_; }
    std::size_t size() const { return defs_.size(); }
    const FeatureDef& at(std::size_t i) const { return defs_[i]; }
    std::size_t index_of(const std::string& name) const;  // throws ValidationError
    bool contains(const std::string& name) const;
    std::vector<std::size_t> indices_for(SensorKind sensor) const;

private:
    std::vector<FeatureDef> defs_;
    std::map<std::string, std::size_t> index_;
    void push(FeatureDef def);
};

struct ExtractionParams {
    double stay_radius_m = 100.0;
    double min_stay_s = 600.0;
    double moving_speed_threshold_kmh = 1.0;
    double session_gap_s = 5.0;
    std::vector<std::string> app_categories = FeatureCatalog::default_app_categories();
    std::map<std::string, std::string> app_category_map =
        FeatureCatalog::default_app_category_map();

    double moving_speed_threshold_mps() const { return moving_speed_threshold_kmh / 3.6; }
};

// An event pinned to one participant-day, with its localized offset from that
// day's midnight.
struct LocalizedEvent {
    SensorEvent event;
    std::int64_t ms_of_day = 0;
};

using FeatureMap = std::map<std::string, double>;

// Each extractor is a pure function of (day events, params). Events must be
// one sensor, one participant-day, ordered by ms_of_day. Degenerate inputs
// produce zeros, never errors.
FeatureMap extract_screen(const std::vector<LocalizedEvent>& events);
FeatureMap extract_locations(const std::vector<LocalizedEvent>& events,
                             const ExtractionParams& params);
FeatureMap extract_battery(const std::vector<LocalizedEvent>& events);
FeatureMap extract_keyboard(const std::vector<LocalizedEvent>& events, double session_gap_s);
FeatureMap extract_calls(const std::vector<LocalizedEvent>& events);
FeatureMap extract_messages(const std::vector<LocalizedEvent>& events);
FeatureMap extract_applications(const std::vector<LocalizedEvent>& events,
                                const ExtractionParams& params);

double haversine_m(double lat1, double lon1, double lat2, double lon2);

struct Stay {
    double centroid_lat = 0;
    double centroid_lon = 0;
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;
    double duration_s() const { return static_cast<double>(end_ms - start_ms) / 1000.0; }
};

struct StayCluster {
    double centroid_lat = 0;
    double centroid_lon = 0;
    double total_stay_s = 0;
    int visit_count = 0;
};

struct LocationFix {
    std::int64_t ms = 0;
    double lat = 0;
    double lon = 0;
};

// Anchor-scan stay detection: a stay is a maximal run of fixes within
// radius of its first fix spanning at least min_stay_s.
std::vector<Stay> detect_stays(const std::vector<LocationFix>& fixes, double radius_m,
                               double min_stay_s);
// Greedy clustering of stays: first cluster whose (fixed) center is within
// radius wins; otherwise the stay seeds a new cluster.
std::vector<StayCluster> cluster_stays(const std::vector<Stay>& stays, double radius_m);

struct DailyFeatureRow {
    std::string participant_id;
    CivilDate date;
    std::vector<double> values;        // catalog order; missing computations are 0
    std::array<bool, 7> has_any_data{};  // indexed by SensorKind

    bool has_sensor(SensorKind k) const { return has_any_data[static_cast<std::size_t>(k)]; }
};

// Merge per-sensor extractor outputs into one full-width catalog row.
DailyFeatureRow assemble_day(const FeatureCatalog& catalog, const ExtractionParams& params,
                             const std::string& participant_id, CivilDate date,
                             const std::map<SensorKind, std::vector<LocalizedEvent>>& events);

// Group a merged event stream into participant-days using the roster's zones,
// then extract every day. Rows come back sorted by (participant, date).
std::vector<DailyFeatureRow> extract_all_days(const FeatureCatalog& catalog,
                                              const ExtractionParams& params,
                                              const std::vector<SensorEvent>& events,
                                              const ZoneRoster& roster);

// `<description>, <v1>, ..., <v7> (weekly average <avg>)`
std::string describe_feature(const FeatureDef& def, std::span<const double> daily_values);

void write_daily_features(const std::filesystem::path& values_path,
                          const std::filesystem::path& missing_path,
                          const FeatureCatalog& catalog, const std::vector<DailyFeatureRow>& rows,
                          const std::string& config_hash = "");
std::vector<DailyFeatureRow> read_daily_features(const std::filesystem::path& values_path,
                                                 const std::filesystem::path& missing_path,
                                                 const FeatureCatalog& catalog);

void write_catalog_csv(const std::filesystem::path& path, const FeatureCatalog& catalog,
                       const std::string& config_hash = "");

}  // namespace lonesense
