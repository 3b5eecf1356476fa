#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lonesense/core.hpp"
#include "lonesense/features.hpp"

namespace lonesense {

// 14 consecutive pre-assessment days. Day 1 is the oldest; Day 14 is the day
// immediately before the assessment: day k = assessment_date - (15 - k).
struct FeatureWindow {
    std::string participant_id;
    Stage stage = Stage::Midterm;
    CivilDate assessment_date;
    std::vector<DailyFeatureRow> days;  // exactly 14, oldest -> newest
    int coverage_days = 0;              // days with any sensor data
    Uls8Record record;

    CivilDate date_of_day(int k) const { return add_days(assessment_date, -(15 - k)); }
};

struct WindowExclusion {
    std::string participant_id;
    Stage stage;
    std::string reason;  // "coverage"
};

struct WindowBuildResult {
    std::optional<FeatureWindow> window;
    std::optional<WindowExclusion> exclusion;
};

// Absent days become zero rows with all missing flags; the window is excluded
// when fewer than min_coverage_days days carry any sensor data (boundary
// inclusive: exactly min_coverage_days is kept).
WindowBuildResult build_window(const std::map<CivilDate, DailyFeatureRow>& participant_rows,
                               const AssessmentPoint& assessment, const FeatureCatalog& catalog,
                               int min_coverage_days = 7);

struct WindowSet {
    std::vector<FeatureWindow> windows;
    std::vector<WindowExclusion> exclusions;
};

WindowSet build_windows(const std::vector<DailyFeatureRow>& rows,
                        const std::vector<AssessmentPoint>& assessments,
                        const FeatureCatalog& catalog, int min_coverage_days = 7);

struct TargetSpec {
    bool total = true;
    int item = 0;  // 1..8 when !total

    static TargetSpec parse(const std::string& text);  // "total" or "item<k>"
    std::string name() const;
};

struct FlatDataset {
    std::vector<std::string> column_names;  // `<feature>__day<k>`, catalog outer, day inner
    std::vector<std::string> row_ids;       // participant ids
    Stage stage = Stage::Midterm;
    std::string target_name;
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> x;  // row-major n_rows x n_cols
    std::vector<double> y;

    double at(std::size_t r, std::size_t c) const { return x[r * n_cols + c]; }
};

FlatDataset flatten(const std::vector<FeatureWindow>& windows, const FeatureCatalog& catalog,
                    TargetSpec target);

void write_flat_csv(const std::filesystem::path& path, const FlatDataset& data,
                    const std::string& config_hash = "");
FlatDataset read_flat_csv(const std::filesystem::path& path);

void write_exclusions_csv(const std::filesystem::path& path,
                          const std::vector<WindowExclusion>& exclusions,
                          const std::string& config_hash = "");

// assessments.csv: participant_id,stage,assessment_date,item1..item8
void write_assessments_csv(const std::filesystem::path& path,
                           const std::vector<AssessmentPoint>& points,
                           const std::string& config_hash = "");
std::vector<AssessmentPoint> read_assessments_csv(const std::filesystem::path& path);

}  // namespace lonesense
