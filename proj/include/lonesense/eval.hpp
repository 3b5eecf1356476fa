#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lonesense/forest.hpp"
#include "lonesense/llm.hpp"
#include "lonesense/metrics.hpp"

namespace lonesense {

// Sum of the 8 predicted item scores; with reverse coding the configured
// reverse items map score -> 5 - score first, keeping totals on the 8..32
// questionnaire scale.
int total_from_prediction(const LlmPrediction& p, bool reverse_coded);

struct SensorModeMetrics {
    std::optional<Metrics> zero;
    std::optional<Metrics> one;
    std::optional<double> mae_change_pct;
    std::optional<double> mbe_change_pct;
    std::size_t excluded_zero = 0;  // invalid predictions dropped pairwise
    std::size_t excluded_one = 0;
    std::array<std::optional<Metrics>, 8> item_zero;
    std::array<std::optional<Metrics>, 8> item_one;
    // (participant, |error|) pairs per mode; box-plot data
    std::vector<std::pair<std::string, double>> abs_errors_zero;
    std::vector<std::pair<std::string, double>> abs_errors_one;
};

struct MetricsReport {
    bool reverse_coded_totals = true;
    Stage stage = Stage::EndOfSemester;
    std::size_t n_participants = 0;
    std::map<SensorKind, SensorModeMetrics> per_sensor;
    std::string config_hash;
};

// Invalid predictions are excluded pairwise; truth totals always come from the
// questionnaire scoring.
MetricsReport compute_metrics_report(const std::vector<PredictionRow>& rows,
                                     const std::vector<AssessmentPoint>& assessments,
                                     Stage subject_stage, bool reverse_coded_totals,
                                     const std::string& config_hash);

void write_metrics_json(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport read_metrics_json(const std::filesystem::path& path);

struct BestFeatureRow {
    int number = 0;
    std::string sensor;
    std::string feature;  // display name
    int day = 0;
};

// Parses `<feature>__day<k>` column names and sorts alphabetically by
// (sensor, feature, day).
std::vector<BestFeatureRow> best_subset_rows(const std::vector<std::string>& columns,
                                             const FeatureCatalog& catalog);

struct ReportInputs {
    std::optional<MetricsReport> metrics;
    std::vector<std::pair<Stage, RfeTrace>> rfe;
    const FeatureCatalog* catalog = nullptr;
    std::string config_hash;
};

// Writes the report bundle: Table-1-style sensor metrics, per-item MAE grid,
// per-participant absolute errors, RFE dot-plot traces with best-feature
// tables, and a human-readable summary.
void emit_report(const std::filesystem::path& out_dir, const ReportInputs& inputs);

}  // namespace lonesense
