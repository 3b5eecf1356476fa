#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lonesense/core.hpp"
#include "lonesense/dataset.hpp"

namespace lonesense {

// Signed coupling between a behavioral feature family and the latent
// loneliness level. direction +1 means the feature grows with loneliness.
struct EffectSpec {
    std::string family;  // catalog feature name
    double direction = 1.0;
    double strength = 0.5;
};

struct CohortSpec {
    int n_participants = 12;
    std::uint64_t seed = 1;
    double noise = 0.3;  // 0 disables all jitter
    double missing_day_probability = 0.1;
    CivilDate semester_start{2025, 2, 2};  // assessments at weeks 7 and 17
    std::string timezone = "UTC";          // fixed-offset zones only
    std::vector<EffectSpec> effects = default_effects();

    static std::vector<EffectSpec> default_effects();

    CivilDate assessment_date(Stage stage) const {
        return add_days(semester_start, stage == Stage::Midterm ? 49 : 119);
    }
};

struct Cohort {
    std::vector<std::string> participant_ids;
    std::map<SensorKind, std::vector<SensorEvent>> events;  // sorted (participant, ts)
    std::vector<AssessmentPoint> assessments;
    std::map<std::string, double> latent;  // participant -> loneliness in [8, 32]
};

// Deterministic under seed; the emitted logs pass ingestion with zero rejects.
Cohort generate_cohort(const CohortSpec& spec);

// Writes the ingestion file formats: one log per sensor, roster.csv, and
// assessments.csv.
void write_cohort(const std::filesystem::path& dir, const Cohort& cohort,
                  const CohortSpec& spec, const std::string& config_hash = "");

// Planted regression benchmark: n_signal columns carry a linear signal, the
// rest are noise. Column names reuse the standard catalog's flattened names
// so downstream reporting can resolve them.
struct PlantedDataset {
    FlatDataset data;
    std::vector<std::size_t> signal_columns;
};

PlantedDataset planted_matrix(std::size_t n_rows, std::size_t n_features, std::size_t n_signal,
                              double noise_sd, std::uint64_t seed);

}  // namespace lonesense
