#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lonesense/features.hpp"
#include "lonesense/forest.hpp"
#include "lonesense/llm.hpp"
#include "lonesense/synth.hpp"

namespace lonesense {

struct LlmRunConfig {
    BackendConfig backend;
    std::vector<std::string> modes{"zero", "one"};
    std::string sensors = "all";  // "all" or one sensor name
    std::string stage = "end_of_semester";
    bool reverse_coded_totals = true;
};

struct DatasetConfig {
    int min_coverage_days = 7;
    std::string target = "total";
};

struct RunConfig {
    std::uint64_t seed = 7;
    std::filesystem::path out_dir = "out";
    std::string timezone_default = "UTC";
    int jobs = 1;

    CohortSpec synth;
    ExtractionParams features;
    DatasetConfig dataset;
    ForestConfig forest;
    RfeConfig rfe;
    LlmRunConfig llm;

    // seed fan-out keeps the stages decoupled
    void apply_seed(std::uint64_t s) {
        seed = s;
        synth.seed = s;
        forest.rng_seed = s;
    }
};

RunConfig load_config(const std::filesystem::path& path);  // json document
std::string config_to_json(const RunConfig& cfg);          // canonical dump
RunConfig config_from_json(const std::string& text);
std::string config_hash_hex(const RunConfig& cfg);
void save_config(const std::filesystem::path& path, const RunConfig& cfg);

// Per-stage manifest: stage name, producing config hash, sorted file list.
void write_stage_manifest(const std::filesystem::path& stage_dir, const std::string& stage,
                          const std::string& config_hash, std::vector<std::string> files);
// Returns the config hash recorded in a stage dir, or empty when absent.
std::string read_stage_manifest_hash(const std::filesystem::path& stage_dir);

}  // namespace lonesense
