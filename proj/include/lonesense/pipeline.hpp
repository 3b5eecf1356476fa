#pragma once

#include "lonesense/config.hpp"

namespace lonesense {

// Stage drivers behind the CLI subcommands. Every stage is idempotent given
// identical inputs and seed; each writes a manifest carrying the config hash.

void run_synth_stage(const RunConfig& cfg);
void run_ingest_stage(const RunConfig& cfg);
void run_extract_stage(const RunConfig& cfg);
void run_assemble_stage(const RunConfig& cfg);
void run_train_rfe_stage(const RunConfig& cfg);
void run_predict_llm_stage(const RunConfig& cfg);
void run_evaluate_stage(const RunConfig& cfg);
void run_report_stage(const RunConfig& cfg, bool force = false);
void run_pipeline(const RunConfig& cfg, bool force = false);

std::filesystem::path data_dir(const RunConfig& cfg);

}  // namespace lonesense
