#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lonesense/dataset.hpp"

namespace lonesense {

struct ForestConfig {
    int n_trees = 300;
    int max_depth = 0;  // 0 = unlimited
    int min_samples_leaf = 2;
    // 0 = ceil(F/3); in (0,1] a fraction of F; an integer >= 1 a count
    double features_per_split = 0;
    bool bootstrap = true;
    std::uint64_t rng_seed = 0;
    int jobs = 1;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    int left = -1;
    int right = -1;
    double value = 0;  // leaf mean
};

struct Tree {
    std::vector<TreeNode> nodes;
    double predict(const double* row, std::size_t stride = 1) const;
};

struct TrainedForest {
    std::vector<Tree> trees;
    // normalized mean decrease in split impurity (variance), sums to 1;
    // uniform when the target is constant
    std::vector<double> feature_importances;
    std::size_t n_features = 0;
    double y_min = 0;
    double y_max = 0;
};

struct DataView {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> x;  // row-major
    double at(std::size_t r, std::size_t c) const { return x[r * cols + c]; }
};

// Variance-reduction regression forest. Deterministic given rng_seed: per-tree
// streams derive from (seed, tree index), so thread scheduling never changes
// the result.
TrainedForest train_forest(const DataView& data, std::span<const double> y,
                           const ForestConfig& cfg);

std::vector<double> predict(const TrainedForest& forest, const DataView& data);

enum class RfeStepMode { Fixed, Geometric };

// Elimination is driven by importances averaged over the fold forests; the
// alternative ranks by a single full-data fit per iteration (CV metrics are
// unchanged either way).
enum class RfeImportanceSource { CvFolds, FullFit };

struct RfeConfig {
    int folds = 3;
    RfeStepMode step_mode = RfeStepMode::Fixed;
    int step = 1;                    // fixed mode: features removed per iteration
    double geometric_fraction = 0.1;  // geometric mode: fraction removed per iteration
    int min_features = 1;
    RfeImportanceSource importance_source = RfeImportanceSource::CvFolds;
};

struct RfeStepRecord {
    int step = 0;  // 1-based iteration
    std::vector<std::string> remaining;  // evaluated feature set (in-memory only)
    std::size_t remaining_count = 0;
    double cv_mae = 0;
    double cv_mbe = 0;
    std::vector<std::string> eliminated;  // removal order; empty on the final record
};

struct RfeTrace {
    std::vector<RfeStepRecord> steps;
    // rank 1 = most important: survivors by final importance, then eliminated
    // features in reverse elimination order
    std::vector<std::pair<std::string, int>> ranking;
    std::map<std::string, int> elimination_step;  // absent for survivors
    int argmin_step = 0;
    double min_cv_mae = 0;
    std::vector<std::string> best_remaining;
};

// Each iteration: k-fold CV with out-of-fold MAE/MBE, importances averaged
// over the fold forests, then the least-important feature(s) removed (ties
// break toward the larger column index).
RfeTrace run_rfe(const FlatDataset& dataset, const ForestConfig& forest_cfg,
                 const RfeConfig& rfe_cfg);

void write_rfe_trace_csv(const std::filesystem::path& path, const RfeTrace& trace,
                         const std::string& config_hash = "");
void write_rfe_ranking_csv(const std::filesystem::path& path, const RfeTrace& trace,
                           const std::string& config_hash = "");

// Round-trippable form for the report stage (per-step remaining sets are
// reduced to counts; the argmin set survives in full).
std::string rfe_trace_to_json(const RfeTrace& trace);
RfeTrace rfe_trace_from_json(const std::string& text);

}  // namespace lonesense
