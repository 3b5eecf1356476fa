#include <doctest.h>

#include <algorithm>
#include <set>

#include "lonesense/forest.hpp"
#include "lonesense/metrics.hpp"
#include "lonesense/rng.hpp"
#include "lonesense/synth.hpp"

using namespace lonesense;

namespace {

FlatDataset small_dataset(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    FlatDataset d;
    d.n_rows = rows;
    d.n_cols = cols;
    for (std::size_t c = 0; c < cols; ++c) d.column_names.push_back("f" + std::to_string(c));
    Rng rng(seed);
    d.x.resize(rows * cols);
    for (auto& v : d.x) v = rng.gaussian();
    d.y.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        d.y[r] = 2.0 * d.at(r, 0) + 0.2 * rng.gaussian();
        d.row_ids.push_back("R" + std::to_string(r));
    }
    return d;
}

}  // namespace

TEST_CASE("three features, step 1, min 1: trace of 3 records counting down") {
    const auto data = small_dataset(30, 3, 1);
    ForestConfig fcfg;
    fcfg.n_trees = 10;
    fcfg.rng_seed = 2;
    RfeConfig rcfg;
    const auto trace = run_rfe(data, fcfg, rcfg);
    REQUIRE(trace.steps.size() == 3);
    CHECK(trace.steps[0].remaining_count == 3);
    CHECK(trace.steps[1].remaining_count == 2);
    CHECK(trace.steps[2].remaining_count == 1);
    CHECK(trace.steps[0].eliminated.size() == 1);
    CHECK(trace.steps[1].eliminated.size() == 1);
    CHECK(trace.steps[2].eliminated.empty());
}

TEST_CASE("step 3 over 10 features: 10,7,4,1") {
    const auto data = small_dataset(30, 10, 2);
    ForestConfig fcfg;
    fcfg.n_trees = 8;
    fcfg.rng_seed = 3;
    RfeConfig rcfg;
    rcfg.step = 3;
    const auto trace = run_rfe(data, fcfg, rcfg);
    std::vector<std::size_t> counts;
    for (const auto& s : trace.steps) counts.push_back(s.remaining_count);
    CHECK(counts == std::vector<std::size_t>{10, 7, 4, 1});
}

TEST_CASE("reruns reproduce identical traces") {
    const auto data = small_dataset(40, 6, 4);
    ForestConfig fcfg;
    fcfg.n_trees = 12;
    fcfg.rng_seed = 5;
    RfeConfig rcfg;
    const auto a = run_rfe(data, fcfg, rcfg);
    const auto b = run_rfe(data, fcfg, rcfg);
    CHECK(rfe_trace_to_json(a) == rfe_trace_to_json(b));
}

TEST_CASE("elimination leaves the dataset untouched (projection)") {
    auto data = small_dataset(30, 5, 6);
    const std::vector<double> snapshot = data.x;
    ForestConfig fcfg;
    fcfg.n_trees = 6;
    fcfg.rng_seed = 7;
    RfeConfig rcfg;
    run_rfe(data, fcfg, rcfg);
    CHECK(data.x == snapshot);
}

TEST_CASE("planted signals survive into the final set (majority of seeds)") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto planted = planted_matrix(150, 10, 2, 0.5, seed);
        ForestConfig fcfg;
        fcfg.n_trees = 40;
        fcfg.rng_seed = seed;
        RfeConfig rcfg;
        rcfg.min_features = 3;
        const auto trace = run_rfe(planted.data, fcfg, rcfg);
        const auto& final_set = trace.steps.back().remaining;
        std::set<std::string> names(final_set.begin(), final_set.end());
        bool all = true;
        for (std::size_t col : planted.signal_columns) {
            if (!names.count(planted.data.column_names[col])) all = false;
        }
        if (all) ++hits;
    }
    CHECK(hits >= 6);
}

TEST_CASE("mean-predictor sanity: zero bias when trained and scored on the same data") {
    const auto data = small_dataset(60, 4, 8);
    double mean = 0;
    for (double v : data.y) mean += v;
    mean /= static_cast<double>(data.y.size());
    std::vector<double> preds(data.y.size(), mean);
    CHECK(std::fabs(mbe(preds, data.y)) <= 1e-9);
}

TEST_CASE("cv metrics respect the bias bound on every step") {
    const auto data = small_dataset(45, 5, 9);
    ForestConfig fcfg;
    fcfg.n_trees = 10;
    fcfg.rng_seed = 10;
    RfeConfig rcfg;
    const auto trace = run_rfe(data, fcfg, rcfg);
    for (const auto& s : trace.steps) CHECK(std::fabs(s.cv_mbe) <= s.cv_mae + 1e-12);
}

TEST_CASE("argmin and ranking are consistent") {
    const auto data = small_dataset(40, 5, 11);
    ForestConfig fcfg;
    fcfg.n_trees = 10;
    fcfg.rng_seed = 12;
    RfeConfig rcfg;
    const auto trace = run_rfe(data, fcfg, rcfg);
    double best = trace.steps.front().cv_mae;
    for (const auto& s : trace.steps) best = std::min(best, s.cv_mae);
    CHECK(trace.min_cv_mae == best);
    CHECK(trace.best_remaining.size() ==
          trace.steps[static_cast<std::size_t>(trace.argmin_step - 1)].remaining_count);
    // ranking covers every feature exactly once
    std::set<std::string> ranked;
    for (const auto& [f, r] : trace.ranking) ranked.insert(f);
    CHECK(ranked.size() == data.n_cols);
    // the first-eliminated feature carries the worst (largest) rank
    const auto first_gone = trace.steps.front().eliminated.front();
    int worst_rank = 0;
    for (const auto& [f, r] : trace.ranking) worst_rank = std::max(worst_rank, r);
    for (const auto& [f, r] : trace.ranking) {
        if (f == first_gone) CHECK(r == worst_rank);
    }
}

TEST_CASE("trace json round trip") {
    const auto data = small_dataset(30, 4, 13);
    ForestConfig fcfg;
    fcfg.n_trees = 6;
    fcfg.rng_seed = 14;
    RfeConfig rcfg;
    const auto trace = run_rfe(data, fcfg, rcfg);
    const auto back = rfe_trace_from_json(rfe_trace_to_json(trace));
    CHECK(rfe_trace_to_json(back) == rfe_trace_to_json(trace));
}

TEST_CASE("geometric step mode shrinks by a fraction") {
    const auto data = small_dataset(30, 40, 15);
    ForestConfig fcfg;
    fcfg.n_trees = 5;
    fcfg.rng_seed = 16;
    RfeConfig rcfg;
    rcfg.step_mode = RfeStepMode::Geometric;
    rcfg.geometric_fraction = 0.25;
    rcfg.min_features = 5;
    const auto trace = run_rfe(data, fcfg, rcfg);
    CHECK(trace.steps.front().remaining_count == 40);
    CHECK(trace.steps[1].remaining_count == 30);
    CHECK(trace.steps.back().remaining_count == 5);
}

TEST_CASE("input validation") {
    const auto data = small_dataset(30, 5, 17);
    ForestConfig fcfg;
    RfeConfig rcfg;

    FlatDataset tiny = data;
    tiny.n_rows = 2;
    tiny.x.resize(2 * 5);
    tiny.y.resize(2);
    CHECK_THROWS_AS(run_rfe(tiny, fcfg, rcfg), ValidationError);

    RfeConfig big_step;
    big_step.step = 5;
    CHECK_THROWS_AS(run_rfe(data, fcfg, big_step), ValidationError);

    RfeConfig zero_min;
    zero_min.min_features = 0;
    CHECK_THROWS_AS(run_rfe(data, fcfg, zero_min), ValidationError);
}

TEST_CASE("full-fit importance source is supported and deterministic") {
    const auto data = small_dataset(40, 6, 21);
    ForestConfig fcfg;
    fcfg.n_trees = 10;
    fcfg.rng_seed = 22;
    RfeConfig rcfg;
    rcfg.importance_source = RfeImportanceSource::FullFit;
    const auto a = run_rfe(data, fcfg, rcfg);
    const auto b = run_rfe(data, fcfg, rcfg);
    CHECK(rfe_trace_to_json(a) == rfe_trace_to_json(b));
    CHECK(a.steps.front().remaining_count == 6);
    CHECK(a.steps.back().remaining_count == 1);
}
