#include "lonesense/forest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "lonesense/csv.hpp"
#include "lonesense/metrics.hpp"
#include "lonesense/rng.hpp"

namespace lonesense {

namespace {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

std::size_t resolve_features_per_split(double configured, std::size_t n_cols) {
    if (configured <= 0) return (n_cols + 2) / 3;  // ceil(F/3)
    if (configured <= 1.0) {
        const auto m = static_cast<std::size_t>(std::ceil(configured * static_cast<double>(n_cols)));
        return std::clamp<std::size_t>(m, 1, n_cols);
    }
    return std::min<std::size_t>(static_cast<std::size_t>(configured), n_cols);
}

struct TreeBuilder {
    const DataView& data;
    std::span<const double> y;
    const ForestConfig& cfg;
    std::size_t m_try;
    Rng rng;
    Tree tree;
    std::vector<double> importance;  // raw impurity decrease per feature

    std::vector<std::size_t> scratch_features;

    TreeBuilder(const DataView& d, std::span<const double> targets, const ForestConfig& c,
                std::size_t mtry, std::uint64_t seed)
        : data(d), y(targets), cfg(c), m_try(mtry), rng(seed) {
        importance.assign(data.cols, 0.0);
        scratch_features.resize(data.cols);
        std::iota(scratch_features.begin(), scratch_features.end(), std::size_t{0});
    }

    int build(std::vector<std::size_t>& idx, int depth) {
        const auto n = idx.size();
        double sum = 0, sumsq = 0;
        for (std::size_t i : idx) {
            sum += y[i];
            sumsq += y[i] * y[i];
        }
        const double node_mean = sum / static_cast<double>(n);
        const double node_sse = std::max(0.0, sumsq - sum * sum / static_cast<double>(n));

        const bool depth_capped = cfg.max_depth > 0 && depth >= cfg.max_depth;
        if (n < 2 * static_cast<std::size_t>(cfg.min_samples_leaf) || depth_capped ||
            node_sse <= 1e-12) {
            return make_leaf(node_mean);
        }

        // partial Fisher-Yates draw of m_try candidate features
        for (std::size_t k = 0; k < m_try; ++k) {
            const std::size_t j = k + rng.next_below(data.cols - k);
            std::swap(scratch_features[k], scratch_features[j]);
        }

        int best_feature = -1;
        double best_threshold = 0;
        double best_gain = 0;
        std::vector<std::size_t> order(idx);

        for (std::size_t k = 0; k < m_try; ++k) {
            const std::size_t f = scratch_features[k];
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const double va = data.at(a, f);
                const double vb = data.at(b, f);
                if (va != vb) return va < vb;
                return a < b;  // deterministic under equal values
            });
            double left_sum = 0, left_sumsq = 0;
            for (std::size_t pos = 1; pos < n; ++pos) {
                const double yv = y[order[pos - 1]];
                left_sum += yv;
                left_sumsq += yv * yv;
                const double xa = data.at(order[pos - 1], f);
                const double xb = data.at(order[pos], f);
                if (!(xa < xb)) continue;
                const auto nl = pos;
                const auto nr = n - pos;
                if (nl < static_cast<std::size_t>(cfg.min_samples_leaf) ||
                    nr < static_cast<std::size_t>(cfg.min_samples_leaf)) {
                    continue;
                }
                const double threshold = (xa + xb) / 2.0;
                if (!(xa < threshold && threshold < xb)) continue;  // adjacent doubles
                const double right_sum = sum - left_sum;
                const double right_sumsq = sumsq - left_sumsq;
                const double sse_l =
                    std::max(0.0, left_sumsq - left_sum * left_sum / static_cast<double>(nl));
                const double sse_r =
                    std::max(0.0, right_sumsq - right_sum * right_sum / static_cast<double>(nr));
                const double gain = node_sse - sse_l - sse_r;
                if (gain > best_gain + 1e-12) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = threshold;
                }
            }
        }

        if (best_feature < 0) return make_leaf(node_mean);

        importance[static_cast<std::size_t>(best_feature)] += best_gain;

        std::vector<std::size_t> left_idx, right_idx;
        left_idx.reserve(n);
        right_idx.reserve(n);
        for (std::size_t i : idx) {
            (data.at(i, static_cast<std::size_t>(best_feature)) <= best_threshold ? left_idx
                                                                                  : right_idx)
                .push_back(i);
        }

        const int node = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({best_feature, best_threshold, -1, -1, node_mean});
        const int left = build(left_idx, depth + 1);
        const int right = build(right_idx, depth + 1);
        tree.nodes[static_cast<std::size_t>(node)].left = left;
        tree.nodes[static_cast<std::size_t>(node)].right = right;
        return node;
    }

    int make_leaf(double value) {
        tree.nodes.push_back({-1, 0, -1, -1, value});
        return static_cast<int>(tree.nodes.size() - 1);
    }
};

}  // namespace

double Tree::predict(const double* row, std::size_t stride) const {
    if (nodes.empty()) return 0.0;
    std::size_t node = 0;
    while (nodes[node].feature >= 0) {
        const auto& nd = nodes[node];
        node = static_cast<std::size_t>(
            row[static_cast<std::size_t>(nd.feature) * stride] <= nd.threshold ? nd.left
                                                                               : nd.right);
    }
    return nodes[node].value;
}

TrainedForest train_forest(const DataView& data, std::span<const double> y,
                           const ForestConfig& cfg) {
    if (data.rows < 2) throw ValidationError("train_forest: need at least 2 rows");
    if (data.cols < 1) throw ValidationError("train_forest: need at least 1 feature");
    if (y.size() != data.rows) throw ValidationError("train_forest: target size mismatch");
    if (cfg.n_trees < 1) throw ValidationError("train_forest: n_trees must be >= 1");
    for (double v : data.x) {
        if (!std::isfinite(v)) throw ValidationError("train_forest: non-finite feature value");
    }
    for (double v : y) {
        if (!std::isfinite(v)) throw ValidationError("train_forest: non-finite target value");
    }

    const std::size_t m_try = resolve_features_per_split(cfg.features_per_split, data.cols);
    const auto n_trees = static_cast<std::size_t>(cfg.n_trees);

    TrainedForest forest;
    forest.n_features = data.cols;
    forest.trees.resize(n_trees);
    forest.y_min = *std::min_element(y.begin(), y.end());
    forest.y_max = *std::max_element(y.begin(), y.end());

    std::vector<std::vector<double>> per_tree_importance(n_trees);

    parallel_for(n_trees, cfg.jobs, [&](std::size_t t) {
        TreeBuilder builder(data, y, cfg, m_try, mix64(cfg.rng_seed, t));
        std::vector<std::size_t> idx(data.rows);
        if (cfg.bootstrap) {
            for (auto& i : idx) i = builder.rng.next_below(data.rows);
        } else {
            std::iota(idx.begin(), idx.end(), std::size_t{0});
        }
        builder.build(idx, 0);
        forest.trees[t] = std::move(builder.tree);
        per_tree_importance[t] = std::move(builder.importance);
    });

    forest.feature_importances.assign(data.cols, 0.0);
    for (const auto& imp : per_tree_importance) {
        for (std::size_t f = 0; f < data.cols; ++f) forest.feature_importances[f] += imp[f];
    }
    double total = 0;
    for (double v : forest.feature_importances) total += v;
    if (total > 0) {
        for (double& v : forest.feature_importances) v /= total;
    } else {
        // constant target: no split ever happened
        const double uniform = 1.0 / static_cast<double>(data.cols);
        for (double& v : forest.feature_importances) v = uniform;
    }
    return forest;
}

std::vector<double> predict(const TrainedForest& forest, const DataView& data) {
    if (data.cols != forest.n_features) {
        throw ValidationError("predict: feature count mismatch (" + std::to_string(data.cols) +
                              " vs " + std::to_string(forest.n_features) + ")");
    }
    std::vector<double> out(data.rows, 0.0);
    for (std::size_t r = 0; r < data.rows; ++r) {
        double sum = 0;
        const double* row = data.x.data() + r * data.cols;
        for (const auto& tree : forest.trees) sum += tree.predict(row);
        out[r] = sum / static_cast<double>(forest.trees.size());
    }
    return out;
}

namespace {

std::vector<int> assign_folds(std::size_t n_rows, int folds, std::uint64_t seed) {
    std::vector<int> fold_of(n_rows);
    std::vector<std::size_t> count(static_cast<std::size_t>(folds), 0);
    for (std::size_t i = 0; i < n_rows; ++i) {
        fold_of[i] = static_cast<int>(mix64(seed, 0x666f6c64ULL, i) %
                                      static_cast<std::uint64_t>(folds));
        ++count[static_cast<std::size_t>(fold_of[i])];
    }
    // small-n fallback so every fold holds at least one row
    if (std::find(count.begin(), count.end(), std::size_t{0}) != count.end()) {
        for (std::size_t i = 0; i < n_rows; ++i) fold_of[i] = static_cast<int>(i % static_cast<std::size_t>(folds));
    }
    return fold_of;
}

std::uint64_t column_hash(const FlatDataset& d, std::size_t col) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t r = 0; r < d.n_rows; ++r) {
        const double v = d.at(r, col);
        const auto* bytes = reinterpret_cast<const unsigned char*>(&v);
        for (std::size_t b = 0; b < sizeof v; ++b) {
            h ^= bytes[b];
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

}  // namespace

RfeTrace run_rfe(const FlatDataset& dataset, const ForestConfig& forest_cfg,
                 const RfeConfig& rfe_cfg) {
    const std::size_t n = dataset.n_rows;
    const std::size_t total_features = dataset.n_cols;
    if (rfe_cfg.folds < 2) throw ValidationError("run_rfe: need at least 2 folds");
    if (n < static_cast<std::size_t>(rfe_cfg.folds)) {
        throw ValidationError("run_rfe: fewer rows than folds");
    }
    if (total_features < 1) throw ValidationError("run_rfe: empty feature set");
    if (rfe_cfg.min_features < 1) throw ValidationError("run_rfe: min_features must be >= 1");
    if (rfe_cfg.step_mode == RfeStepMode::Fixed) {
        if (rfe_cfg.step < 1) throw ValidationError("run_rfe: step must be >= 1");
        if (static_cast<std::size_t>(rfe_cfg.step) >= total_features) {
            throw ValidationError("run_rfe: step must be smaller than the feature count");
        }
    }

    const auto fold_of = assign_folds(n, rfe_cfg.folds, forest_cfg.rng_seed);

    std::vector<std::uint64_t> base_hash(total_features);
    for (std::size_t c = 0; c < total_features; ++c) base_hash[c] = column_hash(dataset, c);

    std::vector<std::size_t> active(total_features);
    std::iota(active.begin(), active.end(), std::size_t{0});

    RfeTrace trace;
    int step_no = 1;
    std::vector<double> last_avg_importance;

    while (true) {
        // elimination must be pure projection: surviving columns unchanged
        for (std::size_t c : active) {
            if (column_hash(dataset, c) != base_hash[c]) {
                throw std::logic_error("run_rfe: column data changed during elimination");
            }
        }

        std::vector<double> oof(n, 0.0);
        std::vector<double> importance_sum(active.size(), 0.0);

        for (int f = 0; f < rfe_cfg.folds; ++f) {
            std::vector<std::size_t> train_rows, test_rows;
            for (std::size_t i = 0; i < n; ++i) {
                (fold_of[i] == f ? test_rows : train_rows).push_back(i);
            }
            DataView train{train_rows.size(), active.size(), {}};
            train.x.reserve(train_rows.size() * active.size());
            std::vector<double> ytr;
            ytr.reserve(train_rows.size());
            for (std::size_t r : train_rows) {
                for (std::size_t c : active) train.x.push_back(dataset.at(r, c));
                ytr.push_back(dataset.y[r]);
            }
            ForestConfig fold_cfg = forest_cfg;
            fold_cfg.rng_seed = mix64(forest_cfg.rng_seed, static_cast<std::uint64_t>(step_no),
                                      static_cast<std::uint64_t>(f));
            const TrainedForest forest = train_forest(train, ytr, fold_cfg);
            for (std::size_t c = 0; c < active.size(); ++c) {
                importance_sum[c] += forest.feature_importances[c];
            }
            DataView test{test_rows.size(), active.size(), {}};
            test.x.reserve(test_rows.size() * active.size());
            for (std::size_t r : test_rows) {
                for (std::size_t c : active) test.x.push_back(dataset.at(r, c));
            }
            const auto preds = predict(forest, test);
            for (std::size_t i = 0; i < test_rows.size(); ++i) oof[test_rows[i]] = preds[i];
        }

        const Metrics cv = compute_metrics(oof, dataset.y);
        if (rfe_cfg.importance_source == RfeImportanceSource::FullFit) {
            DataView full{n, active.size(), {}};
            full.x.reserve(n * active.size());
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t col : active) full.x.push_back(dataset.at(r, col));
            }
            ForestConfig full_cfg = forest_cfg;
            full_cfg.rng_seed =
                mix64(forest_cfg.rng_seed, static_cast<std::uint64_t>(step_no), 0x66697475ULL);
            last_avg_importance = train_forest(full, dataset.y, full_cfg).feature_importances;
        } else {
            last_avg_importance.assign(importance_sum.begin(), importance_sum.end());
            for (double& v : last_avg_importance) v /= rfe_cfg.folds;
        }

        RfeStepRecord record;
        record.step = step_no;
        record.cv_mae = cv.mae;
        record.cv_mbe = cv.mbe;
        for (std::size_t c : active) record.remaining.push_back(dataset.column_names[c]);
        record.remaining_count = record.remaining.size();

        if (active.size() <= static_cast<std::size_t>(rfe_cfg.min_features)) {
            trace.steps.push_back(std::move(record));
            break;
        }

        std::size_t k;
        if (rfe_cfg.step_mode == RfeStepMode::Geometric) {
            k = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::floor(static_cast<double>(active.size()) *
                                                       rfe_cfg.geometric_fraction)));
        } else {
            k = static_cast<std::size_t>(rfe_cfg.step);
        }
        k = std::min(k, active.size() - static_cast<std::size_t>(rfe_cfg.min_features));

        // least important first; ties remove the larger column index first
        std::vector<std::size_t> order(active.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (last_avg_importance[a] != last_avg_importance[b]) {
                return last_avg_importance[a] < last_avg_importance[b];
            }
            return active[a] > active[b];
        });
        std::vector<std::size_t> doomed(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
        for (std::size_t pos : doomed) {
            record.eliminated.push_back(dataset.column_names[active[pos]]);
            trace.elimination_step[dataset.column_names[active[pos]]] = step_no;
        }
        trace.steps.push_back(std::move(record));

        std::sort(doomed.begin(), doomed.end(), std::greater<>());
        std::vector<double> next_importance;
        std::vector<std::size_t> next_active;
        next_active.reserve(active.size() - k);
        next_importance.reserve(active.size() - k);
        for (std::size_t c = 0; c < active.size(); ++c) {
            if (std::find(doomed.begin(), doomed.end(), c) == doomed.end()) {
                next_active.push_back(active[c]);
                next_importance.push_back(last_avg_importance[c]);
            }
        }
        active = std::move(next_active);
        last_avg_importance = std::move(next_importance);
        ++step_no;
    }

    // argmin of cv_mae over the trace (earliest step wins ties)
    trace.argmin_step = trace.steps.front().step;
    trace.min_cv_mae = trace.steps.front().cv_mae;
    for (const auto& s : trace.steps) {
        if (s.cv_mae < trace.min_cv_mae) {
            trace.min_cv_mae = s.cv_mae;
            trace.argmin_step = s.step;
        }
    }
    trace.best_remaining = trace.steps[static_cast<std::size_t>(trace.argmin_step - 1)].remaining;

    // ranking: survivors by final importance, then reverse elimination order
    std::vector<std::size_t> survivor_order(active.size());
    std::iota(survivor_order.begin(), survivor_order.end(), std::size_t{0});
    std::sort(survivor_order.begin(), survivor_order.end(), [&](std::size_t a, std::size_t b) {
        if (last_avg_importance[a] != last_avg_importance[b]) {
            return last_avg_importance[a] > last_avg_importance[b];
        }
        return active[a] < active[b];
    });
    int rank = 1;
    for (std::size_t pos : survivor_order) {
        trace.ranking.emplace_back(dataset.column_names[active[pos]], rank++);
    }
    for (auto it = trace.steps.rbegin(); it != trace.steps.rend(); ++it) {
        for (auto e = it->eliminated.rbegin(); e != it->eliminated.rend(); ++e) {
            trace.ranking.emplace_back(*e, rank++);
        }
    }
    return trace;
}

void write_rfe_trace_csv(const std::filesystem::path& path, const RfeTrace& trace,
                         const std::string& config_hash) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : trace.steps) {
        std::string eliminated;
        for (std::size_t i = 0; i < s.eliminated.size(); ++i) {
            if (i) eliminated += ';';
            eliminated += s.eliminated[i];
        }
        rows.push_back({std::to_string(s.step), std::to_string(s.remaining_count),
                        fmt_real(s.cv_mae), fmt_real(s.cv_mbe), eliminated});
    }
    write_csv(path, {"step", "remaining", "cv_mae", "cv_mbe", "eliminated"}, rows, config_hash);
}

void write_rfe_ranking_csv(const std::filesystem::path& path, const RfeTrace& trace,
                           const std::string& config_hash) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [feature, rank] : trace.ranking) {
        auto it = trace.elimination_step.find(feature);
        rows.push_back({feature, it == trace.elimination_step.end() ? "" : std::to_string(it->second),
                        std::to_string(rank)});
    }
    write_csv(path, {"feature", "elimination_step", "rank"}, rows, config_hash);
}

std::string rfe_trace_to_json(const RfeTrace& trace) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : trace.steps) {
        steps.push_back({{"step", s.step},
                         {"remaining_count", s.remaining_count},
                         {"cv_mae", s.cv_mae},
                         {"cv_mbe", s.cv_mbe},
                         {"eliminated", s.eliminated}});
    }
    nlohmann::json ranking = nlohmann::json::array();
    for (const auto& [feature, rank] : trace.ranking) {
        ranking.push_back({{"feature", feature}, {"rank", rank}});
    }
    nlohmann::json j{{"steps", steps},
                     {"ranking", ranking},
                     {"elimination_step", trace.elimination_step},
                     {"argmin_step", trace.argmin_step},
                     {"min_cv_mae", trace.min_cv_mae},
                     {"best_remaining", trace.best_remaining}};
    return j.dump(2) + "\n";
}

RfeTrace rfe_trace_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    RfeTrace trace;
    for (const auto& s : j.at("steps")) {
        RfeStepRecord rec;
        rec.step = s.at("step").get<int>();
        rec.remaining_count = s.at("remaining_count").get<std::size_t>();
        rec.cv_mae = s.at("cv_mae").get<double>();
        rec.cv_mbe = s.at("cv_mbe").get<double>();
        rec.eliminated = s.at("eliminated").get<std::vector<std::string>>();
        trace.steps.push_back(std::move(rec));
    }
    for (const auto& r : j.at("ranking")) {
        trace.ranking.emplace_back(r.at("feature").get<std::string>(), r.at("rank").get<int>());
    }
    trace.elimination_step = j.at("elimination_step").get<std::map<std::string, int>>();
    trace.argmin_step = j.at("argmin_step").get<int>();
    trace.min_cv_mae = j.at("min_cv_mae").get<double>();
    trace.best_remaining = j.at("best_remaining").get<std::vector<std::string>>();
    return trace;
}

}  // namespace lonesense
