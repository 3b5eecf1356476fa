#include "lonesense/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lonesense/csv.hpp"

namespace lonesense {

namespace {
using json = nlohmann::json;

json metrics_to_json(const std::optional<Metrics>& m) {
    if (!m) return nullptr;
    return json{{"mae", m->mae}, {"mbe", m->mbe}, {"n", m->n}};
}

std::optional<Metrics> metrics_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return Metrics{j.at("mae").get<double>(), j.at("mbe").get<double>(),
                   j.at("n").get<std::size_t>()};
}

}  // namespace

int total_from_prediction(const LlmPrediction& p, bool reverse_coded) {
    std::array<int, 8> scores{};
    for (const auto& e : p.entries) {
        if (e.entry < 1 || e.entry > 8 || e.score < 1 || e.score > 4) {
            throw ValidationError("total_from_prediction: invalid prediction");
        }
        scores[static_cast<std::size_t>(e.entry - 1)] = e.score;
    }
    if (reverse_coded) return score_total(scores);
    int sum = 0;
    for (int s : scores) sum += s;
    return sum;
}

MetricsReport compute_metrics_report(const std::vector<PredictionRow>& rows,
                                     const std::vector<AssessmentPoint>& assessments,
                                     Stage subject_stage, bool reverse_coded_totals,
                                     const std::string& config_hash) {
    std::map<std::string, const AssessmentPoint*> truth;
    for (const auto& a : assessments) {
        if (a.stage == subject_stage) truth[a.participant_id] = &a;
    }

    MetricsReport report;
    report.reverse_coded_totals = reverse_coded_totals;
    report.stage = subject_stage;
    report.n_participants = truth.size();
    report.config_hash = config_hash;

    struct Bucket {
        std::vector<double> pred_total, truth_total;
        std::array<std::vector<double>, 8> pred_item, truth_item;
        std::vector<std::pair<std::string, double>> abs_errors;
        std::size_t excluded = 0;
    };
    std::map<SensorKind, std::array<Bucket, 2>> buckets;  // [zero, one]

    for (const auto& row : rows) {
        if (row.stage != subject_stage) continue;
        auto t = truth.find(row.participant_id);
        if (t == truth.end()) continue;
        Bucket& b = buckets[row.sensor][row.mode == PromptMode::ZeroShot ? 0 : 1];
        if (row.status != ParseStatus::Ok || !row.prediction) {
            ++b.excluded;
            continue;
        }
        const int pred_total = total_from_prediction(*row.prediction, reverse_coded_totals);
        const int true_total = t->second->record.total;
        b.pred_total.push_back(pred_total);
        b.truth_total.push_back(true_total);
        b.abs_errors.emplace_back(row.participant_id,
                                  std::fabs(static_cast<double>(pred_total - true_total)));
        for (int i = 0; i < 8; ++i) {
            b.pred_item[static_cast<std::size_t>(i)].push_back(
                row.prediction->entries[static_cast<std::size_t>(i)].score);
            b.truth_item[static_cast<std::size_t>(i)].push_back(
                t->second->record.item_scores[static_cast<std::size_t>(i)]);
        }
    }

    for (auto& [sensor, modes] : buckets) {
        SensorModeMetrics sm;
        auto fill = [&](const Bucket& b, std::optional<Metrics>& out,
                        std::array<std::optional<Metrics>, 8>& items,
                        std::vector<std::pair<std::string, double>>& abs_out,
                        std::size_t& excluded) {
            excluded = b.excluded;
            abs_out = b.abs_errors;
            std::sort(abs_out.begin(), abs_out.end());
            if (!b.pred_total.empty()) {
                out = compute_metrics(b.pred_total, b.truth_total);
                for (int i = 0; i < 8; ++i) {
                    items[static_cast<std::size_t>(i)] =
                        compute_metrics(b.pred_item[static_cast<std::size_t>(i)],
                                        b.truth_item[static_cast<std::size_t>(i)]);
                }
            }
        };
        fill(modes[0], sm.zero, sm.item_zero, sm.abs_errors_zero, sm.excluded_zero);
        fill(modes[1], sm.one, sm.item_one, sm.abs_errors_one, sm.excluded_one);
        if (sm.zero && sm.one) {
            sm.mae_change_pct = change_rate_pct(sm.zero->mae, sm.one->mae);
            sm.mbe_change_pct = change_rate_pct(sm.zero->mbe, sm.one->mbe);
        }
        report.per_sensor[sensor] = std::move(sm);
    }
    return report;
}

void write_metrics_json(const std::filesystem::path& path, const MetricsReport& report) {
    json sensors = json::object();
    for (const auto& [sensor, sm] : report.per_sensor) {
        json items_zero = json::array(), items_one = json::array();
        for (int i = 0; i < 8; ++i) {
            items_zero.push_back(metrics_to_json(sm.item_zero[static_cast<std::size_t>(i)]));
            items_one.push_back(metrics_to_json(sm.item_one[static_cast<std::size_t>(i)]));
        }
        json abs_zero = json::array(), abs_one = json::array();
        for (const auto& [pid, err] : sm.abs_errors_zero) {
            abs_zero.push_back({{"participant", pid}, {"abs_error", err}});
        }
        for (const auto& [pid, err] : sm.abs_errors_one) {
            abs_one.push_back({{"participant", pid}, {"abs_error", err}});
        }
        sensors[std::string(sensor_name(sensor))] = json{
            {"zero_shot", metrics_to_json(sm.zero)},
            {"one_shot", metrics_to_json(sm.one)},
            {"mae_change_pct", sm.mae_change_pct ? json(*sm.mae_change_pct) : json(nullptr)},
            {"mbe_change_pct", sm.mbe_change_pct ? json(*sm.mbe_change_pct) : json(nullptr)},
            {"excluded_zero", sm.excluded_zero},
            {"excluded_one", sm.excluded_one},
            {"item_mae_zero", items_zero},
            {"item_mae_one", items_one},
            {"abs_errors_zero", abs_zero},
            {"abs_errors_one", abs_one},
        };
    }
    json j{
        {"reverse_coded_totals", report.reverse_coded_totals},
        {"stage", stage_name(report.stage)},
        {"n_participants", report.n_participants},
        {"config", report.config_hash},
        {"sensors", sensors},
    };
    write_text_file(path, j.dump(2) + "\n");
}

MetricsReport read_metrics_json(const std::filesystem::path& path) {
    const json j = json::parse(read_text_file(path));
    MetricsReport report;
    report.reverse_coded_totals = j.at("reverse_coded_totals").get<bool>();
    auto stage = stage_from_name(j.at("stage").get<std::string>());
    if (!stage) throw ValidationError("bad stage in metrics file");
    report.stage = *stage;
    report.n_participants = j.at("n_participants").get<std::size_t>();
    report.config_hash = j.value("config", "");
    for (const auto& [name, sj] : j.at("sensors").items()) {
        auto sensor = sensor_from_name(name);
        if (!sensor) throw ValidationError("bad sensor in metrics file");
        SensorModeMetrics sm;
        sm.zero = metrics_from_json(sj.at("zero_shot"));
        sm.one = metrics_from_json(sj.at("one_shot"));
        if (!sj.at("mae_change_pct").is_null()) sm.mae_change_pct = sj.at("mae_change_pct").get<double>();
        if (!sj.at("mbe_change_pct").is_null()) sm.mbe_change_pct = sj.at("mbe_change_pct").get<double>();
        sm.excluded_zero = sj.at("excluded_zero").get<std::size_t>();
        sm.excluded_one = sj.at("excluded_one").get<std::size_t>();
        for (int i = 0; i < 8; ++i) {
            sm.item_zero[static_cast<std::size_t>(i)] =
                metrics_from_json(sj.at("item_mae_zero").at(static_cast<std::size_t>(i)));
            sm.item_one[static_cast<std::size_t>(i)] =
                metrics_from_json(sj.at("item_mae_one").at(static_cast<std::size_t>(i)));
        }
        for (const auto& e : sj.at("abs_errors_zero")) {
            sm.abs_errors_zero.emplace_back(e.at("participant").get<std::string>(),
                                            e.at("abs_error").get<double>());
        }
        for (const auto& e : sj.at("abs_errors_one")) {
            sm.abs_errors_one.emplace_back(e.at("participant").get<std::string>(),
                                           e.at("abs_error").get<double>());
        }
        report.per_sensor[*sensor] = std::move(sm);
    }
    return report;
}

std::vector<BestFeatureRow> best_subset_rows(const std::vector<std::string>& columns,
                                             const FeatureCatalog& catalog) {
    std::vector<BestFeatureRow> rows;
    for (const auto& col : columns) {
        const auto sep = col.rfind("__day");
        if (sep == std::string::npos) {
            throw ValidationError("column '" + col + "' is not a <feature>__day<k> name");
        }
        const std::string feature = col.substr(0, sep);
        const int day = std::stoi(col.substr(sep + 5));
        const FeatureDef& def = catalog.at(catalog.index_of(feature));
        rows.push_back({0, std::string(sensor_name(def.sensor)), def.display, day});
    }
    std::sort(rows.begin(), rows.end(), [](const BestFeatureRow& a, const BestFeatureRow& b) {
        if (a.sensor != b.sensor) return a.sensor < b.sensor;
        if (a.feature != b.feature) return a.feature < b.feature;
        return a.day < b.day;
    });
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].number = static_cast<int>(i + 1);
    return rows;
}

void emit_report(const std::filesystem::path& out_dir, const ReportInputs& inputs) {
    std::filesystem::create_directories(out_dir);
    std::ostringstream summary;
    summary << "# Run summary\n\nconfig: " << inputs.config_hash << "\n";

    if (inputs.metrics && !inputs.metrics->per_sensor.empty()) {
        const auto& m = *inputs.metrics;
        summary << "\n## Personalized model metrics (" << stage_name(m.stage) << ", "
                << m.n_participants << " participants, totals "
                << (m.reverse_coded_totals ? "reverse-coded" : "raw-summed") << ")\n\n";
        summary << "| Sensor | Zero-shot MAE | Zero-shot MBE | One-shot MAE | One-shot MBE | "
                   "MAE change | MBE change |\n";
        summary << "|---|---|---|---|---|---|---|\n";

        std::vector<std::vector<std::string>> table1;
        for (const auto& [sensor, sm] : m.per_sensor) {
            auto cell = [](const std::optional<Metrics>& v, bool bias) {
                return v ? fmt_fixed(bias ? v->mbe : v->mae, 2) : std::string();
            };
            std::vector<std::string> row{
                std::string(sensor_name(sensor)), cell(sm.zero, false), cell(sm.zero, true),
                cell(sm.one, false),              cell(sm.one, true),
                fmt_change_rate(sm.mae_change_pct), fmt_change_rate(sm.mbe_change_pct)};
            summary << "| " << row[0] << " | " << row[1] << " | " << row[2] << " | " << row[3]
                    << " | " << row[4] << " | " << row[5] << " | " << row[6] << " |\n";
            table1.push_back(std::move(row));
        }
        write_csv(out_dir / "table1.csv",
                  {"sensor", "zero_shot_mae", "zero_shot_mbe", "one_shot_mae", "one_shot_mbe",
                   "mae_change_rate", "mbe_change_rate"},
                  table1, inputs.config_hash);

        std::vector<std::vector<std::string>> grid;
        std::vector<std::vector<std::string>> abs_rows;
        std::size_t excluded_total = 0;
        for (const auto& [sensor, sm] : m.per_sensor) {
            for (int mode = 0; mode < 2; ++mode) {
                const auto& items = mode == 0 ? sm.item_zero : sm.item_one;
                for (int i = 0; i < 8; ++i) {
                    const auto& it = items[static_cast<std::size_t>(i)];
                    if (!it) continue;
                    grid.push_back({mode == 0 ? "zero" : "one", std::string(sensor_name(sensor)),
                                    std::to_string(i + 1), fmt_real(it->mae)});
                }
                const auto& abs = mode == 0 ? sm.abs_errors_zero : sm.abs_errors_one;
                for (const auto& [pid, err] : abs) {
                    abs_rows.push_back({mode == 0 ? "zero" : "one",
                                        std::string(sensor_name(sensor)), pid, fmt_real(err)});
                }
            }
            excluded_total += sm.excluded_zero + sm.excluded_one;
        }
        write_csv(out_dir / "item_mae_grid.csv", {"mode", "sensor", "item", "mae"}, grid,
                  inputs.config_hash);
        write_csv(out_dir / "abs_errors.csv", {"mode", "sensor", "participant", "abs_error"},
                  abs_rows, inputs.config_hash);
        summary << "\nInvalid predictions excluded pairwise: " << excluded_total << "\n";
    }

    if (!inputs.rfe.empty() && inputs.catalog) {
        summary << "\n## Generalized model (feature elimination)\n";
        for (const auto& [stage, trace] : inputs.rfe) {
            const std::string suffix = std::string(stage_name(stage));
            write_rfe_trace_csv(out_dir / ("rfe_trace_" + suffix + ".csv"), trace,
                                inputs.config_hash);

            const auto best = best_subset_rows(trace.best_remaining, *inputs.catalog);
            std::vector<std::vector<std::string>> rows;
            for (const auto& r : best) {
                rows.push_back({std::to_string(r.number), r.sensor, r.feature,
                                std::to_string(r.day)});
            }
            write_csv(out_dir / ("best_features_" + suffix + ".csv"),
                      {"number", "sensor", "feature", "day"}, rows, inputs.config_hash);

            summary << "\n### Stage: " << suffix << "\n\n";
            summary << "Cross-validated MAE reaches its minimum of " << fmt_fixed(trace.min_cv_mae, 2)
                    << " with " << trace.best_remaining.size()
                    << " features remaining (step " << trace.argmin_step << ").\n\n";
            summary << "| Number | Sensor | Feature |\n|---|---|---|\n";
            for (const auto& r : best) {
                summary << "| " << r.number << " | " << r.sensor << " | " << r.feature << " (Day "
                        << r.day << ") |\n";
            }
        }
    }

    write_text_file(out_dir / "summary.md", summary.str());
}

}  // namespace lonesense
