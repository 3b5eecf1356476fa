#include "lonesense/pipeline.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "lonesense/csv.hpp"
#include "lonesense/eval.hpp"

namespace lonesense {

namespace {
using json = nlohmann::json;

std::filesystem::path events_dir(const RunConfig& cfg) { return cfg.out_dir / "events"; }
std::filesystem::path features_dir(const RunConfig& cfg) { return cfg.out_dir / "features"; }
std::filesystem::path datasets_dir(const RunConfig& cfg) { return cfg.out_dir / "datasets"; }
std::filesystem::path rfe_dir(const RunConfig& cfg) { return cfg.out_dir / "rfe"; }
std::filesystem::path llm_dir(const RunConfig& cfg) { return cfg.out_dir / "llm"; }
std::filesystem::path metrics_dir(const RunConfig& cfg) { return cfg.out_dir / "metrics"; }
std::filesystem::path report_dir(const RunConfig& cfg) { return cfg.out_dir / "report"; }

void require_exists(const std::filesystem::path& path, const std::string& producer) {
    if (!std::filesystem::exists(path)) {
        throw IoError("missing input " + path.string() + " (run `" + producer + "` first)");
    }
}

ZoneRoster roster_for(const RunConfig& cfg) {
    const auto path = data_dir(cfg) / "roster.csv";
    if (std::filesystem::exists(path)) return load_roster(path, cfg.timezone_default);
    return ZoneRoster(cfg.timezone_default);
}

std::string flat_name(Stage stage, const std::string& target) {
    return "flat_" + std::string(stage_name(stage)) + "_" + target + ".csv";
}

std::vector<DailyFeatureRow> load_daily(const RunConfig& cfg, const FeatureCatalog& catalog) {
    require_exists(features_dir(cfg) / "daily_features.csv", "extract");
    return read_daily_features(features_dir(cfg) / "daily_features.csv",
                               features_dir(cfg) / "daily_missing.csv", catalog);
}

std::vector<SensorKind> sensors_from_config(const std::string& text) {
    if (text == "all") return {kAllSensors.begin(), kAllSensors.end()};
    auto kind = sensor_from_name(text);
    if (!kind) throw ConfigError("unknown sensor '" + text + "'");
    return {*kind};
}

}  // namespace

std::filesystem::path data_dir(const RunConfig& cfg) { return cfg.out_dir / "data"; }

void run_synth_stage(const RunConfig& cfg) {
    const std::string hash = config_hash_hex(cfg);
    const Cohort cohort = generate_cohort(cfg.synth);
    write_cohort(data_dir(cfg), cohort, cfg.synth, hash);
    std::vector<std::string> files{"roster.csv", "assessments.csv"};
    for (SensorKind k : kAllSensors) files.push_back(std::string(sensor_file_stem(k)) + ".csv");
    write_stage_manifest(data_dir(cfg), "synth", hash, std::move(files));
    save_config(cfg.out_dir / "run_config.json", cfg);
}

void run_ingest_stage(const RunConfig& cfg) {
    const std::string hash = config_hash_hex(cfg);
    const auto in_dir = data_dir(cfg);
    std::vector<LogSource> sources;
    for (SensorKind kind : kAllSensors) {
        const auto path = in_dir / (std::string(sensor_file_stem(kind)) + ".csv");
        require_exists(path, "synth");
        sources.push_back({path, LogFormat::DelimitedText, kind, cfg.timezone_default});
    }
    const ZoneRoster roster = roster_for(cfg);
    const IngestResult result = parse_logs(sources, roster);

    const auto out = events_dir(cfg);
    std::filesystem::create_directories(out);
    std::map<SensorKind, std::vector<SensorEvent>> by_kind;
    for (const auto& ev : result.events) by_kind[ev.kind].push_back(ev);
    std::vector<std::string> files;
    for (SensorKind kind : kAllSensors) {
        const std::string name = std::string(sensor_file_stem(kind)) + ".csv";
        write_events_csv(out / name, kind, by_kind[kind], hash);
        files.push_back(name);
    }

    std::vector<std::vector<std::string>> reject_rows;
    for (const auto& r : result.report.rejects) {
        reject_rows.push_back({r.source, std::to_string(r.row_number), r.reason, r.detail});
    }
    write_csv(out / "rejects.csv", {"source", "row", "reason", "detail"}, reject_rows, hash);
    files.push_back("rejects.csv");

    json per_day = json::object();
    for (const auto& [pid, days] : result.report.per_day_counts) {
        json d = json::object();
        for (const auto& [date, n] : days) d[to_string(date)] = n;
        per_day[pid] = std::move(d);
    }
    json report{{"rows_read", result.report.rows_read},
                {"events_emitted", result.report.events_emitted},
                {"rejects", result.report.rejects.size()},
                {"per_day_counts", per_day},
                {"config", hash}};
    write_text_file(out / "ingest_report.json", report.dump(2) + "\n");
    files.push_back("ingest_report.json");
    write_stage_manifest(out, "ingest", hash, std::move(files));
}

void run_extract_stage(const RunConfig& cfg) {
    const std::string hash = config_hash_hex(cfg);
    std::vector<SensorEvent> events;
    const ZoneRoster roster = roster_for(cfg);
    for (SensorKind kind : kAllSensors) {
        const auto path = events_dir(cfg) / (std::string(sensor_file_stem(kind)) + ".csv");
        require_exists(path, "ingest");
        LogSource source{path, LogFormat::DelimitedText, kind, cfg.timezone_default};
        auto result = parse_log(source, roster);
        events.insert(events.end(), result.events.begin(), result.events.end());
    }
    const FeatureCatalog catalog = FeatureCatalog::standard(cfg.features.app_categories);
    const auto rows = extract_all_days(catalog, cfg.features, events, roster);
    const auto out = features_dir(cfg);
    write_daily_features(out / "daily_features.csv", out / "daily_missing.csv", catalog, rows,
                         hash);
    write_catalog_csv(out / "catalog.csv", catalog, hash);
    write_stage_manifest(out, "extract", hash,
                         {"daily_features.csv", "daily_missing.csv", "catalog.csv"});
}

void run_assemble_stage(const RunConfig& cfg) {
    const std::string hash = config_hash_hex(cfg);
    const FeatureCatalog catalog = FeatureCatalog::standard(cfg.features.app_categories);
    const auto rows = load_daily(cfg, catalog);
    require_exists(data_dir(cfg) / "assessments.csv", "synth");
    const auto assessments = read_assessments_csv(data_dir(cfg) / "assessments.csv");
    const TargetSpec target = TargetSpec::parse(cfg.dataset.target);

    const auto out = datasets_dir(cfg);
    std::filesystem::create_directories(out);
    std::vector<std::string> files;
    std::vector<WindowExclusion> all_exclusions;
    for (Stage stage : kAllStages) {
        std::vector<AssessmentPoint> staged;
        for (const auto& a : assessments) {
            if (a.stage == stage) staged.push_back(a);
        }
        if (staged.empty()) continue;
        WindowSet set = build_windows(rows, staged, catalog, cfg.dataset.min_coverage_days);
        const FlatDataset flat = flatten(set.windows, catalog, target);
        const std::string name = flat_name(stage, target.name());
        write_flat_csv(out / name, flat, hash);
        files.push_back(name);
        all_exclusions.insert(all_exclusions.end(), set.exclusions.begin(),
                              set.exclusions.end());
    }
    write_exclusions_csv(out / "exclusions.csv", all_exclusions, hash);
    files.push_back("exclusions.csv");
    write_stage_manifest(out, "assemble", hash, std::move(files));
}

void run_train_rfe_stage(const RunConfig& cfg) {
    const std::string hash = config_hash_hex(cfg);
    const FeatureCatalog catalog = FeatureCatalog::standard(cfg.features.app_categories);
    const TargetSpec target = TargetSpec::parse(cfg.dataset.target);
    const auto out = rfe_dir(cfg);
    std::filesystem::create_directories(out);
    std::vector<std::string> files;
    bool any = false;
    for (Stage stage : kAllStages) {
        const auto path = datasets_dir(cfg) / flat_name(stage, target.name());
        if (!std::filesystem::exists(path)) continue;
        any = true;
        const FlatDataset dataset = read_flat_csv(path);
        ForestConfig forest_cfg = cfg.forest;
        forest_cfg.jobs = cfg.jobs;
        const RfeTrace trace = run_rfe(dataset, forest_cfg, cfg.rfe);
        const std::string suffix(stage_name(stage));
        write_rfe_trace_csv(out / ("trace_" + suffix + ".csv"), trace, hash);
        write_rfe_ranking_csv(out / ("ranking_" + suffix + ".csv"), trace, hash);
        const auto best = best_subset_rows(trace.best_remaining, catalog);
        std::vector<std::vector<std::string>> best_rows;
        for (const auto& r : best) {
            best_rows.push_back(
                {std::to_string(r.number), r.sensor, r.feature, std::to_string(r.day)});
        }
        write_csv(out / ("best_subset_" + suffix + ".csv"),
                  {"number", "sensor", "feature", "day"}, best_rows, hash);
        // hyperparameters travel with the artifact
        json meta{{"config", hash},
                  {"stage", suffix},
                  {"target", target.name()},
                  {"forest",
                   {{"n_trees", forest_cfg.n_trees},
                    {"max_depth", forest_cfg.max_depth},
                    {"min_samples_leaf", forest_cfg.min_samples_leaf},
                    {"features_per_split", forest_cfg.features_per_split},
                    {"bootstrap", forest_cfg.bootstrap},
                    {"rng_seed", forest_cfg.rng_seed}}},
                  {"rfe",
                   {{"folds", cfg.rfe.folds},
                    {"step_mode", cfg.rfe.step_mode == RfeStepMode::Fixed ? "fixed" : "geometric"},
                    {"step", cfg.rfe.step},
                    {"geometric_fraction", cfg.rfe.geometric_fraction},
                    {"min_features", cfg.rfe.min_features},
                    {"importance_source",
                     cfg.rfe.importance_source == RfeImportanceSource::CvFolds ? "cv_folds"
                                                                               : "full_fit"}}},
                  {"trace", json::parse(rfe_trace_to_json(trace))}};
        write_text_file(out / ("rfe_meta_" + suffix + ".json"), meta.dump(2) + "\n");
        files.insert(files.end(), {"trace_" + suffix + ".csv", "ranking_" + suffix + ".csv",
                                   "best_subset_" + suffix + ".csv",
                                   "rfe_meta_" + suffix + ".json"});
    }
    if (!any) {
        throw IoError("no flat datasets found under " + datasets_dir(cfg).string() +
                      " (run `assemble` first)");
    }
    write_stage_manifest(out, "train-rfe", hash, std::move(files));
}

void run_predict_llm_stage(const RunConfig& cfg) {
    const std::string hash = config_hash_hex(cfg);
    const FeatureCatalog catalog = FeatureCatalog::standard(cfg.features.app_categories);
    const auto rows = load_daily(cfg, catalog);
    require_exists(data_dir(cfg) / "assessments.csv", "synth");
    const auto assessments = read_assessments_csv(data_dir(cfg) / "assessments.csv");

    auto subject_stage = stage_from_name(cfg.llm.stage);
    if (!subject_stage) throw ConfigError("bad llm.stage '" + cfg.llm.stage + "'");

    const WindowSet windows =
        build_windows(rows, assessments, catalog, cfg.dataset.min_coverage_days);
    std::map<std::string, FeatureWindow> subject, example;
    for (const auto& w : windows.windows) {
        if (w.stage == *subject_stage) subject.emplace(w.participant_id, w);
        if (w.stage == Stage::Midterm) example.emplace(w.participant_id, w);
    }

    auto backend = make_backend(cfg.llm.backend);
    const auto out = llm_dir(cfg);
    std::filesystem::create_directories(out);
    ExperimentSink sink{out / "prompts", out / "responses"};

    std::vector<PredictionRow> all_rows;
    ExperimentStats totals;
    for (const auto& mode_name : cfg.llm.modes) {
        auto mode = prompt_mode_from_name(mode_name);
        if (!mode) throw ConfigError("bad llm mode '" + mode_name + "'");
        if (*mode == PromptMode::OneShot && *subject_stage == Stage::Midterm) {
            throw ConfigError("one-shot needs a midterm example; subject stage must be "
                              "end_of_semester");
        }
        ExperimentConfig xcfg;
        xcfg.mode = *mode;
        xcfg.sensors = sensors_from_config(cfg.llm.sensors);
        xcfg.subject_stage = *subject_stage;
        xcfg.max_retries = cfg.llm.backend.max_retries;
        xcfg.jobs = cfg.jobs;
        ExperimentStats stats;
        auto rows_out = run_experiment(subject, example, catalog, xcfg, *backend, &sink, &stats);
        all_rows.insert(all_rows.end(), rows_out.begin(), rows_out.end());
        totals.rows += stats.rows;
        totals.invalid += stats.invalid;
        totals.skipped_missing_example += stats.skipped_missing_example;
    }
    write_predictions_jsonl(out / "predictions.jsonl", all_rows, hash);
    json stats_json{{"rows", totals.rows},
                    {"invalid", totals.invalid},
                    {"skipped_missing_example", totals.skipped_missing_example},
                    {"config", hash}};
    write_text_file(out / "experiment_stats.json", stats_json.dump(2) + "\n");
    write_stage_manifest(out, "predict-llm", hash,
                         {"predictions.jsonl", "experiment_stats.json"});
}

void run_evaluate_stage(const RunConfig& cfg) {
    const std::string hash = config_hash_hex(cfg);
    require_exists(llm_dir(cfg) / "predictions.jsonl", "predict-llm");
    require_exists(data_dir(cfg) / "assessments.csv", "synth");
    const auto rows = read_predictions_jsonl(llm_dir(cfg) / "predictions.jsonl");
    const auto assessments = read_assessments_csv(data_dir(cfg) / "assessments.csv");
    auto subject_stage = stage_from_name(cfg.llm.stage);
    if (!subject_stage) throw ConfigError("bad llm.stage '" + cfg.llm.stage + "'");
    const MetricsReport report = compute_metrics_report(rows, assessments, *subject_stage,
                                                        cfg.llm.reverse_coded_totals, hash);
    std::filesystem::create_directories(metrics_dir(cfg));
    write_metrics_json(metrics_dir(cfg) / "metrics.json", report);
    write_stage_manifest(metrics_dir(cfg), "evaluate", hash, {"metrics.json"});
}

void run_report_stage(const RunConfig& cfg, bool force) {
    const std::string hash = config_hash_hex(cfg);
    ReportInputs inputs;
    inputs.config_hash = hash;
    const FeatureCatalog catalog = FeatureCatalog::standard(cfg.features.app_categories);
    inputs.catalog = &catalog;

    auto check_hash = [&](const std::filesystem::path& dir) {
        const std::string artifact_hash = read_stage_manifest_hash(dir);
        if (!force && !artifact_hash.empty() && artifact_hash != hash) {
            throw ConfigError("artifact " + dir.string() + " was produced by config " +
                              artifact_hash + " but the current config is " + hash +
                              " (use --force to mix)");
        }
    };

    if (std::filesystem::exists(metrics_dir(cfg) / "metrics.json")) {
        check_hash(metrics_dir(cfg));
        inputs.metrics = read_metrics_json(metrics_dir(cfg) / "metrics.json");
    }
    for (Stage stage : kAllStages) {
        const auto meta = rfe_dir(cfg) / ("rfe_meta_" + std::string(stage_name(stage)) + ".json");
        if (!std::filesystem::exists(meta)) continue;
        check_hash(rfe_dir(cfg));
        const json j = json::parse(read_text_file(meta));
        inputs.rfe.emplace_back(stage, rfe_trace_from_json(j.at("trace").dump()));
    }
    if (!inputs.metrics && inputs.rfe.empty()) {
        throw IoError("nothing to report: run `evaluate` and/or `train-rfe` first");
    }
    emit_report(report_dir(cfg), inputs);
    std::vector<std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(report_dir(cfg))) {
        if (entry.path().filename() != "manifest.json") {
            files.push_back(entry.path().filename().string());
        }
    }
    write_stage_manifest(report_dir(cfg), "report", hash, std::move(files));
}

void run_pipeline(const RunConfig& cfg, bool force) {
    run_synth_stage(cfg);
    run_ingest_stage(cfg);
    run_extract_stage(cfg);
    run_assemble_stage(cfg);
    run_train_rfe_stage(cfg);
    run_predict_llm_stage(cfg);
    run_evaluate_stage(cfg);
    run_report_stage(cfg, force);
}

}  // namespace lonesense
