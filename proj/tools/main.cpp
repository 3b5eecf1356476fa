#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lonesense/pipeline.hpp"

namespace {

using lonesense::RunConfig;

// exit codes: 0 ok, 1 internal, 2 config/usage, 3 missing inputs,
// 4 data validation, 5 backend
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitMissingInput = 3;
constexpr int kExitValidation = 4;
constexpr int kExitBackend = 5;

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::string backend;
    bool force = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "Path to a json config file");
    cmd->add_option("--out", flags.out_dir, "Output directory (default: out)");
    cmd->add_option("--seed", flags.seed, "Seed for every randomized stage");
    cmd->add_option("--jobs", flags.jobs, "Worker parallelism bound");
    cmd->add_option("--backend", flags.backend, "LLM backend: mock, replay, or live");
    cmd->add_flag("--force", flags.force, "Allow mixing artifacts from different configs");
}

// flags win over the config file
RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig cfg;
    if (!flags.config_path.empty()) cfg = lonesense::load_config(flags.config_path);
    cfg.apply_seed(flags.seed.value_or(cfg.seed));
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (flags.jobs) cfg.jobs = *flags.jobs;
    if (!flags.backend.empty()) cfg.llm.backend.backend = flags.backend;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lonesense: smartphone sensing logs -> daily behavioral features -> "
                 "loneliness-scale predictions (random forest + LLM prompts) -> MAE/MBE reports"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string mode = "zero";
    std::string sensor = "all";
    std::string target;
    std::optional<int> rfe_step;
    std::optional<int> rfe_min_features;
    bool rfe_auto_step = false;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort's raw sensor logs");
    auto* ingest = app.add_subcommand("ingest", "Parse and normalize raw sensor logs");
    auto* extract = app.add_subcommand("extract", "Compute daily behavioral features");
    auto* assemble = app.add_subcommand("assemble", "Build 14-day windows and flat datasets");
    auto* train = app.add_subcommand("train-rfe", "Random-forest recursive feature elimination");
    auto* predict = app.add_subcommand("predict-llm", "Render prompts and collect predictions");
    auto* evaluate = app.add_subcommand("evaluate", "Compute MAE/MBE metrics from predictions");
    auto* report = app.add_subcommand("report", "Emit the report bundle");
    auto* pipeline = app.add_subcommand("pipeline", "Run every stage in order");
    auto* catalog_cmd = app.add_subcommand("catalog", "Print the feature catalog");

    for (CLI::App* cmd : {synth, ingest, extract, assemble, train, predict, evaluate, report,
                          pipeline, catalog_cmd}) {
        add_common(cmd, flags);
    }
    auto* mode_opt =
        predict->add_option("--mode", mode, "zero or one")->check(CLI::IsMember({"zero", "one"}));
    auto* sensor_opt = predict->add_option("--sensor", sensor, "Sensor name or 'all'");
    train->add_option("--step", rfe_step, "Features removed per iteration");
    train->add_flag("--auto-step", rfe_auto_step,
                    "Remove 10% per iteration (fast mode for wide datasets)");
    train->add_option("--min-features", rfe_min_features, "Stop at this many features");
    for (CLI::App* cmd : {assemble, train, pipeline}) {
        cmd->add_option("--target", target, "Prediction target: total or item1..item8");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = resolve_config(flags);
        if (!target.empty()) cfg.dataset.target = target;
        if (rfe_step) cfg.rfe.step = *rfe_step;
        if (rfe_min_features) cfg.rfe.min_features = *rfe_min_features;
        if (rfe_auto_step) cfg.rfe.step_mode = lonesense::RfeStepMode::Geometric;
        if (predict->parsed()) {
            if (mode_opt->count() > 0) cfg.llm.modes = {mode};
            if (sensor_opt->count() > 0) cfg.llm.sensors = sensor;
        }
        if (pipeline->parsed()) {
            // full-catalog RFE at step 1 is impractically slow for a demo run;
            // the geometric fast mode is the documented deviation
            if (!rfe_step && !rfe_auto_step) cfg.rfe.step_mode = lonesense::RfeStepMode::Geometric;
        }

        if (synth->parsed()) lonesense::run_synth_stage(cfg);
        else if (ingest->parsed()) lonesense::run_ingest_stage(cfg);
        else if (extract->parsed()) lonesense::run_extract_stage(cfg);
        else if (assemble->parsed()) lonesense::run_assemble_stage(cfg);
        else if (train->parsed()) lonesense::run_train_rfe_stage(cfg);
        else if (predict->parsed()) lonesense::run_predict_llm_stage(cfg);
        else if (evaluate->parsed()) lonesense::run_evaluate_stage(cfg);
        else if (report->parsed()) lonesense::run_report_stage(cfg, flags.force);
        else if (pipeline->parsed()) lonesense::run_pipeline(cfg, flags.force);
        else if (catalog_cmd->parsed()) {
            const auto catalog = lonesense::FeatureCatalog::standard(cfg.features.app_categories);
            std::printf("%zu features\n", catalog.size());
            for (const auto& def : catalog.defs()) {
                std::printf("%-36s %-12s %-6s %s\n", def.name.c_str(),
                            std::string(lonesense::sensor_name(def.sensor)).c_str(),
                            def.unit.c_str(), def.description.c_str());
            }
        }
        return 0;
    } catch (const lonesense::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const lonesense::BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const lonesense::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitMissingInput;
    } catch (const lonesense::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
}
