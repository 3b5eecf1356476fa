#include "lonesense/config.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "lonesense/csv.hpp"
#include "lonesense/rng.hpp"

namespace lonesense {

namespace {
using json = nlohmann::json;

json effects_to_json(const std::vector<EffectSpec>& effects) {
    json arr = json::array();
    for (const auto& e : effects) {
        arr.push_back({{"family", e.family}, {"direction", e.direction}, {"strength", e.strength}});
    }
    return arr;
}

std::vector<EffectSpec> effects_from_json(const json& arr) {
    std::vector<EffectSpec> out;
    for (const auto& e : arr) {
        out.push_back({e.at("family").get<std::string>(), e.at("direction").get<double>(),
                       e.at("strength").get<double>()});
    }
    return out;
}

}  // namespace

std::string config_to_json(const RunConfig& cfg) {
    json j{
        {"seed", cfg.seed},
        {"out_dir", cfg.out_dir.string()},
        {"timezone_default", cfg.timezone_default},
        {"jobs", cfg.jobs},
        {"synth",
         {{"participants", cfg.synth.n_participants},
          {"seed", cfg.synth.seed},
          {"noise", cfg.synth.noise},
          {"missing_day_probability", cfg.synth.missing_day_probability},
          {"semester_start", to_string(cfg.synth.semester_start)},
          {"timezone", cfg.synth.timezone},
          {"effects", effects_to_json(cfg.synth.effects)}}},
        {"features",
         {{"stay_radius_m", cfg.features.stay_radius_m},
          {"min_stay_s", cfg.features.min_stay_s},
          {"moving_speed_threshold_kmh", cfg.features.moving_speed_threshold_kmh},
          {"session_gap_s", cfg.features.session_gap_s},
          {"app_categories", cfg.features.app_categories},
          {"app_category_map", cfg.features.app_category_map}}},
        {"dataset",
         {{"min_coverage_days", cfg.dataset.min_coverage_days}, {"target", cfg.dataset.target}}},
        {"forest",
         {{"n_trees", cfg.forest.n_trees},
          {"max_depth", cfg.forest.max_depth},
          {"min_samples_leaf", cfg.forest.min_samples_leaf},
          {"features_per_split", cfg.forest.features_per_split},
          {"bootstrap", cfg.forest.bootstrap},
          {"rng_seed", cfg.forest.rng_seed}}},
        {"rfe",
         {{"folds", cfg.rfe.folds},
          {"step_mode", cfg.rfe.step_mode == RfeStepMode::Fixed ? "fixed" : "geometric"},
          {"step", cfg.rfe.step},
          {"geometric_fraction", cfg.rfe.geometric_fraction},
          {"min_features", cfg.rfe.min_features},
          {"importance_source",
           cfg.rfe.importance_source == RfeImportanceSource::CvFolds ? "cv_folds" : "full_fit"}}},
        {"llm",
         {{"backend", cfg.llm.backend.backend},
          {"endpoint", cfg.llm.backend.endpoint},
          {"api_key_env", cfg.llm.backend.api_key_env},
          {"timeout_s", cfg.llm.backend.timeout_s},
          {"max_retries", cfg.llm.backend.max_retries},
          {"replay_dir", cfg.llm.backend.replay_dir},
          {"modes", cfg.llm.modes},
          {"sensors", cfg.llm.sensors},
          {"stage", cfg.llm.stage},
          {"reverse_coded_totals", cfg.llm.reverse_coded_totals}}},
    };
    return j.dump(2) + "\n";
}

RunConfig config_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("config is not a json object");
    RunConfig cfg;
    try {
        cfg.seed = j.value("seed", cfg.seed);
        cfg.out_dir = j.value("out_dir", cfg.out_dir.string());
        cfg.timezone_default = j.value("timezone_default", cfg.timezone_default);
        cfg.jobs = j.value("jobs", cfg.jobs);
        if (j.contains("synth")) {
            const auto& s = j.at("synth");
            cfg.synth.n_participants = s.value("participants", cfg.synth.n_participants);
            cfg.synth.seed = s.value("seed", cfg.seed);
            cfg.synth.noise = s.value("noise", cfg.synth.noise);
            cfg.synth.missing_day_probability =
                s.value("missing_day_probability", cfg.synth.missing_day_probability);
            if (s.contains("semester_start")) {
                auto d = parse_date(s.at("semester_start").get<std::string>());
                if (!d) throw ConfigError("bad synth.semester_start");
                cfg.synth.semester_start = *d;
            }
            cfg.synth.timezone = s.value("timezone", cfg.synth.timezone);
            if (s.contains("effects")) cfg.synth.effects = effects_from_json(s.at("effects"));
        } else {
            cfg.synth.seed = cfg.seed;
        }
        if (j.contains("features")) {
            const auto& f = j.at("features");
            cfg.features.stay_radius_m = f.value("stay_radius_m", cfg.features.stay_radius_m);
            cfg.features.min_stay_s = f.value("min_stay_s", cfg.features.min_stay_s);
            cfg.features.moving_speed_threshold_kmh =
                f.value("moving_speed_threshold_kmh", cfg.features.moving_speed_threshold_kmh);
            cfg.features.session_gap_s = f.value("session_gap_s", cfg.features.session_gap_s);
            if (f.contains("app_categories")) {
                cfg.features.app_categories =
                    f.at("app_categories").get<std::vector<std::string>>();
            }
            if (f.contains("app_category_map")) {
                cfg.features.app_category_map =
                    f.at("app_category_map").get<std::map<std::string, std::string>>();
            }
        }
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            cfg.dataset.min_coverage_days = d.value("min_coverage_days", 7);
            cfg.dataset.target = d.value("target", std::string("total"));
        }
        if (j.contains("forest")) {
            const auto& f = j.at("forest");
            cfg.forest.n_trees = f.value("n_trees", cfg.forest.n_trees);
            cfg.forest.max_depth = f.value("max_depth", cfg.forest.max_depth);
            cfg.forest.min_samples_leaf = f.value("min_samples_leaf", cfg.forest.min_samples_leaf);
            cfg.forest.features_per_split =
                f.value("features_per_split", cfg.forest.features_per_split);
            cfg.forest.bootstrap = f.value("bootstrap", cfg.forest.bootstrap);
            cfg.forest.rng_seed = f.value("rng_seed", cfg.seed);
        } else {
            cfg.forest.rng_seed = cfg.seed;
        }
        if (j.contains("rfe")) {
            const auto& r = j.at("rfe");
            cfg.rfe.folds = r.value("folds", cfg.rfe.folds);
            const std::string mode = r.value("step_mode", std::string("fixed"));
            if (mode == "fixed") cfg.rfe.step_mode = RfeStepMode::Fixed;
            else if (mode == "geometric") cfg.rfe.step_mode = RfeStepMode::Geometric;
            else throw ConfigError("bad rfe.step_mode '" + mode + "'");
            cfg.rfe.step = r.value("step", cfg.rfe.step);
            cfg.rfe.geometric_fraction =
                r.value("geometric_fraction", cfg.rfe.geometric_fraction);
            cfg.rfe.min_features = r.value("min_features", cfg.rfe.min_features);
            const std::string source = r.value("importance_source", std::string("cv_folds"));
            if (source == "cv_folds") cfg.rfe.importance_source = RfeImportanceSource::CvFolds;
            else if (source == "full_fit") cfg.rfe.importance_source = RfeImportanceSource::FullFit;
            else throw ConfigError("bad rfe.importance_source '" + source + "'");
        }
        if (j.contains("llm")) {
            const auto& l = j.at("llm");
            cfg.llm.backend.backend = l.value("backend", cfg.llm.backend.backend);
            cfg.llm.backend.endpoint = l.value("endpoint", cfg.llm.backend.endpoint);
            cfg.llm.backend.api_key_env = l.value("api_key_env", cfg.llm.backend.api_key_env);
            cfg.llm.backend.timeout_s = l.value("timeout_s", cfg.llm.backend.timeout_s);
            cfg.llm.backend.max_retries = l.value("max_retries", cfg.llm.backend.max_retries);
            cfg.llm.backend.replay_dir = l.value("replay_dir", cfg.llm.backend.replay_dir);
            if (l.contains("modes")) cfg.llm.modes = l.at("modes").get<std::vector<std::string>>();
            cfg.llm.sensors = l.value("sensors", cfg.llm.sensors);
            cfg.llm.stage = l.value("stage", cfg.llm.stage);
            cfg.llm.reverse_coded_totals =
                l.value("reverse_coded_totals", cfg.llm.reverse_coded_totals);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    return config_from_json(read_text_file(path));
}

std::string config_hash_hex(const RunConfig& cfg) {
    // neither output placement nor worker parallelism may alter results,
    // so neither participates in the hash
    RunConfig canonical = cfg;
    canonical.out_dir = "";
    canonical.jobs = 1;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(config_to_json(canonical))));
    return buf;
}

void save_config(const std::filesystem::path& path, const RunConfig& cfg) {
    write_text_file(path, config_to_json(cfg));
}

void write_stage_manifest(const std::filesystem::path& stage_dir, const std::string& stage,
                          const std::string& config_hash, std::vector<std::string> files) {
    std::sort(files.begin(), files.end());
    json j{{"stage", stage}, {"config", config_hash}, {"files", files}};
    write_text_file(stage_dir / "manifest.json", j.dump(2) + "\n");
}

std::string read_stage_manifest_hash(const std::filesystem::path& stage_dir) {
    const auto path = stage_dir / "manifest.json";
    if (!std::filesystem::exists(path)) return "";
    json j = json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded()) return "";
    return j.value("config", "");
}

}  // namespace lonesense
