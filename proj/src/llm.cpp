#include "lonesense/llm.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lonesense/csv.hpp"
#include "lonesense/rng.hpp"

namespace lonesense {

namespace {
using json = nlohmann::json;

constexpr char kZeroShotTemplate[] =
    R"(You are an expert in analysing human behavior and psychological wellbeing. The following is a summary of a university student's smartphone usage data, collected via {sensor}. These activity metrics were recorded daily over the weeks preceding the administration of the UCLA Loneliness Scale questionnaire.

Please review the data and, based on the behavioral patterns reflected in {sensor}, infer the student's responses to each item on the UCLA Loneliness Scale (short form). Use a scale from 1 to 4, where:
  • 1 = Never
  • 2 = Rarely
  • 3 = Sometimes
  • 4 = Often

Your reasoning for each score should be concise (no more than two sentences) and grounded in the behavioral data provided.

Smartphone Usage Data (Daily Records):
{feature description}

Task: Based on the data above, complete the UCLA Loneliness entries (items 1-8) using scales 1 to 4 and a brief rationale grounded in the behavioral features:

Items:
1. I lack companionship.
2. There is no one I can turn to.
3. I am an outgoing person.
4. I feel left out.
5. I feel isolated from others.
6. I can find companionship when I want it.
7. I am unhappy being so withdrawn.
8. People are around me but not with me.

Response Format:
[
{"entry": 1, "score": <1-4>, "reason": "<2 sentences max>"},
{"entry": 2, "score": <1-4>, "reason": "<2 sentences max>"},
...
{"entry": 8, "score": <1-4>, "reason": "<2 sentences max>"}
]
)";

constexpr char kOneShotTemplate[] =
    R"(You are an expert in analysing human behavior and psychological wellbeing. Below is a university student’s smartphone usage summary collected via {sensor} over two weeks prior to completing the UCLA Loneliness Scale (ULS-8, short form). Each week’s data includes daily activity metrics.

Your task is to review this behavioral data and predict the student’s likely responses to each of the 8 ULS-8 items. Use the 4-point scale:
  • 1 = Never
  • 2 = Rarely
  • 3 = Sometimes
  • 4 = Often

Provide a numerical score for each item along with a concise rationale (maximum 2 sentences) based on the behavioral trends in the data.

ULS-8 Items:
1. I lack companionship.
2. There is no one I can turn to.
3. I am an outgoing person.
4. I feel left out.
5. I feel isolated from others.
6. I can find companionship when I want it.
7. I am unhappy being so withdrawn.
8. People are around me but not with me.

Example:
The following data presents earlier behavioral data from the same individual, collected approximately half a university semester before the current data. It demonstrates how similar behavioral patterns corresponded to their ULS-8 responses at that time.

Daily activity metrics from Day 1 to Day 7 of the first week preceding the administration of the UCLA Loneliness Scale questionnaire:
{feature description}

Daily activity metrics from Day 1 to Day 7 of the second week preceding the administration of the UCLA Loneliness Scale questionnaire:
{feature description}

The corresponding ULS-8 item scores were: <Q1 score>, <Q2 score>, ..., <Q8 score> (for entries 1 to 8)

Task: Based on the earlier example, please now assess the current smartphone activity data from the same student, recorded in the week immediately preceding their latest UCLA Loneliness Scale questionnaire. Note: Some zero entries may correspond to missing values and should be interpreted with caution.

Daily activity metrics from Day 1 to Day 7 of the first week preceding the administration of the UCLA Loneliness Scale questionnaire:
{feature description}

Daily activity metrics from Day 1 to Day 7 of the second week preceding the administration of the UCLA Loneliness Scale questionnaire:
{feature description}

Response Format:
[
{"entry": 1, "score": <1-4>, "reason": "<2 sentences max>"},
{"entry": 2, "score": <1-4>, "reason": "<2 sentences max>"},
...
{"entry": 8, "score": <1-4>, "reason": "<2 sentences max>"}
]
)";

constexpr char kWeek1Label[] =
    "Daily activity metrics from Day 1 to Day 7 of the first week preceding the administration "
    "of the UCLA Loneliness Scale questionnaire:";
constexpr char kWeek2Label[] =
    "Daily activity metrics from Day 1 to Day 7 of the second week preceding the administration "
    "of the UCLA Loneliness Scale questionnaire:";

void replace_all(std::string& text, std::string_view slot, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = text.find(slot, pos)) != std::string::npos) {
        text.replace(pos, slot.size(), value);
        pos += value.size();
    }
}

bool replace_first(std::string& text, std::string_view slot, std::string_view value,
                   std::size_t& cursor) {
    const std::size_t pos = text.find(slot, cursor);
    if (pos == std::string::npos) return false;
    text.replace(pos, slot.size(), value);
    cursor = pos + value.size();
    return true;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += '\n';
        out += lines[i];
    }
    return out;
}

}  // namespace

std::string_view prompt_mode_name(PromptMode m) {
    return m == PromptMode::ZeroShot ? "zero" : "one";
}

std::optional<PromptMode> prompt_mode_from_name(std::string_view name) {
    if (name == "zero" || name == "zero_shot") return PromptMode::ZeroShot;
    if (name == "one" || name == "one_shot") return PromptMode::OneShot;
    return std::nullopt;
}

const std::string& zero_shot_template() {
    static const std::string t = kZeroShotTemplate;
    return t;
}

const std::string& one_shot_template() {
    static const std::string t = kOneShotTemplate;
    return t;
}

std::string render_prompt(const PromptSpec& spec) {
    if (spec.subject_week1.empty() || spec.subject_week2.empty()) {
        throw ValidationError("render_prompt: subject description blocks are required");
    }
    if (spec.mode == PromptMode::ZeroShot) {
        if (!spec.example_week1.empty() || !spec.example_week2.empty()) {
            throw ValidationError("render_prompt: zero-shot carries subject blocks only");
        }
        std::string text = zero_shot_template();
        replace_all(text, "{sensor}", sensor_name(spec.sensor));
        // the single slot receives both weekly blocks under the same labels
        std::string filler = std::string(kWeek1Label) + "\n" + join_lines(spec.subject_week1) +
                             "\n\n" + kWeek2Label + "\n" + join_lines(spec.subject_week2);
        std::size_t cursor = 0;
        replace_first(text, "{feature description}", filler, cursor);
        return text;
    }

    if (spec.example_week1.empty() || spec.example_week2.empty()) {
        throw ValidationError("render_prompt: one-shot requires example description blocks");
    }
    for (int s : spec.example_scores) {
        if (s < 1 || s > 4) {
            throw ValidationError("render_prompt: example scores must be in 1..4");
        }
    }
    std::string text = one_shot_template();
    replace_all(text, "{sensor}", sensor_name(spec.sensor));
    std::size_t cursor = 0;
    replace_first(text, "{feature description}", join_lines(spec.example_week1), cursor);
    replace_first(text, "{feature description}", join_lines(spec.example_week2), cursor);
    std::string scores;
    for (std::size_t i = 0; i < spec.example_scores.size(); ++i) {
        if (i) scores += ", ";
        scores += std::to_string(spec.example_scores[i]);
    }
    std::size_t score_cursor = 0;
    replace_first(text, "<Q1 score>, <Q2 score>, ..., <Q8 score>", scores, score_cursor);
    replace_first(text, "{feature description}", join_lines(spec.subject_week1), cursor);
    replace_first(text, "{feature description}", join_lines(spec.subject_week2), cursor);
    return text;
}

std::vector<std::string> week_description_lines(const FeatureWindow& window,
                                                const FeatureCatalog& catalog, SensorKind sensor,
                                                int week) {
    if (week != 1 && week != 2) throw ValidationError("week must be 1 or 2");
    if (window.days.size() != 14) throw ValidationError("window must hold exactly 14 days");
    const std::size_t base = week == 1 ? 0 : 7;
    std::vector<std::string> lines;
    for (std::size_t idx : catalog.indices_for(sensor)) {
        std::array<double, 7> values{};
        for (std::size_t d = 0; d < 7; ++d) values[d] = window.days[base + d].values[idx];
        lines.push_back(describe_feature(catalog.at(idx), values));
    }
    return lines;
}

PromptSpec build_prompt_spec(PromptMode mode, SensorKind sensor, const FeatureCatalog& catalog,
                             const FeatureWindow& subject, const FeatureWindow* example) {
    PromptSpec spec;
    spec.mode = mode;
    spec.sensor = sensor;
    spec.subject_week1 = week_description_lines(subject, catalog, sensor, 1);
    spec.subject_week2 = week_description_lines(subject, catalog, sensor, 2);
    if (mode == PromptMode::OneShot) {
        if (!example) throw ValidationError("one-shot prompt requires an example window");
        spec.example_week1 = week_description_lines(*example, catalog, sensor, 1);
        spec.example_week2 = week_description_lines(*example, catalog, sensor, 2);
        spec.example_scores = example->record.item_scores;
    }
    return spec;
}

// ---------------------------------------------------------------------------
// Parsing

std::string_view parse_status_name(ParseStatus s) {
    switch (s) {
        case ParseStatus::Ok: return "ok";
        case ParseStatus::MalformedJson: return "malformed_json";
        case ParseStatus::Schema: return "schema";
        case ParseStatus::Arity: return "arity";
        case ParseStatus::EntryOutOfRange: return "entry_out_of_range";
        case ParseStatus::ScoreOutOfRange: return "score_out_of_range";
        case ParseStatus::DuplicateEntry: return "duplicate_entry";
    }
    return "malformed_json";
}

ParseResult parse_response(const std::string& raw) {
    std::string text = raw;
    auto trim = [](std::string& s) {
        const char* ws = " \t\r\n";
        const auto b = s.find_first_not_of(ws);
        const auto e = s.find_last_not_of(ws);
        s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
    };
    trim(text);
    if (text.compare(0, 3, "```") == 0) {
        const auto nl = text.find('\n');
        text = nl == std::string::npos ? "" : text.substr(nl + 1);
        const auto closing = text.rfind("```");
        if (closing != std::string::npos) text.erase(closing);
        trim(text);
    }

    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) return {ParseStatus::MalformedJson, std::nullopt};
    if (!j.is_array()) return {ParseStatus::Schema, std::nullopt};
    if (j.size() != 8) return {ParseStatus::Arity, std::nullopt};

    LlmPrediction pred;
    std::array<bool, 8> seen{};
    for (const auto& elem : j) {
        if (!elem.is_object() || !elem.contains("entry") || !elem.contains("score") ||
            !elem.contains("reason") || !elem.at("reason").is_string() ||
            !elem.at("entry").is_number() || !elem.at("score").is_number()) {
            return {ParseStatus::Schema, std::nullopt};
        }
        if (!elem.at("entry").is_number_integer()) return {ParseStatus::EntryOutOfRange, std::nullopt};
        const auto entry = elem.at("entry").get<std::int64_t>();
        if (entry < 1 || entry > 8) return {ParseStatus::EntryOutOfRange, std::nullopt};
        if (seen[static_cast<std::size_t>(entry - 1)]) {
            return {ParseStatus::DuplicateEntry, std::nullopt};
        }
        seen[static_cast<std::size_t>(entry - 1)] = true;
        if (!elem.at("score").is_number_integer()) return {ParseStatus::ScoreOutOfRange, std::nullopt};
        const auto score = elem.at("score").get<std::int64_t>();
        if (score < 1 || score > 4) return {ParseStatus::ScoreOutOfRange, std::nullopt};
        auto& slot = pred.entries[static_cast<std::size_t>(entry - 1)];
        slot.entry = static_cast<int>(entry);
        slot.score = static_cast<int>(score);
        slot.reason = elem.at("reason").get<std::string>();
    }
    return {ParseStatus::Ok, pred};
}

std::string serialize_prediction(const LlmPrediction& p) {
    json arr = json::array();
    for (const auto& e : p.entries) {
        arr.push_back({{"entry", e.entry}, {"score", e.score}, {"reason", e.reason}});
    }
    return arr.dump(2);
}

std::string prompt_hash_hex(std::string_view prompt) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(prompt)));
    return buf;
}

// ---------------------------------------------------------------------------
// Backends

std::string MockBackend::complete(const std::string& prompt) {
    const std::uint64_t h = fnv1a64(prompt);
    LlmPrediction pred;
    for (int i = 0; i < 8; ++i) {
        const auto byte = static_cast<int>((h >> (8 * i)) & 0xff);
        auto& e = pred.entries[static_cast<std::size_t>(i)];
        e.entry = i + 1;
        e.score = 1 + byte % 4;
        e.reason = "Derived deterministically from the daily metrics (code " +
                   std::to_string(byte) + ").";
    }
    return serialize_prediction(pred);
}

std::string ReplayBackend::complete(const std::string& prompt) {
    const auto path = dir_ / (prompt_hash_hex(prompt) + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw BackendError("replay: no recorded response for prompt hash " +
                           prompt_hash_hex(prompt));
    }
    return read_text_file(path);
}

HttpBackend::HttpBackend(const BackendConfig& cfg) : timeout_s_(cfg.timeout_s) {
    std::string url = cfg.endpoint;
    if (url.rfind("http://", 0) != 0) {
        throw ConfigError("live backend endpoint must be an http:// url (got '" + url + "')");
    }
    url = url.substr(7);
    const auto slash = url.find('/');
    std::string hostport = slash == std::string::npos ? url : url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url.substr(slash);
    const auto colon = hostport.find(':');
    host_ = colon == std::string::npos ? hostport : hostport.substr(0, colon);
    port_ = colon == std::string::npos ? 80 : std::stoi(hostport.substr(colon + 1));
    if (host_.empty()) throw ConfigError("live backend endpoint has no host");
    if (!cfg.api_key_env.empty()) {
        const char* key = std::getenv(cfg.api_key_env.c_str());
        if (!key || !*key) {
            throw BackendError("credential missing: environment variable " + cfg.api_key_env +
                               " is not set");
        }
        api_key_ = key;
    }
}

std::string HttpBackend::complete(const std::string& prompt) {
    httplib::Client client(host_, port_);
    client.set_connection_timeout(timeout_s_, 0);
    client.set_read_timeout(timeout_s_, 0);
    json body{
        {"contents", json::array({json{{"parts", json::array({json{{"text", prompt}}})}}})},
        {"generationConfig", json{{"temperature", BackendConfig::kTemperature}}},
    };
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("x-goog-api-key", api_key_);
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw BackendError("backend unavailable: " + host_ + ":" + std::to_string(port_));
    if (res->status != 200) {
        throw BackendError("backend returned status " + std::to_string(res->status));
    }
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw BackendError("backend returned unparseable body");
    try {
        return parsed.at("candidates").at(0).at("content").at("parts").at(0).at("text")
            .get<std::string>();
    } catch (const json::exception&) {
        throw BackendError("backend response missing candidate text");
    }
}

std::unique_ptr<LlmBackend> make_backend(const BackendConfig& cfg) {
    if (cfg.backend == "mock") return std::make_unique<MockBackend>();
    if (cfg.backend == "replay") {
        if (cfg.replay_dir.empty()) throw ConfigError("replay backend requires replay_dir");
        return std::make_unique<ReplayBackend>(cfg.replay_dir);
    }
    if (cfg.backend == "live") return std::make_unique<HttpBackend>(cfg);
    throw ConfigError("unknown backend '" + cfg.backend + "' (expected mock, replay, or live)");
}

// ---------------------------------------------------------------------------
// Experiments

std::vector<PredictionRow> run_experiment(
    const std::map<std::string, FeatureWindow>& subject_windows,
    const std::map<std::string, FeatureWindow>& example_windows, const FeatureCatalog& catalog,
    const ExperimentConfig& cfg, LlmBackend& backend, const ExperimentSink* sink,
    ExperimentStats* stats) {
    struct Task {
        SensorKind sensor;
        const FeatureWindow* subject;
        const FeatureWindow* example;
    };
    std::vector<Task> tasks;
    std::size_t skipped = 0;
    for (SensorKind sensor : cfg.sensors) {
        for (const auto& [pid, window] : subject_windows) {
            const FeatureWindow* example = nullptr;
            if (cfg.mode == PromptMode::OneShot) {
                auto it = example_windows.find(pid);
                if (it == example_windows.end()) {
                    ++skipped;
                    continue;
                }
                example = &it->second;
            }
            tasks.push_back({sensor, &window, example});
        }
    }

    struct TaskResult {
        PredictionRow row;
        std::string prompt;
        std::string raw;
        std::exception_ptr error;
    };
    std::vector<TaskResult> results(tasks.size());

    auto run_task = [&](std::size_t i) {
        try {
            const Task& task = tasks[i];
            const PromptSpec spec =
                build_prompt_spec(cfg.mode, task.sensor, catalog, *task.subject, task.example);
            const std::string prompt = render_prompt(spec);

            PredictionRow row;
            row.participant_id = task.subject->participant_id;
            row.sensor = task.sensor;
            row.mode = cfg.mode;
            row.stage = cfg.subject_stage;
            row.prompt_hash = prompt_hash_hex(prompt);

            std::string raw;
            ParseResult parsed;
            int attempts = 0;
            for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
                ++attempts;
                raw = backend.complete(prompt);
                parsed = parse_response(raw);
                if (parsed.status == ParseStatus::Ok) break;
            }
            row.attempts = attempts;
            row.status = parsed.status;
            row.prediction = parsed.prediction;
            row.raw_hash = prompt_hash_hex(raw);
            results[i] = {std::move(row), prompt, std::move(raw), nullptr};
        } catch (...) {
            results[i].error = std::current_exception();
        }
    };

    if (cfg.jobs <= 1 || tasks.size() < 2) {
        for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
    } else {
        const std::size_t workers =
            std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), tasks.size());
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < tasks.size(); i += workers) run_task(i);
            });
        }
        for (auto& t : pool) t.join();
    }
    for (auto& r : results) {
        if (r.error) std::rethrow_exception(r.error);
    }

    std::vector<PredictionRow> rows;
    rows.reserve(results.size());
    std::size_t invalid = 0;
    for (auto& r : results) {
        if (sink) {
            const auto prompt_path = sink->prompts_dir / stage_name(cfg.subject_stage) /
                                     std::string(sensor_name(r.row.sensor)) /
                                     (r.row.participant_id + ".txt");
            write_text_file(prompt_path, r.prompt);
            write_text_file(sink->responses_dir / (r.row.prompt_hash + ".txt"), r.raw);
        }
        if (r.row.status != ParseStatus::Ok) ++invalid;
        rows.push_back(std::move(r.row));
    }
    if (stats) {
        stats->rows = rows.size();
        stats->invalid = invalid;
        stats->skipped_missing_example = skipped;
    }
    return rows;
}

void write_predictions_jsonl(const std::filesystem::path& path,
                             const std::vector<PredictionRow>& rows,
                             const std::string& config_hash) {
    std::string out;
    out += json{{"type", "header"}, {"config", config_hash}}.dump();
    out += '\n';
    for (const auto& row : rows) {
        json j{
            {"type", "prediction"},
            {"participant", row.participant_id},
            {"sensor", sensor_name(row.sensor)},
            {"mode", prompt_mode_name(row.mode)},
            {"stage", stage_name(row.stage)},
            {"prompt_hash", row.prompt_hash},
            {"raw_hash", row.raw_hash},
            {"status", parse_status_name(row.status)},
            {"valid", row.status == ParseStatus::Ok},
            {"attempts", row.attempts},
        };
        if (row.prediction) {
            json entries = json::array();
            for (const auto& e : row.prediction->entries) {
                entries.push_back({{"entry", e.entry}, {"score", e.score}, {"reason", e.reason}});
            }
            j["entries"] = std::move(entries);
        }
        out += j.dump();
        out += '\n';
    }
    write_text_file(path, out);
}

std::vector<PredictionRow> read_predictions_jsonl(const std::filesystem::path& path,
                                                  std::string* config_hash) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<PredictionRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (j.value("type", "") == "header") {
            if (config_hash) *config_hash = j.value("config", "");
            continue;
        }
        PredictionRow row;
        row.participant_id = j.at("participant").get<std::string>();
        auto sensor = sensor_from_name(j.at("sensor").get<std::string>());
        if (!sensor) throw ValidationError("bad sensor in predictions file");
        row.sensor = *sensor;
        auto mode = prompt_mode_from_name(j.at("mode").get<std::string>());
        if (!mode) throw ValidationError("bad mode in predictions file");
        row.mode = *mode;
        auto stage = stage_from_name(j.at("stage").get<std::string>());
        if (!stage) throw ValidationError("bad stage in predictions file");
        row.stage = *stage;
        row.prompt_hash = j.value("prompt_hash", "");
        row.raw_hash = j.value("raw_hash", "");
        row.attempts = j.value("attempts", 0);
        const std::string status = j.at("status").get<std::string>();
        row.status = ParseStatus::MalformedJson;
        for (ParseStatus s : {ParseStatus::Ok, ParseStatus::MalformedJson, ParseStatus::Schema,
                              ParseStatus::Arity, ParseStatus::EntryOutOfRange,
                              ParseStatus::ScoreOutOfRange, ParseStatus::DuplicateEntry}) {
            if (status == parse_status_name(s)) row.status = s;
        }
        if (j.contains("entries")) {
            LlmPrediction pred;
            std::size_t i = 0;
            for (const auto& e : j.at("entries")) {
                if (i >= 8) throw ValidationError("too many entries in predictions file");
                pred.entries[i].entry = e.at("entry").get<int>();
                pred.entries[i].score = e.at("score").get<int>();
                pred.entries[i].reason = e.at("reason").get<std::string>();
                ++i;
            }
            row.prediction = pred;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace lonesense
