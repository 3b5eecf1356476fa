#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lonesense/dataset.hpp"

namespace lonesense {

enum class PromptMode { ZeroShot, OneShot };

std::string_view prompt_mode_name(PromptMode m);  // "zero" / "one"
std::optional<PromptMode> prompt_mode_from_name(std::string_view name);

// Template text with {sensor} / {feature description} slots (and the example
// scores slot for one-shot). The same bytes ship as files under
// resources/prompts/.
const std::string& zero_shot_template();
const std::string& one_shot_template();

struct PromptSpec {
    PromptMode mode = PromptMode::ZeroShot;
    SensorKind sensor = SensorKind::Screen;
    // one description line per catalog feature of `sensor`
    std::vector<std::string> subject_week1;
    std::vector<std::string> subject_week2;
    // one-shot only
    std::vector<std::string> example_week1;
    std::vector<std::string> example_week2;
    std::array<int, 8> example_scores{};  // raw 1..4 responses
};

// Fills the template slots; pure, byte-stable.
std::string render_prompt(const PromptSpec& spec);

// Week 1 = days 1..7, week 2 = days 8..14 of the window, described per
// catalog feature of `sensor`.
std::vector<std::string> week_description_lines(const FeatureWindow& window,
                                                const FeatureCatalog& catalog, SensorKind sensor,
                                                int week);

PromptSpec build_prompt_spec(PromptMode mode, SensorKind sensor, const FeatureCatalog& catalog,
                             const FeatureWindow& subject,
                             const FeatureWindow* example = nullptr);

// ---------------------------------------------------------------------------
// Response parsing

struct PredictionEntry {
    int entry = 0;  // 1..8
    int score = 0;  // 1..4
    std::string reason;

    bool operator==(const PredictionEntry&) const = default;
};

enum class ParseStatus {
    Ok,
    MalformedJson,
    Schema,         // not an array of objects / missing or mistyped keys
    Arity,          // element count != 8
    EntryOutOfRange,
    ScoreOutOfRange,
    DuplicateEntry,
};

std::string_view parse_status_name(ParseStatus s);

struct LlmPrediction {
    std::array<PredictionEntry, 8> entries{};  // sorted by entry index

    bool operator==(const LlmPrediction&) const = default;
};

struct ParseResult {
    ParseStatus status = ParseStatus::MalformedJson;
    std::optional<LlmPrediction> prediction;
};

// Strips optional markdown code fences, then requires a JSON array of exactly
// 8 {"entry", "score", "reason"} objects covering entries 1..8 with integer
// scores in 1..4.
ParseResult parse_response(const std::string& raw);

std::string serialize_prediction(const LlmPrediction& p);

std::string prompt_hash_hex(std::string_view prompt);

// ---------------------------------------------------------------------------
// Backends

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual std::string complete(const std::string& prompt) = 0;
    virtual std::string name() const = 0;
};

// Deterministic function of the prompt hash; always a valid 8-entry array.
class MockBackend : public LlmBackend {
public:
    std::string complete(const std::string& prompt) override;
    std::string name() const override { return "mock"; }
};

// Replays recorded responses keyed by prompt hash: <dir>/<hash16>.txt.
class ReplayBackend : public LlmBackend {
public:
    explicit ReplayBackend(std::filesystem::path dir) : dir_(std::move(dir)) {}
    std::string complete(const std::string& prompt) override;
    std::string name() const override { return "replay"; }

private:
    std::filesystem::path dir_;
};

struct BackendConfig {
    std::string backend = "mock";  // mock | replay | live
    std::string endpoint;          // live: http://host[:port]/path
    std::string api_key_env = "LONESENSE_API_KEY";
    int timeout_s = 30;
    int max_retries = 2;
    std::string replay_dir;
    // temperature is pinned to 0 in experiment mode and is not configurable
    static constexpr double kTemperature = 0.0;
};

// Minimal HTTP adapter (generateContent-style JSON body, temperature 0).
class HttpBackend : public LlmBackend {
public:
    explicit HttpBackend(const BackendConfig& cfg);
    std::string complete(const std::string& prompt) override;
    std::string name() const override { return "live"; }

private:
    std::string host_;
    int port_ = 80;
    std::string path_;
    std::string api_key_;
    int timeout_s_ = 30;
};

std::unique_ptr<LlmBackend> make_backend(const BackendConfig& cfg);

// ---------------------------------------------------------------------------
// Experiments

struct PredictionRow {
    std::string participant_id;
    SensorKind sensor = SensorKind::Screen;
    PromptMode mode = PromptMode::ZeroShot;
    Stage stage = Stage::EndOfSemester;
    std::string prompt_hash;
    std::string raw_hash;
    ParseStatus status = ParseStatus::MalformedJson;
    int attempts = 0;
    std::optional<LlmPrediction> prediction;
};

struct ExperimentConfig {
    PromptMode mode = PromptMode::ZeroShot;
    std::vector<SensorKind> sensors{kAllSensors.begin(), kAllSensors.end()};
    Stage subject_stage = Stage::EndOfSemester;
    int max_retries = 2;
    int jobs = 1;
};

struct ExperimentStats {
    std::size_t rows = 0;
    std::size_t invalid = 0;
    std::size_t skipped_missing_example = 0;
};

struct ExperimentSink {
    std::filesystem::path prompts_dir;    // <stage>/<sensor>/<participant>.txt
    std::filesystem::path responses_dir;  // <prompt-hash>.txt (enables replay)
};

// One prompt per (participant, sensor); parse failures are retried up to
// max_retries then recorded invalid. Rows come back keyed and sorted, so the
// jobs count never changes the output.
std::vector<PredictionRow> run_experiment(
    const std::map<std::string, FeatureWindow>& subject_windows,
    const std::map<std::string, FeatureWindow>& example_windows, const FeatureCatalog& catalog,
    const ExperimentConfig& cfg, LlmBackend& backend, const ExperimentSink* sink = nullptr,
    ExperimentStats* stats = nullptr);

void write_predictions_jsonl(const std::filesystem::path& path,
                             const std::vector<PredictionRow>& rows,
                             const std::string& config_hash);
std::vector<PredictionRow> read_predictions_jsonl(const std::filesystem::path& path,
                                                  std::string* config_hash = nullptr);

}  // namespace lonesense
