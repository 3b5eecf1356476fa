#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lonesense/csv.hpp"
#include "lonesense/eval.hpp"
#include "lonesense/llm.hpp"
#include "lonesense/rng.hpp"

using namespace lonesense;

namespace {

namespace fs = std::filesystem;

const FeatureCatalog& catalog() {
    static const FeatureCatalog c = FeatureCatalog::standard();
    return c;
}

FeatureWindow fixture_window(const std::array<double, 7>& week1,
                             const std::array<double, 7>& week2, Stage stage,
                             const std::array<int, 8>& scores) {
    FeatureWindow w;
    w.participant_id = "P001";
    w.stage = stage;
    w.assessment_date = CivilDate{2025, 6, 2};
    w.record = Uls8Record::from_scores(scores);
    for (int k = 1; k <= 14; ++k) {
        DailyFeatureRow row;
        row.participant_id = w.participant_id;
        row.date = w.date_of_day(k);
        const double v = k <= 7 ? week1[static_cast<std::size_t>(k - 1)]
                                : week2[static_cast<std::size_t>(k - 8)];
        row.values.assign(catalog().size(), v);
        row.has_any_data.fill(true);
        w.days.push_back(std::move(row));
    }
    w.coverage_days = 14;
    return w;
}

FeatureWindow subject_window() {
    return fixture_window({1, 2, 3, 4, 5, 6, 7}, {2, 2, 2, 2, 2, 2, 3}, Stage::EndOfSemester,
                          {2, 3, 2, 1, 4, 3, 2, 2});
}

FeatureWindow example_window() {
    return fixture_window({0, 0, 0, 0, 0, 0, 0}, {3, 1, 4, 1, 5, 9, 2}, Stage::Midterm,
                          {2, 1, 3, 2, 2, 3, 1, 2});
}

std::string golden(const std::string& name) {
    return read_text_file(fs::path(LONESENSE_SOURCE_DIR) / "tests" / "golden" / name);
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("lonesense_llm_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("zero-shot prompt matches the golden file byte for byte") {
    const auto spec =
        build_prompt_spec(PromptMode::ZeroShot, SensorKind::Screen, catalog(), subject_window());
    const std::string rendered = render_prompt(spec);
    CHECK(rendered == golden("zero_shot_screen.txt"));
    CHECK(rendered.rfind("You are an expert in analysing human behavior and psychological "
                         "wellbeing.",
                         0) == 0);
    CHECK(render_prompt(spec) == rendered);  // purity
}

TEST_CASE("one-shot prompt matches the golden file byte for byte") {
    const auto subject = subject_window();
    const auto example = example_window();
    const auto spec =
        build_prompt_spec(PromptMode::OneShot, SensorKind::Screen, catalog(), subject, &example);
    const std::string rendered = render_prompt(spec);
    CHECK(rendered == golden("one_shot_screen.txt"));
    CHECK(rendered.find("Note: Some zero entries may correspond to missing values and should be "
                        "interpreted with caution.") != std::string::npos);
    CHECK(rendered.find("The corresponding ULS-8 item scores were: 2, 1, 3, 2, 2, 3, 1, 2 (for "
                        "entries 1 to 8)") != std::string::npos);
}

TEST_CASE("templates embedded in code equal the shipped resource files") {
    CHECK(zero_shot_template() ==
          read_text_file(fs::path(LONESENSE_SOURCE_DIR) / "resources/prompts/zero_shot.txt"));
    CHECK(one_shot_template() ==
          read_text_file(fs::path(LONESENSE_SOURCE_DIR) / "resources/prompts/one_shot.txt"));
}

TEST_CASE("templates embed every item text verbatim") {
    for (int i = 1; i <= 8; ++i) {
        const std::string line = std::to_string(i) + ". " + std::string(item_text(i));
        CHECK(zero_shot_template().find(line) != std::string::npos);
        CHECK(one_shot_template().find(line) != std::string::npos);
    }
}

TEST_CASE("per-sensor isolation: no foreign feature lines in a rendered prompt") {
    const auto subject = subject_window();
    for (SensorKind sensor : kAllSensors) {
        const auto spec = build_prompt_spec(PromptMode::ZeroShot, sensor, catalog(), subject);
        const std::string rendered = render_prompt(spec);
        for (const auto& def : catalog().defs()) {
            const bool present = rendered.find(def.description + ",") != std::string::npos;
            CHECK(present == (def.sensor == sensor));
        }
    }
}

TEST_CASE("mode preconditions") {
    const auto subject = subject_window();
    const auto example = example_window();
    auto zero = build_prompt_spec(PromptMode::ZeroShot, SensorKind::Screen, catalog(), subject);
    zero.example_week1 = {"stray line"};
    CHECK_THROWS_AS(render_prompt(zero), ValidationError);

    auto one = build_prompt_spec(PromptMode::OneShot, SensorKind::Screen, catalog(), subject,
                                 &example);
    one.example_week2.clear();
    CHECK_THROWS_AS(render_prompt(one), ValidationError);

    auto bad_scores = build_prompt_spec(PromptMode::OneShot, SensorKind::Screen, catalog(),
                                        subject, &example);
    bad_scores.example_scores[3] = 9;
    CHECK_THROWS_AS(render_prompt(bad_scores), ValidationError);

    CHECK_THROWS_AS(
        build_prompt_spec(PromptMode::OneShot, SensorKind::Screen, catalog(), subject, nullptr),
        ValidationError);
}

TEST_CASE("parse_response: accepted and rejected shapes get distinct codes") {
    const char* valid = R"([
      {"entry": 1, "score": 2, "reason": "a"}, {"entry": 2, "score": 1, "reason": "b"},
      {"entry": 3, "score": 3, "reason": "c"}, {"entry": 4, "score": 4, "reason": "d"},
      {"entry": 5, "score": 2, "reason": "e"}, {"entry": 6, "score": 2, "reason": "f"},
      {"entry": 7, "score": 1, "reason": "g"}, {"entry": 8, "score": 3, "reason": "h"}])";
    CHECK(parse_response(valid).status == ParseStatus::Ok);

    const std::string fenced = "```json\n" + std::string(valid) + "\n```";
    const auto fenced_result = parse_response(fenced);
    CHECK(fenced_result.status == ParseStatus::Ok);
    CHECK(fenced_result.prediction->entries[0].score == 2);

    CHECK(parse_response("not json at all {").status == ParseStatus::MalformedJson);
    CHECK(parse_response(R"({"entry": 1})").status == ParseStatus::Schema);

    std::string seven = valid;
    seven.replace(seven.find(R"({"entry": 8, "score": 3, "reason": "h"})"),
                  std::string(R"({"entry": 8, "score": 3, "reason": "h"})").size(),
                  "");
    seven.replace(seven.rfind(","), 1, "");  // drop the dangling comma
    CHECK(parse_response(seven).status == ParseStatus::Arity);

    std::string dup = valid;
    dup.replace(dup.find("\"entry\": 8"), 10, "\"entry\": 7");
    CHECK(parse_response(dup).status == ParseStatus::DuplicateEntry);

    std::string bad_entry = valid;
    bad_entry.replace(bad_entry.find("\"entry\": 8"), 10, "\"entry\": 9");
    CHECK(parse_response(bad_entry).status == ParseStatus::EntryOutOfRange);

    std::string bad_score = valid;
    bad_score.replace(bad_score.find("\"score\": 4"), 10, "\"score\": 5");
    CHECK(parse_response(bad_score).status == ParseStatus::ScoreOutOfRange);

    std::string frac_score = valid;
    frac_score.replace(frac_score.find("\"score\": 4"), 10, "\"score\": 3.5");
    CHECK(parse_response(frac_score).status == ParseStatus::ScoreOutOfRange);

    std::string no_reason = valid;
    no_reason.replace(no_reason.find(R"("reason": "a")"), std::string(R"("reason": "a")").size(),
                      R"("why": "a")");
    CHECK(parse_response(no_reason).status == ParseStatus::Schema);
}

TEST_CASE("serialize -> parse is identity on random valid predictions") {
    Rng rng(31);
    const std::string charset = "abc XYZ-,.\"'{}[]:\n\\u00e9";
    for (int trial = 0; trial < 300; ++trial) {
        LlmPrediction p;
        for (int i = 0; i < 8; ++i) {
            auto& e = p.entries[static_cast<std::size_t>(i)];
            e.entry = i + 1;
            e.score = 1 + static_cast<int>(rng.next_below(4));
            std::string reason;
            for (std::size_t c = 0; c < rng.next_below(30); ++c) {
                reason += charset[rng.next_below(charset.size())];
            }
            e.reason = reason;
        }
        const auto result = parse_response(serialize_prediction(p));
        REQUIRE(result.status == ParseStatus::Ok);
        CHECK(*result.prediction == p);
    }
}

TEST_CASE("mock backend is a deterministic function of the prompt") {
    MockBackend mock;
    const std::string a = mock.complete("prompt A");
    CHECK(a == mock.complete("prompt A"));
    CHECK(a != mock.complete("prompt B"));
    CHECK(parse_response(a).status == ParseStatus::Ok);
}

TEST_CASE("run_experiment: arity, prompt files, and replay reproduction") {
    TempDir tmp("exp");
    std::map<std::string, FeatureWindow> subjects;
    auto w1 = subject_window();
    auto w2 = subject_window();
    w2.participant_id = "P002";
    for (auto& d : w2.days) d.participant_id = "P002";
    subjects.emplace("P001", w1);
    subjects.emplace("P002", w2);

    MockBackend mock;
    ExperimentConfig cfg;
    cfg.mode = PromptMode::ZeroShot;
    ExperimentSink sink{tmp.path / "prompts", tmp.path / "responses"};
    ExperimentStats stats;
    const auto rows = run_experiment(subjects, {}, catalog(), cfg, mock, &sink, &stats);
    CHECK(rows.size() == 14);  // 2 participants x 7 sensors
    CHECK(stats.rows == 14);
    CHECK(stats.invalid == 0);
    for (const auto& row : rows) {
        CHECK(row.status == ParseStatus::Ok);
        CHECK(row.attempts == 1);
    }
    CHECK(fs::exists(sink.prompts_dir / "end_of_semester" / "Screen" / "P001.txt"));
    CHECK(fs::exists(sink.responses_dir / (rows[0].prompt_hash + ".txt")));

    // replay from the recorded responses reproduces the identical table
    ReplayBackend replay(sink.responses_dir);
    const auto rows2 = run_experiment(subjects, {}, catalog(), cfg, replay, nullptr, nullptr);
    REQUIRE(rows2.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows2[i].prompt_hash == rows[i].prompt_hash);
        CHECK(rows2[i].raw_hash == rows[i].raw_hash);
        CHECK(rows2[i].prediction == rows[i].prediction);
    }

    ReplayBackend empty_replay(tmp.path / "nowhere");
    CHECK_THROWS_AS(empty_replay.complete("unseen prompt"), BackendError);
}

TEST_CASE("one-shot experiments skip participants without a midterm example") {
    std::map<std::string, FeatureWindow> subjects;
    subjects.emplace("P001", subject_window());
    auto other = subject_window();
    other.participant_id = "P002";
    subjects.emplace("P002", other);
    std::map<std::string, FeatureWindow> examples;
    examples.emplace("P001", example_window());

    MockBackend mock;
    ExperimentConfig cfg;
    cfg.mode = PromptMode::OneShot;
    cfg.sensors = {SensorKind::Keyboard};
    ExperimentStats stats;
    const auto rows = run_experiment(subjects, examples, catalog(), cfg, mock, nullptr, &stats);
    CHECK(rows.size() == 1);
    CHECK(stats.skipped_missing_example == 1);
}

TEST_CASE("predictions jsonl round trip") {
    TempDir tmp("jsonl");
    std::map<std::string, FeatureWindow> subjects;
    subjects.emplace("P001", subject_window());
    MockBackend mock;
    ExperimentConfig cfg;
    const auto rows = run_experiment(subjects, {}, catalog(), cfg, mock, nullptr, nullptr);
    write_predictions_jsonl(tmp.path / "p.jsonl", rows, "fefe");
    std::string hash;
    const auto back = read_predictions_jsonl(tmp.path / "p.jsonl", &hash);
    CHECK(hash == "fefe");
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].participant_id == rows[i].participant_id);
        CHECK(back[i].sensor == rows[i].sensor);
        CHECK(back[i].prediction == rows[i].prediction);
        CHECK(back[i].status == rows[i].status);
    }
}

TEST_CASE("jobs > 1 never changes experiment output") {
    std::map<std::string, FeatureWindow> subjects;
    for (int p = 1; p <= 3; ++p) {
        auto w = subject_window();
        w.participant_id = "P00" + std::to_string(p);
        subjects.emplace(w.participant_id, w);
    }
    MockBackend mock;
    ExperimentConfig cfg;
    const auto serial = run_experiment(subjects, {}, catalog(), cfg, mock, nullptr, nullptr);
    cfg.jobs = 3;
    const auto parallel = run_experiment(subjects, {}, catalog(), cfg, mock, nullptr, nullptr);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].participant_id == parallel[i].participant_id);
        CHECK(serial[i].prompt_hash == parallel[i].prompt_hash);
        CHECK(serial[i].prediction == parallel[i].prediction);
    }
}

TEST_CASE("live backend speaks to an http endpoint at temperature zero") {
    httplib::Server server;
    bool saw_temperature_zero = false;
    std::string received_key;
    server.Post("/v1/complete", [&](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        saw_temperature_zero = body.at("generationConfig").at("temperature").get<double>() == 0.0;
        if (req.has_header("x-goog-api-key")) received_key = req.get_header_value("x-goog-api-key");
        const std::string prompt =
            body.at("contents").at(0).at("parts").at(0).at("text").get<std::string>();
        MockBackend mock;
        nlohmann::json out;
        out["candidates"] = nlohmann::json::array();
        nlohmann::json part;
        part["text"] = mock.complete(prompt);
        nlohmann::json candidate;
        candidate["content"]["parts"] = nlohmann::json::array({part});
        out["candidates"].push_back(candidate);
        res.set_content(out.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("LONESENSE_TEST_KEY", "sk-test", 1);
    BackendConfig cfg;
    cfg.backend = "live";
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/complete";
    cfg.api_key_env = "LONESENSE_TEST_KEY";
    auto backend = make_backend(cfg);
    const std::string response = backend->complete("hello");
    CHECK(parse_response(response).status == ParseStatus::Ok);
    CHECK(saw_temperature_zero);
    CHECK(received_key == "sk-test");

    server.stop();
    listener.join();

    // credential missing is a distinct failure
    ::unsetenv("LONESENSE_TEST_KEY");
    CHECK_THROWS_AS(make_backend(cfg), BackendError);

    BackendConfig downcfg = cfg;
    ::setenv("LONESENSE_TEST_KEY", "sk-test", 1);
    downcfg.endpoint = "http://127.0.0.1:1/nope";
    downcfg.timeout_s = 1;
    auto down = make_backend(downcfg);
    CHECK_THROWS_AS(down->complete("x"), BackendError);

    BackendConfig https_cfg = cfg;
    https_cfg.endpoint = "https://example.com/x";
    CHECK_THROWS_AS(make_backend(https_cfg), ConfigError);

    ::unsetenv("LONESENSE_TEST_KEY");
}

TEST_CASE("unknown backend names are config errors") {
    BackendConfig cfg;
    cfg.backend = "wishful";
    CHECK_THROWS_AS(make_backend(cfg), ConfigError);
    BackendConfig replay_cfg;
    replay_cfg.backend = "replay";
    CHECK_THROWS_AS(make_backend(replay_cfg), ConfigError);  // replay_dir required
}
