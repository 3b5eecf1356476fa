#include <doctest.h>

#include <filesystem>

#include "lonesense/csv.hpp"
#include "lonesense/dataset.hpp"
#include "lonesense/rng.hpp"

using namespace lonesense;

namespace {

namespace fs = std::filesystem;

DailyFeatureRow make_row(const FeatureCatalog& catalog, const std::string& pid, CivilDate date,
                         double fill, bool with_data = true) {
    DailyFeatureRow row;
    row.participant_id = pid;
    row.date = date;
    row.values.assign(catalog.size(), fill);
    if (with_data) row.has_any_data[static_cast<std::size_t>(SensorKind::Screen)] = true;
    return row;
}

AssessmentPoint make_assessment(const std::string& pid, Stage stage, CivilDate date) {
    AssessmentPoint a;
    a.participant_id = pid;
    a.stage = stage;
    a.assessment_date = date;
    a.record = Uls8Record::from_scores(std::array<int, 8>{2, 3, 2, 1, 4, 3, 2, 2});
    return a;
}

}  // namespace

TEST_CASE("coverage filter boundary: 6 excluded, 7 included, 14 included") {
    const auto catalog = FeatureCatalog::standard();
    const CivilDate assess{2025, 6, 2};
    const auto assessment = make_assessment("P1", Stage::EndOfSemester, assess);

    auto with_days = [&](int n_days) {
        std::map<CivilDate, DailyFeatureRow> rows;
        for (int k = 0; k < n_days; ++k) {
            const CivilDate d = add_days(assess, -1 - k);
            rows[d] = make_row(catalog, "P1", d, 1.0);
        }
        return build_window(rows, assessment, catalog, 7);
    };

    CHECK(with_days(14).window.has_value());
    CHECK(with_days(14).window->coverage_days == 14);
    const auto six = with_days(6);
    CHECK_FALSE(six.window.has_value());
    REQUIRE(six.exclusion.has_value());
    CHECK(six.exclusion->reason == "coverage");
    const auto seven = with_days(7);
    CHECK(seven.window.has_value());
    CHECK(seven.window->coverage_days == 7);
}

TEST_CASE("window day indexing: day k is assessment - (15 - k)") {
    const auto catalog = FeatureCatalog::standard();
    const CivilDate assess{2025, 6, 2};
    const auto assessment = make_assessment("P1", Stage::Midterm, assess);
    std::map<CivilDate, DailyFeatureRow> rows;
    for (int k = 1; k <= 14; ++k) {
        const CivilDate d = add_days(assess, -(15 - k));
        rows[d] = make_row(catalog, "P1", d, static_cast<double>(k));
    }
    const auto result = build_window(rows, assessment, catalog, 7);
    REQUIRE(result.window.has_value());
    const auto& w = *result.window;
    CHECK(w.date_of_day(1) == add_days(assess, -14));
    CHECK(w.date_of_day(14) == add_days(assess, -1));
    for (int k = 1; k <= 14; ++k) {
        CHECK(w.days[static_cast<std::size_t>(k - 1)].values[0] == static_cast<double>(k));
        CHECK(w.days[static_cast<std::size_t>(k - 1)].date == w.date_of_day(k));
    }
}

TEST_CASE("absent days are zero-filled with missing flags") {
    const auto catalog = FeatureCatalog::standard();
    const CivilDate assess{2025, 6, 2};
    const auto assessment = make_assessment("P1", Stage::Midterm, assess);
    std::map<CivilDate, DailyFeatureRow> rows;
    for (int k = 0; k < 8; ++k) {
        const CivilDate d = add_days(assess, -1 - k);
        rows[d] = make_row(catalog, "P1", d, 2.0);
    }
    const auto result = build_window(rows, assessment, catalog, 7);
    REQUIRE(result.window.has_value());
    const auto& day1 = result.window->days[0];  // oldest, absent
    CHECK(day1.values[0] == 0.0);
    for (bool b : day1.has_any_data) CHECK_FALSE(b);
}

TEST_CASE("flatten: 76-feature catalog yields 1064 columns") {
    const auto catalog = FeatureCatalog::standard();
    const CivilDate assess{2025, 6, 2};
    std::vector<FeatureWindow> windows;
    for (int p = 0; p < 3; ++p) {
        const auto assessment =
            make_assessment("P" + std::to_string(p), Stage::EndOfSemester, assess);
        std::map<CivilDate, DailyFeatureRow> rows;
        for (int k = 0; k < 14; ++k) {
            const CivilDate d = add_days(assess, -1 - k);
            rows[d] = make_row(catalog, assessment.participant_id, d, p + k * 0.5);
        }
        windows.push_back(*build_window(rows, assessment, catalog, 7).window);
    }
    const auto flat = flatten(windows, catalog, TargetSpec{true, 0});
    CHECK(catalog.size() == 76);
    CHECK(flat.n_cols == 1064);
    CHECK(flat.n_rows == 3);
    CHECK(flat.column_names.size() == 1064);
    // catalog order outer, day index inner
    const std::size_t idx = catalog.index_of("screen_unlock_episode_count");
    CHECK(flat.column_names[idx * 14 + 4] == "screen_unlock_episode_count__day5");
    CHECK(flat.y[0] == 19.0);  // reverse-coded total of the fixture responses
}

TEST_CASE("flatten separates targets: total vs item") {
    const auto catalog = FeatureCatalog::standard();
    const CivilDate assess{2025, 6, 2};
    const auto assessment = make_assessment("P1", Stage::EndOfSemester, assess);
    std::map<CivilDate, DailyFeatureRow> rows;
    for (int k = 0; k < 14; ++k) {
        const CivilDate d = add_days(assess, -1 - k);
        rows[d] = make_row(catalog, "P1", d, 1.0);
    }
    std::vector<FeatureWindow> w{*build_window(rows, assessment, catalog, 7).window};
    CHECK(flatten(w, catalog, TargetSpec::parse("total")).y[0] == 19.0);
    CHECK(flatten(w, catalog, TargetSpec::parse("item3")).y[0] == 2.0);  // raw response
    CHECK_THROWS_AS(TargetSpec::parse("item9"), ConfigError);
    CHECK_THROWS_AS(TargetSpec::parse("bogus"), ConfigError);
}

TEST_CASE("flatten is injective on distinct windows") {
    const auto catalog = FeatureCatalog::standard();
    const CivilDate assess{2025, 6, 2};
    std::vector<FeatureWindow> windows;
    for (double fill : {1.0, 2.0}) {
        const auto assessment = make_assessment("P", Stage::EndOfSemester, assess);
        std::map<CivilDate, DailyFeatureRow> rows;
        for (int k = 0; k < 14; ++k) {
            const CivilDate d = add_days(assess, -1 - k);
            rows[d] = make_row(catalog, "P", d, fill);
        }
        windows.push_back(*build_window(rows, assessment, catalog, 7).window);
    }
    const auto flat = flatten(windows, catalog, TargetSpec{true, 0});
    bool any_diff = false;
    for (std::size_t c = 0; c < flat.n_cols; ++c) {
        if (flat.at(0, c) != flat.at(1, c)) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("flat dataset csv round trip") {
    const auto catalog = FeatureCatalog::standard();
    const CivilDate assess{2025, 6, 2};
    const auto assessment = make_assessment("P1", Stage::Midterm, assess);
    std::map<CivilDate, DailyFeatureRow> rows;
    for (int k = 0; k < 14; ++k) {
        const CivilDate d = add_days(assess, -1 - k);
        rows[d] = make_row(catalog, "P1", d, k * 0.25);
    }
    std::vector<FeatureWindow> w{*build_window(rows, assessment, catalog, 7).window};
    const auto flat = flatten(w, catalog, TargetSpec{true, 0});
    const auto path = fs::temp_directory_path() / "lonesense_flat_test.csv";
    write_flat_csv(path, flat, "abcd");
    const auto back = read_flat_csv(path);
    CHECK(back.n_rows == flat.n_rows);
    CHECK(back.n_cols == flat.n_cols);
    CHECK(back.column_names == flat.column_names);
    CHECK(back.y == flat.y);
    CHECK(back.x == flat.x);
    fs::remove(path);
}

TEST_CASE("assessments csv round trip rejects duplicates") {
    const auto path = fs::temp_directory_path() / "lonesense_assessments_test.csv";
    std::vector<AssessmentPoint> points{
        make_assessment("P1", Stage::Midterm, {2025, 3, 24}),
        make_assessment("P1", Stage::EndOfSemester, {2025, 6, 2}),
        make_assessment("P2", Stage::Midterm, {2025, 3, 24})};
    write_assessments_csv(path, points, "");
    const auto back = read_assessments_csv(path);
    REQUIRE(back.size() == 3);
    CHECK(back[0].record.total == points[0].record.total);
    CHECK(back[1].stage == Stage::EndOfSemester);

    points.push_back(make_assessment("P1", Stage::Midterm, {2025, 3, 25}));
    write_assessments_csv(path, points, "");
    CHECK_THROWS_AS(read_assessments_csv(path), ValidationError);
    fs::remove(path);
}
