#include "lonesense/dataset.hpp"

#include <algorithm>
#include <set>

#include "lonesense/csv.hpp"

namespace lonesense {

WindowBuildResult build_window(const std::map<CivilDate, DailyFeatureRow>& participant_rows,
                               const AssessmentPoint& assessment, const FeatureCatalog& catalog,
                               int min_coverage_days) {
    FeatureWindow window;
    window.participant_id = assessment.participant_id;
    window.stage = assessment.stage;
    window.assessment_date = assessment.assessment_date;
    window.record = assessment.record;
    window.days.reserve(14);

    int coverage = 0;
    for (int k = 1; k <= 14; ++k) {
        const CivilDate date = window.date_of_day(k);
        auto it = participant_rows.find(date);
        if (it != participant_rows.end()) {
            window.days.push_back(it->second);
            bool any = false;
            for (bool b : it->second.has_any_data) any = any || b;
            if (any) ++coverage;
        } else {
            DailyFeatureRow blank;
            blank.participant_id = assessment.participant_id;
            blank.date = date;
            blank.values.assign(catalog.size(), 0.0);
            window.days.push_back(std::move(blank));
        }
    }
    window.coverage_days = coverage;

    WindowBuildResult result;
    if (coverage < min_coverage_days) {
        result.exclusion =
            WindowExclusion{assessment.participant_id, assessment.stage, "coverage"};
    } else {
        result.window = std::move(window);
    }
    return result;
}

WindowSet build_windows(const std::vector<DailyFeatureRow>& rows,
                        const std::vector<AssessmentPoint>& assessments,
                        const FeatureCatalog& catalog, int min_coverage_days) {
    std::map<std::string, std::map<CivilDate, DailyFeatureRow>> by_participant;
    for (const auto& row : rows) by_participant[row.participant_id][row.date] = row;

    WindowSet out;
    static const std::map<CivilDate, DailyFeatureRow> kEmpty;
    for (const auto& a : assessments) {
        auto it = by_participant.find(a.participant_id);
        const auto& participant_rows = it == by_participant.end() ? kEmpty : it->second;
        auto result = build_window(participant_rows, a, catalog, min_coverage_days);
        if (result.window) out.windows.push_back(std::move(*result.window));
        if (result.exclusion) out.exclusions.push_back(std::move(*result.exclusion));
    }
    return out;
}

TargetSpec TargetSpec::parse(const std::string& text) {
    if (text == "total") return TargetSpec{true, 0};
    if (text.size() == 5 && text.compare(0, 4, "item") == 0 && text[4] >= '1' && text[4] <= '8') {
        return TargetSpec{false, text[4] - '0'};
    }
    throw ConfigError("bad target '" + text + "' (expected total or item1..item8)");
}

std::string TargetSpec::name() const {
    return total ? "total" : "item" + std::to_string(item);
}

FlatDataset flatten(const std::vector<FeatureWindow>& windows, const FeatureCatalog& catalog,
                    TargetSpec target) {
    FlatDataset data;
    data.target_name = target.name();
    data.n_cols = catalog.size() * 14;
    data.column_names.reserve(data.n_cols);
    for (const auto& def : catalog.defs()) {
        for (int k = 1; k <= 14; ++k) {
            data.column_names.push_back(def.name + "__day" + std::to_string(k));
        }
    }
    data.n_rows = windows.size();
    data.x.assign(data.n_rows * data.n_cols, 0.0);
    data.y.reserve(windows.size());
    data.row_ids.reserve(windows.size());
    if (!windows.empty()) data.stage = windows.front().stage;

    for (std::size_t r = 0; r < windows.size(); ++r) {
        const auto& w = windows[r];
        if (w.days.size() != 14) throw ValidationError("window must hold exactly 14 days");
        std::size_t c = 0;
        for (std::size_t f = 0; f < catalog.size(); ++f) {
            for (int k = 0; k < 14; ++k) {
                data.x[r * data.n_cols + c++] = w.days[static_cast<std::size_t>(k)].values[f];
            }
        }
        data.row_ids.push_back(w.participant_id);
        data.y.push_back(target.total
                             ? static_cast<double>(w.record.total)
                             : static_cast<double>(
                                   w.record.item_scores[static_cast<std::size_t>(target.item - 1)]));
    }
    return data;
}

void write_flat_csv(const std::filesystem::path& path, const FlatDataset& data,
                    const std::string& config_hash) {
    std::vector<std::string> header{"participant_id", "stage", "target"};
    header.insert(header.end(), data.column_names.begin(), data.column_names.end());
    std::vector<std::vector<std::string>> rows;
    rows.reserve(data.n_rows);
    for (std::size_t r = 0; r < data.n_rows; ++r) {
        std::vector<std::string> row{data.row_ids[r], std::string(stage_name(data.stage)),
                                     fmt_real(data.y[r])};
        for (std::size_t c = 0; c < data.n_cols; ++c) row.push_back(fmt_real(data.at(r, c)));
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows, config_hash);
}

FlatDataset read_flat_csv(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    if (table.header.size() < 4 || table.header[0] != "participant_id" ||
        table.header[1] != "stage" || table.header[2] != "target") {
        throw ValidationError("flat dataset header mismatch: " + path.string());
    }
    FlatDataset data;
    data.column_names.assign(table.header.begin() + 3, table.header.end());
    data.n_cols = data.column_names.size();
    data.n_rows = table.rows.size();
    data.x.assign(data.n_rows * data.n_cols, 0.0);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != table.header.size()) throw ValidationError("short flat dataset row");
        data.row_ids.push_back(row[0]);
        if (auto s = stage_from_name(row[1])) data.stage = *s;
        data.y.push_back(std::stod(row[2]));
        for (std::size_t c = 0; c < data.n_cols; ++c) {
            data.x[r * data.n_cols + c] = std::stod(row[c + 3]);
        }
    }
    return data;
}

void write_exclusions_csv(const std::filesystem::path& path,
                          const std::vector<WindowExclusion>& exclusions,
                          const std::string& config_hash) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : exclusions) {
        rows.push_back({e.participant_id, std::string(stage_name(e.stage)), e.reason});
    }
    write_csv(path, {"participant_id", "stage", "reason"}, rows, config_hash);
}

void write_assessments_csv(const std::filesystem::path& path,
                           const std::vector<AssessmentPoint>& points,
                           const std::string& config_hash) {
    std::vector<std::string> header{"participant_id", "stage", "assessment_date"};
    for (int i = 1; i <= 8; ++i) header.push_back("item" + std::to_string(i));
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : points) {
        std::vector<std::string> row{p.participant_id, std::string(stage_name(p.stage)),
                                     to_string(p.assessment_date)};
        for (int s : p.record.item_scores) row.push_back(std::to_string(s));
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows, config_hash);
}

std::vector<AssessmentPoint> read_assessments_csv(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    std::vector<std::string> expected{"participant_id", "stage", "assessment_date"};
    for (int i = 1; i <= 8; ++i) expected.push_back("item" + std::to_string(i));
    if (table.header != expected) {
        throw ValidationError("assessments header mismatch: " + path.string());
    }
    std::vector<AssessmentPoint> points;
    std::set<std::pair<std::string, Stage>> seen;
    for (const auto& row : table.rows) {
        if (row.size() != expected.size()) throw ValidationError("short assessments row");
        AssessmentPoint p;
        p.participant_id = row[0];
        auto stage = stage_from_name(row[1]);
        if (!stage) throw ValidationError("bad stage '" + row[1] + "' in assessments");
        p.stage = *stage;
        auto date = parse_date(row[2]);
        if (!date) throw ValidationError("bad assessment_date '" + row[2] + "'");
        p.assessment_date = *date;
        std::array<int, 8> scores{};
        for (int i = 0; i < 8; ++i) {
            scores[static_cast<std::size_t>(i)] = std::stoi(row[static_cast<std::size_t>(i) + 3]);
        }
        p.record = Uls8Record::from_scores(scores);
        if (!seen.insert({p.participant_id, p.stage}).second) {
            throw ValidationError("duplicate assessment for participant " + p.participant_id);
        }
        points.push_back(std::move(p));
    }
    return points;
}

}  // namespace lonesense
