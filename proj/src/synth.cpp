#include "lonesense/synth.hpp"

#include <algorithm>
#include <cmath>

#include "lonesense/csv.hpp"
#include "lonesense/features.hpp"
#include "lonesense/ingest.hpp"
#include "lonesense/rng.hpp"
#include "lonesense/timezone.hpp"

namespace lonesense {

namespace {

constexpr std::int64_t kMinuteMs = 60000;
constexpr std::int64_t kSecondMs = 1000;

double clampd(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

// Packages cycled through by the app generator; most resolve to a category in
// the default map, the last lands in "other".
const std::vector<std::string>& synth_packages() {
    static const std::vector<std::string> kPackages{
        "com.instagram.android", "com.whatsapp",          "com.google.android.youtube",
        "com.spotify.music",     "com.netflix.mediaclient", "com.king.candycrushsaga",
        "com.tinder",            "com.duolingo",           "com.amazon.mShop.android.shopping",
        "com.misc.tool",
    };
    return kPackages;
}

struct ParticipantState {
    std::string pid;
    double latent_u = 0;  // loneliness position in [0, 1]
};

class CohortBuilder {
public:
    CohortBuilder(const CohortSpec& spec, Cohort& out) : spec_(spec), out_(out) {
        zone_ = TimeZone::load(spec.timezone);
    }

    void add_participant(int index) {
        ParticipantState p;
        char buf[16];
        std::snprintf(buf, sizeof buf, "P%03d", index + 1);
        p.pid = buf;
        Rng latent_rng(mix64(spec_.seed, 0x75, static_cast<std::uint64_t>(index)));
        p.latent_u = latent_rng.next_double();
        out_.participant_ids.push_back(p.pid);
        out_.latent[p.pid] = 8.0 + 24.0 * p.latent_u;

        for (Stage stage : kAllStages) {
            add_stage(index, p, stage);
        }
    }

private:
    double effect_scale(const std::string& family, double u) const {
        for (const auto& e : spec_.effects) {
            if (e.family == family) {
                return std::max(0.05, 1.0 + e.direction * e.strength * (2.0 * u - 1.0));
            }
        }
        return 1.0;
    }

    void add_stage(int index, const ParticipantState& p, Stage stage) {
        const auto pi = static_cast<std::uint64_t>(index);
        const auto si = static_cast<std::uint64_t>(stage == Stage::Midterm ? 0 : 1);
        Rng stage_rng(mix64(spec_.seed, 0x5354, pi, si));
        const double u =
            clampd(p.latent_u + spec_.noise * 0.05 * stage_rng.gaussian(), 0.0, 1.0);

        // item responses from the shared latent; reverse-worded items answer
        // on the inverted scale
        std::array<int, 8> items{};
        for (int i = 1; i <= 8; ++i) {
            const double base = is_reverse_item(i) ? 1.0 - u : u;
            const double z = base + spec_.noise * 0.2 * stage_rng.gaussian();
            items[static_cast<std::size_t>(i - 1)] = z < 0.25 ? 1 : z < 0.5 ? 2 : z < 0.75 ? 3 : 4;
        }
        AssessmentPoint point;
        point.participant_id = p.pid;
        point.stage = stage;
        point.assessment_date = spec_.assessment_date(stage);
        point.record = Uls8Record::from_scores(items);
        out_.assessments.push_back(std::move(point));

        for (int d = 0; d < 14; ++d) {
            Rng day_rng(mix64(spec_.seed, 0x444159, pi, si * 16 + static_cast<std::uint64_t>(d)));
            if (day_rng.next_double() < spec_.missing_day_probability) continue;
            const CivilDate date = add_days(spec_.assessment_date(stage), d - 14);
            add_day(p, u, date, day_rng);
        }
    }

    std::int64_t day_start_utc_ms(CivilDate date) const {
        const std::int64_t local_ms = days_from_civil(date) * kDayMs;
        // fixed-offset zones only, so the midday offset is the day's offset
        const int offset = zone_.offset_seconds_at(local_ms / 1000 + 43200);
        return local_ms - static_cast<std::int64_t>(offset) * 1000;
    }

    void push(SensorKind kind, const std::string& pid, std::int64_t ts, SensorPayload payload) {
        out_.events[kind].push_back(SensorEvent{pid, kind, ts, std::move(payload)});
    }

    void add_day(const ParticipantState& p, double u, CivilDate date, Rng& rng) {
        const std::int64_t base = day_start_utc_ms(date);
        const double noise = spec_.noise;

        // --- screen ------------------------------------------------------
        const double total_target =
            clampd(7200.0 * effect_scale("screen_total_unlock_duration", u) +
                       noise * 600.0 * rng.gaussian(),
                   300.0, 57600.0);
        const double first_minute =
            clampd(240.0 * effect_scale("screen_first_unlock_minutes", u) +
                       noise * 45.0 * rng.gaussian(),
                   1.0, 720.0);
        const int n_unlocks = 8 + static_cast<int>(rng.next_below(5));

        const std::int64_t first_start = base + llround(first_minute) * kMinuteMs;
        const double first_dur_s = 120.0;
        push(SensorKind::Screen, p.pid, first_start, ScreenPayload{ScreenTransition::Unlock});
        push(SensorKind::Screen, p.pid, first_start + llround(first_dur_s * 1000),
             ScreenPayload{ScreenTransition::Lock});

        const int n_rest = n_unlocks - 1;
        const double rest_total = std::max(0.0, total_target - first_dur_s);
        const std::int64_t window_start = base + 780 * kMinuteMs;  // 13:00
        const std::int64_t slot = (600 * kMinuteMs) / n_rest;      // within 13:00-23:00
        for (int i = 0; i < n_rest; ++i) {
            const std::int64_t start = window_start + i * slot;
            const double dur_s =
                std::min(rest_total / n_rest, static_cast<double>(slot) / 1000.0 - 30.0);
            push(SensorKind::Screen, p.pid, start, ScreenPayload{ScreenTransition::Unlock});
            push(SensorKind::Screen, p.pid, start + llround(dur_s * 1000),
                 ScreenPayload{ScreenTransition::Lock});
        }

        // --- battery -----------------------------------------------------
        push(SensorKind::Battery, p.pid, base + 5 * kMinuteMs,
             BatteryPayload{90, BatteryState::Discharging});
        const std::int64_t charge_at = base + (1290 + static_cast<std::int64_t>(rng.next_below(20))) * kMinuteMs;
        push(SensorKind::Battery, p.pid, charge_at, BatteryPayload{25, BatteryState::Charging});
        push(SensorKind::Battery, p.pid, charge_at + 80 * kMinuteMs,
             BatteryPayload{95, BatteryState::Discharging});

        // --- keyboard ------------------------------------------------------
        const int sessions = 3 + static_cast<int>(rng.next_below(4));
        for (int s = 0; s < sessions; ++s) {
            const std::int64_t session_start =
                base + (540 + s * (720 / sessions)) * kMinuteMs +
                static_cast<std::int64_t>(rng.next_below(30)) * kSecondMs;
            const int keys = 8 + static_cast<int>(rng.next_below(12));
            std::int64_t t = session_start;
            for (int k = 0; k < keys; ++k) {
                const int delta = k % 5 == 4 ? -1 : 1;
                push(SensorKind::Keyboard, p.pid, t, KeyboardPayload{delta});
                t += 180 + static_cast<std::int64_t>(rng.next_below(220));
            }
        }

        // --- calls ---------------------------------------------------------
        const int n_calls = 1 + static_cast<int>(rng.next_below(3));
        for (int c = 0; c < n_calls; ++c) {
            const std::int64_t t = base + (600 + c * 90) * kMinuteMs +
                                   static_cast<std::int64_t>(rng.next_below(50)) * kSecondMs;
            const int kind = static_cast<int>(rng.next_below(3));
            const CallDirection dir = kind == 0   ? CallDirection::Incoming
                                      : kind == 1 ? CallDirection::Outgoing
                                                  : CallDirection::Missed;
            const double dur = dir == CallDirection::Missed
                                   ? 0.0
                                   : 45.0 + static_cast<double>(rng.next_below(200));
            push(SensorKind::Calls, p.pid, t,
                 CallPayload{dir, dur, p.pid + "_contact" + std::to_string(rng.next_below(5))});
        }

        // --- messages ------------------------------------------------------
        const int n_msgs = 3 + static_cast<int>(rng.next_below(6));
        for (int m = 0; m < n_msgs; ++m) {
            const std::int64_t t = base + (570 + m * 50) * kMinuteMs +
                                   static_cast<std::int64_t>(rng.next_below(40)) * kSecondMs;
            push(SensorKind::Messages, p.pid, t,
                 MessagePayload{m % 2 == 0 ? MessageDirection::Sent : MessageDirection::Received,
                                p.pid + "_contact" + std::to_string(rng.next_below(4))});
        }

        // --- applications ---------------------------------------------------
        const int n_apps = 4 + static_cast<int>(rng.next_below(4));
        const auto& packages = synth_packages();
        for (int a = 0; a < n_apps; ++a) {
            const std::int64_t start = base + (540 + a * 100) * kMinuteMs +
                                       static_cast<std::int64_t>(rng.next_below(60)) * kSecondMs;
            const std::int64_t dur_ms =
                (300 + static_cast<std::int64_t>(rng.next_below(1500))) * kSecondMs;
            push(SensorKind::Applications, p.pid, start,
                 AppPayload{packages[(static_cast<std::size_t>(a) + rng.next_below(3)) %
                                     packages.size()],
                            start, start + dur_ms});
        }

        // --- locations -------------------------------------------------------
        const int clusters = static_cast<int>(
            clampd(std::round(3.0 * effect_scale("loc_distinct_clusters", u)), 1.0, 5.0));
        const double rel_spread =
            clampd(0.45 * effect_scale("loc_std_stay_length", u), 0.05, 0.9);
        const double travel_s = 600.0;
        const double day_window_s = 50400.0;  // 08:00-22:00
        const double stay_total = day_window_s - (clusters - 1) * travel_s;
        const double mean_stay = stay_total / clusters;

        const double home_lat = 40.0 + 0.01 * static_cast<double>(out_.latent.size());
        const double home_lon = -75.0;

        double cursor_s = 8.0 * 3600.0;
        double planned = 0;
        for (int c = 0; c < clusters; ++c) {
            double dur;
            if (c + 1 == clusters) {
                dur = stay_total - planned;
            } else {
                dur = mean_stay * (1.0 + (c % 2 == 0 ? rel_spread : -rel_spread));
                planned += dur;
            }
            const double lat = home_lat + 0.009 * c;
            // fixes every 5 minutes at the cluster center
            const double stay_end = cursor_s + dur;
            int fix_no = 0;
            for (double t = cursor_s; t <= stay_end + 1e-9; t += 300.0) {
                const double jitter = (fix_no % 2 == 0 ? 1.0 : -1.0) * 2e-5;
                push(SensorKind::Locations, p.pid, base + llround(t * 1000),
                     LocationPayload{lat + jitter, home_lon, 0.0});
                ++fix_no;
            }
            cursor_s = stay_end;
            if (c + 1 < clusters) {
                // two en-route fixes moving toward the next center
                push(SensorKind::Locations, p.pid, base + llround((cursor_s + 150.0) * 1000),
                     LocationPayload{lat + 0.003, home_lon, 2.0});
                push(SensorKind::Locations, p.pid, base + llround((cursor_s + 450.0) * 1000),
                     LocationPayload{lat + 0.006, home_lon, 2.0});
                cursor_s += travel_s;
            }
        }
    }

    const CohortSpec& spec_;
    Cohort& out_;
    TimeZone zone_;
};

}  // namespace

std::vector<EffectSpec> CohortSpec::default_effects() {
    // couplings: screen usage and stay-length spread grow with loneliness,
    // location transitions shrink, and the first unlock drifts toward
    // midnight (late-night usage)
    return {
        {"screen_total_unlock_duration", +1.0, 0.5},
        {"loc_distinct_clusters", -1.0, 0.5},
        {"screen_first_unlock_minutes", -1.0, 0.6},
        {"loc_std_stay_length", +1.0, 0.5},
    };
}

Cohort generate_cohort(const CohortSpec& spec) {
    if (spec.n_participants < 1) throw ValidationError("cohort needs at least 1 participant");
    if (spec.missing_day_probability < 0 || spec.missing_day_probability > 1) {
        throw ValidationError("missing_day_probability must be in [0, 1]");
    }
    Cohort cohort;
    CohortBuilder builder(spec, cohort);
    for (int i = 0; i < spec.n_participants; ++i) builder.add_participant(i);

    for (auto& [kind, events] : cohort.events) {
        std::stable_sort(events.begin(), events.end(),
                         [](const SensorEvent& a, const SensorEvent& b) {
                             if (a.participant_id != b.participant_id) {
                                 return a.participant_id < b.participant_id;
                             }
                             return a.timestamp_ms < b.timestamp_ms;
                         });
    }
    std::sort(cohort.assessments.begin(), cohort.assessments.end(),
              [](const AssessmentPoint& a, const AssessmentPoint& b) {
                  if (a.participant_id != b.participant_id) {
                      return a.participant_id < b.participant_id;
                  }
                  return a.stage < b.stage;
              });
    return cohort;
}

void write_cohort(const std::filesystem::path& dir, const Cohort& cohort, const CohortSpec& spec,
                  const std::string& config_hash) {
    std::filesystem::create_directories(dir);
    for (SensorKind kind : kAllSensors) {
        auto it = cohort.events.find(kind);
        static const std::vector<SensorEvent> kNone;
        write_events_csv(dir / (std::string(sensor_file_stem(kind)) + ".csv"), kind,
                         it == cohort.events.end() ? kNone : it->second, config_hash);
    }
    std::vector<std::vector<std::string>> roster;
    for (const auto& pid : cohort.participant_ids) roster.push_back({pid, spec.timezone});
    write_csv(dir / "roster.csv", {"participant_id", "timezone"}, roster, config_hash);
    write_assessments_csv(dir / "assessments.csv", cohort.assessments, config_hash);
}

PlantedDataset planted_matrix(std::size_t n_rows, std::size_t n_features, std::size_t n_signal,
                              double noise_sd, std::uint64_t seed) {
    if (n_signal > n_features) throw ValidationError("more signal columns than features");
    const FeatureCatalog catalog = FeatureCatalog::standard();
    if (n_features > catalog.size() * 14) {
        throw ValidationError("planted_matrix supports at most catalog x 14 features");
    }

    PlantedDataset out;
    out.data.n_rows = n_rows;
    out.data.n_cols = n_features;
    out.data.stage = Stage::EndOfSemester;
    out.data.target_name = "total";
    for (std::size_t j = 0; j < n_features; ++j) {
        const std::size_t shifted = j * 7;
        const std::size_t def_idx = shifted % catalog.size();
        const std::size_t day = 1 + (shifted / catalog.size()) % 14;
        out.data.column_names.push_back(catalog.at(def_idx).name + "__day" +
                                        std::to_string(day));
    }

    Rng pick(mix64(seed, 0x706c616e));
    std::vector<std::size_t> all(n_features);
    for (std::size_t j = 0; j < n_features; ++j) all[j] = j;
    for (std::size_t k = 0; k < n_signal; ++k) {
        const std::size_t j = k + pick.next_below(n_features - k);
        std::swap(all[k], all[j]);
    }
    out.signal_columns.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_signal));
    std::sort(out.signal_columns.begin(), out.signal_columns.end());

    static const double kCoefs[] = {3.0, -2.5, 2.0, -1.5, 1.0, -0.75};
    out.data.x.assign(n_rows * n_features, 0.0);
    out.data.y.assign(n_rows, 0.0);
    Rng rng(mix64(seed, 0x6d617478));
    for (std::size_t r = 0; r < n_rows; ++r) {
        for (std::size_t c = 0; c < n_features; ++c) {
            out.data.x[r * n_features + c] = rng.gaussian();
        }
        double y = 20.0;
        for (std::size_t k = 0; k < out.signal_columns.size(); ++k) {
            y += kCoefs[k % 6] * out.data.x[r * n_features + out.signal_columns[k]];
        }
        out.data.y[r] = y + noise_sd * rng.gaussian();
        char buf[32];
        std::snprintf(buf, sizeof buf, "R%04zu", r + 1);
        out.data.row_ids.emplace_back(buf);
    }
    return out;
}

}  // namespace lonesense
