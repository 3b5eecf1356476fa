#include "lonesense/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "lonesense/csv.hpp"

namespace lonesense {

namespace {

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// population convention: std of a single value is 0
double pop_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

std::string cap_first(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Catalog

const std::vector<std::string>& FeatureCatalog::default_app_categories() {
    static const std::vector<std::string> kCategories{
        "social",       "communication", "entertainment", "video",  "music",
        "games",        "dating",        "productivity",  "education", "news",
        "shopping",     "finance",       "health",        "travel", "other",
    };
    return kCategories;
}

const std::map<std::string, std::string>& FeatureCatalog::default_app_category_map() {
    static const std::map<std::string, std::string> kMap{
        {"com.facebook.katana", "social"},
        {"com.instagram.android", "social"},
        {"com.twitter.android", "social"},
        {"com.snapchat.android", "social"},
        {"com.whatsapp", "communication"},
        {"org.telegram.messenger", "communication"},
        {"com.discord", "communication"},
        {"com.netflix.mediaclient", "entertainment"},
        {"com.hulu.plus", "entertainment"},
        {"com.google.android.youtube", "video"},
        {"com.zhiliaoapp.musically", "video"},
        {"com.spotify.music", "music"},
        {"com.soundcloud.android", "music"},
        {"com.king.candycrushsaga", "games"},
        {"com.supercell.clashofclans", "games"},
        {"com.tinder", "dating"},
        {"com.bumble.app", "dating"},
        {"com.todoist", "productivity"},
        {"com.notion.id", "productivity"},
        {"com.duolingo", "education"},
        {"org.khanacademy.android", "education"},
        {"flipboard.app", "news"},
        {"bbc.mobile.news.ww", "news"},
        {"com.amazon.mShop.android.shopping", "shopping"},
        {"com.ebay.mobile", "shopping"},
        {"com.paypal.android.p2pmobile", "finance"},
        {"com.coinbase.android", "finance"},
        {"com.myfitnesspal.android", "health"},
        {"com.headspace.app", "health"},
        {"com.airbnb.android", "travel"},
        {"com.tripadvisor.tripadvisor", "travel"},
    };
    return kMap;
}

void FeatureCatalog::push(FeatureDef def) {
    if (index_.count(def.name)) throw ValidationError("duplicate feature name: " + def.name);
    index_[def.name] = defs_.size();
    defs_.push_back(std::move(def));
}

FeatureCatalog FeatureCatalog::standard(const std::vector<std::string>& app_categories) {
    FeatureCatalog c;
    auto add = [&](const char* name, SensorKind sensor, const char* unit, const char* display,
                   const char* description) {
        c.push(FeatureDef{name, sensor, unit, display, description});
    };

    const SensorKind A = SensorKind::Applications;
    add("app_total_usage_duration", A, "s", "Total App Usage Duration",
        "Total usage duration across all applications (seconds)");
    add("app_usage_episode_count", A, "count", "App Usage Episode Count",
        "Number of application usage episodes");
    add("app_distinct_apps", A, "count", "Distinct Apps Used",
        "Number of distinct applications used");
    for (const auto& cat : app_categories) {
        const std::string disp = cap_first(cat);
        c.push(FeatureDef{"app_" + cat + "_duration", A, "s", disp + " App Usage Duration",
                          "Total usage duration of " + cat + " applications (seconds)"});
        c.push(FeatureDef{"app_" + cat + "_episode_count", A, "count", disp + " App Episode Count",
                          "Number of " + cat + " application usage episodes"});
    }

    const SensorKind B = SensorKind::Battery;
    add("battery_charge_episode_count", B, "count", "Charge Episode Count",
        "Number of battery charging episodes");
    add("battery_total_charge_duration", B, "s", "Total Charge Duration",
        "Total duration of battery charging episodes (seconds)");
    add("battery_average_charge_duration", B, "s", "Average Charge Duration",
        "Average duration of battery charging episodes (seconds)");
    add("battery_discharge_episode_count", B, "count", "Discharge Episode Count",
        "Number of battery discharging episodes");
    add("battery_total_discharge_duration", B, "s", "Total Discharge Duration",
        "Total duration of battery discharging episodes (seconds)");
    add("battery_average_discharge_duration", B, "s", "Average Discharge Duration",
        "Average duration of battery discharging episodes (seconds)");

    const SensorKind C = SensorKind::Calls;
    add("calls_incoming_count", C, "count", "Incoming Call Count", "Number of incoming calls");
    add("calls_outgoing_count", C, "count", "Outgoing Call Count", "Number of outgoing calls");
    add("calls_missed_count", C, "count", "Missed Call Count", "Number of missed calls");
    add("calls_total_duration", C, "s", "Total Call Duration",
        "Total duration of calls (seconds)");
    add("calls_incoming_duration", C, "s", "Incoming Call Duration",
        "Total duration of incoming calls (seconds)");
    add("calls_outgoing_duration", C, "s", "Outgoing Call Duration",
        "Total duration of outgoing calls (seconds)");
    add("calls_average_duration", C, "s", "Average Call Duration",
        "Average duration of answered calls (seconds)");
    add("calls_distinct_contacts", C, "count", "Distinct Call Contacts",
        "Number of distinct contacts involved in calls");

    const SensorKind K = SensorKind::Keyboard;
    add("kb_key_press_count", K, "count", "Key Press Count", "Number of key presses");
    add("kb_net_text_length_change", K, "chars", "Net Text Length Change",
        "Net change in text length across keystrokes (characters)");
    add("kb_session_count", K, "count", "Typing Session Count", "Number of typing sessions");
    add("kb_average_session_length", K, "s", "Average Session Length",
        "Average length of typing sessions (seconds)");
    add("kb_total_typing_time", K, "s", "Total Typing Time",
        "Total time spent in typing sessions (seconds)");
    add("kb_average_inter_key_delay", K, "ms", "Average Inter-key Delay",
        "Average time between keystrokes within sessions (milliseconds)");

    const SensorKind L = SensorKind::Locations;
    add("loc_average_speed", L, "m/s", "Average Speed",
        "Average speed over moving segments (meters per second)");
    add("loc_moving_to_static_ratio", L, "ratio", "Moving to Static Ratio",
        "Time spent moving divided by time spent stationary");
    add("loc_total_travel_distance", L, "m", "Total Travel Distance",
        "Total distance traveled (meters)");
    add("loc_total_moving_time", L, "s", "Total Moving Time",
        "Total time spent moving (seconds)");
    add("loc_total_static_time", L, "s", "Total Static Time",
        "Total time spent stationary (seconds)");
    add("loc_distinct_clusters", L, "count", "Distinct Location Clusters Visited",
        "Number of distinct location clusters visited");
    add("loc_time_at_top_cluster", L, "s", "Time at Top Cluster",
        "Time spent at the most-visited location cluster (seconds)");
    add("loc_average_stay_length", L, "s", "Average Stay Length at Clusters",
        "Average stay duration at location clusters (seconds)");
    add("loc_std_stay_length", L, "s", "Standard Deviation of Stay Length at Clusters",
        "Standard deviation of stay durations at location clusters (seconds)");
    add("loc_entropy", L, "nats", "Location Entropy",
        "Shannon entropy of time spent across location clusters");

    const SensorKind M = SensorKind::Messages;
    add("msg_sent_count", M, "count", "Sent Message Count", "Number of messages sent");
    add("msg_received_count", M, "count", "Received Message Count", "Number of messages received");
    add("msg_total_count", M, "count", "Total Message Count",
        "Total number of messages sent and received");
    add("msg_distinct_contacts", M, "count", "Distinct Message Contacts",
        "Number of distinct contacts involved in messages");
    add("msg_top_contact_count", M, "count", "Most Frequent Contact Message Count",
        "Number of messages exchanged with the most frequent contact");

    const SensorKind S = SensorKind::Screen;
    add("screen_unlock_episode_count", S, "count", "Unlock Episode Count",
        "Number of screen unlock episodes");
    add("screen_total_unlock_duration", S, "s", "Total Unlock Duration",
        "Total duration of screen unlock episodes (seconds)");
    add("screen_average_unlock_duration", S, "s", "Average Unlock Duration",
        "Average duration of screen unlock episodes (seconds)");
    add("screen_minimum_unlock_duration", S, "s", "Minimum Unlock Duration",
        "Minimum duration of screen unlock episodes (seconds)");
    add("screen_maximum_unlock_duration", S, "s", "Maximum Unlock Duration",
        "Maximum duration of screen unlock episodes (seconds)");
    add("screen_std_unlock_duration", S, "s", "Standard Deviation of Unlock Duration",
        "Standard deviation of screen unlock episode durations (seconds)");
    add("screen_first_unlock_minutes", S, "min", "First Unlock Time After Midnight",
        "Time of first screen unlock after midnight (minutes)");
    add("screen_avg_time_between_unlocks", S, "s", "Average Time Between Unlocks",
        "Average time between consecutive screen unlocks (seconds)");

    return c;
}

std::size_t FeatureCatalog::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("unknown feature: " + name);
    return it->second;
}

bool FeatureCatalog::contains(const std::string& name) const { return index_.count(name) != 0; }

std::vector<std::size_t> FeatureCatalog::indices_for(SensorKind sensor) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < defs_.size(); ++i) {
        if (defs_[i].sensor == sensor) out.push_back(i);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Extractors

FeatureMap extract_screen(const std::vector<LocalizedEvent>& events) {
    std::vector<std::pair<std::int64_t, std::int64_t>> episodes;
    bool unlocked = false;
    std::int64_t start = 0;
    for (const auto& le : events) {
        const auto& p = std::get<ScreenPayload>(le.event.payload);
        if (p.transition == ScreenTransition::Unlock) {
            if (!unlocked) {
                unlocked = true;
                start = le.ms_of_day;
            }
        } else if (p.transition == ScreenTransition::Lock ||
                   p.transition == ScreenTransition::Off) {
            if (unlocked) {
                episodes.emplace_back(start, le.ms_of_day);
                unlocked = false;
            }
        }
    }
    if (unlocked) episodes.emplace_back(start, kDayMs);  // truncate at midnight

    std::vector<double> durations;
    durations.reserve(episodes.size());
    for (auto [s, e] : episodes) durations.push_back(static_cast<double>(e - s) / 1000.0);

    FeatureMap out;
    const double n = static_cast<double>(episodes.size());
    double total = 0;
    for (double d : durations) total += d;
    out["screen_unlock_episode_count"] = n;
    out["screen_total_unlock_duration"] = total;
    out["screen_average_unlock_duration"] = episodes.empty() ? 0.0 : total / n;
    out["screen_minimum_unlock_duration"] =
        episodes.empty() ? 0.0 : *std::min_element(durations.begin(), durations.end());
    out["screen_maximum_unlock_duration"] =
        episodes.empty() ? 0.0 : *std::max_element(durations.begin(), durations.end());
    out["screen_std_unlock_duration"] = pop_std(durations);
    out["screen_first_unlock_minutes"] =
        episodes.empty() ? 0.0 : static_cast<double>(episodes.front().first / 60000);
    double gap_sum = 0;
    if (episodes.size() >= 2) {
        for (std::size_t i = 1; i < episodes.size(); ++i) {
            gap_sum += static_cast<double>(episodes[i].first - episodes[i - 1].first) / 1000.0;
        }
        out["screen_avg_time_between_unlocks"] = gap_sum / static_cast<double>(episodes.size() - 1);
    } else {
        out["screen_avg_time_between_unlocks"] = 0.0;
    }
    return out;
}

double haversine_m(double lat1, double lon1, double lat2, double lon2) {
    constexpr double kEarthRadiusM = 6371000.0;
    constexpr double kDegToRad = std::numbers::pi / 180.0;
    const double p1 = lat1 * kDegToRad;
    const double p2 = lat2 * kDegToRad;
    const double dp = (lat2 - lat1) * kDegToRad;
    const double dl = (lon2 - lon1) * kDegToRad;
    const double a = std::sin(dp / 2) * std::sin(dp / 2) +
                     std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(a)));
}

std::vector<Stay> detect_stays(const std::vector<LocationFix>& fixes, double radius_m,
                               double min_stay_s) {
    std::vector<Stay> stays;
    std::size_t i = 0;
    while (i < fixes.size()) {
        std::size_t j = i;
        while (j + 1 < fixes.size() &&
               haversine_m(fixes[i].lat, fixes[i].lon, fixes[j + 1].lat, fixes[j + 1].lon) <=
                   radius_m) {
            ++j;
        }
        const double span_s = static_cast<double>(fixes[j].ms - fixes[i].ms) / 1000.0;
        if (span_s >= min_stay_s) {
            Stay stay;
            double lat_sum = 0, lon_sum = 0;
            for (std::size_t k = i; k <= j; ++k) {
                lat_sum += fixes[k].lat;
                lon_sum += fixes[k].lon;
            }
            stay.centroid_lat = lat_sum / static_cast<double>(j - i + 1);
            stay.centroid_lon = lon_sum / static_cast<double>(j - i + 1);
            stay.start_ms = fixes[i].ms;
            stay.end_ms = fixes[j].ms;
            stays.push_back(stay);
            i = j + 1;
        } else {
            ++i;
        }
    }
    return stays;
}

std::vector<StayCluster> cluster_stays(const std::vector<Stay>& stays, double radius_m) {
    std::vector<StayCluster> clusters;
    for (const auto& stay : stays) {
        StayCluster* home = nullptr;
        for (auto& c : clusters) {
            if (haversine_m(c.centroid_lat, c.centroid_lon, stay.centroid_lat,
                            stay.centroid_lon) <= radius_m) {
                home = &c;
                break;
            }
        }
        if (!home) {
            clusters.push_back({stay.centroid_lat, stay.centroid_lon, 0.0, 0});
            home = &clusters.back();
        }
        home->total_stay_s += stay.duration_s();
        home->visit_count += 1;
    }
    return clusters;
}

FeatureMap extract_locations(const std::vector<LocalizedEvent>& events,
                             const ExtractionParams& params) {
    FeatureMap out{
        {"loc_average_speed", 0.0},       {"loc_moving_to_static_ratio", 0.0},
        {"loc_total_travel_distance", 0.0}, {"loc_total_moving_time", 0.0},
        {"loc_total_static_time", 0.0},   {"loc_distinct_clusters", 0.0},
        {"loc_time_at_top_cluster", 0.0}, {"loc_average_stay_length", 0.0},
        {"loc_std_stay_length", 0.0},     {"loc_entropy", 0.0},
    };
    std::vector<LocationFix> fixes;
    std::vector<std::optional<double>> payload_speeds;
    fixes.reserve(events.size());
    for (const auto& le : events) {
        const auto& p = std::get<LocationPayload>(le.event.payload);
        fixes.push_back({le.ms_of_day, p.latitude, p.longitude});
        payload_speeds.push_back(p.speed_mps);
    }
    if (fixes.size() < 2) return out;

    const double thr = params.moving_speed_threshold_mps();
    double total_distance = 0, moving_time = 0, static_time = 0, moving_distance = 0;
    for (std::size_t i = 1; i < fixes.size(); ++i) {
        const double dt =
            static_cast<double>(fixes[i].ms - fixes[i - 1].ms) / 1000.0;
        const double dist = haversine_m(fixes[i - 1].lat, fixes[i - 1].lon, fixes[i].lat,
                                        fixes[i].lon);
        total_distance += dist;
        const double speed =
            payload_speeds[i] ? *payload_speeds[i] : (dt > 0 ? dist / dt : 0.0);
        if (speed > thr) {
            moving_time += dt;
            moving_distance += dist;
        } else {
            static_time += dt;
        }
    }
    out["loc_total_travel_distance"] = total_distance;
    out["loc_total_moving_time"] = moving_time;
    out["loc_total_static_time"] = static_time;
    out["loc_average_speed"] = moving_time > 0 ? moving_distance / moving_time : 0.0;
    // static time of zero: store moving time over a 1 s denominator
    out["loc_moving_to_static_ratio"] =
        static_time > 0 ? moving_time / static_time : (moving_time > 0 ? moving_time / 1.0 : 0.0);

    const auto stays = detect_stays(fixes, params.stay_radius_m, params.min_stay_s);
    const auto clusters = cluster_stays(stays, params.stay_radius_m);
    std::vector<double> stay_lengths;
    stay_lengths.reserve(stays.size());
    for (const auto& s : stays) stay_lengths.push_back(s.duration_s());
    out["loc_distinct_clusters"] = static_cast<double>(clusters.size());
    out["loc_average_stay_length"] = mean_of(stay_lengths);
    out["loc_std_stay_length"] = pop_std(stay_lengths);
    double top = 0, cluster_total = 0;
    for (const auto& c : clusters) {
        top = std::max(top, c.total_stay_s);
        cluster_total += c.total_stay_s;
    }
    out["loc_time_at_top_cluster"] = top;
    double entropy = 0;
    if (clusters.size() > 1 && cluster_total > 0) {
        for (const auto& c : clusters) {
            const double p = c.total_stay_s / cluster_total;
            if (p > 0) entropy -= p * std::log(p);
        }
    }
    out["loc_entropy"] = entropy;
    return out;
}

FeatureMap extract_battery(const std::vector<LocalizedEvent>& events) {
    FeatureMap out{
        {"battery_charge_episode_count", 0.0},    {"battery_total_charge_duration", 0.0},
        {"battery_average_charge_duration", 0.0}, {"battery_discharge_episode_count", 0.0},
        {"battery_total_discharge_duration", 0.0}, {"battery_average_discharge_duration", 0.0},
    };
    if (events.empty()) return out;

    // maximal runs of constant charging state; last run truncates at midnight
    struct Episode {
        BatteryState state;
        std::int64_t start, end;
    };
    std::vector<Episode> episodes;
    BatteryState state = std::get<BatteryPayload>(events.front().event.payload).state;
    std::int64_t run_start = events.front().ms_of_day;
    for (std::size_t i = 1; i < events.size(); ++i) {
        const auto& p = std::get<BatteryPayload>(events[i].event.payload);
        if (p.state != state) {
            episodes.push_back({state, run_start, events[i].ms_of_day});
            state = p.state;
            run_start = events[i].ms_of_day;
        }
    }
    episodes.push_back({state, run_start, kDayMs});

    double charge_n = 0, charge_s = 0, discharge_n = 0, discharge_s = 0;
    for (const auto& ep : episodes) {
        const double dur = static_cast<double>(ep.end - ep.start) / 1000.0;
        if (ep.state == BatteryState::Charging) {
            charge_n += 1;
            charge_s += dur;
        } else {
            discharge_n += 1;
            discharge_s += dur;
        }
    }
    out["battery_charge_episode_count"] = charge_n;
    out["battery_total_charge_duration"] = charge_s;
    out["battery_average_charge_duration"] = charge_n > 0 ? charge_s / charge_n : 0.0;
    out["battery_discharge_episode_count"] = discharge_n;
    out["battery_total_discharge_duration"] = discharge_s;
    out["battery_average_discharge_duration"] = discharge_n > 0 ? discharge_s / discharge_n : 0.0;
    return out;
}

FeatureMap extract_keyboard(const std::vector<LocalizedEvent>& events, double session_gap_s) {
    FeatureMap out{
        {"kb_key_press_count", 0.0},       {"kb_net_text_length_change", 0.0},
        {"kb_session_count", 0.0},         {"kb_average_session_length", 0.0},
        {"kb_total_typing_time", 0.0},     {"kb_average_inter_key_delay", 0.0},
    };
    if (events.empty()) return out;

    double net = 0;
    for (const auto& le : events) {
        net += std::get<KeyboardPayload>(le.event.payload).text_length_delta;
    }
    out["kb_key_press_count"] = static_cast<double>(events.size());
    out["kb_net_text_length_change"] = net;

    std::vector<double> session_lengths;
    double delay_sum_ms = 0;
    std::size_t delay_count = 0;
    std::int64_t session_start = events.front().ms_of_day;
    std::int64_t prev = session_start;
    for (std::size_t i = 1; i <= events.size(); ++i) {
        const bool flush = i == events.size() ||
                           static_cast<double>(events[i].ms_of_day - prev) / 1000.0 > session_gap_s;
        if (flush) {
            session_lengths.push_back(static_cast<double>(prev - session_start) / 1000.0);
            if (i < events.size()) {
                session_start = events[i].ms_of_day;
                prev = session_start;
            }
        } else {
            delay_sum_ms += static_cast<double>(events[i].ms_of_day - prev);
            ++delay_count;
            prev = events[i].ms_of_day;
        }
    }
    out["kb_session_count"] = static_cast<double>(session_lengths.size());
    out["kb_average_session_length"] = mean_of(session_lengths);
    double typing_total = 0;
    for (double s : session_lengths) typing_total += s;
    out["kb_total_typing_time"] = typing_total;
    out["kb_average_inter_key_delay"] =
        delay_count > 0 ? delay_sum_ms / static_cast<double>(delay_count) : 0.0;
    return out;
}

FeatureMap extract_calls(const std::vector<LocalizedEvent>& events) {
    FeatureMap out{
        {"calls_incoming_count", 0.0},    {"calls_outgoing_count", 0.0},
        {"calls_missed_count", 0.0},      {"calls_total_duration", 0.0},
        {"calls_incoming_duration", 0.0}, {"calls_outgoing_duration", 0.0},
        {"calls_average_duration", 0.0},  {"calls_distinct_contacts", 0.0},
    };
    std::set<std::string> contacts;
    for (const auto& le : events) {
        const auto& p = std::get<CallPayload>(le.event.payload);
        out["calls_total_duration"] += p.duration_s;
        switch (p.direction) {
            case CallDirection::Incoming:
                out["calls_incoming_count"] += 1;
                out["calls_incoming_duration"] += p.duration_s;
                break;
            case CallDirection::Outgoing:
                out["calls_outgoing_count"] += 1;
                out["calls_outgoing_duration"] += p.duration_s;
                break;
            case CallDirection::Missed:
                out["calls_missed_count"] += 1;
                break;
        }
        if (!p.contact_hash.empty()) contacts.insert(p.contact_hash);
    }
    const double answered = out["calls_incoming_count"] + out["calls_outgoing_count"];
    out["calls_average_duration"] =
        answered > 0 ? (out["calls_incoming_duration"] + out["calls_outgoing_duration"]) / answered
                     : 0.0;
    out["calls_distinct_contacts"] = static_cast<double>(contacts.size());
    return out;
}

FeatureMap extract_messages(const std::vector<LocalizedEvent>& events) {
    FeatureMap out{
        {"msg_sent_count", 0.0},        {"msg_received_count", 0.0},
        {"msg_total_count", 0.0},       {"msg_distinct_contacts", 0.0},
        {"msg_top_contact_count", 0.0},
    };
    std::map<std::string, double> per_contact;
    for (const auto& le : events) {
        const auto& p = std::get<MessagePayload>(le.event.payload);
        if (p.direction == MessageDirection::Sent) out["msg_sent_count"] += 1;
        else out["msg_received_count"] += 1;
        if (!p.contact_hash.empty()) per_contact[p.contact_hash] += 1;
    }
    out["msg_total_count"] = out["msg_sent_count"] + out["msg_received_count"];
    out["msg_distinct_contacts"] = static_cast<double>(per_contact.size());
    double top = 0;
    for (const auto& [contact, n] : per_contact) top = std::max(top, n);
    out["msg_top_contact_count"] = top;
    return out;
}

FeatureMap extract_applications(const std::vector<LocalizedEvent>& events,
                                const ExtractionParams& params) {
    FeatureMap out{
        {"app_total_usage_duration", 0.0},
        {"app_usage_episode_count", 0.0},
        {"app_distinct_apps", 0.0},
    };
    for (const auto& cat : params.app_categories) {
        out["app_" + cat + "_duration"] = 0.0;
        out["app_" + cat + "_episode_count"] = 0.0;
    }
    std::set<std::string> packages;
    const bool has_other =
        std::find(params.app_categories.begin(), params.app_categories.end(), "other") !=
        params.app_categories.end();
    for (const auto& le : events) {
        const auto& p = std::get<AppPayload>(le.event.payload);
        // the event timestamp marks the episode start; clip at local midnight
        const std::int64_t local_start = le.ms_of_day;
        const std::int64_t local_end =
            local_start + (p.episode_end_ms - p.episode_start_ms);
        const double dur =
            static_cast<double>(std::max<std::int64_t>(
                0, std::min(local_end, kDayMs) - std::max<std::int64_t>(local_start, 0))) /
            1000.0;
        out["app_total_usage_duration"] += dur;
        out["app_usage_episode_count"] += 1;
        packages.insert(p.package);
        auto it = params.app_category_map.find(p.package);
        std::string cat = it != params.app_category_map.end() ? it->second : "other";
        if (!out.count("app_" + cat + "_duration")) cat = has_other ? "other" : cat;
        if (out.count("app_" + cat + "_duration")) {
            out["app_" + cat + "_duration"] += dur;
            out["app_" + cat + "_episode_count"] += 1;
        }
    }
    out["app_distinct_apps"] = static_cast<double>(packages.size());
    return out;
}

// ---------------------------------------------------------------------------
// Day assembly

DailyFeatureRow assemble_day(const FeatureCatalog& catalog, const ExtractionParams& params,
                             const std::string& participant_id, CivilDate date,
                             const std::map<SensorKind, std::vector<LocalizedEvent>>& events) {
    DailyFeatureRow row;
    row.participant_id = participant_id;
    row.date = date;
    row.values.assign(catalog.size(), 0.0);

    auto merge = [&](const FeatureMap& m) {
        for (const auto& [name, value] : m) {
            if (catalog.contains(name)) row.values[catalog.index_of(name)] = value;
        }
    };
    for (const auto& [kind, evs] : events) {
        if (evs.empty()) continue;
        row.has_any_data[static_cast<std::size_t>(kind)] = true;
        switch (kind) {
            case SensorKind::Screen: merge(extract_screen(evs)); break;
            case SensorKind::Locations: merge(extract_locations(evs, params)); break;
            case SensorKind::Battery: merge(extract_battery(evs)); break;
            case SensorKind::Keyboard: merge(extract_keyboard(evs, params.session_gap_s)); break;
            case SensorKind::Calls: merge(extract_calls(evs)); break;
            case SensorKind::Messages: merge(extract_messages(evs)); break;
            case SensorKind::Applications: merge(extract_applications(evs, params)); break;
        }
    }
    return row;
}

std::vector<DailyFeatureRow> extract_all_days(const FeatureCatalog& catalog,
                                              const ExtractionParams& params,
                                              const std::vector<SensorEvent>& events,
                                              const ZoneRoster& roster) {
    // (participant, date) -> sensor -> localized events, keyed merge so the
    // result never depends on input scheduling
    std::map<std::pair<std::string, CivilDate>, std::map<SensorKind, std::vector<LocalizedEvent>>>
        days;
    for (const auto& ev : events) {
        const LocalTime lt = localize(ev.timestamp_ms, roster.zone_for(ev.participant_id));
        days[{ev.participant_id, lt.date}][ev.kind].push_back({ev, lt.ms_of_day});
    }
    std::vector<DailyFeatureRow> rows;
    rows.reserve(days.size());
    for (auto& [key, by_sensor] : days) {
        for (auto& [kind, evs] : by_sensor) {
            std::stable_sort(evs.begin(), evs.end(),
                             [](const LocalizedEvent& a, const LocalizedEvent& b) {
                                 return a.ms_of_day < b.ms_of_day;
                             });
        }
        rows.push_back(assemble_day(catalog, params, key.first, key.second, by_sensor));
    }
    return rows;
}

std::string describe_feature(const FeatureDef& def, std::span<const double> daily_values) {
    if (daily_values.size() != 7) {
        throw ValidationError("describe_feature: expected 7 daily values, got " +
                              std::to_string(daily_values.size()));
    }
    double sum = 0;
    std::string line = def.description;
    for (double v : daily_values) {
        sum += v;
        line += ", ";
        line += fmt_compact2(v);
    }
    line += " (weekly average ";
    line += fmt_compact2(sum / 7.0);
    line += ")";
    return line;
}

// ---------------------------------------------------------------------------
// Artifact io

void write_daily_features(const std::filesystem::path& values_path,
                          const std::filesystem::path& missing_path,
                          const FeatureCatalog& catalog, const std::vector<DailyFeatureRow>& rows,
                          const std::string& config_hash) {
    std::vector<std::string> header{"participant_id", "date"};
    for (const auto& def : catalog.defs()) header.push_back(def.name);
    std::vector<std::vector<std::string>> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        std::vector<std::string> r{row.participant_id, to_string(row.date)};
        for (double v : row.values) r.push_back(fmt_real(v));
        out.push_back(std::move(r));
    }
    write_csv(values_path, header, out, config_hash);

    std::vector<std::string> mheader{"participant_id", "date"};
    for (SensorKind k : kAllSensors) mheader.push_back("has_" + std::string(sensor_file_stem(k)));
    std::vector<std::vector<std::string>> mrows;
    mrows.reserve(rows.size());
    for (const auto& row : rows) {
        std::vector<std::string> r{row.participant_id, to_string(row.date)};
        for (SensorKind k : kAllSensors) r.push_back(row.has_sensor(k) ? "1" : "0");
        mrows.push_back(std::move(r));
    }
    write_csv(missing_path, mheader, mrows, config_hash);
}

std::vector<DailyFeatureRow> read_daily_features(const std::filesystem::path& values_path,
                                                 const std::filesystem::path& missing_path,
                                                 const FeatureCatalog& catalog) {
    const CsvTable values = read_csv(values_path);
    std::vector<std::string> expected{"participant_id", "date"};
    for (const auto& def : catalog.defs()) expected.push_back(def.name);
    if (values.header != expected) {
        throw ValidationError("daily features header does not match catalog: " +
                              values_path.string());
    }
    std::vector<DailyFeatureRow> rows;
    rows.reserve(values.rows.size());
    for (const auto& r : values.rows) {
        if (r.size() != expected.size()) throw ValidationError("short row in daily features");
        DailyFeatureRow row;
        row.participant_id = r[0];
        auto date = parse_date(r[1]);
        if (!date) throw ValidationError("bad date in daily features: " + r[1]);
        row.date = *date;
        row.values.reserve(catalog.size());
        for (std::size_t i = 2; i < r.size(); ++i) row.values.push_back(std::stod(r[i]));
        rows.push_back(std::move(row));
    }

    const CsvTable missing = read_csv(missing_path);
    std::map<std::pair<std::string, std::string>, std::array<bool, 7>> flags;
    for (const auto& r : missing.rows) {
        if (r.size() != 9) throw ValidationError("short row in missing flags");
        std::array<bool, 7> f{};
        for (int k = 0; k < 7; ++k) f[static_cast<std::size_t>(k)] = r[static_cast<std::size_t>(k) + 2] == "1";
        flags[{r[0], r[1]}] = f;
    }
    for (auto& row : rows) {
        auto it = flags.find({row.participant_id, to_string(row.date)});
        if (it != flags.end()) row.has_any_data = it->second;
    }
    return rows;
}

void write_catalog_csv(const std::filesystem::path& path, const FeatureCatalog& catalog,
                       const std::string& config_hash) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& def : catalog.defs()) {
        rows.push_back({def.name, std::string(sensor_name(def.sensor)), def.unit, def.display,
                        def.description});
    }
    write_csv(path, {"name", "sensor", "unit", "display", "description"}, rows, config_hash);
}

}  // namespace lonesense
