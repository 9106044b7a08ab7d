#include "simgen.hpp"

#include "errors.hpp"
#include "risk.hpp"
#include "rng.hpp"
#include "screening.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace ixrisk {

using nlohmann::json;

StudyPeriod ScenarioConfig::period() const {
    StudyPeriod p;
    p.start = make_timestamp(start);
    p.end = p.start + static_cast<Timestamp>(weeks) * k_seconds_per_week;
    return p;
}

void ScenarioConfig::validate() const {
    if (n_intersections < 1) throw_invalid("scenario needs at least one intersection");
    if (weeks < 1) throw_invalid("scenario needs at least one week");
    if (!(base_rate > 0.0) || base_rate > 0.05) {
        throw_invalid("base_rate must be in (0, 0.05]");
    }
    for (double v : hourly_profile) {
        if (v < 0) throw_invalid("hourly profile values must be >= 0");
    }
    if (major_through_lanes < 2 || minor_through_lanes < 2) {
        throw_invalid("through lane counts must be >= 2 (OAFR needs a neighbour)");
    }
    if (major_left_lanes < 0 || minor_left_lanes < 0) throw_invalid("negative left lanes");
    if (!(cycle_seconds >= 40)) throw_invalid("cycle_seconds too small");
    if (!(speed_obs_per_minute > 0)) throw_invalid("speed_obs_per_minute must be > 0");
    for (const auto& [name, beta] : true_beta) {
        if (!std::isfinite(beta)) throw_invalid("true_beta values must be finite");
    }
}

ScenarioConfig default_scenario() {
    ScenarioConfig cfg;
    cfg.true_beta = {
        {"Avg_speed_0_5", -0.06},
        {"B_Vol_LT_0_5", 0.05},
        {"A_TH_Avg_Queue_5_10", 0.05},
        {"D_OAFR_0_5", 0.50},
        {"WeatherType", 0.60},
    };
    return cfg;
}

namespace {

template <typename T>
void get_to_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

} // namespace

ScenarioConfig scenario_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw_invalid(std::string("scenario JSON parse error: ") + e.what());
    }
    ScenarioConfig cfg = default_scenario();
    try {
        get_to_if(j, "n_intersections", cfg.n_intersections);
        if (j.contains("start")) {
            const Timestamp t = parse_timestamp(j.at("start").get<std::string>());
            cfg.start = civil_from_timestamp(t);
        }
        get_to_if(j, "weeks", cfg.weeks);
        get_to_if(j, "major_through_lanes", cfg.major_through_lanes);
        get_to_if(j, "minor_through_lanes", cfg.minor_through_lanes);
        get_to_if(j, "major_left_lanes", cfg.major_left_lanes);
        get_to_if(j, "minor_left_lanes", cfg.minor_left_lanes);
        if (j.contains("hourly_profile")) {
            const auto vec = j.at("hourly_profile").get<std::vector<double>>();
            if (vec.size() != 24) throw_invalid("hourly_profile needs 24 values");
            std::copy(vec.begin(), vec.end(), cfg.hourly_profile.begin());
        }
        get_to_if(j, "weekend_factor", cfg.weekend_factor);
        get_to_if(j, "major_base_volume", cfg.major_base_volume);
        get_to_if(j, "minor_base_volume", cfg.minor_base_volume);
        get_to_if(j, "left_share", cfg.left_share);
        get_to_if(j, "volume_noise_sd", cfg.volume_noise_sd);
        get_to_if(j, "cycle_seconds", cfg.cycle_seconds);
        get_to_if(j, "cycle_jitter_sd", cfg.cycle_jitter_sd);
        get_to_if(j, "min_green_seconds", cfg.min_green_seconds);
        get_to_if(j, "green_noise_sd", cfg.green_noise_sd);
        get_to_if(j, "free_flow_mph", cfg.free_flow_mph);
        get_to_if(j, "congestion_dip_mph", cfg.congestion_dip_mph);
        get_to_if(j, "speed_noise_sd", cfg.speed_noise_sd);
        get_to_if(j, "speed_obs_per_minute", cfg.speed_obs_per_minute);
        get_to_if(j, "adverse_spells_per_week", cfg.adverse_spells_per_week);
        get_to_if(j, "adverse_mean_hours", cfg.adverse_mean_hours);
        if (j.contains("true_beta")) {
            cfg.true_beta = j.at("true_beta").get<std::map<std::string, double>>();
        }
        get_to_if(j, "base_rate", cfg.base_rate);
        get_to_if(j, "frac_single_vehicle", cfg.frac_single_vehicle);
        get_to_if(j, "frac_impaired", cfg.frac_impaired);
        get_to_if(j, "exit_crashes_per_intersection_week",
                  cfg.exit_crashes_per_intersection_week);
        get_to_if(j, "minor_crashes_per_intersection_week",
                  cfg.minor_crashes_per_intersection_week);
        get_to_if(j, "seed", cfg.seed);
    } catch (const json::exception& e) {
        throw_invalid(std::string("scenario JSON field error: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
    json j;
    j["n_intersections"] = cfg.n_intersections;
    j["start"] = format_timestamp(make_timestamp(cfg.start));
    j["weeks"] = cfg.weeks;
    j["major_through_lanes"] = cfg.major_through_lanes;
    j["minor_through_lanes"] = cfg.minor_through_lanes;
    j["major_left_lanes"] = cfg.major_left_lanes;
    j["minor_left_lanes"] = cfg.minor_left_lanes;
    j["hourly_profile"] = cfg.hourly_profile;
    j["weekend_factor"] = cfg.weekend_factor;
    j["major_base_volume"] = cfg.major_base_volume;
    j["minor_base_volume"] = cfg.minor_base_volume;
    j["left_share"] = cfg.left_share;
    j["volume_noise_sd"] = cfg.volume_noise_sd;
    j["cycle_seconds"] = cfg.cycle_seconds;
    j["cycle_jitter_sd"] = cfg.cycle_jitter_sd;
    j["min_green_seconds"] = cfg.min_green_seconds;
    j["green_noise_sd"] = cfg.green_noise_sd;
    j["free_flow_mph"] = cfg.free_flow_mph;
    j["congestion_dip_mph"] = cfg.congestion_dip_mph;
    j["speed_noise_sd"] = cfg.speed_noise_sd;
    j["speed_obs_per_minute"] = cfg.speed_obs_per_minute;
    j["adverse_spells_per_week"] = cfg.adverse_spells_per_week;
    j["adverse_mean_hours"] = cfg.adverse_mean_hours;
    j["true_beta"] = cfg.true_beta;
    j["base_rate"] = cfg.base_rate;
    j["frac_single_vehicle"] = cfg.frac_single_vehicle;
    j["frac_impaired"] = cfg.frac_impaired;
    j["exit_crashes_per_intersection_week"] = cfg.exit_crashes_per_intersection_week;
    j["minor_crashes_per_intersection_week"] = cfg.minor_crashes_per_intersection_week;
    j["seed"] = cfg.seed;
    return j.dump(2) + "\n";
}

// -------- Scenario --------

namespace {

constexpr std::uint64_t k_tag_scale = 0x7363616cULL;   // stream tags
constexpr std::uint64_t k_tag_volume = 0x766f6cULL;
constexpr std::uint64_t k_tag_volnoise = 0x766e7aULL;
constexpr std::uint64_t k_tag_lane = 0x6c616e65ULL;
constexpr std::uint64_t k_tag_phase = 0x70686173ULL;
constexpr std::uint64_t k_tag_speed = 0x73706400ULL;
constexpr std::uint64_t k_tag_weather = 0x77747831ULL;
constexpr std::uint64_t k_tag_inject = 0x696e6a31ULL;
constexpr std::uint64_t k_tag_noise = 0x6e6f6973ULL;

const std::array<Bearing, 4> k_all_bearings = {Bearing::NB, Bearing::SB, Bearing::EB,
                                               Bearing::WB};

bool role_is_a_or_shared(const std::string& variable) {
    // Entrance events carry A-approach, speed, and weather variables only.
    for (const char* w : k_weather_variables) {
        if (variable == w) return true;
    }
    const auto [base, slice] = split_slice_suffix(variable);
    if (base == "Avg_speed" || base == "Std_speed") return true;
    return !base.empty() && base[0] == 'A';
}

} // namespace

Scenario::Scenario(ScenarioConfig config) : config_(std::move(config)) {
    config_.validate();
}

std::string Scenario::intersection_id(int i) const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "X%02d", i + 1);
    return buf;
}

double Scenario::intersection_scale(int i) const {
    return 0.75 + 0.5 * counter_u01(config_.seed, mix_seed(k_tag_scale, static_cast<std::uint64_t>(i)));
}

IntersectionConfig Scenario::intersection_config(int i) const {
    IntersectionConfig cfg;
    cfg.id = intersection_id(i);
    const bool ns_major =
        counter_u01(config_.seed, mix_seed(k_tag_scale, static_cast<std::uint64_t>(i), 1)) < 0.5;
    for (std::size_t a = 0; a < 4; ++a) {
        ApproachConfig ap;
        ap.bearing = k_all_bearings[a];
        const bool on_ns = ap.bearing == Bearing::NB || ap.bearing == Bearing::SB;
        ap.is_major = on_ns == ns_major;
        ap.through_lanes = ap.is_major ? config_.major_through_lanes
                                       : config_.minor_through_lanes;
        ap.left_turn_lanes = ap.is_major ? config_.major_left_lanes
                                         : config_.minor_left_lanes;
        ap.upstream_segment_length_ft = 900.0 + 600.0 * counter_u01(
            config_.seed, mix_seed(k_tag_scale, static_cast<std::uint64_t>(i), 2 + a));
        cfg.approaches[a] = ap;
    }
    cfg.validate();
    return cfg;
}

double Scenario::demand_multiplier(Timestamp t) const {
    const std::int64_t sod = clock_of_day(t);
    const double h = static_cast<double>(sod) / 3600.0;
    const int h0 = static_cast<int>(h) % 24;
    const int h1 = (h0 + 1) % 24;
    const double frac = h - std::floor(h);
    double mult = config_.hourly_profile[static_cast<std::size_t>(h0)] * (1.0 - frac) +
                  config_.hourly_profile[static_cast<std::size_t>(h1)] * frac;
    const int wd = weekday(t);
    if (wd >= 5) mult *= config_.weekend_factor;
    return mult;
}

double Scenario::expected_movement_volume(int i, Bearing b, Movement m, Timestamp t) const {
    const IntersectionConfig cfg = intersection_config(i);
    const bool major = cfg.approach(b).is_major;
    const double base = (major ? config_.major_base_volume : config_.minor_base_volume) *
                        intersection_scale(i);
    const double through = base * demand_multiplier(t);
    return m == Movement::through ? through : through * config_.left_share;
}

std::vector<WeatherRecord> Scenario::generate_weather() const {
    const StudyPeriod period = config_.period();
    FastRng rng(mix_seed(config_.seed, k_tag_weather));
    std::vector<WeatherRecord> out;
    out.push_back({period.start, 0, 10.0, 0.0});
    if (!(config_.adverse_spells_per_week > 0)) return out;

    const double mean_gap = static_cast<double>(k_seconds_per_week) /
                            config_.adverse_spells_per_week;
    Timestamp t = period.start + static_cast<Timestamp>(rng.exponential(mean_gap));
    while (t < period.end) {
        const auto duration =
            static_cast<Timestamp>(std::max(600.0, rng.exponential(config_.adverse_mean_hours * 3600.0)));
        WeatherRecord adverse;
        adverse.timestamp = t;
        adverse.weather_type = 1;
        adverse.visibility = rng.uniform(2.0, 9.0);
        const double u = rng.uniform();
        adverse.hourly_precip = std::round(80.0 * u * u * u * 10.0) / 10.0; // tenths, skewed low
        out.push_back(adverse);
        const Timestamp spell_end = t + duration;
        if (spell_end >= period.end) break;
        out.push_back({spell_end, 0, 10.0, 0.0});
        t = spell_end + static_cast<Timestamp>(rng.exponential(mean_gap));
    }
    return out;
}

StreamBundle Scenario::generate_streams(int i) const {
    const StudyPeriod period = config_.period();
    StreamBundle bundle;
    bundle.config = intersection_config(i);
    const std::string& id = bundle.config.id;
    const double scale = intersection_scale(i);

    // ---- lane-specific 15-minute volumes ----
    std::map<std::pair<Bearing, Movement>, std::vector<double>> lane_weights;
    for (const auto& ap : bundle.config.approaches) {
        for (Movement m : {Movement::through, Movement::left}) {
            const int lanes = m == Movement::through ? ap.through_lanes : ap.left_turn_lanes;
            std::vector<double> w(static_cast<std::size_t>(lanes));
            double total = 0.0;
            for (int l = 0; l < lanes; ++l) {
                w[static_cast<std::size_t>(l)] =
                    0.85 + 0.3 * counter_u01(config_.seed,
                                             mix_seed(k_tag_lane, static_cast<std::uint64_t>(i),
                                                      (static_cast<std::uint64_t>(ap.bearing) << 9) |
                                                          (static_cast<std::uint64_t>(m) << 8) |
                                                          static_cast<std::uint64_t>(l)));
                total += w[static_cast<std::size_t>(l)];
            }
            for (double& v : w) v /= total;
            lane_weights[{ap.bearing, m}] = std::move(w);
        }
    }

    const auto n_windows = static_cast<std::int64_t>((period.end - period.start) / 900);
    for (std::int64_t wi = 0; wi < n_windows; ++wi) {
        const Timestamp ws = period.start + wi * 900;
        const double mult = demand_multiplier(ws + 450);
        for (const auto& ap : bundle.config.approaches) {
            const double base_th =
                (ap.is_major ? config_.major_base_volume : config_.minor_base_volume) * scale;
            for (Movement m : {Movement::through, Movement::left}) {
                const auto& weights = lane_weights[{ap.bearing, m}];
                if (weights.empty()) continue;
                const double lam_mv =
                    base_th * mult * (m == Movement::left ? config_.left_share : 1.0);
                // One multiplicative shock per (window, approach, movement):
                // lanes move together, which is what OAFR leans on.
                FastRng shock_rng(mix_seed(config_.seed, k_tag_volnoise,
                                           static_cast<std::uint64_t>(i),
                                           (static_cast<std::uint64_t>(wi) << 5) |
                                               (static_cast<std::uint64_t>(ap.bearing) << 1) |
                                               static_cast<std::uint64_t>(m)));
                const double sd = config_.volume_noise_sd;
                const double shock = std::exp(shock_rng.normal(0.0, sd) - 0.5 * sd * sd);
                for (std::size_t l = 0; l < weights.size(); ++l) {
                    FastRng rng(mix_seed(config_.seed, k_tag_volume,
                                         mix_seed(static_cast<std::uint64_t>(i),
                                                  static_cast<std::uint64_t>(wi)),
                                         (static_cast<std::uint64_t>(ap.bearing) << 9) |
                                             (static_cast<std::uint64_t>(m) << 8) |
                                             static_cast<std::uint64_t>(l)));
                    VolumeRecord rec;
                    rec.intersection = id;
                    rec.bearing = ap.bearing;
                    rec.lane_index = static_cast<int>(l) + 1;
                    rec.movement = m;
                    rec.window_start = ws;
                    rec.count = rng.poisson(lam_mv * shock * weights[l]);
                    bundle.volumes.push_back(std::move(rec));
                }
            }
        }
    }

    // ---- adaptive-signal emulation: demand-proportional greens ----
    std::vector<Bearing> majors, minors;
    for (const auto& ap : bundle.config.approaches) {
        (ap.is_major ? majors : minors).push_back(ap.bearing);
    }
    struct Group {
        std::vector<Bearing> bearings;
        Movement movement;
    };
    const std::array<Group, 4> groups = {
        Group{majors, Movement::left},
        Group{majors, Movement::through},
        Group{minors, Movement::left},
        Group{minors, Movement::through},
    };

    FastRng phase_rng(mix_seed(config_.seed, k_tag_phase, static_cast<std::uint64_t>(i)));
    std::map<std::pair<Bearing, Movement>, Timestamp> last_green_end;
    Timestamp t = period.start +
                  static_cast<Timestamp>(phase_rng.uniform() * config_.cycle_seconds);
    constexpr double clearance = 4.0;
    while (t < period.end) {
        double cycle = phase_rng.normal(config_.cycle_seconds, config_.cycle_jitter_sd);
        cycle = std::clamp(cycle, 0.6 * config_.cycle_seconds, 1.6 * config_.cycle_seconds);
        const double available = cycle - 4 * clearance;

        std::array<double, 4> share{};
        double share_total = 0.0;
        for (std::size_t g = 0; g < 4; ++g) {
            double demand = 0.0;
            for (Bearing b : groups[g].bearings) {
                demand += expected_movement_volume(i, b, groups[g].movement, t);
            }
            // Per-cycle response noise is the "adaptive" part; it is what
            // puts spread into Std_Green.
            share[g] = std::max(0.05, demand) *
                       std::exp(phase_rng.normal(0.0, config_.green_noise_sd));
            share_total += share[g];
        }

        double cursor = 0.0;
        for (std::size_t g = 0; g < 4; ++g) {
            const double green =
                std::max(config_.min_green_seconds, available * share[g] / share_total);
            const auto start = t + static_cast<Timestamp>(std::llround(cursor));
            const auto end = start + static_cast<Timestamp>(std::llround(std::max(1.0, green)));
            for (Bearing b : groups[g].bearings) {
                if (groups[g].movement == Movement::left &&
                    bundle.config.approach(b).left_turn_lanes == 0) {
                    continue;
                }
                PhaseEvent ev;
                ev.intersection = id;
                ev.bearing = b;
                ev.movement = groups[g].movement;
                ev.green_start = start;
                ev.green_end = end;
                const auto it = last_green_end.find({b, groups[g].movement});
                const double red = it == last_green_end.end()
                                       ? cycle
                                       : static_cast<double>(start - it->second);
                const double rate_per_sec =
                    expected_movement_volume(i, b, groups[g].movement, start) / 900.0;
                ev.queue_at_green =
                    static_cast<double>(phase_rng.poisson(rate_per_sec * std::max(0.0, red)));
                ev.max_wait_at_green = std::max(0.0, red * phase_rng.uniform(0.7, 1.0));
                last_green_end[{b, groups[g].movement}] = end;
                bundle.phases.push_back(std::move(ev));
            }
            cursor += green + clearance;
        }
        t += static_cast<Timestamp>(std::llround(cycle));
    }

    // ---- Bluetooth speed on the major approaches ----
    const double mean_gap = 60.0 / config_.speed_obs_per_minute;
    for (Bearing b : majors) {
        FastRng rng(mix_seed(config_.seed, k_tag_speed, static_cast<std::uint64_t>(i),
                             static_cast<std::uint64_t>(b)));
        double ar = 0.0; // AR(1) deviation
        Timestamp ts = period.start + static_cast<Timestamp>(rng.exponential(mean_gap));
        while (ts < period.end) {
            const double load = std::min(1.0, demand_multiplier(ts) / 1.25);
            ar = 0.8 * ar + rng.normal(0.0, config_.speed_noise_sd * 0.6);
            double v = config_.free_flow_mph - config_.congestion_dip_mph * load + ar +
                       rng.normal(0.0, config_.speed_noise_sd);
            v = std::max(3.0, v);
            SpeedObservation obs;
            obs.intersection = id;
            obs.bearing = b;
            obs.timestamp = ts;
            obs.space_mean_speed = std::round(v * 100.0) / 100.0;
            bundle.speeds.push_back(std::move(obs));
            ts += static_cast<Timestamp>(std::max(1.0, rng.exponential(mean_gap)));
        }
    }

    return bundle;
}

std::vector<std::string> Scenario::support_variables(LocationClass cls) const {
    std::vector<std::string> out;
    for (const auto& [name, beta] : config_.true_beta) {
        if (cls == LocationClass::within || role_is_a_or_shared(name)) out.push_back(name);
    }
    return out;
}

const std::map<std::string, double>& Scenario::cached_means() const {
    if (means_) return *means_;
    const auto support = support_variables(LocationClass::within);
    std::map<std::string, double> mean;
    if (support.empty()) {
        means_ = std::move(mean);
        return *means_;
    }

    const StudyPeriod period = config_.period();
    const auto weather = generate_weather();
    std::map<std::string, double> sums;
    long n = 0;
    for (int i = 0; i < config_.n_intersections; ++i) {
        auto bundle = generate_streams(i);
        auto config = bundle.config;
        const StreamIndex index(config, std::move(bundle.volumes), std::move(bundle.phases),
                                std::move(bundle.speeds), weather);
        std::vector<Bearing> majors;
        for (const auto& ap : config.approaches) {
            if (ap.is_major) majors.push_back(ap.bearing);
        }
        // 7-hour stride: co-prime with the day so every hour of day appears.
        for (Timestamp t = period.start + 1200; t < period.end; t += 7 * 3600) {
            for (Bearing b : majors) {
                EventKey key{config.id, t, LocationClass::within, EventRole::control, ""};
                auto x = extract_named_features(key, b, index, OafrSettings{}, support);
                if (!x) continue;
                for (const auto& [name, value] : *x) sums[name] += value;
                ++n;
            }
        }
    }
    if (n == 0) throw_numeric("scenario mean undefined: no extractable grid instants");
    for (const auto& [name, total] : sums) mean[name] = total / static_cast<double>(n);
    means_ = std::move(mean);
    return *means_;
}

std::map<std::string, double> Scenario::scenario_mean(LocationClass cls) const {
    const auto& all = cached_means();
    std::map<std::string, double> out;
    for (const auto& name : support_variables(cls)) {
        const auto it = all.find(name);
        if (it != all.end()) out[name] = it->second;
    }
    return out;
}

std::vector<CrashRecord> Scenario::inject_crashes(
    int i, const StreamIndex& streams, const std::map<std::string, double>& within_mean,
    const std::map<std::string, double>& entrance_mean) const {
    const StudyPeriod period = config_.period();
    const std::string id = intersection_id(i);
    const double logit_base = std::log(config_.base_rate / (1.0 - config_.base_rate));

    std::vector<Bearing> majors, minors;
    for (const auto& ap : streams.config().approaches) {
        (ap.is_major ? majors : minors).push_back(ap.bearing);
    }

    struct Proto {
        Timestamp t;
        LocationClass cls;
        Bearing bearing;
        bool single_vehicle;
        bool impaired;
    };
    std::vector<Proto> protos;

    const auto support_w = support_variables(LocationClass::within);
    const auto support_e = support_variables(LocationClass::entrance);

    for (Timestamp t = period.start + 1200; t < period.end; t += 300) {
        for (LocationClass cls : {LocationClass::within, LocationClass::entrance}) {
            const auto& support = cls == LocationClass::within ? support_w : support_e;
            const auto& center = cls == LocationClass::within ? within_mean : entrance_mean;
            for (Bearing b : majors) {
                FastRng rng(mix_seed(config_.seed, k_tag_inject,
                                     mix_seed(static_cast<std::uint64_t>(i),
                                              static_cast<std::uint64_t>(t)),
                                     (static_cast<std::uint64_t>(cls) << 8) |
                                         static_cast<std::uint64_t>(b)));
                const double u = rng.uniform();
                EventKey key{id, t, cls, EventRole::crash, ""};
                const auto x = extract_named_features(key, b, streams, OafrSettings{}, support);
                if (!x) continue;
                double eta = logit_base;
                for (const auto& [name, value] : *x) {
                    eta += config_.true_beta.at(name) * (value - center.at(name));
                }
                const double p = 1.0 / (1.0 + std::exp(-eta));
                if (u >= p) continue;
                Proto proto;
                proto.t = t;
                proto.cls = cls;
                proto.bearing = b;
                proto.single_vehicle = rng.uniform() < config_.frac_single_vehicle;
                proto.impaired = rng.uniform() < config_.frac_impaired;
                protos.push_back(proto);
            }
        }
    }

    // Noise crashes that only exist to exercise the filters: exit-class and
    // minor-approach events with uniform random instants.
    {
        FastRng rng(mix_seed(config_.seed, k_tag_noise, static_cast<std::uint64_t>(i)));
        const auto span = static_cast<double>(period.end - (period.start + 1200));
        const auto draw_instant = [&] {
            const auto offs = static_cast<Timestamp>(rng.uniform() * span);
            return period.start + 1200 + (offs / 300) * 300;
        };
        const double weeks = static_cast<double>(config_.weeks);
        const auto n_exit = rng.poisson(config_.exit_crashes_per_intersection_week * weeks);
        for (std::int64_t k = 0; k < n_exit; ++k) {
            Proto p;
            p.t = draw_instant();
            p.cls = LocationClass::exit;
            p.bearing = k_all_bearings[rng.uniform_int(4)];
            p.single_vehicle = rng.uniform() < config_.frac_single_vehicle;
            p.impaired = rng.uniform() < config_.frac_impaired;
            protos.push_back(p);
        }
        const auto n_minor = rng.poisson(config_.minor_crashes_per_intersection_week * weeks);
        for (std::int64_t k = 0; k < n_minor && !minors.empty(); ++k) {
            Proto p;
            p.t = draw_instant();
            p.cls = rng.uniform() < 0.5 ? LocationClass::within : LocationClass::entrance;
            p.bearing = minors[rng.uniform_int(minors.size())];
            p.single_vehicle = rng.uniform() < config_.frac_single_vehicle;
            p.impaired = rng.uniform() < config_.frac_impaired;
            protos.push_back(p);
        }
    }

    std::sort(protos.begin(), protos.end(), [](const Proto& a, const Proto& b) {
        return std::tie(a.t, a.cls, a.bearing) < std::tie(b.t, b.cls, b.bearing);
    });

    std::vector<CrashRecord> out;
    out.reserve(protos.size());
    int seq = 0;
    for (const auto& p : protos) {
        CrashRecord c;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "_c%05d", seq++);
        c.id = id + buf;
        c.intersection = id;
        c.occurred_at = p.t;
        c.at_fault_bearing = p.bearing;
        c.location_class = p.cls;
        c.single_vehicle = p.single_vehicle;
        c.impaired = p.impaired;
        out.push_back(std::move(c));
    }
    return out;
}

// -------- providers and pipeline --------

ScenarioStreamProvider::ScenarioStreamProvider(const Scenario& scenario,
                                               std::vector<WeatherRecord> weather)
    : scenario_(scenario), weather_(std::move(weather)) {}

std::vector<std::string> ScenarioStreamProvider::intersections() {
    std::vector<std::string> out;
    for (int i = 0; i < scenario_.n_intersections(); ++i) {
        out.push_back(scenario_.intersection_id(i));
    }
    return out;
}

const StreamIndex& ScenarioStreamProvider::streams(const std::string& intersection) {
    if (cached_id_ != intersection || !cached_) {
        int index = -1;
        for (int i = 0; i < scenario_.n_intersections(); ++i) {
            if (scenario_.intersection_id(i) == intersection) {
                index = i;
                break;
            }
        }
        if (index < 0) throw_invalid("unknown intersection '" + intersection + "'");
        auto bundle = scenario_.generate_streams(index);
        cached_ = std::make_unique<StreamIndex>(bundle.config, std::move(bundle.volumes),
                                                std::move(bundle.phases),
                                                std::move(bundle.speeds), weather_);
        cached_id_ = intersection;
    }
    return *cached_;
}

ScenarioDatasets run_scenario_pipeline(const Scenario& scenario,
                                       const MatchingSettings& matching) {
    ScenarioDatasets out;
    const auto weather = scenario.generate_weather();
    const auto within_mean = scenario.scenario_mean(LocationClass::within);
    const auto entrance_mean = scenario.scenario_mean(LocationClass::entrance);

    {
        ScenarioStreamProvider provider(scenario, weather);
        for (int i = 0; i < scenario.n_intersections(); ++i) {
            const auto& index = provider.streams(scenario.intersection_id(i));
            auto crashes = scenario.inject_crashes(i, index, within_mean, entrance_mean);
            out.all_crashes.insert(out.all_crashes.end(), crashes.begin(), crashes.end());
        }
    }

    std::map<std::string, IntersectionConfig> configs;
    for (int i = 0; i < scenario.n_intersections(); ++i) {
        configs[scenario.intersection_id(i)] = scenario.intersection_config(i);
    }
    out.eligible = filter_crashes(out.all_crashes, configs, &out.filter_drops);

    ScenarioStreamProvider provider(scenario, weather);
    out.matched = build_dataset(out.eligible, out.all_crashes, provider,
                                scenario.period(), matching);
    return out;
}

// -------- recovery experiment --------

namespace {

double permutation_null_sd(const std::vector<std::vector<double>>& stratum_scores,
                           std::uint64_t seed, int permutations) {
    // Permute the case label within each stratum and re-evaluate the AUC.
    Rng rng(seed);
    std::vector<double> aucs;
    aucs.reserve(static_cast<std::size_t>(permutations));
    std::vector<double> scores;
    std::vector<int> labels;
    for (int p = 0; p < permutations; ++p) {
        scores.clear();
        labels.clear();
        for (const auto& s : stratum_scores) {
            const auto pick = static_cast<std::size_t>(rng.uniform_int(s.size()));
            for (std::size_t j = 0; j < s.size(); ++j) {
                scores.push_back(s[j]);
                labels.push_back(j == pick ? 1 : 0);
            }
        }
        aucs.push_back(roc_auc(scores, labels).auc);
    }
    double mean = 0.0;
    for (double a : aucs) mean += a;
    mean /= static_cast<double>(aucs.size());
    double var = 0.0;
    for (double a : aucs) var += (a - mean) * (a - mean);
    return std::sqrt(var / static_cast<double>(aucs.size() - 1));
}

} // namespace

RecoveryReport recovery_experiment(const ScenarioConfig& base_config, int replications,
                                   const McmcSettings& mcmc, int threads) {
    if (replications < 1) throw_invalid("recovery needs at least one replication");
    if (base_config.true_beta.size() < 3) {
        throw_invalid("recovery needs true_beta on at least 3 variables");
    }

    RecoveryReport report;
    std::vector<std::string> support;
    {
        const Scenario probe{base_config};
        support = probe.support_variables(LocationClass::within);
    }

    struct PerVar {
        std::vector<double> estimates;
        std::vector<bool> covered;
        std::vector<double> std_effects;
    };
    std::map<std::string, PerVar> per_var;

    for (int rep = 0; rep < replications; ++rep) {
        ScenarioConfig cfg = base_config;
        cfg.seed = mix_seed(base_config.seed, 0x72657063ULL, static_cast<std::uint64_t>(rep));
        const Scenario scenario{cfg};

        RecoveryReplication row;
        row.replication = rep;
        row.seed = cfg.seed;

        MatchingSettings matching;
        matching.rng_seed = mix_seed(cfg.seed, 0x6d617463ULL);
        auto datasets = run_scenario_pipeline(scenario, matching);
        row.crashes = static_cast<long>(datasets.all_crashes.size());
        row.strata = static_cast<long>(datasets.matched.within.size());
        if (row.strata < 30) {
            report.replications.push_back(row);
            continue;
        }
        const auto& strata = datasets.matched.within;

        // Correlation screen over the slice-1 scope (the Table 3 shape);
        // the fit itself targets the injection support set.
        {
            std::vector<std::string> names;
            for (const auto& v : canonical_variables(LocationClass::within)) {
                const auto [base, slice] = split_slice_suffix(v);
                if (slice == 1 || slice == 0) names.push_back(v);
            }
            std::vector<std::vector<double>> cols(names.size());
            for (std::size_t c = 0; c < names.size(); ++c) {
                auto& col = cols[c];
                for (const auto& s : strata) {
                    col.push_back(s.crash.features.at(names[c]));
                    for (const auto& ctl : s.controls) col.push_back(ctl.features.at(names[c]));
                }
            }
            ScreenOptions opts;
            opts.threads = threads;
            screen(names, cols, opts);
        }

        const auto data = make_clogit_data(strata, support);
        McmcSettings fit_settings = mcmc;
        fit_settings.seed = mix_seed(cfg.seed, 0x66697462ULL);
        fit_settings.threads = threads;
        const auto fit = fit_bayes(data, fit_settings);

        for (const auto& coef : fit.coefficients) {
            const double truth = cfg.true_beta.at(coef.name);
            auto& agg = per_var[coef.name];
            agg.estimates.push_back(coef.mean);
            agg.covered.push_back(coef.q025 <= truth && truth <= coef.q975);
            row.max_r_hat = std::max(row.max_r_hat, coef.r_hat);

            double mean = 0.0, var = 0.0;
            long n = 0;
            for (const auto& block : data.strata) {
                const int col = static_cast<int>(&coef - fit.coefficients.data());
                for (Eigen::Index r = 0; r < block.rows(); ++r) {
                    mean += block(r, col);
                    ++n;
                }
            }
            mean /= static_cast<double>(n);
            for (const auto& block : data.strata) {
                const int col = static_cast<int>(&coef - fit.coefficients.data());
                for (Eigen::Index r = 0; r < block.rows(); ++r) {
                    var += (block(r, col) - mean) * (block(r, col) - mean);
                }
            }
            const double sd = std::sqrt(var / static_cast<double>(n - 1));
            agg.std_effects.push_back(std::abs(truth) * sd);
        }

        // Held-out AUC: fit on the first 70% of strata, score the rest.
        {
            const std::size_t n_total = strata.size();
            const std::size_t n_train = std::max<std::size_t>(10, (n_total * 7) / 10);
            std::vector<Stratum> train(strata.begin(),
                                       strata.begin() + static_cast<std::ptrdiff_t>(n_train));
            std::vector<Stratum> test(strata.begin() + static_cast<std::ptrdiff_t>(n_train),
                                      strata.end());
            if (test.size() >= 10) {
                const auto train_data = make_clogit_data(train, support);
                McmcSettings s2 = mcmc;
                s2.seed = mix_seed(cfg.seed, 0x61756366ULL);
                s2.threads = threads;
                const auto train_fit = fit_bayes(train_data, s2);
                std::map<std::string, double> beta;
                for (const auto& co : train_fit.coefficients) beta[co.name] = co.mean;

                std::vector<double> scores;
                std::vector<int> labels;
                std::vector<std::vector<double>> stratum_scores;
                for (const auto& s : test) {
                    std::vector<const FeatureVector*> controls;
                    for (const auto& c : s.controls) controls.push_back(&c.features);
                    std::vector<double> group;
                    group.push_back(score_event(beta, s.crash.features, controls));
                    scores.push_back(group.back());
                    labels.push_back(1);
                    for (const auto& c : s.controls) {
                        group.push_back(score_event(beta, c.features, controls));
                        scores.push_back(group.back());
                        labels.push_back(0);
                    }
                    stratum_scores.push_back(std::move(group));
                }
                row.heldout_auc = roc_auc(scores, labels).auc;
                row.null_auc_sd = permutation_null_sd(
                    stratum_scores, mix_seed(cfg.seed, 0x6e756c6cULL), 200);
            }
        }

        row.used = true;
        ++report.replications_used;
        report.replications.push_back(row);
    }

    for (const auto& name : support) {
        const auto it = per_var.find(name);
        RecoveryCoefficient rc;
        rc.name = name;
        rc.true_beta = base_config.true_beta.at(name);
        if (it != per_var.end() && !it->second.estimates.empty()) {
            const auto& agg = it->second;
            const auto n = static_cast<double>(agg.estimates.size());
            double sum = 0.0, sq = 0.0, cov = 0.0, sign_ok = 0.0, se = 0.0;
            for (std::size_t r = 0; r < agg.estimates.size(); ++r) {
                const double est = agg.estimates[r];
                sum += est;
                sq += (est - rc.true_beta) * (est - rc.true_beta);
                cov += agg.covered[r] ? 1.0 : 0.0;
                if ((est > 0) == (rc.true_beta > 0) && est != 0) sign_ok += 1.0;
                se += agg.std_effects[r];
            }
            rc.mean_estimate = sum / n;
            rc.bias = rc.mean_estimate - rc.true_beta;
            rc.rmse = std::sqrt(sq / n);
            rc.coverage95 = cov / n;
            rc.sign_agreement = sign_ok / n;
            rc.mean_abs_std_effect = se / n;
        }
        report.coefficients.push_back(rc);
    }
    return report;
}

} // namespace ixrisk
