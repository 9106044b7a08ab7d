#include "csv.hpp"
#include "errors.hpp"
#include "fsutil.hpp"
#include "manifest.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "rng.hpp"
#include "screening.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <set>

namespace fs = std::filesystem;

namespace ixrisk {

namespace {

double parse_double(const std::string& s, const std::string& what) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw_invalid("bad number '" + s + "' in " + what);
    return v;
}

std::int64_t parse_int(const std::string& s, const std::string& what) {
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0') throw_invalid("bad integer '" + s + "' in " + what);
    return v;
}

bool parse_bool(const std::string& s, const std::string& what) {
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    throw_invalid("bad boolean '" + s + "' in " + what);
}

// ---- raw stream CSV schemas (column names match the record fields) ----

std::string intersections_csv(const std::vector<IntersectionConfig>& configs) {
    CsvBuilder csv({"intersection", "bearing", "is_major", "through_lanes", "left_turn_lanes",
                    "upstream_segment_length"});
    for (const auto& cfg : configs) {
        for (const auto& ap : cfg.approaches) {
            csv.cell(cfg.id)
                .cell(std::string(to_string(ap.bearing)))
                .cell(static_cast<std::int64_t>(ap.is_major ? 1 : 0))
                .cell(static_cast<std::int64_t>(ap.through_lanes))
                .cell(static_cast<std::int64_t>(ap.left_turn_lanes))
                .cell(ap.upstream_segment_length_ft);
            csv.end_row();
        }
    }
    return csv.str();
}

std::map<std::string, IntersectionConfig> load_intersections(const std::string& path) {
    const CsvTable t = read_csv(path);
    const int c_id = t.require_column("intersection");
    const int c_bearing = t.require_column("bearing");
    const int c_major = t.require_column("is_major");
    const int c_th = t.require_column("through_lanes");
    const int c_lt = t.require_column("left_turn_lanes");
    const int c_len = t.require_column("upstream_segment_length");

    std::map<std::string, std::vector<ApproachConfig>> grouped;
    std::vector<std::string> order;
    for (const auto& row : t.rows) {
        ApproachConfig ap;
        ap.bearing = bearing_from_string(row[static_cast<std::size_t>(c_bearing)]);
        ap.is_major = parse_bool(row[static_cast<std::size_t>(c_major)], path);
        ap.through_lanes =
            static_cast<int>(parse_int(row[static_cast<std::size_t>(c_th)], path));
        ap.left_turn_lanes =
            static_cast<int>(parse_int(row[static_cast<std::size_t>(c_lt)], path));
        ap.upstream_segment_length_ft = parse_double(row[static_cast<std::size_t>(c_len)], path);
        const auto& id = row[static_cast<std::size_t>(c_id)];
        if (!grouped.count(id)) order.push_back(id);
        grouped[id].push_back(ap);
    }
    std::map<std::string, IntersectionConfig> out;
    for (const auto& id : order) {
        const auto& list = grouped[id];
        if (list.size() != 4) throw_invalid("intersection '" + id + "' needs 4 approaches");
        IntersectionConfig cfg;
        cfg.id = id;
        std::copy(list.begin(), list.end(), cfg.approaches.begin());
        cfg.validate();
        out[id] = cfg;
    }
    return out;
}

std::string volumes_csv(const std::vector<VolumeRecord>& records) {
    CsvBuilder csv({"intersection", "bearing", "lane_index", "movement", "window_start",
                    "count"});
    for (const auto& r : records) {
        csv.cell(r.intersection)
            .cell(std::string(to_string(r.bearing)))
            .cell(static_cast<std::int64_t>(r.lane_index))
            .cell(std::string(to_string(r.movement)))
            .cell(format_timestamp(r.window_start))
            .cell(r.count);
        csv.end_row();
    }
    return csv.str();
}

std::string phases_csv(const std::vector<PhaseEvent>& records) {
    CsvBuilder csv({"intersection", "bearing", "movement", "green_start", "green_end",
                    "queue_at_green", "max_wait_at_green"});
    for (const auto& r : records) {
        csv.cell(r.intersection)
            .cell(std::string(to_string(r.bearing)))
            .cell(std::string(to_string(r.movement)))
            .cell(format_timestamp(r.green_start))
            .cell(format_timestamp(r.green_end))
            .cell(r.queue_at_green)
            .cell(r.max_wait_at_green);
        csv.end_row();
    }
    return csv.str();
}

std::string speeds_csv(const std::vector<SpeedObservation>& records) {
    CsvBuilder csv({"intersection", "bearing", "timestamp", "space_mean_speed"});
    for (const auto& r : records) {
        csv.cell(r.intersection)
            .cell(std::string(to_string(r.bearing)))
            .cell(format_timestamp(r.timestamp))
            .cell(r.space_mean_speed);
        csv.end_row();
    }
    return csv.str();
}

std::string weather_csv(const std::vector<WeatherRecord>& records) {
    CsvBuilder csv({"timestamp", "weather_type", "visibility", "hourly_precip"});
    for (const auto& r : records) {
        csv.cell(format_timestamp(r.timestamp))
            .cell(static_cast<std::int64_t>(r.weather_type))
            .cell(r.visibility)
            .cell(r.hourly_precip);
        csv.end_row();
    }
    return csv.str();
}

std::string crashes_csv(const std::vector<CrashRecord>& records) {
    CsvBuilder csv({"id", "intersection", "occurred_at", "at_fault_bearing", "location_class",
                    "single_vehicle", "impaired"});
    for (const auto& r : records) {
        csv.cell(r.id)
            .cell(r.intersection)
            .cell(format_timestamp(r.occurred_at))
            .cell(std::string(to_string(r.at_fault_bearing)))
            .cell(std::string(to_string(r.location_class)))
            .cell(static_cast<std::int64_t>(r.single_vehicle ? 1 : 0))
            .cell(static_cast<std::int64_t>(r.impaired ? 1 : 0));
        csv.end_row();
    }
    return csv.str();
}

std::vector<CrashRecord> load_crashes(const std::string& path) {
    const CsvTable t = read_csv(path);
    const int c_id = t.require_column("id");
    const int c_inter = t.require_column("intersection");
    const int c_at = t.require_column("occurred_at");
    const int c_bearing = t.require_column("at_fault_bearing");
    const int c_class = t.require_column("location_class");
    const int c_sv = t.require_column("single_vehicle");
    const int c_imp = t.require_column("impaired");
    std::vector<CrashRecord> out;
    for (const auto& row : t.rows) {
        CrashRecord c;
        c.id = row[static_cast<std::size_t>(c_id)];
        c.intersection = row[static_cast<std::size_t>(c_inter)];
        c.occurred_at = parse_timestamp(row[static_cast<std::size_t>(c_at)]);
        c.at_fault_bearing = bearing_from_string(row[static_cast<std::size_t>(c_bearing)]);
        c.location_class =
            location_class_from_string(row[static_cast<std::size_t>(c_class)]);
        c.single_vehicle = parse_bool(row[static_cast<std::size_t>(c_sv)], path);
        c.impaired = parse_bool(row[static_cast<std::size_t>(c_imp)], path);
        out.push_back(std::move(c));
    }
    return out;
}

std::string drops_csv(const std::vector<DropRecord>& drops) {
    CsvBuilder csv({"crash_id", "reason"});
    for (const auto& d : drops) {
        csv.cell(d.crash_id).cell(d.reason);
        csv.end_row();
    }
    return csv.str();
}

// In-memory provider over stream CSVs loaded from a directory.
class MapStreamProvider : public StreamProvider {
public:
    MapStreamProvider(const std::string& dir,
                      const std::map<std::string, IntersectionConfig>& configs,
                      StudyPeriod* period_out) {
        const CsvTable volumes = read_csv(dir + "/volumes.csv");
        const CsvTable phases = read_csv(dir + "/phases.csv");
        const CsvTable speeds = read_csv(dir + "/speeds.csv");
        const CsvTable weather = read_csv(dir + "/weather.csv");

        std::map<std::string, std::vector<VolumeRecord>> vol_by;
        {
            const int c_i = volumes.require_column("intersection");
            const int c_b = volumes.require_column("bearing");
            const int c_l = volumes.require_column("lane_index");
            const int c_m = volumes.require_column("movement");
            const int c_w = volumes.require_column("window_start");
            const int c_c = volumes.require_column("count");
            for (const auto& row : volumes.rows) {
                VolumeRecord r;
                r.intersection = row[static_cast<std::size_t>(c_i)];
                r.bearing = bearing_from_string(row[static_cast<std::size_t>(c_b)]);
                r.lane_index =
                    static_cast<int>(parse_int(row[static_cast<std::size_t>(c_l)], "volumes"));
                r.movement = movement_from_string(row[static_cast<std::size_t>(c_m)]);
                r.window_start = parse_timestamp(row[static_cast<std::size_t>(c_w)]);
                r.count = parse_int(row[static_cast<std::size_t>(c_c)], "volumes");
                if (r.window_start % 900 != 0) {
                    throw_invalid("volume window_start not aligned to 15 minutes");
                }
                period_.start = std::min(period_.start, r.window_start);
                period_.end = std::max(period_.end, r.window_start + 900);
                vol_by[r.intersection].push_back(std::move(r));
            }
        }
        std::map<std::string, std::vector<PhaseEvent>> phase_by;
        {
            const int c_i = phases.require_column("intersection");
            const int c_b = phases.require_column("bearing");
            const int c_m = phases.require_column("movement");
            const int c_s = phases.require_column("green_start");
            const int c_e = phases.require_column("green_end");
            const int c_q = phases.require_column("queue_at_green");
            const int c_w = phases.require_column("max_wait_at_green");
            for (const auto& row : phases.rows) {
                PhaseEvent r;
                r.intersection = row[static_cast<std::size_t>(c_i)];
                r.bearing = bearing_from_string(row[static_cast<std::size_t>(c_b)]);
                r.movement = movement_from_string(row[static_cast<std::size_t>(c_m)]);
                r.green_start = parse_timestamp(row[static_cast<std::size_t>(c_s)]);
                r.green_end = parse_timestamp(row[static_cast<std::size_t>(c_e)]);
                r.queue_at_green = parse_double(row[static_cast<std::size_t>(c_q)], "phases");
                r.max_wait_at_green =
                    parse_double(row[static_cast<std::size_t>(c_w)], "phases");
                phase_by[r.intersection].push_back(std::move(r));
            }
        }
        std::map<std::string, std::vector<SpeedObservation>> speed_by;
        {
            const int c_i = speeds.require_column("intersection");
            const int c_b = speeds.require_column("bearing");
            const int c_t = speeds.require_column("timestamp");
            const int c_v = speeds.require_column("space_mean_speed");
            for (const auto& row : speeds.rows) {
                SpeedObservation r;
                r.intersection = row[static_cast<std::size_t>(c_i)];
                r.bearing = bearing_from_string(row[static_cast<std::size_t>(c_b)]);
                r.timestamp = parse_timestamp(row[static_cast<std::size_t>(c_t)]);
                r.space_mean_speed =
                    parse_double(row[static_cast<std::size_t>(c_v)], "speeds");
                speed_by[r.intersection].push_back(std::move(r));
            }
        }
        std::vector<WeatherRecord> weather_records;
        {
            const int c_t = weather.require_column("timestamp");
            const int c_w = weather.require_column("weather_type");
            const int c_v = weather.require_column("visibility");
            const int c_p = weather.require_column("hourly_precip");
            for (const auto& row : weather.rows) {
                WeatherRecord r;
                r.timestamp = parse_timestamp(row[static_cast<std::size_t>(c_t)]);
                r.weather_type = static_cast<int>(
                    parse_int(row[static_cast<std::size_t>(c_w)], "weather"));
                r.visibility = parse_double(row[static_cast<std::size_t>(c_v)], "weather");
                r.hourly_precip = parse_double(row[static_cast<std::size_t>(c_p)], "weather");
                weather_records.push_back(std::move(r));
            }
        }

        for (const auto& [id, cfg] : configs) {
            ids_.push_back(id);
            indices_.emplace(id, StreamIndex(cfg, std::move(vol_by[id]),
                                             std::move(phase_by[id]), std::move(speed_by[id]),
                                             weather_records));
        }
        if (period_out) *period_out = period_;
    }

    std::vector<std::string> intersections() override { return ids_; }

    const StreamIndex& streams(const std::string& intersection) override {
        const auto it = indices_.find(intersection);
        if (it == indices_.end()) throw_invalid("no streams for '" + intersection + "'");
        return it->second;
    }

private:
    std::vector<std::string> ids_;
    std::map<std::string, StreamIndex> indices_;
    StudyPeriod period_{INT64_MAX, INT64_MIN};
};

std::string screen_report_csv(const ScreeningReport& report) {
    CsvBuilder csv({"var_a", "var_b", "pearson", "mic", "flag"});
    for (const auto& p : report.pairs) {
        if (!p.flagged()) continue;
        csv.cell(p.var_a).cell(p.var_b);
        if (std::isfinite(p.pearson_r)) csv.cell(p.pearson_r);
        else csv.cell(std::string());
        csv.cell(p.mic);
        csv.cell(std::string(p.flagged_linear && p.flagged_nonlinear ? "both"
                             : p.flagged_linear                      ? "pearson"
                                                                     : "mic"));
        csv.end_row();
    }
    return csv.str();
}

} // namespace

namespace stages {

void simulate(const std::string& scenario_json, const std::string& out_dir, int threads) {
    const ScenarioConfig cfg = scenario_from_json(read_file(scenario_json));
    const Scenario scenario{cfg};

    StageGuard guard("simulate", out_dir, true);
    guard.arg("scenario", scenario_json);
    guard.arg("threads", std::to_string(threads));
    guard.input(scenario_json);

    const auto weather = scenario.generate_weather();
    const auto within_mean = scenario.scenario_mean(LocationClass::within);
    const auto entrance_mean = scenario.scenario_mean(LocationClass::entrance);

    struct PerIntersection {
        IntersectionConfig config;
        std::string volumes, phases, speeds;
        std::vector<CrashRecord> crashes;
    };
    std::vector<PerIntersection> parts(static_cast<std::size_t>(scenario.n_intersections()));
    parallel_for(parts.size(), threads, [&](std::size_t i) {
        auto bundle = scenario.generate_streams(static_cast<int>(i));
        PerIntersection part;
        part.config = bundle.config;
        part.volumes = volumes_csv(bundle.volumes);
        part.phases = phases_csv(bundle.phases);
        part.speeds = speeds_csv(bundle.speeds);
        const StreamIndex index(bundle.config, std::move(bundle.volumes),
                                std::move(bundle.phases), std::move(bundle.speeds), weather);
        part.crashes =
            scenario.inject_crashes(static_cast<int>(i), index, within_mean, entrance_mean);
        parts[i] = std::move(part);
    });

    auto strip_header = [](const std::string& csv) {
        const auto pos = csv.find('\n');
        return pos == std::string::npos ? std::string() : csv.substr(pos + 1);
    };
    std::vector<IntersectionConfig> configs;
    std::string volumes, phases, speeds;
    std::vector<CrashRecord> crashes;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        configs.push_back(parts[i].config);
        volumes += i == 0 ? parts[i].volumes : strip_header(parts[i].volumes);
        phases += i == 0 ? parts[i].phases : strip_header(parts[i].phases);
        speeds += i == 0 ? parts[i].speeds : strip_header(parts[i].speeds);
        crashes.insert(crashes.end(), parts[i].crashes.begin(), parts[i].crashes.end());
    }

    const fs::path dir(out_dir);
    guard.write_output(dir / "intersections.csv", intersections_csv(configs));
    guard.write_output(dir / "volumes.csv", volumes);
    guard.write_output(dir / "phases.csv", phases);
    guard.write_output(dir / "speeds.csv", speeds);
    guard.write_output(dir / "weather.csv", weather_csv(weather));
    guard.write_output(dir / "crashes.csv", crashes_csv(crashes));
    guard.commit();
}

void prepare(const std::string& streams_dir, const std::string& out_dir) {
    StageGuard guard("prepare", out_dir, true);
    guard.arg("streams", streams_dir);
    const std::string crashes_path = streams_dir + "/crashes.csv";
    const std::string config_path = streams_dir + "/intersections.csv";
    guard.input(crashes_path);
    guard.input(config_path);

    const auto configs = load_intersections(config_path);
    const auto crashes = load_crashes(crashes_path);
    std::vector<DropRecord> drops;
    const auto eligible = filter_crashes(crashes, configs, &drops);

    const fs::path dir(out_dir);
    guard.write_output(dir / "eligible.csv", crashes_csv(eligible));
    guard.write_output(dir / "prepare_drops.csv", drops_csv(drops));
    guard.commit();
}

void match(const std::string& streams_dir, const std::string& crashes_csv_path, int m,
           std::uint64_t seed, const std::string& out_dir, int threads) {
    (void)threads; // stream parsing dominates; matching itself is sequential
    StageGuard guard("match", out_dir, true);
    guard.arg("streams", streams_dir);
    guard.arg("crashes", crashes_csv_path);
    guard.arg("m", std::to_string(m));
    guard.arg("seed", std::to_string(seed));
    for (const char* f :
         {"intersections.csv", "volumes.csv", "phases.csv", "speeds.csv", "weather.csv"}) {
        guard.input(streams_dir + "/" + f);
    }
    guard.input(crashes_csv_path);

    const auto configs = load_intersections(streams_dir + "/intersections.csv");
    const auto eligible = load_crashes(crashes_csv_path);

    // The exclusion rule screens against every crash, not only eligible
    // ones; use the full simulated log when present.
    std::vector<CrashRecord> full_log = eligible;
    if (fs::exists(streams_dir + "/crashes.csv")) {
        full_log = load_crashes(streams_dir + "/crashes.csv");
        guard.input(streams_dir + "/crashes.csv");
    }

    MatchingSettings settings;
    settings.m = m;
    settings.rng_seed = seed;

    StudyPeriod period{};
    MapStreamProvider provider(streams_dir, configs, &period);
    const auto result = build_dataset(eligible, full_log, provider, period, settings);

    const fs::path dir(out_dir);
    guard.write_output(dir / "within.csv", wide_csv(result.within, LocationClass::within));
    guard.write_output(dir / "entrance.csv",
                       wide_csv(result.entrance, LocationClass::entrance));
    guard.write_output(dir / "match_drops.csv", drops_csv(result.drops));
    guard.commit();
}

void screen(const std::string& data_csv, double r_threshold, double mic_threshold, int slice,
            bool cross_slice, const std::string& out_csv, int threads) {
    StageGuard guard("screen", out_csv, false);
    guard.arg("data", data_csv);
    guard.arg("r", format_double(r_threshold));
    guard.arg("mic", format_double(mic_threshold));
    guard.arg("slice", std::to_string(slice));
    guard.arg("cross_slice", cross_slice ? "1" : "0");
    guard.input(data_csv);

    const WideTable table = load_wide_csv(data_csv);
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    for (std::size_t c = 0; c < table.variables.size(); ++c) {
        const auto [base, tag] = split_slice_suffix(table.variables[c]);
        if (slice > 0 && tag != 0 && tag != slice) continue;
        names.push_back(table.variables[c]);
        columns.push_back(table.columns[c]);
    }

    ScreenOptions opts;
    opts.r_threshold = r_threshold;
    opts.mic_threshold = mic_threshold;
    opts.cross_slice = cross_slice && slice == 0;
    opts.threads = threads;
    const auto report = ixrisk::screen(names, columns, opts);

    const fs::path out(out_csv);
    const fs::path stem = out.parent_path() / out.stem();
    guard.write_output(out, screen_report_csv(report));
    {
        CsvBuilder retained({"variable"});
        for (const auto& v : report.retained) {
            retained.cell(v);
            retained.end_row();
        }
        guard.write_output(fs::path(stem.string() + "_retained.csv"), retained.str());
    }
    {
        CsvBuilder dropped({"variable", "reason"});
        for (const auto& [v, reason] : report.dropped) {
            dropped.cell(v).cell(reason);
            dropped.end_row();
        }
        guard.write_output(fs::path(stem.string() + "_dropped.csv"), dropped.str());
    }
    guard.commit();
}

void fit(const std::string& data_csv, const FitOptions& options, const std::string& out_json) {
    StageGuard guard("fit", out_json, false);
    guard.arg("data", data_csv);
    guard.arg("slice", std::to_string(options.slice));
    guard.arg("chains", std::to_string(options.mcmc.chains));
    guard.arg("iterations", std::to_string(options.mcmc.iterations));
    guard.arg("burn_in", std::to_string(options.mcmc.burn_in));
    guard.arg("seed", std::to_string(options.mcmc.seed));
    guard.arg("standardize", options.standardize ? "1" : "0");
    guard.arg("backward", options.backward ? "1" : "0");
    guard.input(data_csv);

    const WideTable table = load_wide_csv(data_csv);
    const FittedModel model = fit_model(table, options);
    guard.write_output(out_json, model_to_json(model));
    guard.commit();
}

void score(const std::string& model_json, const std::string& paper_model,
           const std::string& data_csv, const std::string& out_csv) {
    StageGuard guard("score", out_csv, false);
    guard.arg("data", data_csv);
    guard.input(data_csv);

    FittedModel model;
    if (!model_json.empty() && !paper_model.empty()) {
        throw_invalid("pass either a model file or a reference model name, not both");
    }
    if (!model_json.empty()) {
        guard.arg("model", model_json);
        guard.input(model_json);
        model = model_from_json(read_file(model_json));
    } else if (!paper_model.empty()) {
        guard.arg("paper_model", paper_model);
        model = load_paper_model(paper_model);
    } else {
        throw_invalid("a model is required (--model or --paper-model)");
    }

    const WideTable table = load_wide_csv(data_csv);
    const auto scores = score_table(model, table);

    CsvBuilder csv({"event_id", "stratum_id", "odds_ratio", "adjusted", "label"});
    for (const auto& s : scores) {
        csv.cell(s.event_id)
            .cell(s.stratum_id)
            .cell(s.odds_ratio)
            .cell(s.adjusted)
            .cell(std::string(to_string(s.label)));
        csv.end_row();
    }
    guard.write_output(out_csv, csv.str());
    guard.commit();
}

double evaluate(const std::string& scores_csv, const std::string& out_csv) {
    StageGuard guard("evaluate", out_csv, false);
    guard.arg("scores", scores_csv);
    guard.input(scores_csv);

    const CsvTable t = read_csv(scores_csv);
    const int c_adj = t.require_column("adjusted");
    const int c_label = t.require_column("label");
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& row : t.rows) {
        scores.push_back(parse_double(row[static_cast<std::size_t>(c_adj)], scores_csv));
        labels.push_back(event_role_from_string(row[static_cast<std::size_t>(c_label)]) ==
                                 EventRole::crash
                             ? 1
                             : 0);
    }
    const RocResult roc = roc_auc(scores, labels);

    CsvBuilder csv({"threshold", "fpr", "tpr"});
    for (const auto& p : roc.points) {
        csv.cell(p.threshold).cell(p.fpr).cell(p.tpr);
        csv.end_row();
    }
    guard.arg("auc", format_double(roc.auc));
    guard.write_output(out_csv, csv.str());
    guard.commit();
    return roc.auc;
}

void report(const std::string& data_csv, const std::string& out_csv) {
    StageGuard guard("report", out_csv, false);
    guard.arg("data", data_csv);
    guard.input(data_csv);
    const WideTable table = load_wide_csv(data_csv);
    guard.write_output(out_csv, descriptive_stats_csv(table));
    guard.commit();
}

void recover(const std::string& scenario_json, int replications, std::uint64_t seed,
             const std::string& out_dir, int threads) {
    StageGuard guard("recover", out_dir, true);
    guard.arg("scenario", scenario_json);
    guard.arg("reps", std::to_string(replications));
    guard.arg("seed", std::to_string(seed));
    guard.arg("threads", std::to_string(threads));
    guard.input(scenario_json);

    ScenarioConfig cfg = scenario_from_json(read_file(scenario_json));
    cfg.seed = seed;
    McmcSettings mcmc;
    const RecoveryReport result = recovery_experiment(cfg, replications, mcmc, threads);

    const fs::path dir(out_dir);
    {
        CsvBuilder csv({"variable", "true_beta", "mean_estimate", "bias", "rmse", "coverage95",
                        "sign_agreement", "mean_abs_std_effect"});
        for (const auto& c : result.coefficients) {
            csv.cell(c.name)
                .cell(c.true_beta)
                .cell(c.mean_estimate)
                .cell(c.bias)
                .cell(c.rmse)
                .cell(c.coverage95)
                .cell(c.sign_agreement)
                .cell(c.mean_abs_std_effect);
            csv.end_row();
        }
        guard.write_output(dir / "recovery_coefficients.csv", csv.str());
    }
    {
        CsvBuilder csv({"replication", "seed", "crashes", "strata", "used", "heldout_auc",
                        "null_auc_sd", "max_r_hat"});
        for (const auto& r : result.replications) {
            csv.cell(static_cast<std::int64_t>(r.replication))
                .cell(std::to_string(r.seed))
                .cell(static_cast<std::int64_t>(r.crashes))
                .cell(static_cast<std::int64_t>(r.strata))
                .cell(static_cast<std::int64_t>(r.used ? 1 : 0))
                .cell(r.heldout_auc)
                .cell(r.null_auc_sd)
                .cell(r.max_r_hat);
            csv.end_row();
        }
        guard.write_output(dir / "recovery_replications.csv", csv.str());
    }
    guard.commit();
}

} // namespace stages

} // namespace ixrisk
