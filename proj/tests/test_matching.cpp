#include "matching.hpp"

#include "errors.hpp"
#include "rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <memory>
#include <set>

using namespace ixrisk;

TEST_CASE("classify_location distance rule") {
    CHECK(classify_location(true, 0.0).value() == LocationClass::within);
    CHECK(classify_location(false, -100.0).value() == LocationClass::entrance);
    CHECK(classify_location(false, 100.0).value() == LocationClass::exit);
    CHECK(classify_location(false, -250.0).value() == LocationClass::entrance);
    CHECK_FALSE(classify_location(false, -300.0).has_value());
    CHECK_FALSE(classify_location(false, 251.0).has_value());
}

namespace {

IntersectionConfig config_with_majors() {
    IntersectionConfig cfg;
    cfg.id = "X01";
    cfg.approaches[0] = {Bearing::NB, true, 2, 1, 1000.0};
    cfg.approaches[1] = {Bearing::SB, true, 2, 1, 1000.0};
    cfg.approaches[2] = {Bearing::EB, false, 2, 1, 1000.0};
    cfg.approaches[3] = {Bearing::WB, false, 2, 1, 1000.0};
    return cfg;
}

CrashRecord crash(const std::string& id, Timestamp t,
                  LocationClass cls = LocationClass::within, Bearing b = Bearing::NB,
                  bool single = false, bool impaired = false) {
    CrashRecord c;
    c.id = id;
    c.intersection = "X01";
    c.occurred_at = t;
    c.at_fault_bearing = b;
    c.location_class = cls;
    c.single_vehicle = single;
    c.impaired = impaired;
    return c;
}

} // namespace

TEST_CASE("filter_crashes drops the documented categories") {
    const Timestamp t = make_timestamp(2017, 6, 1, 12, 0, 0);
    std::map<std::string, IntersectionConfig> configs = {{"X01", config_with_majors()}};
    std::vector<CrashRecord> records = {
        crash("keep_within", t),
        crash("keep_entrance", t + 600, LocationClass::entrance, Bearing::SB),
        crash("drop_single", t + 1200, LocationClass::within, Bearing::NB, true),
        crash("drop_impaired", t + 1800, LocationClass::within, Bearing::NB, false, true),
        crash("drop_exit", t + 2400, LocationClass::exit),
        crash("drop_minor_entrance", t + 3000, LocationClass::entrance, Bearing::EB),
    };
    records.push_back(crash("drop_unknown", t + 3600));
    records.back().intersection = "X99";

    std::vector<DropRecord> drops;
    const auto eligible = filter_crashes(records, configs, &drops);
    REQUIRE(eligible.size() == 2);
    CHECK(eligible[0].id == "keep_within");
    CHECK(eligible[1].id == "keep_entrance");
    std::map<std::string, std::string> reason;
    for (const auto& d : drops) reason[d.crash_id] = d.reason;
    CHECK(reason["drop_single"] == "single_vehicle");
    CHECK(reason["drop_impaired"] == "impaired");
    CHECK(reason["drop_exit"] == "exit_location");
    CHECK(reason["drop_minor_entrance"] == "entrance_on_minor_approach");
    CHECK(reason["drop_unknown"] == "unknown_intersection");
}

TEST_CASE("candidate_controls: same weekday/clock instants minus exclusions") {
    // Tuesday 2017-03-07 18:31 inside a 10-week period.
    const StudyPeriod period{make_timestamp(2017, 3, 1), make_timestamp(2017, 5, 10)};
    const Timestamp t = make_timestamp(2017, 3, 7, 18, 31, 0);
    MatchingSettings settings;

    const auto candidates = candidate_controls(t, period, {{t}}, settings);
    // 10 Tuesdays in [03-01, 05-10): 03-07 ... 05-09, minus the crash itself.
    CHECK(candidates.size() == 9);
    for (const Timestamp c : candidates) {
        CHECK(weekday(c) == weekday(t));
        CHECK(clock_of_day(c) == clock_of_day(t));
        CHECK(date_of(c) != date_of(t));
        CHECK(c - 1200 >= period.start);
        CHECK(c < period.end);
    }

    // A crash at 17:00 on one candidate Tuesday knocks that instant out.
    const Timestamp other_crash = make_timestamp(2017, 3, 14, 17, 0, 0);
    const auto fewer = candidate_controls(t, period, {{t, other_crash}}, settings);
    CHECK(fewer.size() == 8);
    for (const Timestamp c : fewer) CHECK(date_of(c) != date_of(other_crash));

    // Exactly 3 h away is still excluded (closed window).
    const Timestamp boundary = make_timestamp(2017, 3, 14, 15, 31, 0);
    const auto boundary_case = candidate_controls(t, period, {{t, boundary}}, settings);
    CHECK(boundary_case.size() == 8);
}

TEST_CASE("candidate_controls: lookback cannot precede the study start") {
    // Period starts Tuesday 00:05; a 00:10 crash clock leaves only later weeks.
    const Timestamp start = make_timestamp(2017, 3, 7, 0, 5, 0);
    const StudyPeriod period{start, start + 4 * k_seconds_per_week};
    const Timestamp t = start + k_seconds_per_week + 300; // Tue 00:10 week 2
    MatchingSettings settings;
    const auto candidates = candidate_controls(t, period, {{t}}, settings);
    for (const Timestamp c : candidates) CHECK(c - 1200 >= period.start);
    // Week 1's Tuesday 00:10 fails the lookback, weeks 3..4 qualify.
    CHECK(candidates.size() == 2);
}

TEST_CASE("sample_controls: exhaustive, deterministic, uniform") {
    std::vector<Timestamp> candidates;
    for (int i = 0; i < 10; ++i) candidates.push_back(1000 + i);

    // |candidates| == m selects everything regardless of seed.
    auto all = sample_controls({candidates.begin(), candidates.begin() + 4}, 4, 7);
    std::sort(all.begin(), all.end());
    CHECK(all == std::vector<Timestamp>{1000, 1001, 1002, 1003});

    // Same seed, same selection.
    const auto a = sample_controls(candidates, 4, 42);
    const auto b = sample_controls(candidates, 4, 42);
    CHECK(a == b);

    CHECK_THROWS_AS(sample_controls({candidates.begin(), candidates.begin() + 3}, 4, 1),
                    Error);

    // Uniformity over reseeded draws: each candidate near 40%.
    std::map<Timestamp, int> hits;
    const int draws = 1000;
    for (int s = 0; s < draws; ++s) {
        for (const Timestamp t : sample_controls(candidates, 4, 90000 + s)) ++hits[t];
    }
    for (const auto& [t, n] : hits) {
        const double freq = static_cast<double>(n) / draws;
        CHECK(freq > 0.35);
        CHECK(freq < 0.45);
    }
}

// ---- end-to-end build_dataset on a small in-memory world ----

namespace {

class FixtureProvider : public StreamProvider {
public:
    explicit FixtureProvider(bool speed_gap = false) {
        const auto cfg = config_with_majors();
        const Timestamp start = make_timestamp(2017, 3, 1);
        const Timestamp end = start + 10 * k_seconds_per_week;
        std::vector<VolumeRecord> volumes;
        for (Timestamp w = start; w < end; w += 900) {
            for (const auto& ap : cfg.approaches) {
                for (int lane = 1; lane <= 2; ++lane) {
                    volumes.push_back({cfg.id, ap.bearing, lane, Movement::through, w,
                                       60 + 10 * lane});
                }
                volumes.push_back({cfg.id, ap.bearing, 1, Movement::left, w, 20});
            }
        }
        std::vector<PhaseEvent> phases;
        for (Timestamp t = start; t < end; t += 120) {
            for (const auto& ap : cfg.approaches) {
                phases.push_back({cfg.id, ap.bearing, Movement::through, t, t + 45, 5, 60});
                phases.push_back({cfg.id, ap.bearing, Movement::left, t + 60, t + 75, 2, 90});
            }
        }
        std::vector<SpeedObservation> speeds;
        for (Timestamp t = start; t < end; t += 60) {
            // Optionally leave a gap so controls there lose their features:
            // Tuesday of week 4, 18:00-19:00.
            if (speed_gap) {
                const Timestamp gap_start = make_timestamp(2017, 3, 28, 18, 0, 0);
                if (t >= gap_start && t < gap_start + 3600) continue;
            }
            for (Bearing b : {Bearing::NB, Bearing::SB}) {
                speeds.push_back({cfg.id, b, t, 40.0});
            }
        }
        std::vector<WeatherRecord> weather = {{start, 0, 10.0, 0.0}};
        index_ = std::make_unique<StreamIndex>(cfg, std::move(volumes), std::move(phases),
                                               std::move(speeds), std::move(weather));
    }

    std::vector<std::string> intersections() override { return {"X01"}; }
    const StreamIndex& streams(const std::string&) override { return *index_; }

private:
    std::unique_ptr<StreamIndex> index_;
};

} // namespace

TEST_CASE("build_dataset: complete strata, factor integrity, determinism") {
    FixtureProvider provider;
    const StudyPeriod period{make_timestamp(2017, 3, 1), make_timestamp(2017, 5, 10)};
    const Timestamp t1 = make_timestamp(2017, 3, 7, 18, 31, 0);
    const Timestamp t2 = make_timestamp(2017, 3, 9, 7, 14, 0);
    const std::vector<CrashRecord> eligible = {
        crash("c01", t1),
        crash("c02", t2, LocationClass::entrance, Bearing::SB),
    };
    MatchingSettings settings;
    settings.rng_seed = 11;

    const auto result = build_dataset(eligible, eligible, provider, period, settings);
    REQUIRE(result.within.size() == 1);
    REQUIRE(result.entrance.size() == 1);
    CHECK(result.drops.empty());

    for (const auto* strata : {&result.within, &result.entrance}) {
        for (const auto& s : *strata) {
            CHECK(s.controls.size() == 4);
            const auto& ck = s.crash.key;
            std::set<std::string> names;
            for (const auto& [k, v] : s.crash.features) names.insert(k);
            for (const auto& ctl : s.controls) {
                CHECK(ctl.key.intersection == ck.intersection);
                CHECK(ctl.key.location_class == ck.location_class);
                CHECK(weekday(ctl.key.instant) == weekday(ck.instant));
                CHECK(clock_of_day(ctl.key.instant) == clock_of_day(ck.instant));
                CHECK(date_of(ctl.key.instant) != date_of(ck.instant));
                std::set<std::string> ctl_names;
                for (const auto& [k, v] : ctl.features) ctl_names.insert(k);
                CHECK(ctl_names == names); // identical variable sets
            }
        }
    }

    const auto audit = audit_dataset(result.within, eligible, settings);
    CHECK(audit.clean());

    // Purely a function of (inputs, seed): a rerun reproduces instants.
    const auto again = build_dataset(eligible, eligible, provider, period, settings);
    REQUIRE(again.within.size() == 1);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(again.within[0].controls[i].key.instant ==
              result.within[0].controls[i].key.instant);
    }

    // A different seed moves the sample.
    MatchingSettings other = settings;
    other.rng_seed = 12;
    const auto moved = build_dataset(eligible, eligible, provider, period, other);
    bool any_differs = false;
    for (std::size_t i = 0; i < 4; ++i) {
        any_differs = any_differs || moved.within[0].controls[i].key.instant !=
                                         result.within[0].controls[i].key.instant;
    }
    CHECK(any_differs);
}

TEST_CASE("build_dataset: missing features re-sample controls, keep 4:1") {
    FixtureProvider provider(true); // speed gap on Tue 2017-03-28 18:00-19:00
    const StudyPeriod period{make_timestamp(2017, 3, 1), make_timestamp(2017, 5, 10)};
    const Timestamp t1 = make_timestamp(2017, 3, 7, 18, 31, 0);
    const std::vector<CrashRecord> eligible = {crash("c01", t1)};
    MatchingSettings settings;
    settings.rng_seed = 3;

    const auto result = build_dataset(eligible, eligible, provider, period, settings);
    REQUIRE(result.within.size() == 1);
    CHECK(result.within[0].controls.size() == 4); // ratio preserved by re-sampling
    for (const auto& ctl : result.within[0].controls) {
        CHECK(date_of(ctl.key.instant) != make_timestamp(2017, 3, 28));
    }
}

TEST_CASE("build_dataset: crash losing features is dropped and logged") {
    FixtureProvider provider(true);
    const StudyPeriod period{make_timestamp(2017, 3, 1), make_timestamp(2017, 5, 10)};
    // The crash itself sits inside the speed gap.
    const Timestamp bad = make_timestamp(2017, 3, 28, 18, 31, 0);
    const std::vector<CrashRecord> eligible = {crash("c_bad", bad)};
    MatchingSettings settings;
    const auto result = build_dataset(eligible, eligible, provider, period, settings);
    CHECK(result.within.empty());
    REQUIRE(result.drops.size() == 1);
    CHECK(result.drops[0].crash_id == "c_bad");
    CHECK(result.drops[0].reason.find("crash_features:missing_speed") == 0);
}

TEST_CASE("build_dataset: too few candidates drops the crash") {
    FixtureProvider provider;
    // A 3-week period gives at most 2 same-weekday alternatives.
    const StudyPeriod period{make_timestamp(2017, 3, 1), make_timestamp(2017, 3, 22)};
    const Timestamp t1 = make_timestamp(2017, 3, 7, 18, 31, 0);
    const std::vector<CrashRecord> eligible = {crash("c01", t1)};
    MatchingSettings settings;
    const auto result = build_dataset(eligible, eligible, provider, period, settings);
    CHECK(result.within.empty());
    REQUIRE(result.drops.size() == 1);
    CHECK(result.drops[0].reason.find("insufficient_candidates") == 0);
}

TEST_CASE("audit_dataset flags violations") {
    FixtureProvider provider;
    const StudyPeriod period{make_timestamp(2017, 3, 1), make_timestamp(2017, 5, 10)};
    const Timestamp t1 = make_timestamp(2017, 3, 7, 18, 31, 0);
    const std::vector<CrashRecord> eligible = {crash("c01", t1)};
    MatchingSettings settings;
    auto result = build_dataset(eligible, eligible, provider, period, settings);
    REQUIRE(result.within.size() == 1);

    auto broken = result.within;
    broken[0].controls[0].key.instant += 60; // break the clock-time factor
    CHECK(audit_dataset(broken, eligible, settings).factor_violations == 1);

    auto short_stratum = result.within;
    short_stratum[0].controls.pop_back();
    CHECK(audit_dataset(short_stratum, eligible, settings).ratio_violations == 1);

    // A crash log entry 1 h from a control instant violates the exclusion.
    auto log = eligible;
    log.push_back(crash("late", result.within[0].controls[0].key.instant + 3600));
    CHECK(audit_dataset(result.within, log, settings).exclusion_violations >= 1);
}
