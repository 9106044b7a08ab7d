#include "features.hpp"

#include "errors.hpp"
#include "rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace ixrisk;

namespace {

OafrSettings settings(MeanMode mean, BoundaryMode boundary,
                      ZeroVolumePolicy zero = ZeroVolumePolicy::epsilon) {
    OafrSettings s;
    s.mean_mode = mean;
    s.boundary_mode = boundary;
    s.zero_volume_policy = zero;
    return s;
}

} // namespace

TEST_CASE("volume disaggregation: even thirds, conserving the 15-minute count") {
    CHECK(disaggregate_volume(90)[0] == doctest::Approx(30.0));
    CHECK(disaggregate_volume(0)[0] == 0.0);
    const auto thirds = disaggregate_volume(100);
    CHECK(thirds[0] == doctest::Approx(100.0 / 3.0));
    CHECK(std::abs(thirds[0] + thirds[1] + thirds[2] - 100.0) < 1e-9);
    CHECK_THROWS_AS(disaggregate_volume(-1), Error);
}

TEST_CASE("AFR hand cases") {
    const auto eq = settings(MeanMode::arithmetic, BoundaryMode::equal_split);
    {
        const double v[] = {50.0, 150.0};
        CHECK(compute_afr(v, 1, eq).value() == doctest::Approx(1.5));
        CHECK(compute_afr(v, 2, eq).value() == doctest::Approx(1.0 / 6.0));
    }
    {
        const double v[] = {100.0, 100.0, 100.0};
        CHECK(compute_afr(v, 2, eq).value() == doctest::Approx(1.0));
        const auto forced = settings(MeanMode::arithmetic, BoundaryMode::forced_destination);
        // Both neighbours of the middle lane are edge lanes whose only
        // change target is lane 2.
        CHECK(compute_afr(v, 2, forced).value() == doctest::Approx(2.0));
        CHECK(compute_afr(v, 1, forced).value() == doctest::Approx(0.5));
    }
}

TEST_CASE("AFR errors and zero-volume policies") {
    const double single[] = {42.0};
    CHECK_THROWS_AS(compute_afr(single, 1, settings(MeanMode::arithmetic,
                                                    BoundaryMode::equal_split)),
                    Error);
    const double v[] = {0.0, 60.0};
    const auto skip = settings(MeanMode::arithmetic, BoundaryMode::equal_split,
                               ZeroVolumePolicy::skip_lane);
    CHECK_FALSE(compute_afr(v, 1, skip).has_value());
    const auto eps = settings(MeanMode::arithmetic, BoundaryMode::equal_split);
    CHECK(compute_afr(v, 1, eps).value() == doctest::Approx(0.5 * 60.0 / 0.5));
    OafrSettings bad = eps;
    bad.epsilon = 0.0;
    CHECK_THROWS_AS(compute_afr(v, 1, bad), Error);
}

TEST_CASE("OAFR: geometric 2-lane equal-split degeneracy is exactly 0.5") {
    FastRng rng(20170301);
    const auto geo = settings(MeanMode::geometric, BoundaryMode::equal_split);
    for (int i = 0; i < 1000; ++i) {
        const double v[] = {rng.uniform(0.1, 400.0), rng.uniform(0.1, 400.0)};
        CHECK(compute_oafr(v, geo) == 0.5);
    }
}

TEST_CASE("OAFR hand cases and scale invariance") {
    const auto arith = settings(MeanMode::arithmetic, BoundaryMode::equal_split);
    {
        const double v[] = {100.0, 100.0};
        CHECK(compute_oafr(v, arith) == doctest::Approx(0.5));
    }
    {
        const double v[] = {50.0, 150.0};
        CHECK(compute_oafr(v, arith) == doctest::Approx((1.5 + 1.0 / 6.0) / 2.0));
    }
    FastRng rng(7);
    for (int rep = 0; rep < 200; ++rep) {
        const int lanes = 2 + static_cast<int>(rng.uniform_int(3));
        std::vector<double> v(static_cast<std::size_t>(lanes));
        for (auto& x : v) x = rng.uniform(0.5, 300.0);
        for (const auto mode : {MeanMode::arithmetic, MeanMode::geometric}) {
            const auto s = settings(mode, BoundaryMode::equal_split);
            const double base = compute_oafr(v, s);
            for (const double k : {0.1, 1.0, 10.0}) {
                std::vector<double> scaled = v;
                for (auto& x : scaled) x *= k;
                CHECK(std::abs(compute_oafr(scaled, s) - base) < 1e-12);
            }
        }
    }
}

TEST_CASE("OAFR: all lanes skipped is an error") {
    const double v[] = {0.0, 0.0};
    const auto skip = settings(MeanMode::arithmetic, BoundaryMode::equal_split,
                               ZeroVolumePolicy::skip_lane);
    CHECK_THROWS_AS(compute_oafr(v, skip), Error);
}

TEST_CASE("speed aggregation") {
    {
        const double v[] = {30.0, 30.0, 30.0};
        const auto agg = aggregate_speed(v).value();
        CHECK(agg.avg == doctest::Approx(30.0));
        CHECK(agg.std == doctest::Approx(0.0));
    }
    {
        const double v[] = {20.0, 40.0};
        const auto agg = aggregate_speed(v).value();
        CHECK(agg.avg == doctest::Approx(30.0));
        CHECK(agg.std == doctest::Approx(std::sqrt(200.0)));
    }
    {
        const double v[] = {25.0};
        const auto agg = aggregate_speed(v).value();
        CHECK(agg.avg == doctest::Approx(25.0));
        CHECK(agg.std == 0.0);
    }
    CHECK_FALSE(aggregate_speed({}).has_value());
}

TEST_CASE("phase aggregation hand cases") {
    {
        // One 60 s green fully inside the window.
        PhaseSlice p{60.0, 5.0, 80.0, 60.0, true};
        const auto agg = aggregate_phase(std::span<const PhaseSlice>(&p, 1));
        CHECK(agg.green_ratio == doctest::Approx(20.0));
        CHECK_FALSE(agg.sparse);
    }
    {
        PhaseSlice a{20.0, 5.0, 80.0, 20.0, true};
        PhaseSlice b{40.0, 15.0, 120.0, 40.0, true};
        const PhaseSlice arr[] = {a, b};
        const auto agg = aggregate_phase(arr);
        CHECK(agg.avg_green == doctest::Approx(30.0));
        CHECK(agg.std_green == doctest::Approx(std::sqrt(200.0)));
        CHECK(agg.avg_queue == doctest::Approx(10.0));
        CHECK(agg.avg_wait == doctest::Approx(100.0));
    }
    {
        // Green spanning the window boundary contributes only its overlap
        // and nothing to the duration statistics.
        PhaseSlice spill{90.0, 8.0, 100.0, 30.0, false};
        const auto agg = aggregate_phase(std::span<const PhaseSlice>(&spill, 1));
        CHECK(agg.green_ratio == doctest::Approx(10.0));
        CHECK(agg.avg_green == 0.0);
        CHECK_FALSE(agg.sparse);
    }
    {
        const auto agg = aggregate_phase({});
        CHECK(agg.green_ratio == 0.0);
        CHECK(agg.sparse);
    }
}

// ---- stream-index + extraction fixtures ----

namespace {

IntersectionConfig fixture_config() {
    IntersectionConfig cfg;
    cfg.id = "X01";
    cfg.approaches[0] = {Bearing::NB, true, 2, 1, 1200.0};
    cfg.approaches[1] = {Bearing::SB, true, 2, 1, 1100.0};
    cfg.approaches[2] = {Bearing::EB, false, 2, 1, 900.0};
    cfg.approaches[3] = {Bearing::WB, false, 2, 1, 950.0};
    return cfg;
}

StreamIndex fixture_streams(bool with_speed = true) {
    const auto cfg = fixture_config();
    const Timestamp base = make_timestamp(2017, 3, 7, 18, 0, 0);
    std::vector<VolumeRecord> volumes;
    // Two hours of 15-minute windows on every lane.
    for (int w = 0; w < 8; ++w) {
        for (const auto& ap : cfg.approaches) {
            for (int lane = 1; lane <= ap.through_lanes; ++lane) {
                volumes.push_back({cfg.id, ap.bearing, lane, Movement::through,
                                   base + w * 900, 90 + 30 * lane});
            }
            for (int lane = 1; lane <= ap.left_turn_lanes; ++lane) {
                volumes.push_back(
                    {cfg.id, ap.bearing, lane, Movement::left, base + w * 900, 30});
            }
        }
    }
    std::vector<PhaseEvent> phases;
    for (int c = 0; c < 60; ++c) {
        const Timestamp t = base + c * 120;
        for (const auto& ap : cfg.approaches) {
            phases.push_back({cfg.id, ap.bearing, Movement::through, t, t + 40, 6.0, 70.0});
            phases.push_back(
                {cfg.id, ap.bearing, Movement::left, t + 50, t + 65, 3.0, 95.0});
        }
    }
    std::vector<SpeedObservation> speeds;
    if (with_speed) {
        for (int m = 0; m < 120; ++m) {
            for (Bearing b : {Bearing::NB, Bearing::SB}) {
                speeds.push_back({cfg.id, b, base + m * 60 + 10, 38.0 + (m % 5)});
            }
        }
    }
    std::vector<WeatherRecord> weather = {{base - 3600, 0, 10.0, 0.0},
                                          {base + 1800, 1, 4.5, 1.2}};
    return StreamIndex(cfg, std::move(volumes), std::move(phases), std::move(speeds),
                       std::move(weather));
}

} // namespace

TEST_CASE("weather join: latest record at or before the instant") {
    const auto streams = fixture_streams();
    const Timestamp base = make_timestamp(2017, 3, 7, 18, 0, 0);
    CHECK(streams.weather_at(base + 1700)->weather_type == 0);
    CHECK(streams.weather_at(base + 1800)->weather_type == 1); // boundary inclusive
    CHECK(streams.weather_at(base + 7200)->visibility == doctest::Approx(4.5));
    CHECK_FALSE(streams.weather_at(base - 7200).has_value());
}

TEST_CASE("slice bounds follow the 18:31 example") {
    const Timestamp t = make_timestamp(2017, 3, 7, 18, 31, 0);
    const auto s1 = slice_bounds(t, 1);
    CHECK(format_timestamp(s1.first) == "2017-03-07 18:26:00");
    CHECK(format_timestamp(s1.second) == "2017-03-07 18:31:00");
    const auto s4 = slice_bounds(t, 4);
    CHECK(format_timestamp(s4.first) == "2017-03-07 18:11:00");
    CHECK(format_timestamp(s4.second) == "2017-03-07 18:16:00");
}

TEST_CASE("unaligned slice volume integrates the even-rate assumption") {
    const auto streams = fixture_streams();
    const Timestamp t = make_timestamp(2017, 3, 7, 18, 31, 0);
    const auto [from, to] = slice_bounds(t, 1); // 18:26 - 18:31
    // Lane 1 through on NB carries 120 vehicles per 15 minutes everywhere,
    // so any 5-minute span integrates to exactly 40.
    CHECK(streams.lane_volume(Bearing::NB, Movement::through, 1, from, to) ==
          doctest::Approx(40.0));
}

TEST_CASE("extract_features: full within vector, entrance restriction, weather constancy") {
    const auto streams = fixture_streams();
    const Timestamp t = make_timestamp(2017, 3, 7, 19, 0, 0);
    OafrSettings oafr;

    EventKey within{"X01", t, LocationClass::within, EventRole::crash, "c1"};
    const auto fv = extract_features(within, Bearing::NB, streams, oafr);
    REQUIRE(fv.has_value());
    CHECK(fv->size() == 219);
    CHECK(fv->count("D_OAFR_5_10") == 1);
    CHECK(fv->at("WeatherType") == 1.0);

    EventKey entrance{"X01", t, LocationClass::entrance, EventRole::crash, "c2"};
    const auto ev = extract_features(entrance, Bearing::NB, streams, oafr);
    REQUIRE(ev.has_value());
    CHECK(ev->size() == 63);
    for (const auto& [name, value] : *ev) {
        CHECK(name.find("B_") != 0);
        CHECK(name.find("C_") != 0);
        CHECK(name.find("D_") != 0);
    }

    // Determinism: identical inputs give identical vectors.
    const auto fv2 = extract_features(within, Bearing::NB, streams, oafr);
    CHECK(*fv == *fv2);
}

TEST_CASE("extract_features: missing speed drops the event with a reason") {
    const auto streams = fixture_streams(false);
    const Timestamp t = make_timestamp(2017, 3, 7, 19, 0, 0);
    EventKey key{"X01", t, LocationClass::within, EventRole::crash, "c1"};
    ExtractError err;
    const auto fv = extract_features(key, Bearing::NB, streams, OafrSettings{}, &err);
    CHECK_FALSE(fv.has_value());
    CHECK(err.reason.find("missing_speed") == 0);
}

TEST_CASE("extract_features: missing weather is an error signal") {
    const auto cfg = fixture_config();
    auto streams = StreamIndex(cfg, {}, {}, {}, {});
    const Timestamp t = make_timestamp(2017, 3, 7, 19, 0, 0);
    EventKey key{"X01", t, LocationClass::within, EventRole::crash, "c1"};
    ExtractError err;
    const auto fv = extract_features(key, Bearing::NB, streams, OafrSettings{}, &err);
    CHECK_FALSE(fv.has_value());
}
