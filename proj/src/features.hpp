#pragma once

#include "domain.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ixrisk {

enum class MeanMode : std::uint8_t { arithmetic = 0, geometric = 1 };
enum class BoundaryMode : std::uint8_t { equal_split = 0, forced_destination = 1 };
enum class ZeroVolumePolicy : std::uint8_t { skip_lane = 0, epsilon = 1 };

struct OafrSettings {
    MeanMode mean_mode = MeanMode::arithmetic;
    BoundaryMode boundary_mode = BoundaryMode::equal_split;
    ZeroVolumePolicy zero_volume_policy = ZeroVolumePolicy::epsilon;
    double epsilon = 0.5; // vehicles; must be > 0 under epsilon policy

    void validate() const;
};

// Per-lane 5-minute volumes for one 15-minute record: count / 3, unrounded.
std::array<double, 3> disaggregate_volume(std::int64_t count);

// Flow ratio of lane i (1-based) against its neighbours. nullopt means the
// lane was skipped under the skip_lane policy; a single-lane group is an
// error because AFR needs at least one neighbour.
std::optional<double> compute_afr(std::span<const double> volumes, int lane,
                                  const OafrSettings& settings);

double compute_oafr(std::span<const double> volumes, const OafrSettings& settings);

struct SpeedAggregate {
    double avg = 0.0;
    double std = 0.0; // sample sd (n-1); 0 when n = 1
    int n = 0;
};

// nullopt when the window holds no observation (missing-data signal).
std::optional<SpeedAggregate> aggregate_speed(std::span<const double> speeds_mph);

struct PhaseAggregate {
    double green_ratio = 0.0; // percent of the 300 s window
    double avg_green = 0.0;   // seconds, over phases starting in the window
    double std_green = 0.0;
    double avg_queue = 0.0;
    double avg_wait = 0.0;
    bool sparse = false; // no green overlap at all
};

struct PhaseSlice {
    double duration = 0.0;
    double queue = 0.0;
    double wait = 0.0;
    double overlap = 0.0;   // seconds of green inside the window
    bool starts_inside = false;
};

PhaseAggregate aggregate_phase(std::span<const PhaseSlice> phases);

// -------- stream indexing --------

// Per-intersection raw streams with the indices feature extraction needs.
// Build once, query many; all queries are pure.
class StreamIndex {
public:
    StreamIndex(const IntersectionConfig& config, std::vector<VolumeRecord> volumes,
                std::vector<PhaseEvent> phases, std::vector<SpeedObservation> speeds,
                std::vector<WeatherRecord> weather);

    const IntersectionConfig& config() const { return config_; }

    // Vehicles passed on one lane during [from, to), under the even
    // within-15-minute distribution assumption.
    double lane_volume(Bearing b, Movement m, int lane, Timestamp from, Timestamp to) const;
    double movement_volume(Bearing b, Movement m, Timestamp from, Timestamp to) const;
    std::vector<double> through_lane_volumes(Bearing b, Timestamp from, Timestamp to) const;

    std::vector<PhaseSlice> phases_in_window(Bearing b, Movement m, Timestamp from,
                                             Timestamp to) const;
    std::vector<double> speeds_in_window(Bearing b, Timestamp from, Timestamp to) const;

    // Latest record at or before the instant; nullopt when none exists.
    std::optional<WeatherRecord> weather_at(Timestamp instant) const;

private:
    struct LaneSeries {
        std::vector<Timestamp> starts; // sorted 15-min window starts
        std::vector<std::int64_t> counts;
    };
    struct MovementKey {
        Bearing bearing;
        Movement movement;
        bool operator<(const MovementKey& o) const {
            return std::tie(bearing, movement) < std::tie(o.bearing, o.movement);
        }
    };

    IntersectionConfig config_;
    std::map<std::pair<MovementKey, int>, LaneSeries> lanes_;
    std::map<MovementKey, std::vector<PhaseEvent>> phases_; // sorted by green_start
    std::map<Bearing, std::vector<SpeedObservation>> speeds_; // sorted by timestamp
    std::vector<WeatherRecord> weather_;                       // sorted by timestamp
};

// -------- event-level extraction --------

struct ExtractError {
    std::string reason; // machine-parsable, e.g. "missing_speed_slice_2"
};

// Slice k covers [t - 300k, t - 300(k-1)).
std::pair<Timestamp, Timestamp> slice_bounds(Timestamp instant, int slice);

// Full feature vector for one event. Within-intersection events carry all
// four approaches; entrance events only the A approach. On failure returns
// the first missing-data reason.
std::optional<FeatureVector> extract_features(const EventKey& event, Bearing at_fault,
                                              const StreamIndex& streams,
                                              const OafrSettings& settings,
                                              ExtractError* error = nullptr);

// Restricted extraction: only the named wide-table variables. Used by the
// crash injector, which needs a handful of covariates per candidate instant.
std::optional<FeatureVector> extract_named_features(const EventKey& event, Bearing at_fault,
                                                    const StreamIndex& streams,
                                                    const OafrSettings& settings,
                                                    std::span<const std::string> variables,
                                                    ExtractError* error = nullptr);

} // namespace ixrisk
