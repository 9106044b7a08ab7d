#pragma once

#include "timeutil.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ixrisk {

// Travel direction of an approach (vehicles on the NB approach head north).
enum class Bearing : std::uint8_t { NB = 0, SB = 1, EB = 2, WB = 3 };

// A = at-fault vehicle's approach, C opposes A, B is the near-side crossing
// approach (its traffic enters the conflict area from A's left under
// right-hand driving), D is the far-side crossing approach.
enum class ApproachRole : std::uint8_t { A = 0, B = 1, C = 2, D = 3 };

enum class Movement : std::uint8_t { through = 0, left = 1 };

enum class LocationClass : std::uint8_t { within = 0, entrance = 1, exit = 2 };

enum class EventRole : std::uint8_t { crash = 0, control = 1 };

const char* to_string(Bearing b);
const char* to_string(ApproachRole r);
const char* to_string(Movement m);
const char* to_string(LocationClass c);
const char* to_string(EventRole r);

Bearing bearing_from_string(const std::string& s);
Movement movement_from_string(const std::string& s);
LocationClass location_class_from_string(const std::string& s);
EventRole event_role_from_string(const std::string& s);

Bearing opposing(Bearing b);
bool crosses(Bearing a, Bearing b);

struct ApproachConfig {
    Bearing bearing = Bearing::NB;
    bool is_major = false;
    int through_lanes = 1;
    int left_turn_lanes = 0;
    double upstream_segment_length_ft = 1000.0;
};

struct IntersectionConfig {
    std::string id;
    std::array<ApproachConfig, 4> approaches;

    const ApproachConfig& approach(Bearing b) const;
    bool has_bearing(Bearing b) const;
    // Throws invalid_input unless bearings are pairwise distinct, form two
    // opposing pairs, and at least one approach is major.
    void validate() const;
};

// Bijection bearings <-> roles; produced by assign_approach_roles.
struct ApproachMap {
    std::array<Bearing, 4> bearing_of_role{}; // indexed by ApproachRole

    Bearing bearing(ApproachRole r) const {
        return bearing_of_role[static_cast<std::size_t>(r)];
    }
    ApproachRole role(Bearing b) const;
};

ApproachMap assign_approach_roles(Bearing at_fault, const IntersectionConfig& config);

// -------- raw stream records (the five ingest feeds) --------

struct VolumeRecord {
    std::string intersection;
    Bearing bearing = Bearing::NB;
    int lane_index = 1; // 1-based from leftmost, within the movement's lane group
    Movement movement = Movement::through;
    Timestamp window_start = 0; // aligned to 15 minutes
    std::int64_t count = 0;
};

struct PhaseEvent {
    std::string intersection;
    Bearing bearing = Bearing::NB;
    Movement movement = Movement::through;
    Timestamp green_start = 0;
    Timestamp green_end = 0; // > green_start
    double queue_at_green = 0.0;
    double max_wait_at_green = 0.0; // seconds
};

struct SpeedObservation {
    std::string intersection;
    Bearing bearing = Bearing::NB; // segment upstream of this approach
    Timestamp timestamp = 0;
    double space_mean_speed = 0.0; // mph, finite and positive
};

struct WeatherRecord {
    Timestamp timestamp = 0;
    int weather_type = 0;    // 0 normal, 1 adverse
    double visibility = 10.0; // miles, [0, 10]
    double hourly_precip = 0.0; // tenths of inch
};

struct CrashRecord {
    std::string id;
    std::string intersection;
    Timestamp occurred_at = 0;
    Bearing at_fault_bearing = Bearing::NB;
    LocationClass location_class = LocationClass::within;
    bool single_vehicle = false;
    bool impaired = false;
};

struct EventKey {
    std::string intersection;
    Timestamp instant = 0;
    LocationClass location_class = LocationClass::within;
    EventRole role = EventRole::crash;
    std::string stratum_id;
};

// Named covariate vector; key set depends on the event's location class.
using FeatureVector = std::map<std::string, double>;

struct StratumEvent {
    EventKey key;
    std::string event_id;
    FeatureVector features;
};

struct Stratum {
    std::string stratum_id;
    StratumEvent crash;                  // j = 0
    std::vector<StratumEvent> controls;  // j = 1..m
};

// -------- variable naming (Tables 1-6 header convention) --------

// The 13 per-approach measures, with the tables' exact (inconsistent) casing.
enum class Measure : std::uint8_t {
    Vol_LT = 0,
    Vol_Th,
    OAFR,
    LT_GreenRatio,
    LT_Avg_Green,
    LT_Std_Green,
    LT_Avg_Queue,
    LT_Avg_Wait,
    TH_GreenRatio,
    TH_Avg_Green,
    TH_Std_Green,
    TH_Avg_Queue,
    TH_Avg_Wait,
};
constexpr int k_num_approach_measures = 13;

constexpr int k_num_slices = 4; // slice 1 nearest the event

const char* to_string(Measure m);

// "0_5", "5_10", "10_15", "15_20" for slices 1..4.
const char* slice_window(int slice);

// Rejects anything outside the closed vocabulary.
std::string variable_name(ApproachRole role, Measure measure, int slice);
std::string speed_variable_name(bool average, int slice); // Avg_speed_0_5 / Std_speed_0_5
extern const char* const k_weather_variables[3];          // WeatherType, Visibility, HourlyPrecip

// Name-based dispatch used by the CLI --vars flag and the screening layer.
std::string variable_name_checked(const std::string& approach_or_empty,
                                  const std::string& measure, int slice);

// Canonical column order for the wide feature CSV; within-intersection
// events carry A..D, entrance events only A (plus speed and weather).
std::vector<std::string> canonical_variables(LocationClass location_class);

// Slice-k variable list (suffix-stripped approach/speed names + weather),
// the Table 5/7 presentation of a per-slice model.
std::vector<std::string> canonical_slice_variables(LocationClass location_class);

// Maps an unsuffixed slice-model variable to the wide-table column for the
// given slice ("B_Vol_LT" + slice 2 -> "B_Vol_LT_5_10"); weather names map
// to themselves. Returns nullopt for names that are already slice-tagged.
std::optional<std::string> widen_slice_variable(const std::string& base, int slice);

// Splits a wide column into (base name without window, slice 1..4);
// slice = 0 for untagged (weather) variables.
std::pair<std::string, int> split_slice_suffix(const std::string& variable);

} // namespace ixrisk
