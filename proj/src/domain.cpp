#include "domain.hpp"

#include "errors.hpp"

#include <algorithm>

namespace ixrisk {

const char* to_string(Bearing b) {
    switch (b) {
    case Bearing::NB: return "NB";
    case Bearing::SB: return "SB";
    case Bearing::EB: return "EB";
    case Bearing::WB: return "WB";
    }
    return "?";
}

const char* to_string(ApproachRole r) {
    switch (r) {
    case ApproachRole::A: return "A";
    case ApproachRole::B: return "B";
    case ApproachRole::C: return "C";
    case ApproachRole::D: return "D";
    }
    return "?";
}

const char* to_string(Movement m) { return m == Movement::through ? "through" : "left"; }

const char* to_string(LocationClass c) {
    switch (c) {
    case LocationClass::within: return "within";
    case LocationClass::entrance: return "entrance";
    case LocationClass::exit: return "exit";
    }
    return "?";
}

const char* to_string(EventRole r) { return r == EventRole::crash ? "crash" : "control"; }

Bearing bearing_from_string(const std::string& s) {
    if (s == "NB") return Bearing::NB;
    if (s == "SB") return Bearing::SB;
    if (s == "EB") return Bearing::EB;
    if (s == "WB") return Bearing::WB;
    throw_invalid("unknown bearing '" + s + "'");
}

Movement movement_from_string(const std::string& s) {
    if (s == "through") return Movement::through;
    if (s == "left") return Movement::left;
    throw_invalid("unknown movement '" + s + "'");
}

LocationClass location_class_from_string(const std::string& s) {
    if (s == "within") return LocationClass::within;
    if (s == "entrance") return LocationClass::entrance;
    if (s == "exit") return LocationClass::exit;
    throw_invalid("unknown location class '" + s + "'");
}

EventRole event_role_from_string(const std::string& s) {
    if (s == "crash") return EventRole::crash;
    if (s == "control") return EventRole::control;
    throw_invalid("unknown event role '" + s + "'");
}

Bearing opposing(Bearing b) {
    switch (b) {
    case Bearing::NB: return Bearing::SB;
    case Bearing::SB: return Bearing::NB;
    case Bearing::EB: return Bearing::WB;
    case Bearing::WB: return Bearing::EB;
    }
    throw_invalid("bad bearing");
}

bool crosses(Bearing a, Bearing b) { return opposing(a) != b && a != b; }

namespace {

// Unit heading of travel, x east / y north.
std::pair<int, int> heading(Bearing b) {
    switch (b) {
    case Bearing::NB: return {0, 1};
    case Bearing::SB: return {0, -1};
    case Bearing::EB: return {1, 0};
    case Bearing::WB: return {-1, 0};
    }
    return {0, 0};
}

// The crossing stream entering from the driver's left travels along the
// clockwise rotation of the driver's own heading.
Bearing near_side_crossing(Bearing a) {
    const auto [x, y] = heading(a);
    const int cx = y, cy = -x; // rotate -90 degrees
    for (Bearing b : {Bearing::NB, Bearing::SB, Bearing::EB, Bearing::WB}) {
        if (heading(b) == std::pair<int, int>{cx, cy}) return b;
    }
    throw_invalid("bad bearing");
}

} // namespace

const ApproachConfig& IntersectionConfig::approach(Bearing b) const {
    for (const auto& a : approaches) {
        if (a.bearing == b) return a;
    }
    throw_invalid("intersection '" + id + "' has no approach with bearing " +
                  std::string(to_string(b)));
}

bool IntersectionConfig::has_bearing(Bearing b) const {
    return std::any_of(approaches.begin(), approaches.end(),
                       [b](const ApproachConfig& a) { return a.bearing == b; });
}

void IntersectionConfig::validate() const {
    bool seen[4] = {false, false, false, false};
    bool any_major = false;
    for (const auto& a : approaches) {
        const auto idx = static_cast<std::size_t>(a.bearing);
        if (seen[idx]) throw_invalid("intersection '" + id + "': duplicate bearing");
        seen[idx] = true;
        any_major = any_major || a.is_major;
        if (a.through_lanes < 1) throw_invalid("intersection '" + id + "': through_lanes < 1");
        if (a.left_turn_lanes < 0) throw_invalid("intersection '" + id + "': left_turn_lanes < 0");
        if (!(a.upstream_segment_length_ft > 0))
            throw_invalid("intersection '" + id + "': upstream_segment_length must be > 0");
    }
    // 4 distinct compass bearings necessarily form two opposing pairs.
    if (!(seen[0] && seen[1] && seen[2] && seen[3]))
        throw_invalid("intersection '" + id + "': need exactly NB/SB/EB/WB approaches");
    if (!any_major) throw_invalid("intersection '" + id + "': no approach marked major");
}

ApproachRole ApproachMap::role(Bearing b) const {
    for (std::size_t i = 0; i < 4; ++i) {
        if (bearing_of_role[i] == b) return static_cast<ApproachRole>(i);
    }
    throw_invalid("bearing not in approach map");
}

ApproachMap assign_approach_roles(Bearing at_fault, const IntersectionConfig& config) {
    if (!config.has_bearing(at_fault)) {
        throw_invalid("at-fault bearing " + std::string(to_string(at_fault)) +
                      " not present at intersection '" + config.id + "'");
    }
    ApproachMap m;
    m.bearing_of_role[static_cast<std::size_t>(ApproachRole::A)] = at_fault;
    m.bearing_of_role[static_cast<std::size_t>(ApproachRole::C)] = opposing(at_fault);
    const Bearing near = near_side_crossing(at_fault);
    m.bearing_of_role[static_cast<std::size_t>(ApproachRole::B)] = near;
    m.bearing_of_role[static_cast<std::size_t>(ApproachRole::D)] = opposing(near);
    return m;
}

const char* to_string(Measure m) {
    switch (m) {
    case Measure::Vol_LT: return "Vol_LT";
    case Measure::Vol_Th: return "Vol_Th";
    case Measure::OAFR: return "OAFR";
    case Measure::LT_GreenRatio: return "LT_GreenRatio";
    case Measure::LT_Avg_Green: return "LT_Avg_Green";
    case Measure::LT_Std_Green: return "LT_Std_Green";
    case Measure::LT_Avg_Queue: return "LT_Avg_Queue";
    case Measure::LT_Avg_Wait: return "LT_Avg_Wait";
    case Measure::TH_GreenRatio: return "TH_GreenRatio";
    case Measure::TH_Avg_Green: return "TH_Avg_Green";
    case Measure::TH_Std_Green: return "TH_Std_Green";
    case Measure::TH_Avg_Queue: return "TH_Avg_Queue";
    case Measure::TH_Avg_Wait: return "TH_Avg_Wait";
    }
    return "?";
}

const char* slice_window(int slice) {
    switch (slice) {
    case 1: return "0_5";
    case 2: return "5_10";
    case 3: return "10_15";
    case 4: return "15_20";
    }
    throw_invalid("slice must be 1..4, got " + std::to_string(slice));
}

const char* const k_weather_variables[3] = {"WeatherType", "Visibility", "HourlyPrecip"};

std::string variable_name(ApproachRole role, Measure measure, int slice) {
    return std::string(to_string(role)) + "_" + to_string(measure) + "_" + slice_window(slice);
}

std::string speed_variable_name(bool average, int slice) {
    return std::string(average ? "Avg_speed" : "Std_speed") + "_" + slice_window(slice);
}

std::string variable_name_checked(const std::string& approach_or_empty,
                                  const std::string& measure, int slice) {
    if (approach_or_empty.empty()) {
        if (measure == "Avg_speed") return speed_variable_name(true, slice);
        if (measure == "Std_speed") return speed_variable_name(false, slice);
        for (const char* w : k_weather_variables) {
            if (measure == w) return measure; // weather is untagged
        }
        throw_invalid("unknown measure '" + measure + "'");
    }
    ApproachRole role;
    if (approach_or_empty == "A") role = ApproachRole::A;
    else if (approach_or_empty == "B") role = ApproachRole::B;
    else if (approach_or_empty == "C") role = ApproachRole::C;
    else if (approach_or_empty == "D") role = ApproachRole::D;
    else throw_invalid("unknown approach role '" + approach_or_empty + "'");
    for (int i = 0; i < k_num_approach_measures; ++i) {
        const auto m = static_cast<Measure>(i);
        if (measure == to_string(m)) return variable_name(role, m, slice);
    }
    throw_invalid("unknown measure '" + measure + "'");
}

std::vector<std::string> canonical_variables(LocationClass location_class) {
    std::vector<std::string> out;
    const int n_roles = location_class == LocationClass::within ? 4 : 1;
    for (int r = 0; r < n_roles; ++r) {
        for (int m = 0; m < k_num_approach_measures; ++m) {
            for (int s = 1; s <= k_num_slices; ++s) {
                out.push_back(
                    variable_name(static_cast<ApproachRole>(r), static_cast<Measure>(m), s));
            }
        }
    }
    for (int s = 1; s <= k_num_slices; ++s) out.push_back(speed_variable_name(true, s));
    for (int s = 1; s <= k_num_slices; ++s) out.push_back(speed_variable_name(false, s));
    for (const char* w : k_weather_variables) out.emplace_back(w);
    return out;
}

std::vector<std::string> canonical_slice_variables(LocationClass location_class) {
    std::vector<std::string> out;
    const int n_roles = location_class == LocationClass::within ? 4 : 1;
    for (int r = 0; r < n_roles; ++r) {
        for (int m = 0; m < k_num_approach_measures; ++m) {
            out.push_back(std::string(to_string(static_cast<ApproachRole>(r))) + "_" +
                          to_string(static_cast<Measure>(m)));
        }
    }
    out.emplace_back("Avg_speed");
    out.emplace_back("Std_speed");
    for (const char* w : k_weather_variables) out.emplace_back(w);
    return out;
}

std::optional<std::string> widen_slice_variable(const std::string& base, int slice) {
    for (const char* w : k_weather_variables) {
        if (base == w) return base;
    }
    // Already slice-tagged names pass through untouched.
    const auto [stem, tag] = split_slice_suffix(base);
    if (tag != 0) return std::nullopt;
    return base + "_" + slice_window(slice);
}

std::pair<std::string, int> split_slice_suffix(const std::string& variable) {
    for (int s = 1; s <= k_num_slices; ++s) {
        const std::string suffix = std::string("_") + slice_window(s);
        if (variable.size() > suffix.size() &&
            variable.compare(variable.size() - suffix.size(), suffix.size(), suffix) == 0) {
            return {variable.substr(0, variable.size() - suffix.size()), s};
        }
    }
    return {variable, 0};
}

} // namespace ixrisk
