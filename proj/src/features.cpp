#include "features.hpp"

#include "errors.hpp"

#include <algorithm>
#include <cmath>

namespace ixrisk {

void OafrSettings::validate() const {
    if (zero_volume_policy == ZeroVolumePolicy::epsilon && !(epsilon > 0.0)) {
        throw_invalid("OAFR epsilon must be > 0");
    }
}

std::array<double, 3> disaggregate_volume(std::int64_t count) {
    if (count < 0) throw_invalid("volume count must be >= 0");
    const double third = static_cast<double>(count) / 3.0;
    return {third, third, third};
}

namespace {

struct AfrParts {
    double num = 0.0; // sum of destination-weighted neighbour volumes
    double den = 1.0; // subject-lane volume (after zero-volume policy)
};

// Under forced_destination an edge neighbour with no outer lane sends
// everything inward (factor 1); everywhere else the split is assumed equal.
std::optional<AfrParts> afr_parts(std::span<const double> volumes, int lane,
                                  const OafrSettings& settings) {
    const int n = static_cast<int>(volumes.size());
    if (n < 2) throw_invalid("AFR undefined for a single-lane group");
    if (lane < 1 || lane > n) throw_invalid("AFR lane index out of range");

    double vi = volumes[static_cast<std::size_t>(lane - 1)];
    if (vi < 0) throw_invalid("negative lane volume");
    if (vi == 0.0) {
        if (settings.zero_volume_policy == ZeroVolumePolicy::skip_lane) return std::nullopt;
        vi = settings.epsilon;
    }

    AfrParts parts;
    parts.den = vi;
    // Left neighbour lane-1's other escape is lane-2; right neighbour's is lane+2.
    if (lane - 1 >= 1) {
        double f = 0.5;
        if (settings.boundary_mode == BoundaryMode::forced_destination && lane - 2 < 1) f = 1.0;
        parts.num += f * volumes[static_cast<std::size_t>(lane - 2)];
    }
    if (lane + 1 <= n) {
        double f = 0.5;
        if (settings.boundary_mode == BoundaryMode::forced_destination && lane + 2 > n) f = 1.0;
        parts.num += f * volumes[static_cast<std::size_t>(lane)];
    }
    return parts;
}

} // namespace

std::optional<double> compute_afr(std::span<const double> volumes, int lane,
                                  const OafrSettings& settings) {
    settings.validate();
    const auto parts = afr_parts(volumes, lane, settings);
    if (!parts) return std::nullopt;
    return parts->num / parts->den;
}

double compute_oafr(std::span<const double> volumes, const OafrSettings& settings) {
    settings.validate();
    const int n = static_cast<int>(volumes.size());
    std::vector<AfrParts> lanes;
    lanes.reserve(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        if (auto parts = afr_parts(volumes, i, settings)) lanes.push_back(*parts);
    }
    if (lanes.empty()) throw_numeric("OAFR undefined: every lane skipped");

    if (settings.mean_mode == MeanMode::arithmetic) {
        double sum = 0.0;
        for (const auto& p : lanes) sum += p.num / p.den;
        return sum / static_cast<double>(lanes.size());
    }
    // Geometric mean as (prod num / prod den)^(1/n): the shared volume terms
    // cancel bit-exactly, which keeps the 2-lane equal-split case at 0.5.
    double prod_num = 1.0, prod_den = 1.0;
    for (const auto& p : lanes) {
        prod_num *= p.num;
        prod_den *= p.den;
    }
    const double ratio = prod_num / prod_den;
    if (lanes.size() == 2) return std::sqrt(ratio);
    return std::pow(ratio, 1.0 / static_cast<double>(lanes.size()));
}

std::optional<SpeedAggregate> aggregate_speed(std::span<const double> speeds_mph) {
    if (speeds_mph.empty()) return std::nullopt;
    SpeedAggregate agg;
    agg.n = static_cast<int>(speeds_mph.size());
    double sum = 0.0;
    for (double v : speeds_mph) sum += v;
    agg.avg = sum / static_cast<double>(agg.n);
    if (agg.n > 1) {
        double ss = 0.0;
        for (double v : speeds_mph) ss += (v - agg.avg) * (v - agg.avg);
        agg.std = std::sqrt(ss / static_cast<double>(agg.n - 1));
    }
    return agg;
}

PhaseAggregate aggregate_phase(std::span<const PhaseSlice> phases) {
    PhaseAggregate agg;
    double overlap_total = 0.0;
    std::vector<const PhaseSlice*> starters;
    for (const auto& p : phases) {
        overlap_total += p.overlap;
        if (p.starts_inside) starters.push_back(&p);
    }
    agg.green_ratio = 100.0 * overlap_total / 300.0;
    agg.sparse = phases.empty();

    const int n = static_cast<int>(starters.size());
    if (n > 0) {
        double sd = 0.0, sq = 0.0, sw = 0.0;
        for (const auto* p : starters) {
            sd += p->duration;
            sq += p->queue;
            sw += p->wait;
        }
        agg.avg_green = sd / n;
        agg.avg_queue = sq / n;
        agg.avg_wait = sw / n;
        if (n > 1) {
            double ss = 0.0;
            for (const auto* p : starters) {
                ss += (p->duration - agg.avg_green) * (p->duration - agg.avg_green);
            }
            agg.std_green = std::sqrt(ss / (n - 1));
        }
    }
    return agg;
}

// -------- StreamIndex --------

StreamIndex::StreamIndex(const IntersectionConfig& config, std::vector<VolumeRecord> volumes,
                         std::vector<PhaseEvent> phases, std::vector<SpeedObservation> speeds,
                         std::vector<WeatherRecord> weather)
    : config_(config) {
    config_.validate();
    for (auto& v : volumes) {
        if (v.count < 0) throw_invalid("volume count must be >= 0");
        auto& series = lanes_[{{v.bearing, v.movement}, v.lane_index}];
        series.starts.push_back(v.window_start);
        series.counts.push_back(v.count);
    }
    for (auto& [key, series] : lanes_) {
        std::vector<std::size_t> order(series.starts.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return series.starts[a] < series.starts[b];
        });
        LaneSeries sorted;
        sorted.starts.reserve(order.size());
        sorted.counts.reserve(order.size());
        for (std::size_t i : order) {
            sorted.starts.push_back(series.starts[i]);
            sorted.counts.push_back(series.counts[i]);
        }
        series = std::move(sorted);
    }
    for (auto& p : phases) {
        if (p.green_end <= p.green_start) throw_invalid("phase green_end must be > green_start");
        phases_[{p.bearing, p.movement}].push_back(p);
    }
    for (auto& [key, vec] : phases_) {
        std::sort(vec.begin(), vec.end(), [](const PhaseEvent& a, const PhaseEvent& b) {
            return a.green_start < b.green_start;
        });
    }
    for (auto& s : speeds) {
        if (!(s.space_mean_speed > 0) || !std::isfinite(s.space_mean_speed)) {
            throw_invalid("space_mean_speed must be finite and positive");
        }
        speeds_[s.bearing].push_back(s);
    }
    for (auto& [key, vec] : speeds_) {
        std::sort(vec.begin(), vec.end(), [](const SpeedObservation& a, const SpeedObservation& b) {
            return a.timestamp < b.timestamp;
        });
    }
    weather_ = std::move(weather);
    std::sort(weather_.begin(), weather_.end(),
              [](const WeatherRecord& a, const WeatherRecord& b) {
                  return a.timestamp < b.timestamp;
              });
}

double StreamIndex::lane_volume(Bearing b, Movement m, int lane, Timestamp from,
                                Timestamp to) const {
    const auto it = lanes_.find({{b, m}, lane});
    if (it == lanes_.end()) return 0.0;
    const LaneSeries& series = it->second;
    // First 15-min window that can overlap [from, to).
    auto lo = std::upper_bound(series.starts.begin(), series.starts.end(), from - 900);
    double total = 0.0;
    for (auto i = static_cast<std::size_t>(lo - series.starts.begin());
         i < series.starts.size() && series.starts[i] < to; ++i) {
        const Timestamp ws = series.starts[i];
        const double overlap = static_cast<double>(std::min(to, ws + 900) - std::max(from, ws));
        if (overlap > 0) {
            total += static_cast<double>(series.counts[i]) * overlap / 900.0;
        }
    }
    return total;
}

double StreamIndex::movement_volume(Bearing b, Movement m, Timestamp from, Timestamp to) const {
    const ApproachConfig& ap = config_.approach(b);
    const int n_lanes = m == Movement::through ? ap.through_lanes : ap.left_turn_lanes;
    double total = 0.0;
    for (int lane = 1; lane <= n_lanes; ++lane) total += lane_volume(b, m, lane, from, to);
    return total;
}

std::vector<double> StreamIndex::through_lane_volumes(Bearing b, Timestamp from,
                                                      Timestamp to) const {
    const ApproachConfig& ap = config_.approach(b);
    std::vector<double> out(static_cast<std::size_t>(ap.through_lanes), 0.0);
    for (int lane = 1; lane <= ap.through_lanes; ++lane) {
        out[static_cast<std::size_t>(lane - 1)] =
            lane_volume(b, Movement::through, lane, from, to);
    }
    return out;
}

std::vector<PhaseSlice> StreamIndex::phases_in_window(Bearing b, Movement m, Timestamp from,
                                                      Timestamp to) const {
    std::vector<PhaseSlice> out;
    const auto it = phases_.find({b, m});
    if (it == phases_.end()) return out;
    const auto& vec = it->second;
    // Greens are bounded by a cycle; scanning back 30 minutes is plenty.
    auto lo = std::lower_bound(vec.begin(), vec.end(), from - 1800,
                               [](const PhaseEvent& p, Timestamp t) { return p.green_start < t; });
    for (auto i = lo; i != vec.end() && i->green_start < to; ++i) {
        const double overlap =
            static_cast<double>(std::min(to, i->green_end) - std::max(from, i->green_start));
        const bool starts_inside = i->green_start >= from && i->green_start < to;
        if (overlap <= 0 && !starts_inside) continue;
        PhaseSlice slice;
        slice.duration = static_cast<double>(i->green_end - i->green_start);
        slice.queue = i->queue_at_green;
        slice.wait = i->max_wait_at_green;
        slice.overlap = std::max(0.0, overlap);
        slice.starts_inside = starts_inside;
        out.push_back(slice);
    }
    return out;
}

std::vector<double> StreamIndex::speeds_in_window(Bearing b, Timestamp from, Timestamp to) const {
    std::vector<double> out;
    const auto it = speeds_.find(b);
    if (it == speeds_.end()) return out;
    const auto& vec = it->second;
    auto lo = std::lower_bound(vec.begin(), vec.end(), from,
                               [](const SpeedObservation& s, Timestamp t) {
                                   return s.timestamp < t;
                               });
    for (auto i = lo; i != vec.end() && i->timestamp < to; ++i) {
        out.push_back(i->space_mean_speed);
    }
    return out;
}

std::optional<WeatherRecord> StreamIndex::weather_at(Timestamp instant) const {
    auto it = std::upper_bound(weather_.begin(), weather_.end(), instant,
                               [](Timestamp t, const WeatherRecord& w) {
                                   return t < w.timestamp;
                               });
    if (it == weather_.begin()) return std::nullopt;
    return *(it - 1);
}

// -------- extraction --------

std::pair<Timestamp, Timestamp> slice_bounds(Timestamp instant, int slice) {
    if (slice < 1 || slice > k_num_slices) throw_invalid("slice must be 1..4");
    return {instant - 300 * slice, instant - 300 * (slice - 1)};
}

namespace {

struct VarDesc {
    enum class Kind { approach, speed, weather } kind = Kind::approach;
    ApproachRole role = ApproachRole::A;
    Measure measure = Measure::Vol_LT;
    int slice = 1;
    bool speed_average = true;
    int weather_index = 0;
};

VarDesc parse_variable(const std::string& name) {
    VarDesc d;
    for (int i = 0; i < 3; ++i) {
        if (name == k_weather_variables[i]) {
            d.kind = VarDesc::Kind::weather;
            d.weather_index = i;
            return d;
        }
    }
    const auto [base, slice] = split_slice_suffix(name);
    if (slice == 0) throw_invalid("unknown variable '" + name + "'");
    d.slice = slice;
    if (base == "Avg_speed" || base == "Std_speed") {
        d.kind = VarDesc::Kind::speed;
        d.speed_average = base == "Avg_speed";
        return d;
    }
    if (base.size() < 3 || base[1] != '_') throw_invalid("unknown variable '" + name + "'");
    switch (base[0]) {
    case 'A': d.role = ApproachRole::A; break;
    case 'B': d.role = ApproachRole::B; break;
    case 'C': d.role = ApproachRole::C; break;
    case 'D': d.role = ApproachRole::D; break;
    default: throw_invalid("unknown variable '" + name + "'");
    }
    const std::string measure = base.substr(2);
    for (int i = 0; i < k_num_approach_measures; ++i) {
        if (measure == to_string(static_cast<Measure>(i))) {
            d.measure = static_cast<Measure>(i);
            return d;
        }
    }
    throw_invalid("unknown variable '" + name + "'");
}

// Computes requested values with per-(role, slice) caching so the crash
// injector's per-instant calls stay cheap.
class Extractor {
public:
    Extractor(const EventKey& event, Bearing at_fault, const StreamIndex& streams,
              const OafrSettings& settings)
        : event_(event), streams_(streams), settings_(settings),
          map_(assign_approach_roles(at_fault, streams.config())) {}

    double value(const VarDesc& d) {
        switch (d.kind) {
        case VarDesc::Kind::weather: return weather_value(d.weather_index);
        case VarDesc::Kind::speed: return speed_value(d.slice, d.speed_average);
        case VarDesc::Kind::approach: return approach_value(d);
        }
        throw_invalid("bad variable descriptor");
    }

private:
    double weather_value(int index) {
        if (!weather_) {
            const auto w = streams_.weather_at(event_.instant);
            if (!w) throw Error(Status::numeric_failure, "missing_weather");
            weather_ = *w;
        }
        switch (index) {
        case 0: return static_cast<double>(weather_->weather_type);
        case 1: return weather_->visibility;
        default: return weather_->hourly_precip;
        }
    }

    double speed_value(int slice, bool average) {
        auto& slot = speed_[static_cast<std::size_t>(slice - 1)];
        if (!slot) {
            const auto [from, to] = slice_bounds(event_.instant, slice);
            const Bearing a = map_.bearing(ApproachRole::A);
            const auto values = streams_.speeds_in_window(a, from, to);
            const auto agg = aggregate_speed(values);
            if (!agg) {
                throw Error(Status::numeric_failure,
                            "missing_speed_slice_" + std::to_string(slice));
            }
            slot = *agg;
        }
        return average ? slot->avg : slot->std;
    }

    double approach_value(const VarDesc& d) {
        if (event_.location_class == LocationClass::entrance && d.role != ApproachRole::A) {
            throw_invalid("entrance events carry only A-approach variables");
        }
        const Bearing b = map_.bearing(d.role);
        const auto [from, to] = slice_bounds(event_.instant, d.slice);
        switch (d.measure) {
        case Measure::Vol_LT: return streams_.movement_volume(b, Movement::left, from, to);
        case Measure::Vol_Th: return streams_.movement_volume(b, Movement::through, from, to);
        case Measure::OAFR: {
            const auto volumes = streams_.through_lane_volumes(b, from, to);
            return compute_oafr(volumes, settings_);
        }
        default: break;
        }
        const bool left = d.measure >= Measure::LT_GreenRatio && d.measure <= Measure::LT_Avg_Wait;
        const PhaseAggregate& agg = phase_aggregate(d.role, left, d.slice);
        switch (d.measure) {
        case Measure::LT_GreenRatio:
        case Measure::TH_GreenRatio: return agg.green_ratio;
        case Measure::LT_Avg_Green:
        case Measure::TH_Avg_Green: return agg.avg_green;
        case Measure::LT_Std_Green:
        case Measure::TH_Std_Green: return agg.std_green;
        case Measure::LT_Avg_Queue:
        case Measure::TH_Avg_Queue: return agg.avg_queue;
        case Measure::LT_Avg_Wait:
        case Measure::TH_Avg_Wait: return agg.avg_wait;
        default: throw_invalid("bad measure");
        }
    }

    const PhaseAggregate& phase_aggregate(ApproachRole role, bool left, int slice) {
        auto& slot = phase_[static_cast<std::size_t>(role)][left ? 1 : 0]
                           [static_cast<std::size_t>(slice - 1)];
        if (!slot) {
            const auto [from, to] = slice_bounds(event_.instant, slice);
            const auto phases = streams_.phases_in_window(
                map_.bearing(role), left ? Movement::left : Movement::through, from, to);
            slot = aggregate_phase(phases);
        }
        return *slot;
    }

    const EventKey& event_;
    const StreamIndex& streams_;
    const OafrSettings& settings_;
    ApproachMap map_;
    std::optional<WeatherRecord> weather_;
    std::array<std::optional<SpeedAggregate>, k_num_slices> speed_;
    std::optional<PhaseAggregate> phase_[4][2][k_num_slices];
};

} // namespace

std::optional<FeatureVector> extract_named_features(const EventKey& event, Bearing at_fault,
                                                    const StreamIndex& streams,
                                                    const OafrSettings& settings,
                                                    std::span<const std::string> variables,
                                                    ExtractError* error) {
    Extractor ex(event, at_fault, streams, settings);
    FeatureVector out;
    for (const auto& name : variables) {
        const VarDesc desc = parse_variable(name);
        try {
            out[name] = ex.value(desc);
        } catch (const Error& e) {
            if (e.status() == Status::numeric_failure) {
                if (error) error->reason = e.what();
                return std::nullopt;
            }
            throw;
        }
    }
    return out;
}

std::optional<FeatureVector> extract_features(const EventKey& event, Bearing at_fault,
                                              const StreamIndex& streams,
                                              const OafrSettings& settings,
                                              ExtractError* error) {
    const auto names = canonical_variables(event.location_class);
    return extract_named_features(event, at_fault, streams, settings, names, error);
}

} // namespace ixrisk
