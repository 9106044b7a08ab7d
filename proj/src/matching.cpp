#include "matching.hpp"

#include "errors.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>

namespace ixrisk {

void MatchingSettings::validate() const {
    if (m < 1) throw_invalid("matching m must be >= 1");
    if (!(exclusion_window_hours > 0)) throw_invalid("exclusion window must be > 0");
    oafr.validate();
}

void StudyPeriod::validate() const {
    if (end <= start) throw_invalid("study period end must be after start");
}

std::optional<LocationClass> classify_location(bool inside_box, double offset_ft,
                                               double threshold_ft) {
    if (inside_box) return LocationClass::within;
    const double distance = std::abs(offset_ft);
    if (distance > threshold_ft) return std::nullopt; // not intersection-related
    return offset_ft < 0 ? LocationClass::entrance : LocationClass::exit;
}

std::vector<CrashRecord> filter_crashes(const std::vector<CrashRecord>& records,
                                        const std::map<std::string, IntersectionConfig>& configs,
                                        std::vector<DropRecord>* drops) {
    std::vector<CrashRecord> out;
    auto drop = [&](const CrashRecord& c, const std::string& why) {
        if (drops) drops->push_back({c.id, why});
    };
    for (const auto& c : records) {
        const auto cfg = configs.find(c.intersection);
        if (cfg == configs.end()) {
            drop(c, "unknown_intersection");
            continue;
        }
        if (c.single_vehicle) {
            drop(c, "single_vehicle");
            continue;
        }
        if (c.impaired) {
            drop(c, "impaired");
            continue;
        }
        if (c.location_class == LocationClass::exit) {
            drop(c, "exit_location");
            continue;
        }
        if (c.location_class == LocationClass::entrance &&
            !cfg->second.approach(c.at_fault_bearing).is_major) {
            drop(c, "entrance_on_minor_approach");
            continue;
        }
        out.push_back(c);
    }
    return out;
}

std::vector<Timestamp> candidate_controls(Timestamp crash_time, const StudyPeriod& period,
                                          std::span<const Timestamp> intersection_crash_times,
                                          const MatchingSettings& settings) {
    period.validate();
    settings.validate();
    const auto window =
        static_cast<Timestamp>(std::llround(settings.exclusion_window_hours * 3600.0));
    const std::int64_t clock = clock_of_day(crash_time);

    // First date in the period sharing the crash's weekday.
    Timestamp date = date_of(period.start);
    while (weekday(date) != weekday(crash_time)) date += k_seconds_per_day;

    std::vector<Timestamp> out;
    for (; date < period.end; date += k_seconds_per_week) {
        const Timestamp instant = date + clock;
        if (instant == crash_time) continue; // the case itself
        if (instant >= period.end) break;
        if (instant - 1200 < period.start) continue; // 20-minute lookback must fit
        bool excluded = false;
        for (Timestamp t : intersection_crash_times) {
            if (std::llabs(t - instant) <= window) {
                excluded = true;
                break;
            }
        }
        if (!excluded) out.push_back(instant);
    }
    return out;
}

namespace {

// Fisher-Yates over the sorted candidate list. The first m entries are the
// sample; controls that later lose features are replaced by the next entry,
// which is exactly "re-sample from the remaining candidates".
std::vector<Timestamp> shuffled_candidates(std::vector<Timestamp> candidates,
                                           std::uint64_t seed) {
    std::sort(candidates.begin(), candidates.end());
    Rng rng(seed);
    for (std::size_t i = candidates.size() - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(i + 1));
        std::swap(candidates[i], candidates[j]);
    }
    return candidates;
}

} // namespace

std::vector<Timestamp> sample_controls(std::vector<Timestamp> candidates, int m,
                                       std::uint64_t seed) {
    if (static_cast<int>(candidates.size()) < m) {
        throw_invalid("fewer candidates than requested controls");
    }
    auto order = shuffled_candidates(std::move(candidates), seed);
    order.resize(static_cast<std::size_t>(m));
    return order;
}

DatasetBuildResult build_dataset(const std::vector<CrashRecord>& eligible,
                                 const std::vector<CrashRecord>& full_log,
                                 StreamProvider& provider, const StudyPeriod& period,
                                 const MatchingSettings& settings) {
    period.validate();
    settings.validate();

    std::map<std::string, std::vector<Timestamp>> crash_times;
    for (const auto& c : full_log) crash_times[c.intersection].push_back(c.occurred_at);
    for (auto& [id, times] : crash_times) std::sort(times.begin(), times.end());

    std::map<std::string, std::vector<const CrashRecord*>> by_intersection;
    for (const auto& c : eligible) by_intersection[c.intersection].push_back(&c);
    for (auto& [id, list] : by_intersection) {
        std::sort(list.begin(), list.end(),
                  [](const CrashRecord* a, const CrashRecord* b) { return a->id < b->id; });
    }

    DatasetBuildResult result;
    for (auto& [intersection, crashes] : by_intersection) {
        const StreamIndex& streams = provider.streams(intersection);
        const auto& times = crash_times[intersection];

        for (const CrashRecord* crash : crashes) {
            EventKey key;
            key.intersection = intersection;
            key.instant = crash->occurred_at;
            key.location_class = crash->location_class;
            key.role = EventRole::crash;
            key.stratum_id = crash->id;

            ExtractError err;
            auto crash_features =
                extract_features(key, crash->at_fault_bearing, streams, settings.oafr, &err);
            if (!crash_features) {
                result.drops.push_back({crash->id, "crash_features:" + err.reason});
                continue;
            }

            auto candidates =
                candidate_controls(crash->occurred_at, period, times, settings);
            if (static_cast<int>(candidates.size()) < settings.m) {
                result.drops.push_back(
                    {crash->id,
                     "insufficient_candidates(" + std::to_string(candidates.size()) + ")"});
                continue;
            }

            const std::uint64_t seed = mix_seed(settings.rng_seed, hash_name(crash->id));
            const auto order = shuffled_candidates(std::move(candidates), seed);

            Stratum stratum;
            stratum.stratum_id = crash->id;
            stratum.crash = {key, crash->id, std::move(*crash_features)};
            for (Timestamp t : order) {
                if (static_cast<int>(stratum.controls.size()) == settings.m) break;
                EventKey ck = key;
                ck.instant = t;
                ck.role = EventRole::control;
                auto features =
                    extract_features(ck, crash->at_fault_bearing, streams, settings.oafr, &err);
                if (!features) continue; // re-sample from the remaining candidates
                StratumEvent ev;
                ev.key = ck;
                ev.event_id =
                    crash->id + "_ctl" + std::to_string(stratum.controls.size() + 1);
                ev.features = std::move(*features);
                stratum.controls.push_back(std::move(ev));
            }
            if (static_cast<int>(stratum.controls.size()) < settings.m) {
                result.drops.push_back(
                    {crash->id, "insufficient_controls(" +
                                    std::to_string(stratum.controls.size()) + ")"});
                continue;
            }
            auto& bucket = crash->location_class == LocationClass::within ? result.within
                                                                          : result.entrance;
            bucket.push_back(std::move(stratum));
        }
    }

    auto by_id = [](const Stratum& a, const Stratum& b) { return a.stratum_id < b.stratum_id; };
    std::sort(result.within.begin(), result.within.end(), by_id);
    std::sort(result.entrance.begin(), result.entrance.end(), by_id);
    std::sort(result.drops.begin(), result.drops.end(),
              [](const DropRecord& a, const DropRecord& b) { return a.crash_id < b.crash_id; });
    return result;
}

AuditResult audit_dataset(const std::vector<Stratum>& strata,
                          const std::vector<CrashRecord>& full_log,
                          const MatchingSettings& settings) {
    AuditResult audit;
    std::map<std::string, std::vector<Timestamp>> crash_times;
    for (const auto& c : full_log) crash_times[c.intersection].push_back(c.occurred_at);
    const auto window =
        static_cast<Timestamp>(std::llround(settings.exclusion_window_hours * 3600.0));

    for (const auto& s : strata) {
        if (static_cast<int>(s.controls.size()) != settings.m) ++audit.ratio_violations;
        const auto& ck = s.crash.key;
        for (const auto& ctl : s.controls) {
            const auto& k = ctl.key;
            const bool same_factors = k.intersection == ck.intersection &&
                                      k.location_class == ck.location_class &&
                                      weekday(k.instant) == weekday(ck.instant) &&
                                      clock_of_day(k.instant) == clock_of_day(ck.instant) &&
                                      date_of(k.instant) != date_of(ck.instant);
            if (!same_factors) ++audit.factor_violations;
            for (Timestamp t : crash_times[k.intersection]) {
                if (std::llabs(t - k.instant) <= window) {
                    ++audit.exclusion_violations;
                    break;
                }
            }
        }
    }
    return audit;
}

} // namespace ixrisk
