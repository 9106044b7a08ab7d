#pragma once

#include "domain.hpp"
#include "features.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ixrisk {

struct MatchingSettings {
    int m = 4;                         // controls per case
    double exclusion_window_hours = 3; // no crash this close to a control
    std::uint64_t rng_seed = 0;
    OafrSettings oafr;

    void validate() const;
};

struct StudyPeriod {
    Timestamp start = 0;
    Timestamp end = 0; // exclusive

    void validate() const;
};

// Distance rule for raw crash positions: inside the box is "within";
// otherwise the signed stop-bar offset decides (negative = upstream).
// nullopt marks the crash as not intersection-related.
std::optional<LocationClass> classify_location(bool inside_box, double offset_ft,
                                               double threshold_ft = 250.0);

struct DropRecord {
    std::string crash_id;
    std::string reason;
};

// Keeps multi-vehicle, unimpaired crashes located within or at the entrance;
// entrance crashes must come from a major approach (speed data exists only
// there). Everything else lands in the drop log.
std::vector<CrashRecord> filter_crashes(const std::vector<CrashRecord>& records,
                                        const std::map<std::string, IntersectionConfig>& configs,
                                        std::vector<DropRecord>* drops);

// Same weekday and clock time on other dates of the study period, excluding
// instants with a crash at the same intersection inside the exclusion window
// and instants whose 20-minute lookback precedes the study start. Sorted
// ascending.
std::vector<Timestamp> candidate_controls(Timestamp crash_time, const StudyPeriod& period,
                                          std::span<const Timestamp> intersection_crash_times,
                                          const MatchingSettings& settings);

// Uniform sample without replacement; deterministic given the seed.
std::vector<Timestamp> sample_controls(std::vector<Timestamp> candidates, int m,
                                       std::uint64_t seed);

// Hands out per-intersection stream indices. build_dataset groups work by
// intersection so implementations may materialize one intersection at a time.
class StreamProvider {
public:
    virtual ~StreamProvider() = default;
    virtual std::vector<std::string> intersections() = 0;
    virtual const StreamIndex& streams(const std::string& intersection) = 0;
};

struct DatasetBuildResult {
    std::vector<Stratum> within;
    std::vector<Stratum> entrance;
    std::vector<DropRecord> drops;
};

// The matched case-control construction: for every eligible crash, samples m
// controls (re-sampling candidates that lose features to missing data) and
// attaches complete feature vectors. Deterministic given (inputs, seed);
// per-crash sampling seeds derive from the crash id, so results do not
// depend on processing order.
DatasetBuildResult build_dataset(const std::vector<CrashRecord>& eligible,
                                 const std::vector<CrashRecord>& full_log,
                                 StreamProvider& provider, const StudyPeriod& period,
                                 const MatchingSettings& settings);

struct AuditResult {
    long ratio_violations = 0;     // strata without exactly m controls
    long factor_violations = 0;    // matching factors differ within a stratum
    long exclusion_violations = 0; // a crash within the window of a control
    bool clean() const {
        return ratio_violations == 0 && factor_violations == 0 && exclusion_violations == 0;
    }
};

// Post-hoc integrity audit against the full crash log.
AuditResult audit_dataset(const std::vector<Stratum>& strata,
                          const std::vector<CrashRecord>& full_log,
                          const MatchingSettings& settings);

} // namespace ixrisk
