#pragma once

#include "domain.hpp"
#include "features.hpp"
#include "inference.hpp"
#include "matching.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ixrisk {

// Synthetic-world parameters. Everything downstream is a pure function of
// (config, seed): streams, crashes, and pipeline outputs reproduce exactly.
struct ScenarioConfig {
    int n_intersections = 23;
    CivilTime start{2017, 3, 1, 0, 0, 0};
    int weeks = 52;

    int major_through_lanes = 3;
    int minor_through_lanes = 2;
    int major_left_lanes = 1;
    int minor_left_lanes = 1;

    // Demand model: hourly multipliers scaled per intersection.
    std::array<double, 24> hourly_profile{0.15, 0.10, 0.08, 0.08, 0.12, 0.30, 0.65, 1.00,
                                          0.95, 0.80, 0.75, 0.80, 0.85, 0.85, 0.90, 1.00,
                                          1.15, 1.25, 1.05, 0.80, 0.60, 0.45, 0.30, 0.20};
    double weekend_factor = 0.75;
    double major_base_volume = 110.0; // through vehicles per 15 min at multiplier 1
    double minor_base_volume = 45.0;
    double left_share = 0.18;
    double volume_noise_sd = 0.15; // lognormal sigma, shared across lanes per window

    double cycle_seconds = 120.0;
    double cycle_jitter_sd = 6.0;
    double min_green_seconds = 8.0;
    double green_noise_sd = 0.18; // per-cycle lognormal response of the allocator

    double free_flow_mph = 45.0;
    double congestion_dip_mph = 16.0;
    double speed_noise_sd = 3.0;
    double speed_obs_per_minute = 0.9; // Poisson detection rate on major approaches

    double adverse_spells_per_week = 0.6;
    double adverse_mean_hours = 3.0;

    std::map<std::string, double> true_beta; // crash-injection coefficients
    double base_rate = 5e-5;                 // odds scale at the scenario mean
    double frac_single_vehicle = 0.08;
    double frac_impaired = 0.04;
    double exit_crashes_per_intersection_week = 0.10;  // filter-exercise noise
    double minor_crashes_per_intersection_week = 0.06; // non-major at-fault noise

    std::uint64_t seed = 0;

    StudyPeriod period() const;
    void validate() const;
};

ScenarioConfig default_scenario();
ScenarioConfig scenario_from_json(const std::string& json_text);
std::string scenario_to_json(const ScenarioConfig& config);

struct StreamBundle {
    IntersectionConfig config;
    std::vector<VolumeRecord> volumes;
    std::vector<PhaseEvent> phases;
    std::vector<SpeedObservation> speeds;
};

class Scenario {
public:
    explicit Scenario(ScenarioConfig config);

    const ScenarioConfig& config() const { return config_; }
    StudyPeriod period() const { return config_.period(); }
    int n_intersections() const { return config_.n_intersections; }
    std::string intersection_id(int i) const;
    IntersectionConfig intersection_config(int i) const;

    std::vector<WeatherRecord> generate_weather() const;
    StreamBundle generate_streams(int i) const;

    // Scenario mean of the injection covariates per location class, from a
    // systematic 7-hour grid over the whole period (regenerates streams).
    std::map<std::string, double> scenario_mean(LocationClass cls) const;

    // Logit-driven injection (Eq. 2-3 run generatively) plus the noise
    // crashes that exercise the filters. Requires the means for centering.
    std::vector<CrashRecord> inject_crashes(
        int i, const StreamIndex& streams,
        const std::map<std::string, double>& within_mean,
        const std::map<std::string, double>& entrance_mean) const;

    // Injection covariates usable for a location class (entrance events
    // carry no B/C/D variables).
    std::vector<std::string> support_variables(LocationClass cls) const;

private:
    double expected_movement_volume(int i, Bearing b, Movement m, Timestamp t) const;
    double demand_multiplier(Timestamp t) const;
    double intersection_scale(int i) const;
    const std::map<std::string, double>& cached_means() const;

    ScenarioConfig config_;
    // Entrance-usable variables are a subset of the within set with
    // identical values, so one grid pass covers both classes.
    mutable std::optional<std::map<std::string, double>> means_;
};

// StreamProvider that regenerates one intersection at a time, keeping the
// memory footprint flat for year-scale worlds.
class ScenarioStreamProvider : public StreamProvider {
public:
    ScenarioStreamProvider(const Scenario& scenario, std::vector<WeatherRecord> weather);

    std::vector<std::string> intersections() override;
    const StreamIndex& streams(const std::string& intersection) override;

private:
    const Scenario& scenario_;
    std::vector<WeatherRecord> weather_;
    std::string cached_id_;
    std::unique_ptr<StreamIndex> cached_;
};

// -------- full scenario pipeline + recovery --------

struct ScenarioDatasets {
    std::vector<CrashRecord> all_crashes; // full log, pre-filter
    std::vector<CrashRecord> eligible;
    std::vector<DropRecord> filter_drops;
    DatasetBuildResult matched;
};

// generate -> inject -> filter -> match, entirely in memory.
ScenarioDatasets run_scenario_pipeline(const Scenario& scenario,
                                       const MatchingSettings& matching);

struct RecoveryCoefficient {
    std::string name;
    double true_beta = 0.0;
    double mean_estimate = 0.0;
    double bias = 0.0;
    double rmse = 0.0;
    double coverage95 = 0.0;       // fraction of replications covering truth
    double sign_agreement = 0.0;   // fraction matching sign(true beta)
    double mean_abs_std_effect = 0.0; // |beta| * sd(x), averaged over reps
};

struct RecoveryReplication {
    int replication = 0;
    std::uint64_t seed = 0;
    long crashes = 0;
    long strata = 0;
    bool used = false; // false when discarded for < 30 strata
    double heldout_auc = 0.0;
    double null_auc_sd = 0.0; // permutation null
    double max_r_hat = 0.0;
};

struct RecoveryReport {
    std::vector<RecoveryCoefficient> coefficients;
    std::vector<RecoveryReplication> replications;
    int replications_used = 0;
};

// Runs the full pipeline per replication (generate, filter, match, screen,
// fit) and reports bias / RMSE / coverage of true_beta plus a held-out AUC
// check against a permutation null.
RecoveryReport recovery_experiment(const ScenarioConfig& base_config, int replications,
                                   const McmcSettings& mcmc, int threads);

} // namespace ixrisk
