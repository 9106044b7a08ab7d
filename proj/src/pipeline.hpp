#pragma once

#include "domain.hpp"
#include "inference.hpp"
#include "matching.hpp"
#include "risk.hpp"
#include "simgen.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ixrisk {

// In-memory form of the wide feature CSV (one row per event).
struct WideTable {
    std::vector<std::string> stratum_id;
    std::vector<std::string> event_id;
    std::vector<EventRole> role;
    std::vector<std::string> intersection;
    std::vector<Timestamp> instant;
    std::vector<LocationClass> location_class;
    std::vector<std::string> variables;
    std::vector<std::vector<double>> columns; // column-major, aligned with variables

    std::size_t rows() const { return stratum_id.size(); }
    int column_of(const std::string& variable) const; // -1 when absent
    std::vector<Stratum> to_strata() const;
};

std::string wide_csv(const std::vector<Stratum>& strata, LocationClass location_class);
WideTable load_wide_csv(const std::string& path);

// Slice-k projection: slice-tagged variables of that window lose their
// suffix (the Table 5/7 presentation), untagged variables pass through,
// everything else is dropped.
WideTable slice_view(const WideTable& table, int slice);

// Tables 1-2 style descriptive statistics (mean/sd/min/max by crash role).
std::string descriptive_stats_csv(const WideTable& table);

// FittedModel JSON artifact.
std::string model_to_json(const FittedModel& model);
FittedModel model_from_json(const std::string& json_text);

struct FitOptions {
    McmcSettings mcmc;
    std::vector<std::string> variables; // empty = every feature column
    int slice = 0;                      // 0 = full window
    bool standardize = false;
    bool backward = false; // MLE-guided backward elimination before the Bayes fit
    bool strict = false;   // non-convergence becomes an error
};

// Fits on an in-memory table (the CSV-facing stage wraps this).
FittedModel fit_model(const WideTable& table, const FitOptions& options);

struct ScoredRow {
    RiskScore score;
};

std::vector<RiskScore> score_table(const FittedModel& model, const WideTable& table);

// -------- file-level pipeline stages (the CLI surface) --------

namespace stages {

void simulate(const std::string& scenario_json, const std::string& out_dir, int threads);
void prepare(const std::string& streams_dir, const std::string& out_dir);
void match(const std::string& streams_dir, const std::string& crashes_csv, int m,
           std::uint64_t seed, const std::string& out_dir, int threads);
void screen(const std::string& data_csv, double r_threshold, double mic_threshold,
            int slice, bool cross_slice, const std::string& out_csv, int threads);
void fit(const std::string& data_csv, const FitOptions& options, const std::string& out_json);
void score(const std::string& model_json, const std::string& paper_model,
           const std::string& data_csv, const std::string& out_csv);
double evaluate(const std::string& scores_csv, const std::string& out_csv);
void report(const std::string& data_csv, const std::string& out_csv);
void recover(const std::string& scenario_json, int replications, std::uint64_t seed,
             const std::string& out_dir, int threads);

} // namespace stages

} // namespace ixrisk
