#pragma once

#include "domain.hpp"
#include "inference.hpp"

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ixrisk {

// A fitted (or embedded) model usable for odds-ratio scoring. Slice models
// carry unsuffixed variable names in the Table 5/7 presentation; slice = 0
// means a full-window model with slice-tagged names.
struct ModelVariable {
    std::string name;
    double mean = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;       // 95% BCI for the coefficient
    double ci90_lo = std::numeric_limits<double>::quiet_NaN();
    double ci90_hi = std::numeric_limits<double>::quiet_NaN();
    double or_mean = 0.0;
    double or_lo = 0.0, or_hi = 0.0;       // 95% BCI for the odds ratio
    SignificanceLevel sig = SignificanceLevel::none;
    double sd = 0.0;
    double r_hat = 0.0;
    double ess = 0.0;
};

struct StandardizeInfo {
    double mean = 0.0;
    double sd = 1.0;
};

struct FittedModel {
    std::string name;
    LocationClass location_class = LocationClass::within;
    int slice = 0; // 0 = full window
    std::vector<ModelVariable> variables;
    double auc = std::numeric_limits<double>::quiet_NaN(); // published / evaluated
    bool embedded = false; // true for the paper reference models

    // Fit provenance (empty for embedded models).
    McmcSettings mcmc;
    std::vector<double> acceptance_rates;
    std::map<std::string, StandardizeInfo> standardize;
    std::int64_t dataset_rows = 0;
    std::int64_t dataset_strata = 0;
    int dataset_m = 0;
    std::string variable_hash;
    bool converged = true;

    std::map<std::string, double> beta() const;
};

// exp(sum_k beta_k (x1_k - x2_k)); keys of both vectors must cover beta.
double odds_ratio_pair(const std::map<std::string, double>& beta, const FeatureVector& x1,
                       const FeatureVector& x2);

struct RiskScore {
    std::string event_id;
    std::string stratum_id;
    double odds_ratio = 1.0;
    double adjusted = 1.0; // filled by adjust_scores
    EventRole label = EventRole::control;
};

// Eq. 7: odds ratio of the event against the componentwise control mean of
// its stratum.
double score_event(const std::map<std::string, double>& beta, const FeatureVector& x,
                   const std::vector<const FeatureVector*>& stratum_controls);

// Divides by the batch maximum; ranking (hence ROC) is unchanged.
void adjust_scores(std::vector<RiskScore>& scores);

struct RocPoint {
    double threshold;
    double fpr;
    double tpr;
};

struct RocResult {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

// Threshold sweep over distinct score values plus sentinels; trapezoidal
// AUC, which equals the Mann-Whitney statistic with ties counted 0.5.
RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Embedded reference models (Tables 4-7 as printed). Valid names:
// within_full, within_slice1..4, entrance_full, entrance_slice1..4.
const FittedModel& load_paper_model(const std::string& name);
std::vector<std::string> paper_model_names();

} // namespace ixrisk
