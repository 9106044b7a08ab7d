#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ixrisk {

// Sample Pearson correlation; throws invalid_input for length < 3, length
// mismatch, or a constant vector.
double pearson(std::span<const double> x, std::span<const double> y);

struct MicOptions {
    double alpha = 0.6; // grid bound B(n) = n^alpha
    int clump_factor = 15;
};

// Maximal information coefficient (the original MINE statistic): maximum
// over grids with x_bins * y_bins <= n^alpha of normalized mutual
// information, approximated by equipartitioning one axis and optimizing the
// other with dynamic programming; both orientations are searched, so the
// result is symmetric. Constant input yields 0.
double mic(std::span<const double> x, std::span<const double> y, const MicOptions& opts = {});

struct ScreenedPair {
    std::string var_a;
    std::string var_b;
    double pearson_r; // NaN when either column is constant
    double mic;
    bool flagged_linear = false;    // |pearson_r| > r_threshold
    bool flagged_nonlinear = false; // mic > mic_threshold
    bool flagged() const { return flagged_linear || flagged_nonlinear; }
};

struct ScreeningReport {
    double r_threshold = 0.6;
    double mic_threshold = 0.7;
    std::vector<ScreenedPair> pairs; // canonical order (column-index pairs)
    std::vector<std::string> retained;
    std::vector<std::pair<std::string, std::string>> dropped; // (variable, reason)
};

struct ScreenOptions {
    double r_threshold = 0.6;
    double mic_threshold = 0.7;
    // Within-slice pairs always; additionally same-measure pairs across
    // slices when true.
    bool cross_slice = true;
    MicOptions mic;
    int threads = 1;
};

// Evaluates variable pairs inside each time-slice scope (untagged variables
// such as weather belong to every scope), flags by the OR rule, and prunes
// greedily until no flagged pair survives among the retained set.
ScreeningReport screen(const std::vector<std::string>& names,
                       const std::vector<std::vector<double>>& columns,
                       const ScreenOptions& opts = {});

// The greedy pruning pass alone (re-run by tests on a finished report).
void prune(ScreeningReport& report, const std::vector<std::string>& names);

} // namespace ixrisk
