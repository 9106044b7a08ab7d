#include "csv.hpp"
#include "pipeline.hpp"

#include <cmath>
#include <limits>

namespace ixrisk {

namespace {

struct GroupStats {
    double mean = 0.0, sd = 0.0;
    double min = 0.0, max = 0.0;
    long n = 0;
};

GroupStats stats_of(const std::vector<double>& column, const std::vector<EventRole>& roles,
                    EventRole wanted) {
    GroupStats g;
    g.min = std::numeric_limits<double>::infinity();
    g.max = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t r = 0; r < column.size(); ++r) {
        if (roles[r] != wanted) continue;
        ++g.n;
        sum += column[r];
        g.min = std::min(g.min, column[r]);
        g.max = std::max(g.max, column[r]);
    }
    if (g.n == 0) return g;
    g.mean = sum / static_cast<double>(g.n);
    double ss = 0.0;
    for (std::size_t r = 0; r < column.size(); ++r) {
        if (roles[r] != wanted) continue;
        ss += (column[r] - g.mean) * (column[r] - g.mean);
    }
    g.sd = g.n > 1 ? std::sqrt(ss / static_cast<double>(g.n - 1)) : 0.0;
    return g;
}

} // namespace

// Tables 1-2 layout: one row per (variable, time slice), crash and
// non-crash statistics side by side.
std::string descriptive_stats_csv(const WideTable& table) {
    CsvBuilder csv({"variable", "time_slice", "crash_mean", "crash_sd", "crash_min",
                    "crash_max", "noncrash_mean", "noncrash_sd", "noncrash_min",
                    "noncrash_max"});
    for (std::size_t c = 0; c < table.variables.size(); ++c) {
        const auto [base, slice] = split_slice_suffix(table.variables[c]);
        const GroupStats crash = stats_of(table.columns[c], table.role, EventRole::crash);
        const GroupStats control = stats_of(table.columns[c], table.role, EventRole::control);
        csv.cell(base).cell(slice == 0 ? std::string("-") : std::to_string(slice));
        auto emit = [&](const GroupStats& g) {
            if (g.n == 0) {
                csv.cell(std::string()).cell(std::string()).cell(std::string()).cell(
                    std::string());
            } else {
                csv.cell(g.mean).cell(g.sd).cell(g.min).cell(g.max);
            }
        };
        emit(crash);
        emit(control);
        csv.end_row();
    }
    return csv.str();
}

} // namespace ixrisk
