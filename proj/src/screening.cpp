#include "screening.hpp"

#include "domain.hpp"
#include "errors.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace ixrisk {

namespace {

bool is_constant(std::span<const double> v) {
    for (double x : v) {
        if (x != v[0]) return false;
    }
    return true;
}

} // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw_invalid("pearson: length mismatch");
    const std::size_t n = x.size();
    if (n < 3) throw_invalid("pearson: need at least 3 observations");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw_invalid("pearson: correlation undefined for a constant vector");
    return sxy / std::sqrt(sxx * syy);
}

// -------- MIC --------

namespace {

// Row assignment for one axis: as-even-as-possible partition into at most k
// rows, keeping tied values together (MINE's EquipartitionYAxis).
std::vector<int> equipartition(const std::vector<double>& sorted_values,
                               const std::vector<std::size_t>& order, std::size_t n, int k,
                               int* rows_used) {
    std::vector<int> row_of_point(n, 0);
    int row = 0;
    std::size_t placed = 0;
    std::size_t in_row = 0;
    double desired = static_cast<double>(n) / k;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && sorted_values[j] == sorted_values[i]) ++j;
        const std::size_t block = j - i;
        if (in_row != 0 &&
            std::abs(static_cast<double>(in_row + block) - desired) >=
                std::abs(static_cast<double>(in_row) - desired) &&
            row + 1 < k) {
            ++row;
            in_row = 0;
            desired = static_cast<double>(n - placed) / (k - row);
        }
        for (std::size_t t = i; t < j; ++t) row_of_point[order[t]] = row;
        in_row += block;
        placed += block;
        i = j;
    }
    *rows_used = row + 1;
    return row_of_point;
}

struct Clump {
    int size = 0;
    std::vector<int> row_counts;
};

// Maximal runs of x-consecutive points sharing one row; points with tied x
// form atomic blocks that never split.
std::vector<Clump> clumps_partition(const std::vector<double>& x_sorted,
                                    const std::vector<int>& rows_in_x_order, int n_rows) {
    std::vector<Clump> clumps;
    const std::size_t n = x_sorted.size();
    std::size_t i = 0;
    int open_row = -2; // row id of the currently open pure clump, -2 none
    while (i < n) {
        std::size_t j = i;
        while (j < n && x_sorted[j] == x_sorted[i]) ++j;
        bool pure = true;
        for (std::size_t t = i + 1; t < j; ++t) {
            if (rows_in_x_order[t] != rows_in_x_order[i]) {
                pure = false;
                break;
            }
        }
        const int block_row = pure ? rows_in_x_order[i] : -1;
        if (block_row >= 0 && block_row == open_row) {
            auto& c = clumps.back();
            c.size += static_cast<int>(j - i);
            c.row_counts[static_cast<std::size_t>(block_row)] += static_cast<int>(j - i);
        } else {
            Clump c;
            c.size = static_cast<int>(j - i);
            c.row_counts.assign(static_cast<std::size_t>(n_rows), 0);
            for (std::size_t t = i; t < j; ++t) {
                c.row_counts[static_cast<std::size_t>(rows_in_x_order[t])]++;
            }
            clumps.push_back(std::move(c));
            open_row = block_row; // -1 blocks a merge with the next run
        }
        i = j;
    }
    return clumps;
}

std::vector<Clump> superclumps(std::vector<Clump> clumps, int k_hat) {
    const int k = static_cast<int>(clumps.size());
    if (k <= k_hat) return clumps;
    int total = 0;
    for (const auto& c : clumps) total += c.size;
    std::vector<Clump> out;
    out.reserve(static_cast<std::size_t>(k_hat));
    double desired = static_cast<double>(total) / k_hat;
    int placed = 0;
    for (int i = 0; i < k; ++i) {
        const Clump& c = clumps[static_cast<std::size_t>(i)];
        bool open_new = out.empty();
        if (!out.empty() && static_cast<int>(out.size()) < k_hat) {
            const int cur = out.back().size;
            if (std::abs(cur + c.size - desired) >= std::abs(cur - desired)) {
                open_new = true;
                desired = static_cast<double>(total - placed) /
                          (k_hat - static_cast<int>(out.size()));
            }
        }
        if (open_new) {
            out.push_back(c);
        } else {
            auto& back = out.back();
            back.size += c.size;
            for (std::size_t r = 0; r < back.row_counts.size(); ++r) {
                back.row_counts[r] += c.row_counts[r];
            }
        }
        placed += c.size;
    }
    return out;
}

inline double xlogx(double v) { return v > 0.0 ? v * std::log(v) : 0.0; }

// For a fixed row partition Q, the best mutual information using at most
// l columns, for every l in [2, max_cols]; natural-log units.
std::vector<double> optimize_x_axis(const std::vector<Clump>& clumps, int n_rows, int max_cols,
                                    std::size_t n_points) {
    const int k = static_cast<int>(clumps.size());
    std::vector<double> best(static_cast<std::size_t>(std::max(0, max_cols - 1)),
                             0.0); // index l-2
    if (k < 2 || max_cols < 2) return best;

    // Prefix counts over clumps.
    std::vector<int> csize(static_cast<std::size_t>(k + 1), 0);
    std::vector<std::vector<int>> crow(static_cast<std::size_t>(k + 1),
                                       std::vector<int>(static_cast<std::size_t>(n_rows), 0));
    for (int t = 1; t <= k; ++t) {
        const auto& c = clumps[static_cast<std::size_t>(t - 1)];
        csize[static_cast<std::size_t>(t)] = csize[static_cast<std::size_t>(t - 1)] + c.size;
        crow[static_cast<std::size_t>(t)] = crow[static_cast<std::size_t>(t - 1)];
        for (int r = 0; r < n_rows; ++r) {
            crow[static_cast<std::size_t>(t)][static_cast<std::size_t>(r)] +=
                c.row_counts[static_cast<std::size_t>(r)];
        }
    }

    // cost(s, t] = n_col * H(rows | column) * n  (i.e. n_col ln n_col - sum m_r ln m_r)
    auto cost = [&](int s, int t) {
        const double n_col = static_cast<double>(csize[static_cast<std::size_t>(t)] -
                                                 csize[static_cast<std::size_t>(s)]);
        double v = xlogx(n_col);
        for (int r = 0; r < n_rows; ++r) {
            v -= xlogx(static_cast<double>(crow[static_cast<std::size_t>(t)][static_cast<std::size_t>(r)] -
                                           crow[static_cast<std::size_t>(s)][static_cast<std::size_t>(r)]));
        }
        return v;
    };

    std::vector<std::vector<double>> cost_tab(static_cast<std::size_t>(k + 1));
    for (int s = 0; s <= k; ++s) {
        cost_tab[static_cast<std::size_t>(s)].assign(static_cast<std::size_t>(k + 1), 0.0);
        for (int t = s + 1; t <= k; ++t) {
            cost_tab[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)] = cost(s, t);
        }
    }

    const int l_max = std::min(max_cols, k);
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> f(static_cast<std::size_t>(l_max + 1),
                                       std::vector<double>(static_cast<std::size_t>(k + 1), inf));
    for (int t = 1; t <= k; ++t) {
        f[1][static_cast<std::size_t>(t)] = cost_tab[0][static_cast<std::size_t>(t)];
    }
    for (int l = 2; l <= l_max; ++l) {
        for (int t = l; t <= k; ++t) {
            double m = inf;
            for (int s = l - 1; s < t; ++s) {
                const double v = f[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(s)] +
                                 cost_tab[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)];
                if (v < m) m = v;
            }
            f[static_cast<std::size_t>(l)][static_cast<std::size_t>(t)] = m;
        }
    }

    // H(Q) over all points.
    double hq = std::log(static_cast<double>(n_points));
    {
        double s = 0.0;
        for (int r = 0; r < n_rows; ++r) {
            s += xlogx(static_cast<double>(crow[static_cast<std::size_t>(k)][static_cast<std::size_t>(r)]));
        }
        hq -= s / static_cast<double>(n_points);
    }

    double running = 0.0;
    for (int l = 2; l <= max_cols; ++l) {
        const int use = std::min(l, l_max);
        const double cond = f[static_cast<std::size_t>(use)][static_cast<std::size_t>(k)] /
                            static_cast<double>(n_points);
        const double info = std::max(0.0, hq - cond);
        running = std::max(running, info);
        best[static_cast<std::size_t>(l - 2)] = running;
    }
    return best;
}

double mic_one_orientation(const std::vector<double>& x, const std::vector<double>& y, int b,
                           const MicOptions& opts) {
    const std::size_t n = x.size();
    std::vector<std::size_t> x_order(n), y_order(n);
    std::iota(x_order.begin(), x_order.end(), 0u);
    std::iota(y_order.begin(), y_order.end(), 0u);
    std::sort(x_order.begin(), x_order.end(),
              [&](std::size_t a, std::size_t c) { return x[a] < x[c]; });
    std::sort(y_order.begin(), y_order.end(),
              [&](std::size_t a, std::size_t c) { return y[a] < y[c]; });
    std::vector<double> x_sorted(n), y_sorted(n);
    for (std::size_t i = 0; i < n; ++i) {
        x_sorted[i] = x[x_order[i]];
        y_sorted[i] = y[y_order[i]];
    }

    double best = 0.0;
    for (int ybins = 2; ybins <= b / 2; ++ybins) {
        const int xmax = b / ybins;
        if (xmax < 2) break;
        int rows_used = 0;
        const auto row_of_point = equipartition(y_sorted, y_order, n, ybins, &rows_used);
        if (rows_used < 2) continue;
        std::vector<int> rows_in_x_order(n);
        for (std::size_t i = 0; i < n; ++i) rows_in_x_order[i] = row_of_point[x_order[i]];

        auto clumps = clumps_partition(x_sorted, rows_in_x_order, rows_used);
        const int k_hat = std::max(2, opts.clump_factor * xmax);
        clumps = superclumps(std::move(clumps), k_hat);

        const auto info = optimize_x_axis(clumps, rows_used, xmax, n);
        for (int xbins = 2; xbins <= xmax; ++xbins) {
            const double denom = std::log(static_cast<double>(std::min(xbins, ybins)));
            const double value = info[static_cast<std::size_t>(xbins - 2)] / denom;
            best = std::max(best, value);
        }
    }
    return best;
}

} // namespace

double mic(std::span<const double> x, std::span<const double> y, const MicOptions& opts) {
    if (x.size() != y.size()) throw_invalid("mic: length mismatch");
    const std::size_t n = x.size();
    if (n < 10) throw_invalid("mic: need at least 10 observations");
    const std::vector<double> xv(x.begin(), x.end());
    const std::vector<double> yv(y.begin(), y.end());
    if (is_constant(xv) || is_constant(yv)) return 0.0; // no dependence detectable
    const int b = std::max(4, static_cast<int>(std::floor(
                                  std::pow(static_cast<double>(n), opts.alpha))));
    const double m1 = mic_one_orientation(xv, yv, b, opts);
    const double m2 = mic_one_orientation(yv, xv, b, opts);
    return std::clamp(std::max(m1, m2), 0.0, 1.0);
}

// -------- screen / prune --------

namespace {

std::vector<std::pair<int, int>> select_pairs(const std::vector<std::string>& names,
                                              bool cross_slice) {
    const int p = static_cast<int>(names.size());
    std::vector<int> tag(static_cast<std::size_t>(p), 0);
    std::vector<std::string> base(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) {
        const auto [b, s] = split_slice_suffix(names[static_cast<std::size_t>(i)]);
        base[static_cast<std::size_t>(i)] = b;
        tag[static_cast<std::size_t>(i)] = s;
    }
    std::set<std::pair<int, int>> out;
    for (int i = 0; i < p; ++i) {
        for (int j = i + 1; j < p; ++j) {
            const int ti = tag[static_cast<std::size_t>(i)];
            const int tj = tag[static_cast<std::size_t>(j)];
            // Untagged variables (weather) live in every slice scope.
            const bool same_scope = ti == tj || ti == 0 || tj == 0;
            const bool cross_same_measure = cross_slice && ti != tj &&
                                            base[static_cast<std::size_t>(i)] ==
                                                base[static_cast<std::size_t>(j)];
            if (same_scope || cross_same_measure) out.emplace(i, j);
        }
    }
    return {out.begin(), out.end()};
}

} // namespace

ScreeningReport screen(const std::vector<std::string>& names,
                       const std::vector<std::vector<double>>& columns,
                       const ScreenOptions& opts) {
    if (names.size() != columns.size()) throw_invalid("screen: names/columns size mismatch");
    const auto pair_index = select_pairs(names, opts.cross_slice);

    ScreeningReport report;
    report.r_threshold = opts.r_threshold;
    report.mic_threshold = opts.mic_threshold;
    report.pairs.resize(pair_index.size());

    std::vector<char> constant(columns.size());
    for (std::size_t i = 0; i < columns.size(); ++i) {
        constant[i] = columns[i].empty() || is_constant(columns[i]);
    }

    parallel_for(pair_index.size(), opts.threads, [&](std::size_t idx) {
        const auto [i, j] = pair_index[idx];
        const auto& a = columns[static_cast<std::size_t>(i)];
        const auto& b = columns[static_cast<std::size_t>(j)];
        ScreenedPair pr;
        pr.var_a = names[static_cast<std::size_t>(i)];
        pr.var_b = names[static_cast<std::size_t>(j)];
        if (constant[static_cast<std::size_t>(i)] || constant[static_cast<std::size_t>(j)]) {
            pr.pearson_r = std::numeric_limits<double>::quiet_NaN();
            pr.mic = 0.0;
        } else {
            pr.pearson_r = pearson(a, b);
            pr.mic = mic(a, b, opts.mic);
        }
        pr.flagged_linear = std::isfinite(pr.pearson_r) &&
                            std::abs(pr.pearson_r) > opts.r_threshold;
        pr.flagged_nonlinear = pr.mic > opts.mic_threshold;
        report.pairs[idx] = std::move(pr);
    });

    prune(report, names);
    return report;
}

void prune(ScreeningReport& report, const std::vector<std::string>& names) {
    report.retained.clear();
    report.dropped.clear();

    std::map<std::string, std::vector<const ScreenedPair*>> flagged_partners;
    for (const auto& pr : report.pairs) {
        if (!pr.flagged()) continue;
        flagged_partners[pr.var_a].push_back(&pr);
        flagged_partners[pr.var_b].push_back(&pr);
    }

    std::set<std::string> retained(names.begin(), names.end());
    auto live_degree = [&](const std::string& v, double* mean_abs_r) {
        int deg = 0;
        double sum = 0.0;
        for (const auto* pr : flagged_partners[v]) {
            const std::string& other = pr->var_a == v ? pr->var_b : pr->var_a;
            if (!retained.count(other)) continue;
            ++deg;
            sum += std::isfinite(pr->pearson_r) ? std::abs(pr->pearson_r) : 0.0;
        }
        *mean_abs_r = deg > 0 ? sum / deg : 0.0;
        return deg;
    };

    for (;;) {
        // Drop the member with the most flagged live partners; ties go to the
        // larger mean |r|, then to the lexicographically larger name.
        std::string victim;
        int best_deg = 0;
        double best_r = -1.0;
        for (const auto& [v, partners] : flagged_partners) {
            if (!retained.count(v)) continue;
            double mean_r = 0.0;
            const int deg = live_degree(v, &mean_r);
            if (deg == 0) continue;
            if (deg > best_deg || (deg == best_deg && mean_r > best_r) ||
                (deg == best_deg && mean_r == best_r && v > victim)) {
                victim = v;
                best_deg = deg;
                best_r = mean_r;
            }
        }
        if (best_deg == 0) break;
        retained.erase(victim);
        report.dropped.emplace_back(victim, "flagged with " + std::to_string(best_deg) +
                                                " retained partner(s)");
    }

    for (const auto& name : names) {
        if (retained.count(name)) report.retained.push_back(name);
    }
}

} // namespace ixrisk
