#include "oracles.hpp"

#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace ixrisk::oracle {

double mann_whitney_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    long pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

namespace {

// Mutual information of a fixed grid, natural log; cuts are indices into the
// sorted coordinate (cut after position c).
double grid_information(const std::vector<int>& xr, const std::vector<int>& yr, int xb,
                        int yb) {
    const auto n = static_cast<double>(xr.size());
    std::vector<double> joint(static_cast<std::size_t>(xb * yb), 0.0);
    std::vector<double> px(static_cast<std::size_t>(xb), 0.0);
    std::vector<double> py(static_cast<std::size_t>(yb), 0.0);
    for (std::size_t i = 0; i < xr.size(); ++i) {
        joint[static_cast<std::size_t>(xr[i] * yb + yr[i])] += 1.0;
        px[static_cast<std::size_t>(xr[i])] += 1.0;
        py[static_cast<std::size_t>(yr[i])] += 1.0;
    }
    double info = 0.0;
    for (int a = 0; a < xb; ++a) {
        for (int b = 0; b < yb; ++b) {
            const double pj = joint[static_cast<std::size_t>(a * yb + b)] / n;
            if (pj <= 0) continue;
            info += pj * std::log(pj / ((px[static_cast<std::size_t>(a)] / n) *
                                        (py[static_cast<std::size_t>(b)] / n)));
        }
    }
    return info;
}

// All ways to choose (bins-1) cut positions from the distinct-value
// boundaries; assigns bin ids per point and recurses over both axes.
struct Axis {
    std::vector<double> sorted_values;
    std::vector<std::size_t> order; // original index by sorted position
    std::vector<int> boundaries;    // positions where sorted value changes
};

Axis make_axis(const std::vector<double>& v) {
    Axis ax;
    ax.order.resize(v.size());
    std::iota(ax.order.begin(), ax.order.end(), 0u);
    std::sort(ax.order.begin(), ax.order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    ax.sorted_values.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) ax.sorted_values[i] = v[ax.order[i]];
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (ax.sorted_values[i] != ax.sorted_values[i - 1]) {
            ax.boundaries.push_back(static_cast<int>(i));
        }
    }
    return ax;
}

std::vector<int> bin_assignment(const Axis& ax, const std::vector<int>& cuts) {
    std::vector<int> bin_of(ax.order.size(), 0);
    int bin = 0;
    std::size_t next = 0;
    for (std::size_t pos = 0; pos < ax.order.size(); ++pos) {
        while (next < cuts.size() && static_cast<int>(pos) >= cuts[next]) {
            ++bin;
            ++next;
        }
        bin_of[ax.order[pos]] = bin;
    }
    return bin_of;
}

void for_each_combination(int n_boundaries, int k, std::vector<int>& pick,
                          const std::function<void(const std::vector<int>&)>& fn,
                          int start = 0) {
    if (static_cast<int>(pick.size()) == k) {
        fn(pick);
        return;
    }
    for (int i = start; i < n_boundaries; ++i) {
        pick.push_back(i);
        for_each_combination(n_boundaries, k, pick, fn, i + 1);
        pick.pop_back();
    }
}

} // namespace

double exhaustive_mic(const std::vector<double>& x, const std::vector<double>& y,
                      double alpha) {
    const auto n = x.size();
    const int b = std::max(4, static_cast<int>(std::floor(
                                  std::pow(static_cast<double>(n), alpha))));
    const Axis ax = make_axis(x);
    const Axis ay = make_axis(y);
    double best = 0.0;

    for (int xb = 2; xb <= b / 2; ++xb) {
        for (int yb = 2; xb * yb <= b; ++yb) {
            const double denom = std::log(static_cast<double>(std::min(xb, yb)));
            std::vector<int> xpick;
            for_each_combination(
                static_cast<int>(ax.boundaries.size()), xb - 1, xpick,
                [&](const std::vector<int>& xc) {
                    std::vector<int> xcuts;
                    for (int i : xc) xcuts.push_back(ax.boundaries[static_cast<std::size_t>(i)]);
                    const auto xr = bin_assignment(ax, xcuts);
                    std::vector<int> ypick;
                    for_each_combination(
                        static_cast<int>(ay.boundaries.size()), yb - 1, ypick,
                        [&](const std::vector<int>& yc) {
                            std::vector<int> ycuts;
                            for (int i : yc) {
                                ycuts.push_back(ay.boundaries[static_cast<std::size_t>(i)]);
                            }
                            const auto yr = bin_assignment(ay, ycuts);
                            const double info = grid_information(xr, yr, xb, yb);
                            best = std::max(best, info / denom);
                        });
                });
        }
    }
    return std::min(1.0, best);
}

Eigen::VectorXd fd_gradient(const Eigen::VectorXd& beta, const ClogitData& data, double h) {
    Eigen::VectorXd grad(beta.size());
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        Eigen::VectorXd hi = beta, lo = beta;
        hi(j) += h;
        lo(j) -= h;
        grad(j) = (clogit_loglik(hi, data) - clogit_loglik(lo, data)) / (2.0 * h);
    }
    return grad;
}

ClogitData simulate_matched(const Eigen::VectorXd& beta, int n_strata, int m,
                            std::uint64_t seed) {
    Rng rng(seed);
    const auto k = beta.size();
    ClogitData data;
    data.m = m;
    for (Eigen::Index j = 0; j < k; ++j) {
        data.variables.push_back("x" + std::to_string(j));
    }
    for (int s = 0; s < n_strata; ++s) {
        Eigen::MatrixXd members(m + 1, k);
        for (Eigen::Index r = 0; r < members.rows(); ++r) {
            for (Eigen::Index c = 0; c < k; ++c) members(r, c) = rng.normal();
        }
        // Conditional case assignment: P(case = j) = softmax(beta' x_j).
        Eigen::VectorXd eta = members * beta;
        const double emax = eta.maxCoeff();
        Eigen::VectorXd w = (eta.array() - emax).exp();
        w /= w.sum();
        double u = rng.uniform();
        int case_row = 0;
        for (Eigen::Index r = 0; r < w.size(); ++r) {
            u -= w(r);
            if (u <= 0) {
                case_row = static_cast<int>(r);
                break;
            }
        }
        members.row(0).swap(members.row(case_row));
        data.strata.push_back(std::move(members));
    }
    return data;
}

} // namespace ixrisk::oracle
