#include "screening.hpp"

#include "errors.hpp"
#include "oracles.hpp"
#include "rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace ixrisk;

TEST_CASE("pearson hand cases") {
    const std::vector<double> x = {1, 2, 3};
    CHECK(pearson(x, x) == doctest::Approx(1.0));
    const std::vector<double> neg = {-1, -2, -3};
    CHECK(pearson(x, neg) == doctest::Approx(-1.0));
    const std::vector<double> y = {1, 2, 4};
    CHECK(pearson(x, y) == doctest::Approx(0.9819805061).epsilon(1e-9));
    const std::vector<double> c = {5, 5, 5};
    CHECK_THROWS_AS(pearson(x, c), Error);
    CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2}), Error);
}

TEST_CASE("pearson is invariant under positive affine transforms") {
    Rng rng(11);
    std::vector<double> x(40), y(40);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.normal();
        y[i] = 0.6 * x[i] + rng.normal();
    }
    const double base = pearson(x, y);
    std::vector<double> xt = x;
    for (auto& v : xt) v = 3.5 * v + 11.0;
    CHECK(pearson(xt, y) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("mic: noiseless monotone relationship saturates") {
    std::vector<double> x(200), y(200);
    for (int i = 0; i < 200; ++i) {
        x[static_cast<std::size_t>(i)] = i + 1.0;
        y[static_cast<std::size_t>(i)] = std::pow(i + 1.0, 3.0);
    }
    CHECK(mic(x, y) >= 0.99);
    CHECK(mic(x, x) >= 0.99);
}

TEST_CASE("mic: permutation null stays low") {
    std::vector<double> x(200);
    std::iota(x.begin(), x.end(), 1.0);
    int low = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        Rng rng(1000 + static_cast<std::uint64_t>(t));
        std::vector<double> y = x;
        for (std::size_t i = y.size() - 1; i > 0; --i) {
            std::swap(y[i], y[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
        }
        if (mic(x, y) < 0.35) ++low;
    }
    CHECK(low >= 95);
}

TEST_CASE("mic: symmetric, bounded, zero for constants") {
    Rng rng(5);
    std::vector<double> x(60), y(60);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.normal();
        y[i] = rng.normal() + 0.5 * x[i];
    }
    const double a = mic(x, y);
    const double b = mic(y, x);
    CHECK(a == b); // exact: both orientations are searched
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    std::vector<double> c(60, 3.0);
    CHECK(mic(x, c) == 0.0);
    CHECK_THROWS_AS(mic(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}), Error);
}

TEST_CASE("mic: maximal at perfect dependence (property over random y)") {
    Rng rng(17);
    std::vector<double> x(50);
    for (auto& v : x) v = rng.normal();
    const double self = mic(x, x);
    for (int t = 0; t < 10; ++t) {
        std::vector<double> y(50);
        for (auto& v : y) v = rng.normal();
        CHECK(mic(x, y) <= self + 1e-12);
    }
}

TEST_CASE("mic agrees with the exhaustive-grid oracle at n = 50") {
    // Agreement holds on noiseless functional relationships, where the true
    // maximum lives on grids the equipartition search reaches. On pure noise
    // the exhaustive search overfits above the statistic by construction, so
    // only the one-sided bound applies there.
    auto check_case = [&](const std::vector<double>& x, const std::vector<double>& y) {
        const double approx = mic(x, y);
        const double exact = oracle::exhaustive_mic(x, y);
        CHECK(approx <= exact + 1e-9); // the DP searches a subset of grids
        CHECK(std::abs(approx - exact) < 0.02);
    };
    std::vector<double> x(50), y(50);
    for (int i = 0; i < 50; ++i) {
        x[static_cast<std::size_t>(i)] = i;
        y[static_cast<std::size_t>(i)] = 2.0 * i + 1.0;
    }
    check_case(x, y); // line
    for (int i = 0; i < 50; ++i) {
        x[static_cast<std::size_t>(i)] = (i - 25.0) / 5.0;
        y[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] *
                                         x[static_cast<std::size_t>(i)];
    }
    check_case(x, y); // parabola
    for (int i = 0; i < 50; ++i) {
        x[static_cast<std::size_t>(i)] = i + 1.0;
        y[static_cast<std::size_t>(i)] = std::sqrt(i + 1.0);
    }
    check_case(x, y); // concave monotone
    {
        Rng rng(4242);
        std::vector<double> nx(50), ny(50);
        for (auto& v : nx) v = rng.normal();
        for (auto& v : ny) v = rng.normal();
        CHECK(mic(nx, ny) <= oracle::exhaustive_mic(nx, ny) + 1e-9);
    }
}

TEST_CASE("screen: flags, nonlinear detection, pair counting") {
    // Columns live in the slice-1 scope so every pair is evaluated.
    Rng rng(99);
    std::vector<double> base(120);
    for (auto& v : base) v = rng.normal();
    std::vector<double> dup = base;
    std::vector<double> parabola(base.size());
    std::vector<double> sym(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        sym[i] = (static_cast<double>(i % 21) - 10.0) / 3.0;
        parabola[i] = sym[i] * sym[i];
    }
    std::vector<double> noise(base.size());
    for (auto& v : noise) v = rng.normal();

    const std::vector<std::string> names = {"A_Vol_Th_0_5", "B_Vol_Th_0_5", "C_Vol_Th_0_5",
                                            "D_Vol_Th_0_5", "Avg_speed_0_5"};
    const std::vector<std::vector<double>> cols = {base, dup, sym, parabola, noise};
    ScreenOptions opts;
    const auto report = screen(names, cols, opts);

    CHECK(report.pairs.size() == 10); // C(5,2)
    bool dup_linear = false, parabola_nonlinear = false, parabola_linear = true;
    for (const auto& p : report.pairs) {
        if (p.var_a == "A_Vol_Th_0_5" && p.var_b == "B_Vol_Th_0_5") {
            dup_linear = p.flagged_linear;
            CHECK(p.pearson_r == doctest::Approx(1.0));
        }
        if (p.var_a == "C_Vol_Th_0_5" && p.var_b == "D_Vol_Th_0_5") {
            parabola_nonlinear = p.flagged_nonlinear;
            parabola_linear = p.flagged_linear;
            CHECK(std::abs(p.pearson_r) < 0.2);
        }
    }
    CHECK(dup_linear);
    CHECK(parabola_nonlinear);      // y = x^2 on symmetric x: MIC high
    CHECK_FALSE(parabola_linear);   // ... but r near 0

    // Retained set has no flagged pair left (post-condition re-check).
    std::vector<std::string> kept_names;
    std::vector<std::vector<double>> kept_cols;
    for (const auto& n : report.retained) {
        for (std::size_t c = 0; c < names.size(); ++c) {
            if (names[c] == n) {
                kept_names.push_back(n);
                kept_cols.push_back(cols[c]);
            }
        }
    }
    const auto recheck = screen(kept_names, kept_cols, opts);
    for (const auto& p : recheck.pairs) CHECK_FALSE(p.flagged());
}

TEST_CASE("screen: flag set invariant under column order; 57 columns give 1596 pairs") {
    Rng rng(123);
    std::vector<std::string> names;
    std::vector<std::vector<double>> cols;
    for (int c = 0; c < 57; ++c) {
        names.push_back("v" + std::to_string(c) + "_0_5");
        std::vector<double> col(30);
        for (auto& v : col) v = rng.normal();
        cols.push_back(std::move(col));
    }
    ScreenOptions opts;
    opts.mic.alpha = 0.6;
    const auto report = screen(names, cols, opts);
    CHECK(report.pairs.size() == 1596);

    // Reverse the columns; the flagged pair SET must not change.
    auto rnames = names;
    auto rcols = cols;
    std::reverse(rnames.begin(), rnames.end());
    std::reverse(rcols.begin(), rcols.end());
    const auto rreport = screen(rnames, rcols, opts);
    auto key_set = [](const ScreeningReport& r) {
        std::set<std::pair<std::string, std::string>> s;
        for (const auto& p : r.pairs) {
            if (!p.flagged()) continue;
            auto a = p.var_a, b = p.var_b;
            if (b < a) std::swap(a, b);
            s.emplace(a, b);
        }
        return s;
    };
    CHECK(key_set(report) == key_set(rreport));
}

TEST_CASE("screen scoping: cross-slice same-measure pairs only when enabled") {
    std::vector<double> a(30), b(30), c(30);
    Rng rng(3);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
        c[i] = rng.normal();
    }
    const std::vector<std::string> names = {"A_Vol_Th_0_5", "A_Vol_Th_5_10",
                                            "B_Vol_Th_5_10"};
    const std::vector<std::vector<double>> cols = {a, b, c};
    ScreenOptions with_cross;
    const auto r1 = screen(names, cols, with_cross);
    // slice-2 scope pair + the cross-slice same-measure pair
    CHECK(r1.pairs.size() == 2);

    ScreenOptions no_cross;
    no_cross.cross_slice = false;
    const auto r2 = screen(names, cols, no_cross);
    CHECK(r2.pairs.size() == 1);
}

TEST_CASE("prune: hand case drops the higher-degree member") {
    ScreeningReport report;
    report.pairs = {
        {"A", "B", 0.9, 0.2, true, false},
        {"A", "C", 0.8, 0.1, true, false},
        {"D", "E", 0.1, 0.1, false, false},
    };
    const std::vector<std::string> names = {"A", "B", "C", "D", "E"};
    prune(report, names);
    CHECK(report.retained == std::vector<std::string>{"B", "C", "D", "E"});
    REQUIRE(report.dropped.size() == 1);
    CHECK(report.dropped[0].first == "A");
}

TEST_CASE("prune: no flagged pairs is a no-op") {
    ScreeningReport report;
    report.pairs = {{"A", "B", 0.1, 0.1, false, false}};
    const std::vector<std::string> names = {"A", "B"};
    prune(report, names);
    CHECK(report.retained == names);
    CHECK(report.dropped.empty());
}
