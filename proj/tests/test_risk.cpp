#include "risk.hpp"

#include "errors.hpp"
#include "oracles.hpp"
#include "rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace ixrisk;

TEST_CASE("odds_ratio_pair hand cases from Table 5") {
    std::map<std::string, double> beta = {{"B_Vol_LT", 0.039}};
    FeatureVector x1 = {{"B_Vol_LT", 11.0}};
    FeatureVector x2 = {{"B_Vol_LT", 10.0}};
    CHECK(odds_ratio_pair(beta, x1, x1) == doctest::Approx(1.0));
    CHECK(odds_ratio_pair(beta, x1, x2) == doctest::Approx(1.0398).epsilon(1e-4));

    std::map<std::string, double> oafr_beta = {{"D_OAFR", 0.518}};
    FeatureVector a = {{"D_OAFR", 2.0}};
    FeatureVector b = {{"D_OAFR", 1.0}};
    CHECK(odds_ratio_pair(oafr_beta, a, b) == doctest::Approx(1.6786).epsilon(1e-4));

    FeatureVector missing = {{"Something_Else", 1.0}};
    CHECK_THROWS_AS(odds_ratio_pair(beta, x1, missing), Error);
}

TEST_CASE("score_event: control mean reference") {
    std::map<std::string, double> beta = {{"a", 0.5}, {"b", -0.2}};
    FeatureVector c1 = {{"a", 1.0}, {"b", 2.0}};
    FeatureVector c2 = {{"a", 3.0}, {"b", 4.0}};
    const std::vector<const FeatureVector*> controls = {&c1, &c2};

    FeatureVector at_mean = {{"a", 2.0}, {"b", 3.0}};
    CHECK(score_event(beta, at_mean, controls) == doctest::Approx(1.0));

    FeatureVector shifted = {{"a", 4.0}, {"b", 4.0}};
    // x - mean = {a: 2, b: 1} -> exp(1.0 - 0.2)
    CHECK(score_event(beta, shifted, controls) == doctest::Approx(std::exp(0.8)));

    std::map<std::string, double> null_beta = {{"a", 0.0}, {"b", 0.0}};
    CHECK(score_event(null_beta, shifted, controls) == doctest::Approx(1.0));

    CHECK_THROWS_AS(score_event(beta, shifted, {}), Error);
}

TEST_CASE("adjust_scores: max-normalization keeps ranking") {
    std::vector<RiskScore> scores(2);
    scores[0].odds_ratio = 2.0;
    scores[1].odds_ratio = 4.0;
    adjust_scores(scores);
    CHECK(scores[0].adjusted == doctest::Approx(0.5));
    CHECK(scores[1].adjusted == doctest::Approx(1.0));

    std::vector<RiskScore> equal(3);
    for (auto& s : equal) s.odds_ratio = 7.0;
    adjust_scores(equal);
    for (const auto& s : equal) CHECK(s.adjusted == doctest::Approx(1.0));
}

TEST_CASE("roc_auc hand cases") {
    {
        const std::vector<double> s = {0.9, 0.8, 0.1, 0.2, 0.3};
        const std::vector<int> l = {1, 1, 0, 0, 0};
        CHECK(roc_auc(s, l).auc == doctest::Approx(1.0));
    }
    {
        const std::vector<double> s = {0.5, 0.5, 0.5, 0.5};
        const std::vector<int> l = {1, 0, 1, 0};
        CHECK(roc_auc(s, l).auc == doctest::Approx(0.5));
    }
    {
        const std::vector<double> s = {0.8, 0.4, 0.6, 0.2};
        const std::vector<int> l = {1, 1, 0, 0};
        CHECK(roc_auc(s, l).auc == doctest::Approx(0.75));
    }
    CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {1, 1}), Error);
}

TEST_CASE("roc_auc equals brute-force Mann-Whitney incl. heavy ties; monotone invariance") {
    Rng rng(2718);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 10 + static_cast<int>(rng.uniform_int(50));
        std::vector<double> s(static_cast<std::size_t>(n));
        std::vector<int> l(static_cast<std::size_t>(n));
        bool has0 = false, has1 = false;
        for (int i = 0; i < n; ++i) {
            // Coarse grid scores force ties.
            s[static_cast<std::size_t>(i)] =
                std::round(rng.uniform() * 8.0) / 8.0;
            l[static_cast<std::size_t>(i)] = rng.uniform() < 0.4 ? 1 : 0;
            (l[static_cast<std::size_t>(i)] ? has1 : has0) = true;
        }
        if (!has0 || !has1) continue;
        const double auc = roc_auc(s, l).auc;
        CHECK(auc == doctest::Approx(oracle::mann_whitney_auc(s, l)).epsilon(1e-12));

        // Strictly increasing transforms leave the AUC unchanged.
        std::vector<double> logs(s.size()), maxadj(s.size());
        double top = 0.0;
        for (double v : s) top = std::max(top, v);
        for (std::size_t i = 0; i < s.size(); ++i) {
            logs[i] = std::log1p(s[i]);
            maxadj[i] = top > 0 ? s[i] / top : 1.0;
        }
        CHECK(roc_auc(logs, l).auc == doctest::Approx(auc).epsilon(1e-12));
        CHECK(roc_auc(maxadj, l).auc == doctest::Approx(auc).epsilon(1e-12));
    }
}

TEST_CASE("roc_auc: label flip complements tie-free AUC") {
    Rng rng(31);
    std::vector<double> s(40);
    std::vector<int> l(40);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = rng.uniform(); // continuous, ties almost surely absent
        l[i] = i % 3 == 0 ? 1 : 0;
    }
    std::vector<int> flipped(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) flipped[i] = 1 - l[i];
    CHECK(roc_auc(s, l).auc + roc_auc(s, flipped).auc == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("embedded paper models: names, shapes, spot values") {
    const auto names = paper_model_names();
    CHECK(names.size() == 10);

    const auto& full = load_paper_model("within_full");
    CHECK(full.variables.size() == 14);
    CHECK(full.auc == doctest::Approx(0.7596));
    bool found = false;
    for (const auto& v : full.variables) {
        if (v.name == "Avg_speed_0_5") {
            found = true;
            CHECK(v.mean == doctest::Approx(-0.038));
            CHECK(v.or_mean == doctest::Approx(0.963));
            CHECK(v.sig == SignificanceLevel::at_10);
        }
    }
    CHECK(found);

    const auto& entrance = load_paper_model("entrance_full");
    CHECK(entrance.variables.size() == 7);
    CHECK(entrance.auc == doctest::Approx(0.728));

    const auto& slice2 = load_paper_model("within_slice2");
    CHECK(slice2.slice == 2);
    for (const auto& v : slice2.variables) {
        if (v.name == "A_Vol_Th") {
            CHECK(v.mean == doctest::Approx(0.005));
            CHECK(v.or_mean == doctest::Approx(1.005));
        }
    }

    CHECK_THROWS_AS(load_paper_model("within_slice9"), Error);
}

TEST_CASE("embedded models: exp(beta) self-consistency against printed ORs") {
    for (const auto& name : paper_model_names()) {
        const auto& model = load_paper_model(name);
        for (const auto& v : model.variables) {
            CHECK(std::abs(std::exp(v.mean) - v.or_mean) < 0.002);
            CHECK(std::abs(std::exp(v.ci_lo) - v.or_lo) < 0.005);
            CHECK(std::abs(std::exp(v.ci_hi) - v.or_hi) < 0.005);
        }
    }
}

TEST_CASE("score_event is monotone in each covariate per coefficient sign") {
    std::map<std::string, double> beta = {{"up", 0.7}, {"down", -0.4}};
    FeatureVector c1 = {{"up", 0.0}, {"down", 0.0}};
    const std::vector<const FeatureVector*> controls = {&c1};
    FeatureVector x = {{"up", 0.0}, {"down", 0.0}};
    double last = score_event(beta, x, controls);
    for (double v = 0.5; v < 3.0; v += 0.5) {
        x["up"] = v;
        const double now = score_event(beta, x, controls);
        CHECK(now > last);
        last = now;
    }
    x["up"] = 0.0;
    last = score_event(beta, x, controls);
    for (double v = 0.5; v < 3.0; v += 0.5) {
        x["down"] = v;
        const double now = score_event(beta, x, controls);
        CHECK(now < last);
        last = now;
    }
}
