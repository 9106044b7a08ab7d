#include "inference.hpp"

#include "errors.hpp"
#include "oracles.hpp"
#include "rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace ixrisk;

namespace {

ClogitData tiny_stratum(double crash_x, double control_x) {
    ClogitData data;
    data.variables = {"x0"};
    data.m = 1;
    Eigen::MatrixXd s(2, 1);
    s << crash_x, control_x;
    data.strata.push_back(s);
    return data;
}

} // namespace

TEST_CASE("clogit_loglik: uniform at beta = 0, hand case at ln 2, additivity") {
    // beta = 0, m = 4: each stratum contributes log(1/5).
    const auto data = oracle::simulate_matched(Eigen::VectorXd::Zero(3), 40, 4, 99);
    const double ll0 = clogit_loglik(Eigen::VectorXd::Zero(3), data);
    CHECK(ll0 == doctest::Approx(-40.0 * std::log(5.0)).epsilon(1e-12));

    // One covariate, crash x = 1, control x = 0, beta = ln 2 -> l = 2/3.
    const auto tiny = tiny_stratum(1.0, 0.0);
    Eigen::VectorXd beta(1);
    beta << std::log(2.0);
    CHECK(clogit_loglik(beta, tiny) == doctest::Approx(std::log(2.0 / 3.0)).epsilon(1e-12));

    // Two identical strata double the log-likelihood.
    ClogitData doubled = tiny;
    doubled.strata.push_back(tiny.strata.front());
    CHECK(clogit_loglik(beta, doubled) ==
          doctest::Approx(2.0 * clogit_loglik(beta, tiny)).epsilon(1e-12));
}

TEST_CASE("clogit_loglik: shift invariance within strata") {
    Rng rng(12);
    auto data = oracle::simulate_matched(Eigen::VectorXd::Ones(4) * 0.4, 30, 4, 5);
    Eigen::VectorXd beta(4);
    for (int j = 0; j < 4; ++j) beta(j) = rng.normal();
    const double base = clogit_loglik(beta, data);
    // Add a constant to covariate 2 in every observation of every stratum.
    for (auto& s : data.strata) s.col(2).array() += 17.5;
    CHECK(clogit_loglik(beta, data) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("clogit key alignment errors") {
    const auto data = oracle::simulate_matched(Eigen::VectorXd::Zero(2), 5, 2, 1);
    std::map<std::string, double> good = {{"x0", 0.1}, {"x1", -0.2}};
    CHECK(align_beta(good, data).size() == 2);
    std::map<std::string, double> bad = {{"x0", 0.1}, {"wrong", -0.2}};
    CHECK_THROWS_AS(align_beta(bad, data), Error);
    Eigen::VectorXd short_beta(1);
    short_beta << 0.0;
    CHECK_THROWS_AS(clogit_loglik(short_beta, data), Error);
}

TEST_CASE("clogit_grad: zero at symmetric null, matches finite differences, additive") {
    {
        // Crash equals the control mean -> gradient 0 at beta = 0.
        ClogitData data;
        data.variables = {"x0"};
        data.m = 2;
        Eigen::MatrixXd s(3, 1);
        s << 2.0, 1.0, 3.0;
        data.strata.push_back(s);
        const auto g = clogit_grad(Eigen::VectorXd::Zero(1), data);
        CHECK(std::abs(g(0)) < 1e-12);
    }
    Rng rng(7);
    for (int rep = 0; rep < 100; ++rep) {
        const int k = 1 + static_cast<int>(rng.uniform_int(10));
        const int n = 5 + static_cast<int>(rng.uniform_int(46));
        Eigen::VectorXd truth(k);
        for (int j = 0; j < k; ++j) truth(j) = rng.normal(0.0, 0.5);
        const auto data =
            oracle::simulate_matched(truth, n, 4, 1000 + static_cast<std::uint64_t>(rep));
        Eigen::VectorXd beta(k);
        for (int j = 0; j < k; ++j) beta(j) = rng.normal(0.0, 0.5);
        const auto analytic = clogit_grad(beta, data);
        const auto numeric = oracle::fd_gradient(beta, data);
        const double scale = std::max(1.0, numeric.lpNorm<Eigen::Infinity>());
        CHECK((analytic - numeric).lpNorm<Eigen::Infinity>() / scale < 1e-6);
    }
    {
        const auto tiny = tiny_stratum(1.0, 0.0);
        ClogitData doubled = tiny;
        doubled.strata.push_back(tiny.strata.front());
        Eigen::VectorXd beta(1);
        beta << 0.3;
        CHECK(clogit_grad(beta, doubled)(0) ==
              doctest::Approx(2.0 * clogit_grad(beta, tiny)(0)).epsilon(1e-12));
    }
}

TEST_CASE("fit_mle: converges to a stationary point; recovers null data") {
    {
        const auto data = oracle::simulate_matched(Eigen::VectorXd::Zero(3), 200, 4, 31);
        const auto fit = fit_mle(data);
        CHECK(clogit_grad(fit.beta, data).lpNorm<Eigen::Infinity>() < 1e-8);
        for (int j = 0; j < 3; ++j) {
            const double se = std::sqrt(fit.covariance(j, j));
            CHECK(std::abs(fit.beta(j)) < 3.5 * se);
        }
    }
    // Simulated-from-zero sanity across seeds: |beta| < 3 se nearly always.
    int ok = 0;
    for (int rep = 0; rep < 40; ++rep) {
        const auto data = oracle::simulate_matched(Eigen::VectorXd::Zero(2), 120, 4,
                                                   500 + static_cast<std::uint64_t>(rep));
        const auto fit = fit_mle(data);
        bool inside = true;
        for (int j = 0; j < 2; ++j) {
            inside = inside && std::abs(fit.beta(j)) < 3.0 * std::sqrt(fit.covariance(j, j));
        }
        ok += inside ? 1 : 0;
    }
    CHECK(ok >= 38);
}

TEST_CASE("fit_mle: perfect separation raises a monotone-likelihood error") {
    // Crash value always exceeds every control value.
    ClogitData data;
    data.variables = {"sep"};
    data.m = 2;
    for (int s = 0; s < 20; ++s) {
        Eigen::MatrixXd x(3, 1);
        x << 1.0, 0.0, 0.0;
        data.strata.push_back(x);
    }
    CHECK_THROWS_WITH_AS(static_cast<void>(fit_mle(data)),
                         doctest::Contains("monotone likelihood"), Error);
}

TEST_CASE("fit_mle recovers a known coefficient direction") {
    Eigen::VectorXd truth(2);
    truth << 0.8, -0.5;
    const auto data = oracle::simulate_matched(truth, 400, 4, 77);
    const auto fit = fit_mle(data);
    CHECK(fit.beta(0) > 0.5);
    CHECK(fit.beta(1) < -0.25);
    CHECK(std::abs(fit.beta(0) - truth(0)) < 3 * std::sqrt(fit.covariance(0, 0)));
    CHECK(std::abs(fit.beta(1) - truth(1)) < 3 * std::sqrt(fit.covariance(1, 1)));
}

TEST_CASE("bgr_diagnostic: identical, degenerate, and healthy chains") {
    std::vector<double> chain(200);
    Rng rng(1);
    for (auto& v : chain) v = rng.normal();
    CHECK(bgr_diagnostic({chain, chain, chain}) == 1.0);

    const std::vector<double> c1(100, 1.0), c2(100, 2.0);
    CHECK(std::isinf(bgr_diagnostic({c1, c2})));

    std::vector<std::vector<double>> healthy(3, std::vector<double>(1000));
    for (std::size_t c = 0; c < 3; ++c) {
        Rng r(100 + c);
        for (auto& v : healthy[c]) v = r.normal();
    }
    const double rhat = bgr_diagnostic(healthy);
    CHECK(rhat < 1.02);
    CHECK(rhat > 0.99);

    CHECK_THROWS_AS(bgr_diagnostic({chain}), Error);
}

TEST_CASE("bgr_diagnostic: same-distribution chains stay under 1.01 (n = 7500)") {
    int ok = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::vector<double>> chains(3, std::vector<double>(7500));
        for (std::size_t c = 0; c < chains.size(); ++c) {
            Rng rng(mix_seed(9000 + static_cast<std::uint64_t>(trial), c));
            for (auto& v : chains[c]) v = rng.normal();
        }
        if (bgr_diagnostic(chains) < 1.01) ++ok;
    }
    CHECK(ok >= 99);
}

TEST_CASE("significance classification from BCIs") {
    CHECK(significance(0.002, 0.005, 0.02, 0.024) == SignificanceLevel::at_05);
    CHECK(significance(-0.07, -0.06, -0.01, 0.005) == SignificanceLevel::at_10);
    CHECK(significance(-0.01, -0.005, 0.015, 0.02) == SignificanceLevel::none);
}

TEST_CASE("quantile: type-7 interpolation") {
    std::vector<double> v = {1, 2, 3, 4};
    CHECK(quantile(v, 0.0) == 1.0);
    CHECK(quantile(v, 1.0) == 4.0);
    CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
    CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
}

TEST_CASE("fit_bayes: posterior matches the MLE oracle on synthetic data") {
    Eigen::VectorXd truth(3);
    truth << 0.5, -0.3, 0.0;
    const auto data = oracle::simulate_matched(truth, 200, 4, 2024);
    const auto mle = fit_mle(data);

    McmcSettings settings;
    settings.iterations = 6000; // short run for the unit suite
    settings.burn_in = 2000;
    settings.seed = 7;
    const auto bayes = fit_bayes(data, settings);

    for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(bayes.coefficients[static_cast<std::size_t>(j)].mean - mle.beta(j)) <
              0.05);
        CHECK(bayes.coefficients[static_cast<std::size_t>(j)].r_hat < 1.1);
        CHECK(bayes.coefficients[static_cast<std::size_t>(j)].ess > 100);
    }
    CHECK(bayes.converged);

    // Determinism across thread counts.
    McmcSettings threaded = settings;
    threaded.threads = 3;
    const auto bayes2 = fit_bayes(data, threaded);
    for (int j = 0; j < 3; ++j) {
        CHECK(bayes2.coefficients[static_cast<std::size_t>(j)].mean ==
              bayes.coefficients[static_cast<std::size_t>(j)].mean);
    }
}

TEST_CASE("fit_bayes: OR summaries are exp of the beta summaries") {
    Eigen::VectorXd truth(1);
    truth << 0.4;
    const auto data = oracle::simulate_matched(truth, 80, 4, 5);
    McmcSettings settings;
    settings.iterations = 3000;
    settings.burn_in = 1000;
    settings.seed = 3;
    const auto fit = fit_bayes(data, settings);
    const auto& c = fit.coefficients[0];
    CHECK(c.or_q025 == doctest::Approx(std::exp(c.q025)).epsilon(1e-12));
    CHECK(c.or_q975 == doctest::Approx(std::exp(c.q975)).epsilon(1e-12));
    CHECK(c.q025 < c.q05);
    CHECK(c.q05 < c.q95);
    CHECK(c.q95 < c.q975);
}

TEST_CASE("fit_bayes: widening the prior moves the posterior toward the MLE") {
    Eigen::VectorXd truth(1);
    truth << 1.0;
    const auto data = oracle::simulate_matched(truth, 30, 4, 88);
    const auto mle = fit_mle(data);

    double previous_distance = std::numeric_limits<double>::infinity();
    for (const double variance : {0.1, 1.0, 10.0}) {
        McmcSettings settings;
        settings.iterations = 24000;
        settings.burn_in = 4000;
        settings.prior_variance = variance;
        settings.seed = 11;
        const auto fit = fit_bayes(data, settings);
        const double distance = std::abs(fit.coefficients[0].mean - mle.beta(0));
        CHECK(distance < previous_distance + 0.01); // monotone within MC noise
        previous_distance = distance;
    }
}
