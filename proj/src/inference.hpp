#pragma once

#include "domain.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ixrisk {

// Design data for the conditional likelihood: one (m+1) x k block per
// stratum with the crash at row 0. The stratum intercept never appears; it
// cancels inside each block.
struct ClogitData {
    std::vector<std::string> variables;
    std::vector<Eigen::MatrixXd> strata;
    int m = 0; // controls per case, constant across strata

    int k() const { return static_cast<int>(variables.size()); }
    int n_strata() const { return static_cast<int>(strata.size()); }
    void validate() const;
};

ClogitData make_clogit_data(const std::vector<Stratum>& strata,
                            const std::vector<std::string>& variables);

// Aligns a named coefficient map against the data's variable order; any key
// mismatch is an invalid-input error.
Eigen::VectorXd align_beta(const std::map<std::string, double>& beta, const ClogitData& data);

// Sum over strata of beta'x_0 - logsumexp_j(beta'x_j), max-stabilized.
double clogit_loglik(const Eigen::VectorXd& beta, const ClogitData& data);
Eigen::VectorXd clogit_grad(const Eigen::VectorXd& beta, const ClogitData& data);
// Hessian of the log-likelihood (negative semidefinite).
Eigen::MatrixXd clogit_hessian(const Eigen::VectorXd& beta, const ClogitData& data);

struct MleFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance; // inverse observed information at the optimum
    double loglik = 0.0;
    int iterations = 0;
};

// Newton-Raphson with step-halving; throws numeric_failure on perfect
// separation (monotone likelihood) naming the offending variable, or when
// the Hessian stays singular after a ridge retry.
MleFit fit_mle(const ClogitData& data, double tol = 1e-8, int max_iter = 100);

struct McmcSettings {
    int chains = 3;
    int iterations = 20000;
    int burn_in = 5000;
    double prior_variance = 1000.0; // independent Normal(0, v) per coefficient
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const; // burn_in < iterations, chains >= 2
};

enum class SignificanceLevel : int { none = 0, at_10 = 1, at_05 = 2 };

SignificanceLevel significance(double q025, double q05, double q95, double q975);

struct CoefficientSummary {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
    double q025 = 0.0, q05 = 0.0, q95 = 0.0, q975 = 0.0;
    double or_mean = 0.0;               // mean of exp(draws)
    double or_q025 = 0.0, or_q975 = 0.0; // exp of the beta quantiles
    double r_hat = 1.0;
    double ess = 0.0;
    SignificanceLevel sig = SignificanceLevel::none;
};

struct McmcResult {
    std::vector<CoefficientSummary> coefficients;
    std::vector<double> acceptance_rate;      // per chain, post burn-in
    std::vector<Eigen::MatrixXd> chains;      // retained draws, chain -> (n x k)
    bool converged = true;                    // all r_hat < 1.1
    McmcSettings settings;

    Eigen::VectorXd posterior_mean() const;
};

// Adaptive random-walk Metropolis on clogit_loglik + Normal prior; three
// independent chains by default, adaptation frozen at the end of burn-in,
// post-burn-in draws pooled for the summaries. Chains are deterministic
// given (seed, chain index) and independent of the thread count.
McmcResult fit_bayes(const ClogitData& data, const McmcSettings& settings);

// Split-chain potential scale reduction factor. Identical chains carry no
// between-chain information and report exactly 1.0; zero within-chain
// variance with distinct chains reports +infinity.
double bgr_diagnostic(const std::vector<std::vector<double>>& chains);

// Type-7 quantile (linear interpolation) on a copy of the sample.
double quantile(std::vector<double> sample, double q);

} // namespace ixrisk
