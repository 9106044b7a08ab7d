#include "inference.hpp"

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ixrisk {

void ClogitData::validate() const {
    if (variables.empty()) throw_invalid("clogit data has no variables");
    if (strata.empty()) throw_invalid("clogit data has no strata");
    for (const auto& s : strata) {
        if (s.rows() != m + 1 || s.cols() != k()) {
            throw_invalid("clogit stratum shape mismatch");
        }
        if (!s.allFinite()) throw_invalid("clogit design values must be finite");
    }
}

ClogitData make_clogit_data(const std::vector<Stratum>& strata,
                            const std::vector<std::string>& variables) {
    if (strata.empty()) throw_invalid("no strata");
    ClogitData data;
    data.variables = variables;
    data.m = static_cast<int>(strata.front().controls.size());
    data.strata.reserve(strata.size());
    auto pick = [&](const FeatureVector& fv, const std::string& name) {
        const auto it = fv.find(name);
        if (it == fv.end()) {
            throw_invalid("variable '" + name + "' missing from feature vector");
        }
        return it->second;
    };
    for (const auto& s : strata) {
        if (static_cast<int>(s.controls.size()) != data.m) {
            throw_invalid("stratum '" + s.stratum_id + "' breaks the constant-m invariant");
        }
        Eigen::MatrixXd x(data.m + 1, data.k());
        for (int j = 0; j < data.k(); ++j) {
            x(0, j) = pick(s.crash.features, variables[static_cast<std::size_t>(j)]);
            for (int c = 0; c < data.m; ++c) {
                x(c + 1, j) = pick(s.controls[static_cast<std::size_t>(c)].features,
                                   variables[static_cast<std::size_t>(j)]);
            }
        }
        data.strata.push_back(std::move(x));
    }
    data.validate();
    return data;
}

Eigen::VectorXd align_beta(const std::map<std::string, double>& beta, const ClogitData& data) {
    if (beta.size() != data.variables.size()) {
        throw_invalid("coefficient count does not match design columns");
    }
    Eigen::VectorXd out(data.k());
    for (int j = 0; j < data.k(); ++j) {
        const auto it = beta.find(data.variables[static_cast<std::size_t>(j)]);
        if (it == beta.end()) {
            throw_invalid("coefficient for '" + data.variables[static_cast<std::size_t>(j)] +
                          "' missing");
        }
        out(j) = it->second;
    }
    return out;
}

double clogit_loglik(const Eigen::VectorXd& beta, const ClogitData& data) {
    if (beta.size() != data.k()) throw_invalid("beta length mismatch");
    double total = 0.0;
    for (const auto& x : data.strata) {
        const Eigen::VectorXd eta = x * beta;
        const double emax = eta.maxCoeff();
        double sum = 0.0;
        for (Eigen::Index j = 0; j < eta.size(); ++j) sum += std::exp(eta(j) - emax);
        total += eta(0) - (emax + std::log(sum));
    }
    return total;
}

Eigen::VectorXd clogit_grad(const Eigen::VectorXd& beta, const ClogitData& data) {
    if (beta.size() != data.k()) throw_invalid("beta length mismatch");
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(data.k());
    for (const auto& x : data.strata) {
        const Eigen::VectorXd eta = x * beta;
        const double emax = eta.maxCoeff();
        Eigen::VectorXd w = (eta.array() - emax).exp();
        w /= w.sum();
        grad += x.row(0).transpose() - x.transpose() * w;
    }
    return grad;
}

Eigen::MatrixXd clogit_hessian(const Eigen::VectorXd& beta, const ClogitData& data) {
    if (beta.size() != data.k()) throw_invalid("beta length mismatch");
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(data.k(), data.k());
    for (const auto& x : data.strata) {
        const Eigen::VectorXd eta = x * beta;
        const double emax = eta.maxCoeff();
        Eigen::VectorXd w = (eta.array() - emax).exp();
        w /= w.sum();
        const Eigen::VectorXd xbar = x.transpose() * w;
        hess -= x.transpose() * w.asDiagonal() * x - xbar * xbar.transpose();
    }
    return hess;
}

namespace {

std::string widest_variable(const Eigen::VectorXd& beta, const ClogitData& data) {
    // Scale by covariate spread so raw-unit differences don't mask the culprit.
    int best = 0;
    double best_score = -1.0;
    for (int j = 0; j < data.k(); ++j) {
        double mean = 0.0, var = 0.0;
        long n = 0;
        for (const auto& x : data.strata) {
            for (Eigen::Index r = 0; r < x.rows(); ++r) {
                mean += x(r, j);
                ++n;
            }
        }
        mean /= static_cast<double>(n);
        for (const auto& x : data.strata) {
            for (Eigen::Index r = 0; r < x.rows(); ++r) {
                var += (x(r, j) - mean) * (x(r, j) - mean);
            }
        }
        const double sd = std::sqrt(var / std::max<long>(1, n - 1));
        const double score = std::abs(beta(j)) * (sd > 0 ? sd : 1.0);
        if (score > best_score) {
            best_score = score;
            best = j;
        }
    }
    return data.variables[static_cast<std::size_t>(best)];
}

} // namespace

MleFit fit_mle(const ClogitData& data, double tol, int max_iter) {
    data.validate();
    const int k = data.k();

    // Column spreads, for the separation heuristic below.
    Eigen::VectorXd col_sd = Eigen::VectorXd::Zero(k);
    {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
        long n = 0;
        for (const auto& x : data.strata) {
            mean += x.colwise().sum().transpose();
            n += x.rows();
        }
        mean /= static_cast<double>(n);
        for (const auto& x : data.strata) {
            col_sd += (x.rowwise() - mean.transpose()).array().square().colwise().sum().matrix();
        }
        col_sd = (col_sd / std::max<long>(1, n - 1)).array().sqrt();
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    double ll = clogit_loglik(beta, data);
    double ll_prev = -std::numeric_limits<double>::infinity();

    MleFit fit;
    for (int it = 1; it <= max_iter; ++it) {
        const Eigen::VectorXd grad = clogit_grad(beta, data);
        if (grad.lpNorm<Eigen::Infinity>() < tol) {
            Eigen::MatrixXd info = -clogit_hessian(beta, data);
            Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
            if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
                info += 1e-10 * info.diagonal().maxCoeff() * Eigen::MatrixXd::Identity(k, k);
                ldlt.compute(info);
                if (ldlt.info() != Eigen::Success) {
                    throw_numeric("singular information matrix at the optimum");
                }
            }
            fit.beta = beta;
            fit.covariance = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
            fit.loglik = ll;
            fit.iterations = it - 1;
            return fit;
        }

        Eigen::MatrixXd info = -clogit_hessian(beta, data);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        Eigen::VectorXd step;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
            step = ldlt.solve(grad);
        } else {
            const double ridge = std::max(1e-8, 1e-8 * info.diagonal().maxCoeff());
            ldlt.compute(info + ridge * Eigen::MatrixXd::Identity(k, k));
            if (ldlt.info() != Eigen::Success) {
                throw_numeric("singular Hessian in Newton-Raphson (after ridge retry)");
            }
            step = ldlt.solve(grad);
        }

        // Step-halving with a relative slack: near the optimum the full
        // Newton step changes the log-likelihood by less than its evaluation
        // noise, and rejecting those steps stalls the gradient above tol.
        const double slack = 1e-12 * (1.0 + std::abs(ll));
        double scale = 1.0;
        Eigen::VectorXd cand = beta + step;
        double ll_cand = clogit_loglik(cand, data);
        while ((!std::isfinite(ll_cand) || ll_cand < ll - slack) && scale > 1e-10) {
            scale *= 0.5;
            cand = beta + scale * step;
            ll_cand = clogit_loglik(cand, data);
        }
        ll_prev = ll;
        beta = cand;
        ll = ll_cand;

        // Monotone likelihood: the estimate runs away while the likelihood
        // keeps rising. Binary covariates "converge" near |beta|*sd ~ 20
        // before any raw norm gets large, so the scaled check fires first.
        bool runaway = beta.norm() > 50.0;
        for (int j = 0; j < k && !runaway; ++j) {
            runaway = std::abs(beta(j)) * col_sd(j) > 10.0;
        }
        if (runaway && ll > ll_prev) {
            throw Error(Status::numeric_failure,
                        "monotone likelihood (perfect separation) driven by variable '" +
                            widest_variable(beta, data) + "'");
        }
    }
    throw_numeric("Newton-Raphson did not converge in " + std::to_string(max_iter) +
                  " iterations");
}

// -------- MCMC --------

void McmcSettings::validate() const {
    if (chains < 2) throw_invalid("MCMC needs at least 2 chains (BGR requires it)");
    if (burn_in < 0 || burn_in >= iterations) throw_invalid("burn_in must be in [0, iterations)");
    if (!(prior_variance > 0)) throw_invalid("prior variance must be > 0");
}

SignificanceLevel significance(double q025, double q05, double q95, double q975) {
    if (q025 > 0.0 || q975 < 0.0) return SignificanceLevel::at_05;
    if (q05 > 0.0 || q95 < 0.0) return SignificanceLevel::at_10;
    return SignificanceLevel::none;
}

double quantile(std::vector<double> sample, double q) {
    if (sample.empty()) throw_invalid("quantile of empty sample");
    std::sort(sample.begin(), sample.end());
    const double h = (static_cast<double>(sample.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sample.size() - 1);
    const double frac = h - std::floor(h);
    return sample[lo] + frac * (sample[hi] - sample[lo]);
}

double bgr_diagnostic(const std::vector<std::vector<double>>& chains) {
    if (chains.size() < 2) throw_invalid("BGR needs at least 2 chains");
    const std::size_t len = chains.front().size();
    for (const auto& c : chains) {
        if (c.size() != len) throw_invalid("BGR chains must share length");
    }
    if (len < 4) throw_invalid("BGR chains too short");

    // Identical chains carry zero between-chain information; the diagnostic
    // is degenerate and reports the converged sentinel.
    bool identical = true;
    for (std::size_t c = 1; c < chains.size() && identical; ++c) {
        identical = chains[c] == chains[0];
    }
    if (identical) return 1.0;

    const std::size_t n = len / 2;
    std::vector<std::pair<const double*, const double*>> halves;
    for (const auto& c : chains) {
        halves.emplace_back(c.data(), c.data() + n);
        halves.emplace_back(c.data() + (c.size() - n), c.data() + c.size());
    }

    const auto m = static_cast<double>(halves.size());
    std::vector<double> means;
    double w = 0.0;
    for (const auto& [begin, end] : halves) {
        double mean = 0.0;
        for (const double* p = begin; p != end; ++p) mean += *p;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const double* p = begin; p != end; ++p) var += (*p - mean) * (*p - mean);
        var /= static_cast<double>(n - 1);
        means.push_back(mean);
        w += var;
    }
    w /= m;

    double grand = 0.0;
    for (double v : means) grand += v;
    grand /= m;
    double b = 0.0;
    for (double v : means) b += (v - grand) * (v - grand);
    b *= static_cast<double>(n) / (m - 1.0);

    if (w == 0.0) {
        return b > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    }
    const double nn = static_cast<double>(n);
    return std::sqrt((nn - 1.0) / nn + b / (nn * w));
}

namespace {

struct ChainOutput {
    Eigen::MatrixXd draws; // retained x k
    double acceptance = 0.0;
};

ChainOutput run_chain(const ClogitData& data, const McmcSettings& settings, int chain_index,
                      const Eigen::MatrixXd& proposal_seed_cov) {
    const int k = data.k();
    Rng rng(mix_seed(settings.seed, 0x6d636d63ULL, static_cast<std::uint64_t>(chain_index)));

    const double prior_var = settings.prior_variance;
    auto log_post = [&](const Eigen::VectorXd& beta) {
        return clogit_loglik(beta, data) - 0.5 * beta.squaredNorm() / prior_var;
    };

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    double lp = log_post(beta);

    double log_scale = std::log(2.38 / std::sqrt(static_cast<double>(k)));
    Eigen::LLT<Eigen::MatrixXd> llt(proposal_seed_cov);
    Eigen::MatrixXd chol = llt.matrixL();

    // Welford running moments of the chain's own history.
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(k, k);
    long n_hist = 0;

    const int retained = settings.iterations - settings.burn_in;
    ChainOutput out;
    out.draws.resize(retained, k);
    long accepted_post = 0;

    Eigen::VectorXd z(k), cand(k);
    for (int it = 1; it <= settings.iterations; ++it) {
        for (int j = 0; j < k; ++j) z(j) = rng.normal();
        cand = beta + std::exp(log_scale) * (chol * z);
        const double lp_cand = log_post(cand);
        const double log_alpha = lp_cand - lp;
        double alpha = log_alpha >= 0 ? 1.0 : std::exp(log_alpha);
        if (!std::isfinite(lp_cand)) alpha = 0.0;
        const bool accept = rng.uniform() < alpha;
        if (accept) {
            beta = cand;
            lp = lp_cand;
        }

        if (it <= settings.burn_in) {
            // Robbins-Monro on the scale toward 0.234 acceptance, empirical
            // covariance for the proposal shape; both freeze after burn-in.
            log_scale += std::pow(static_cast<double>(it), -0.6) * (alpha - 0.234);
            ++n_hist;
            const Eigen::VectorXd delta = beta - mu;
            mu += delta / static_cast<double>(n_hist);
            m2 += delta * (beta - mu).transpose();
            if (n_hist > 10 * k && it % 50 == 0) {
                Eigen::MatrixXd cov = m2 / static_cast<double>(n_hist - 1);
                cov += 1e-12 * cov.diagonal().maxCoeff() * Eigen::MatrixXd::Identity(k, k) +
                       1e-300 * Eigen::MatrixXd::Identity(k, k);
                Eigen::LLT<Eigen::MatrixXd> refresh(cov);
                if (refresh.info() == Eigen::Success) chol = refresh.matrixL();
            }
        } else {
            out.draws.row(it - settings.burn_in - 1) = beta.transpose();
            if (accept) ++accepted_post;
        }
    }
    out.acceptance = static_cast<double>(accepted_post) / std::max(1, retained);
    return out;
}

double geyer_ess(const std::vector<const Eigen::MatrixXd*>& chains, int col) {
    double total = 0.0;
    for (const auto* draws : chains) {
        const Eigen::Index n = draws->rows();
        const Eigen::VectorXd x = draws->col(col);
        const double mean = x.mean();
        const Eigen::VectorXd centered = x.array() - mean;
        const double c0 = centered.squaredNorm() / static_cast<double>(n);
        if (c0 <= 0) {
            total += 1.0;
            continue;
        }
        double tau = 1.0;
        const Eigen::Index max_lag = std::min<Eigen::Index>(n - 2, 1000);
        for (Eigen::Index lag = 1; lag + 1 <= max_lag; lag += 2) {
            double rho_a = 0.0, rho_b = 0.0;
            for (Eigen::Index t = 0; t + lag < n; ++t) rho_a += centered(t) * centered(t + lag);
            for (Eigen::Index t = 0; t + lag + 1 < n; ++t) {
                rho_b += centered(t) * centered(t + lag + 1);
            }
            rho_a /= static_cast<double>(n) * c0;
            rho_b /= static_cast<double>(n) * c0;
            const double pair = rho_a + rho_b;
            if (pair <= 0) break; // initial positive sequence ends
            tau += 2.0 * pair;
        }
        total += static_cast<double>(n) / tau;
    }
    return total;
}

} // namespace

Eigen::VectorXd McmcResult::posterior_mean() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(coefficients.size()));
    for (std::size_t i = 0; i < coefficients.size(); ++i) {
        out(static_cast<Eigen::Index>(i)) = coefficients[i].mean;
    }
    return out;
}

McmcResult fit_bayes(const ClogitData& data, const McmcSettings& settings) {
    data.validate();
    settings.validate();
    const int k = data.k();

    // Proposal shape seeded from the curvature at the null model; this only
    // affects mixing speed, never the stationary distribution.
    Eigen::MatrixXd info = -clogit_hessian(Eigen::VectorXd::Zero(k), data);
    info += (1e-8 * std::max(1.0, info.diagonal().maxCoeff())) *
            Eigen::MatrixXd::Identity(k, k);
    Eigen::MatrixXd seed_cov = info.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    {
        Eigen::LLT<Eigen::MatrixXd> check(seed_cov);
        if (check.info() != Eigen::Success) {
            seed_cov = Eigen::MatrixXd::Identity(k, k);
        }
    }

    McmcResult result;
    result.settings = settings;
    std::vector<ChainOutput> outputs(static_cast<std::size_t>(settings.chains));
    parallel_for(static_cast<std::size_t>(settings.chains), settings.threads,
                 [&](std::size_t c) {
                     outputs[c] = run_chain(data, settings, static_cast<int>(c), seed_cov);
                 });

    for (auto& o : outputs) {
        result.acceptance_rate.push_back(o.acceptance);
        result.chains.push_back(std::move(o.draws));
    }

    std::vector<const Eigen::MatrixXd*> chain_ptrs;
    for (const auto& c : result.chains) chain_ptrs.push_back(&c);
    const auto retained = static_cast<std::size_t>(settings.iterations - settings.burn_in);

    for (int j = 0; j < k; ++j) {
        CoefficientSummary s;
        s.name = data.variables[static_cast<std::size_t>(j)];

        std::vector<double> pooled;
        pooled.reserve(retained * result.chains.size());
        std::vector<std::vector<double>> per_chain;
        double or_sum = 0.0;
        for (const auto& c : result.chains) {
            std::vector<double> one(retained);
            for (std::size_t t = 0; t < retained; ++t) {
                const double v = c(static_cast<Eigen::Index>(t), j);
                one[t] = v;
                pooled.push_back(v);
                or_sum += std::exp(v);
            }
            per_chain.push_back(std::move(one));
        }

        double mean = 0.0;
        for (double v : pooled) mean += v;
        mean /= static_cast<double>(pooled.size());
        double var = 0.0;
        for (double v : pooled) var += (v - mean) * (v - mean);
        var /= static_cast<double>(pooled.size() - 1);

        s.mean = mean;
        s.sd = std::sqrt(var);
        s.q025 = quantile(pooled, 0.025);
        s.q05 = quantile(pooled, 0.05);
        s.q95 = quantile(pooled, 0.95);
        s.q975 = quantile(pooled, 0.975);
        s.or_mean = or_sum / static_cast<double>(pooled.size());
        s.or_q025 = std::exp(s.q025);
        s.or_q975 = std::exp(s.q975);
        s.r_hat = bgr_diagnostic(per_chain);
        s.ess = geyer_ess(chain_ptrs, j);
        s.sig = significance(s.q025, s.q05, s.q95, s.q975);
        if (!(s.r_hat < 1.1)) result.converged = false;
        result.coefficients.push_back(std::move(s));
    }
    return result;
}

} // namespace ixrisk
