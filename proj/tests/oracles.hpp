#pragma once

// Independent test oracles. Everything here is intentionally brute force and
// shares no code with the implementation paths it checks.

#include "inference.hpp"

#include <cstdint>
#include <vector>

namespace ixrisk::oracle {

// AUC as the Mann-Whitney statistic over all (positive, negative) pairs,
// ties counted 0.5.
double mann_whitney_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// True MIC by exhaustive search over every grid with x_bins * y_bins <=
// floor(n^alpha): all cut placements on both axes. Exponential; keep n tiny.
double exhaustive_mic(const std::vector<double>& x, const std::vector<double>& y,
                      double alpha = 0.6);

// Central finite differences of clogit_loglik.
Eigen::VectorXd fd_gradient(const Eigen::VectorXd& beta, const ClogitData& data,
                            double h = 1e-5);

// Matched case-control sampler drawn from the exact conditional model: for
// each stratum, m+1 covariate vectors are N(0,1) i.i.d. and the case slot is
// drawn with probability softmax(beta' x_j). Returns strata with the case at
// row 0.
ClogitData simulate_matched(const Eigen::VectorXd& beta, int n_strata, int m,
                            std::uint64_t seed);

} // namespace ixrisk::oracle
