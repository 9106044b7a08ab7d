#include "risk.hpp"

#include "errors.hpp"

#include <algorithm>
#include <cmath>

namespace ixrisk {

std::map<std::string, double> FittedModel::beta() const {
    std::map<std::string, double> out;
    for (const auto& v : variables) out[v.name] = v.mean;
    return out;
}

namespace {

double lookup(const FeatureVector& x, const std::string& name) {
    const auto it = x.find(name);
    if (it == x.end()) {
        throw_invalid("variable '" + name + "' missing from scored vector");
    }
    return it->second;
}

} // namespace

double odds_ratio_pair(const std::map<std::string, double>& beta, const FeatureVector& x1,
                       const FeatureVector& x2) {
    double s = 0.0;
    for (const auto& [name, b] : beta) {
        s += b * (lookup(x1, name) - lookup(x2, name));
    }
    return std::exp(s);
}

double score_event(const std::map<std::string, double>& beta, const FeatureVector& x,
                   const std::vector<const FeatureVector*>& stratum_controls) {
    if (stratum_controls.empty()) throw_invalid("score_event: empty control set");
    FeatureVector mean;
    for (const auto& [name, b] : beta) {
        double s = 0.0;
        for (const auto* c : stratum_controls) s += lookup(*c, name);
        mean[name] = s / static_cast<double>(stratum_controls.size());
    }
    return odds_ratio_pair(beta, x, mean);
}

void adjust_scores(std::vector<RiskScore>& scores) {
    if (scores.empty()) return;
    double top = 0.0;
    for (const auto& s : scores) {
        if (!(s.odds_ratio > 0)) throw_invalid("scores must be positive for adjustment");
        top = std::max(top, s.odds_ratio);
    }
    for (auto& s : scores) s.adjusted = s.odds_ratio / top;
}

RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw_invalid("roc_auc: size mismatch");
    long n_pos = 0, n_neg = 0;
    for (int l : labels) (l ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) {
        throw_numeric("AUC undefined: both classes must be present");
    }

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    RocResult result;
    // Sentinel above every score: nothing classified positive.
    result.points.push_back({scores[order.front()] + 1.0, 0.0, 0.0});

    long tp = 0, fp = 0;
    double auc = 0.0;
    double prev_tpr = 0.0, prev_fpr = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double v = scores[order[i]];
        // Consume the whole tie group before emitting a point.
        while (i < order.size() && scores[order[i]] == v) {
            (labels[order[i]] ? tp : fp)++;
            ++i;
        }
        const double tpr = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        result.points.push_back({v, fpr, tpr});
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    result.auc = auc;
    return result;
}

} // namespace ixrisk
