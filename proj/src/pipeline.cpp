#include "pipeline.hpp"

#include "csv.hpp"
#include "digest.hpp"
#include "errors.hpp"
#include "fsutil.hpp"
#include "manifest.hpp"
#include "parallel.hpp"
#include "screening.hpp"
#include "version.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>

namespace fs = std::filesystem;
using nlohmann::json;

namespace ixrisk {

namespace {

double parse_double(const std::string& s, const std::string& what) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw_invalid("bad number '" + s + "' in " + what);
    return v;
}

std::int64_t parse_int(const std::string& s, const std::string& what) {
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0') throw_invalid("bad integer '" + s + "' in " + what);
    return v;
}

bool parse_bool(const std::string& s, const std::string& what) {
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    throw_invalid("bad boolean '" + s + "' in " + what);
}

} // namespace

// -------- wide table --------

int WideTable::column_of(const std::string& variable) const {
    const auto it = std::find(variables.begin(), variables.end(), variable);
    return it == variables.end() ? -1 : static_cast<int>(it - variables.begin());
}

std::vector<Stratum> WideTable::to_strata() const {
    std::map<std::string, Stratum> grouped;
    std::vector<std::string> order;
    for (std::size_t r = 0; r < rows(); ++r) {
        auto [it, inserted] = grouped.try_emplace(stratum_id[r]);
        if (inserted) {
            it->second.stratum_id = stratum_id[r];
            order.push_back(stratum_id[r]);
        }
        StratumEvent ev;
        ev.key.intersection = intersection[r];
        ev.key.instant = instant[r];
        ev.key.location_class = location_class[r];
        ev.key.role = role[r];
        ev.key.stratum_id = stratum_id[r];
        ev.event_id = event_id[r];
        for (std::size_t c = 0; c < variables.size(); ++c) {
            ev.features[variables[c]] = columns[c][r];
        }
        if (role[r] == EventRole::crash) {
            if (!it->second.crash.event_id.empty()) {
                throw_invalid("stratum '" + stratum_id[r] + "' has more than one crash row");
            }
            it->second.crash = std::move(ev);
        } else {
            it->second.controls.push_back(std::move(ev));
        }
    }
    std::vector<Stratum> out;
    out.reserve(order.size());
    for (const auto& id : order) {
        auto& s = grouped[id];
        if (s.crash.event_id.empty()) {
            throw_invalid("stratum '" + id + "' has no crash row");
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string wide_csv(const std::vector<Stratum>& strata, LocationClass location_class) {
    std::vector<std::string> header = {"stratum_id", "event_id",  "role",
                                       "intersection", "instant", "location_class"};
    const auto variables = canonical_variables(location_class);
    header.insert(header.end(), variables.begin(), variables.end());

    CsvBuilder csv(header);
    auto emit = [&](const StratumEvent& ev) {
        csv.cell(ev.key.stratum_id)
            .cell(ev.event_id)
            .cell(std::string(to_string(ev.key.role)))
            .cell(ev.key.intersection)
            .cell(format_timestamp(ev.key.instant))
            .cell(std::string(to_string(ev.key.location_class)));
        for (const auto& v : variables) {
            const auto it = ev.features.find(v);
            if (it == ev.features.end()) {
                throw_invalid("feature '" + v + "' missing while writing dataset");
            }
            csv.cell(it->second);
        }
        csv.end_row();
    };
    for (const auto& s : strata) {
        emit(s.crash);
        for (const auto& c : s.controls) emit(c);
    }
    return csv.str();
}

WideTable load_wide_csv(const std::string& path) {
    const CsvTable csv = read_csv(path);
    WideTable t;
    const int c_stratum = csv.require_column("stratum_id");
    const int c_event = csv.require_column("event_id");
    const int c_role = csv.require_column("role");
    const int c_inter = csv.require_column("intersection");
    const int c_instant = csv.require_column("instant");
    const int c_class = csv.require_column("location_class");
    const std::set<int> meta = {c_stratum, c_event, c_role, c_inter, c_instant, c_class};

    std::vector<int> var_cols;
    for (int c = 0; c < static_cast<int>(csv.header.size()); ++c) {
        if (!meta.count(c)) {
            t.variables.push_back(csv.header[static_cast<std::size_t>(c)]);
            var_cols.push_back(c);
        }
    }
    t.columns.assign(t.variables.size(), {});
    for (const auto& row : csv.rows) {
        t.stratum_id.push_back(row[static_cast<std::size_t>(c_stratum)]);
        t.event_id.push_back(row[static_cast<std::size_t>(c_event)]);
        t.role.push_back(event_role_from_string(row[static_cast<std::size_t>(c_role)]));
        t.intersection.push_back(row[static_cast<std::size_t>(c_inter)]);
        t.instant.push_back(parse_timestamp(row[static_cast<std::size_t>(c_instant)]));
        t.location_class.push_back(
            location_class_from_string(row[static_cast<std::size_t>(c_class)]));
        for (std::size_t v = 0; v < var_cols.size(); ++v) {
            t.columns[v].push_back(
                parse_double(row[static_cast<std::size_t>(var_cols[v])], path));
        }
    }
    return t;
}

WideTable slice_view(const WideTable& table, int slice) {
    if (slice < 1 || slice > k_num_slices) throw_invalid("slice must be 1..4");
    WideTable out;
    out.stratum_id = table.stratum_id;
    out.event_id = table.event_id;
    out.role = table.role;
    out.intersection = table.intersection;
    out.instant = table.instant;
    out.location_class = table.location_class;
    for (std::size_t c = 0; c < table.variables.size(); ++c) {
        const auto [base, tag] = split_slice_suffix(table.variables[c]);
        if (tag == 0) {
            out.variables.push_back(table.variables[c]); // weather stays
            out.columns.push_back(table.columns[c]);
        } else if (tag == slice) {
            out.variables.push_back(base);
            out.columns.push_back(table.columns[c]);
        }
    }
    if (out.variables.empty()) throw_invalid("slice view selected no variables");
    return out;
}

// -------- descriptive statistics (report) --------
// (implemented in report.cpp)

// -------- model JSON --------

namespace {

json var_to_json(const ModelVariable& v) {
    json j;
    j["name"] = v.name;
    j["mean"] = v.mean;
    j["sd"] = v.sd;
    j["bci95"] = {v.ci_lo, v.ci_hi};
    if (std::isfinite(v.ci90_lo) && std::isfinite(v.ci90_hi)) {
        j["bci90"] = {v.ci90_lo, v.ci90_hi};
    }
    j["odds_ratio"] = {{"mean", v.or_mean}, {"bci95", {v.or_lo, v.or_hi}}};
    j["significance"] = v.sig == SignificanceLevel::at_05   ? "0.05"
                        : v.sig == SignificanceLevel::at_10 ? "0.1"
                                                            : "none";
    j["r_hat"] = v.r_hat;
    j["ess"] = v.ess;
    return j;
}

ModelVariable var_from_json(const json& j) {
    ModelVariable v;
    j.at("name").get_to(v.name);
    j.at("mean").get_to(v.mean);
    if (j.contains("sd")) j.at("sd").get_to(v.sd);
    v.ci_lo = j.at("bci95").at(0).get<double>();
    v.ci_hi = j.at("bci95").at(1).get<double>();
    if (j.contains("bci90")) {
        v.ci90_lo = j.at("bci90").at(0).get<double>();
        v.ci90_hi = j.at("bci90").at(1).get<double>();
    }
    v.or_mean = j.at("odds_ratio").at("mean").get<double>();
    v.or_lo = j.at("odds_ratio").at("bci95").at(0).get<double>();
    v.or_hi = j.at("odds_ratio").at("bci95").at(1).get<double>();
    const std::string sig = j.value("significance", "none");
    v.sig = sig == "0.05" ? SignificanceLevel::at_05
            : sig == "0.1" ? SignificanceLevel::at_10
                           : SignificanceLevel::none;
    if (j.contains("r_hat")) j.at("r_hat").get_to(v.r_hat);
    if (j.contains("ess")) j.at("ess").get_to(v.ess);
    return v;
}

} // namespace

std::string model_to_json(const FittedModel& model) {
    json j;
    j["tool"] = "ixrisk";
    j["version"] = k_version;
    j["name"] = model.name;
    j["location_class"] = to_string(model.location_class);
    j["slice"] = model.slice;
    j["embedded"] = model.embedded;
    j["converged"] = model.converged;
    if (std::isfinite(model.auc)) j["auc"] = model.auc;
    json vars = json::array();
    for (const auto& v : model.variables) vars.push_back(var_to_json(v));
    j["variables"] = vars;
    if (!model.embedded) {
        j["sampler"] = {{"chains", model.mcmc.chains},
                        {"iterations", model.mcmc.iterations},
                        {"burn_in", model.mcmc.burn_in},
                        {"prior_variance", model.mcmc.prior_variance},
                        {"seed", model.mcmc.seed},
                        {"acceptance_rates", model.acceptance_rates}};
        j["dataset"] = {{"rows", model.dataset_rows},
                        {"strata", model.dataset_strata},
                        {"m", model.dataset_m},
                        {"variable_hash", model.variable_hash}};
    }
    if (!model.standardize.empty()) {
        json st = json::object();
        for (const auto& [name, info] : model.standardize) {
            st[name] = {{"mean", info.mean}, {"sd", info.sd}};
        }
        j["standardize"] = st;
    }
    return j.dump(2) + "\n";
}

FittedModel model_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw_invalid(std::string("model JSON parse error: ") + e.what());
    }
    FittedModel m;
    try {
        j.at("name").get_to(m.name);
        m.location_class = location_class_from_string(j.at("location_class").get<std::string>());
        j.at("slice").get_to(m.slice);
        m.embedded = j.value("embedded", false);
        m.converged = j.value("converged", true);
        if (j.contains("auc")) m.auc = j.at("auc").get<double>();
        for (const auto& v : j.at("variables")) m.variables.push_back(var_from_json(v));
        if (j.contains("sampler")) {
            const auto& s = j.at("sampler");
            s.at("chains").get_to(m.mcmc.chains);
            s.at("iterations").get_to(m.mcmc.iterations);
            s.at("burn_in").get_to(m.mcmc.burn_in);
            s.at("prior_variance").get_to(m.mcmc.prior_variance);
            s.at("seed").get_to(m.mcmc.seed);
            if (s.contains("acceptance_rates")) {
                s.at("acceptance_rates").get_to(m.acceptance_rates);
            }
        }
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            d.at("rows").get_to(m.dataset_rows);
            d.at("strata").get_to(m.dataset_strata);
            d.at("m").get_to(m.dataset_m);
            d.at("variable_hash").get_to(m.variable_hash);
        }
        if (j.contains("standardize")) {
            for (const auto& [name, info] : j.at("standardize").items()) {
                StandardizeInfo si;
                info.at("mean").get_to(si.mean);
                info.at("sd").get_to(si.sd);
                m.standardize[name] = si;
            }
        }
    } catch (const json::exception& e) {
        throw_invalid(std::string("model JSON field error: ") + e.what());
    }
    if (m.variables.empty()) throw_invalid("model has no variables");
    return m;
}

// -------- fitting --------

namespace {

std::string variables_hash(const std::vector<std::string>& vars) {
    std::string joined;
    for (const auto& v : vars) {
        joined += v;
        joined.push_back(',');
    }
    return sha256_hex(joined).substr(0, 16);
}

LocationClass table_location_class(const WideTable& table) {
    if (table.rows() == 0) throw_invalid("dataset is empty");
    const LocationClass cls = table.location_class.front();
    for (const auto c : table.location_class) {
        if (c != cls) throw_invalid("dataset mixes location classes; fit them separately");
    }
    return cls;
}

} // namespace

FittedModel fit_model(const WideTable& input, const FitOptions& options) {
    options.mcmc.validate();
    const WideTable* table = &input;
    WideTable projected;
    if (options.slice > 0) {
        projected = slice_view(input, options.slice);
        table = &projected;
    }
    const LocationClass cls = table_location_class(*table);

    std::vector<std::string> vars =
        options.variables.empty() ? table->variables : options.variables;
    for (const auto& v : vars) {
        if (table->column_of(v) < 0) throw_invalid("variable '" + v + "' not in dataset");
    }

    auto strata = table->to_strata();
    const auto n_rows = static_cast<std::int64_t>(table->rows());

    std::map<std::string, StandardizeInfo> standardize;
    if (options.standardize) {
        for (const auto& v : vars) {
            const auto& col = table->columns[static_cast<std::size_t>(table->column_of(v))];
            StandardizeInfo info;
            double sum = 0.0;
            for (double x : col) sum += x;
            info.mean = sum / static_cast<double>(col.size());
            double ss = 0.0;
            for (double x : col) ss += (x - info.mean) * (x - info.mean);
            const double sd = std::sqrt(ss / std::max<std::size_t>(1, col.size() - 1));
            info.sd = sd > 0 ? sd : 1.0;
            standardize[v] = info;
        }
        for (auto& s : strata) {
            auto transform = [&](FeatureVector& f) {
                for (const auto& [name, info] : standardize) {
                    f[name] = (f.at(name) - info.mean) / info.sd;
                }
            };
            transform(s.crash.features);
            for (auto& c : s.controls) transform(c.features);
        }
    }

    if (options.backward) {
        // MLE-guided pruning: repeatedly drop the weakest Wald z below the
        // 0.1 cutoff, then hand the survivors to the Bayes fit.
        while (vars.size() > 1) {
            const auto data = make_clogit_data(strata, vars);
            const auto mle = fit_mle(data);
            int weakest = -1;
            double weakest_z = std::numeric_limits<double>::infinity();
            for (int j = 0; j < data.k(); ++j) {
                const double se = std::sqrt(std::max(0.0, mle.covariance(j, j)));
                const double z = se > 0 ? std::abs(mle.beta(j)) / se
                                        : std::numeric_limits<double>::infinity();
                if (z < weakest_z) {
                    weakest_z = z;
                    weakest = j;
                }
            }
            if (weakest < 0 || weakest_z >= 1.645) break;
            vars.erase(vars.begin() + weakest);
        }
    }

    const auto data = make_clogit_data(strata, vars);
    const auto mcmc = fit_bayes(data, options.mcmc);

    FittedModel model;
    model.name = options.slice > 0 ? "slice" + std::to_string(options.slice) : "full";
    model.location_class = cls;
    model.slice = options.slice;
    model.mcmc = options.mcmc;
    model.acceptance_rates = mcmc.acceptance_rate;
    model.standardize = standardize;
    model.dataset_rows = n_rows;
    model.dataset_strata = static_cast<std::int64_t>(strata.size());
    model.dataset_m = data.m;
    model.variable_hash = variables_hash(vars);
    model.converged = mcmc.converged;
    for (const auto& c : mcmc.coefficients) {
        ModelVariable v;
        v.name = c.name;
        v.mean = c.mean;
        v.sd = c.sd;
        v.ci_lo = c.q025;
        v.ci_hi = c.q975;
        v.ci90_lo = c.q05;
        v.ci90_hi = c.q95;
        v.or_mean = c.or_mean;
        v.or_lo = c.or_q025;
        v.or_hi = c.or_q975;
        v.sig = c.sig;
        v.r_hat = c.r_hat;
        v.ess = c.ess;
        model.variables.push_back(std::move(v));
    }

    // In-sample AUC of the adjusted odds ratios, as the artifact's
    // goodness-of-fit figure.
    {
        WideTable scored = *table;
        auto scores = score_table(model, scored);
        std::vector<double> s;
        std::vector<int> labels;
        for (const auto& r : scores) {
            s.push_back(r.adjusted);
            labels.push_back(r.label == EventRole::crash ? 1 : 0);
        }
        model.auc = roc_auc(s, labels).auc;
    }

    if (options.strict && !model.converged) {
        throw Error(Status::non_convergence,
                    "MCMC did not converge (some R-hat >= 1.1) and --strict is set");
    }
    return model;
}

// -------- scoring --------

std::vector<RiskScore> score_table(const FittedModel& model, const WideTable& table) {
    if (table.rows() == 0) throw_invalid("dataset is empty");

    // Resolve each model variable to a data column; slice models fall back
    // to the slice-tagged wide columns.
    std::vector<int> col_of_var(model.variables.size(), -1);
    for (std::size_t v = 0; v < model.variables.size(); ++v) {
        const auto& name = model.variables[v].name;
        int col = table.column_of(name);
        if (col < 0 && model.slice > 0) {
            if (const auto widened = widen_slice_variable(name, model.slice)) {
                col = table.column_of(*widened);
            }
        }
        if (col < 0) {
            throw_invalid("model variable '" + name +
                          "' not present in the dataset (no zero-imputation)");
        }
        col_of_var[v] = col;
    }

    auto transformed = [&](std::size_t v, std::size_t row) {
        double x = table.columns[static_cast<std::size_t>(col_of_var[v])][row];
        const auto it = model.standardize.find(model.variables[v].name);
        if (it != model.standardize.end()) x = (x - it->second.mean) / it->second.sd;
        return x;
    };

    // Stratum control means per model variable.
    std::map<std::string, std::vector<std::size_t>> stratum_rows;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        stratum_rows[table.stratum_id[r]].push_back(r);
    }
    std::map<std::string, std::vector<double>> control_mean;
    for (const auto& [sid, rows] : stratum_rows) {
        std::vector<double> mean(model.variables.size(), 0.0);
        long n = 0;
        for (std::size_t r : rows) {
            if (table.role[r] != EventRole::control) continue;
            ++n;
            for (std::size_t v = 0; v < model.variables.size(); ++v) {
                mean[v] += transformed(v, r);
            }
        }
        if (n == 0) {
            throw_invalid("stratum '" + sid + "' has no control rows to average");
        }
        for (double& x : mean) x /= static_cast<double>(n);
        control_mean[sid] = std::move(mean);
    }

    std::vector<RiskScore> out;
    out.reserve(table.rows());
    for (std::size_t r = 0; r < table.rows(); ++r) {
        const auto& mean = control_mean[table.stratum_id[r]];
        double eta = 0.0;
        for (std::size_t v = 0; v < model.variables.size(); ++v) {
            eta += model.variables[v].mean * (transformed(v, r) - mean[v]);
        }
        RiskScore s;
        s.event_id = table.event_id[r];
        s.stratum_id = table.stratum_id[r];
        s.odds_ratio = std::exp(eta);
        s.label = table.role[r];
        out.push_back(std::move(s));
    }
    adjust_scores(out);
    return out;
}

} // namespace ixrisk
