#include "ixrisk.h"

#include "errors.hpp"
#include "fsutil.hpp"
#include "inference.hpp"
#include "pipeline.hpp"
#include "risk.hpp"
#include "version.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

namespace {

thread_local std::string g_last_error;

ix_status to_status(const ixrisk::Error& e) {
    switch (e.status()) {
    case ixrisk::Status::invalid_input: return IX_ERR_INVALID_INPUT;
    case ixrisk::Status::numeric_failure: return IX_ERR_NUMERIC;
    case ixrisk::Status::non_convergence: return IX_ERR_NON_CONVERGENCE;
    case ixrisk::Status::io_failure: return IX_ERR_IO;
    default: return IX_ERR_NUMERIC;
    }
}

template <typename Fn>
ix_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return IX_OK;
    } catch (const ixrisk::Error& e) {
        g_last_error = e.what();
        return to_status(e);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return IX_ERR_NUMERIC;
    }
}

const char* require(const char* arg, const char* name) {
    if (!arg) ixrisk::throw_invalid(std::string(name) + " must not be NULL");
    return arg;
}

} // namespace

struct ix_dataset {
    ixrisk::WideTable table;
    std::vector<ixrisk::Stratum> strata;
    std::optional<ixrisk::ClogitData> data; // built on first likelihood call
};

struct ix_model {
    ixrisk::FittedModel model;
};

extern "C" {

const char* ix_version(void) { return ixrisk::k_version; }

const char* ix_last_error(void) { return g_last_error.c_str(); }

ix_status ix_simulate(const char* scenario_json, const char* out_dir, int threads) {
    return guarded([&] {
        ixrisk::stages::simulate(require(scenario_json, "scenario_json"),
                                 require(out_dir, "out_dir"), threads);
    });
}

ix_status ix_prepare(const char* streams_dir, const char* out_dir) {
    return guarded([&] {
        ixrisk::stages::prepare(require(streams_dir, "streams_dir"),
                                require(out_dir, "out_dir"));
    });
}

ix_status ix_match(const char* streams_dir, const char* crashes_csv, int m, uint64_t seed,
                   const char* out_dir, int threads) {
    return guarded([&] {
        ixrisk::stages::match(require(streams_dir, "streams_dir"),
                              require(crashes_csv, "crashes_csv"), m, seed,
                              require(out_dir, "out_dir"), threads);
    });
}

ix_status ix_screen(const char* data_csv, double r_threshold, double mic_threshold, int slice,
                    int cross_slice, const char* out_csv, int threads) {
    return guarded([&] {
        ixrisk::stages::screen(require(data_csv, "data_csv"), r_threshold, mic_threshold,
                               slice, cross_slice != 0, require(out_csv, "out_csv"), threads);
    });
}

void ix_fit_opts_init(ix_fit_opts* opts) {
    if (!opts) return;
    std::memset(opts, 0, sizeof(*opts));
    ixrisk::McmcSettings defaults;
    opts->chains = defaults.chains;
    opts->iterations = defaults.iterations;
    opts->burn_in = defaults.burn_in;
    opts->prior_variance = defaults.prior_variance;
    opts->threads = 1;
}

ix_status ix_fit(const char* data_csv, const ix_fit_opts* opts, const char* out_json) {
    return guarded([&] {
        if (!opts) ixrisk::throw_invalid("opts must not be NULL");
        ixrisk::FitOptions options;
        options.mcmc.chains = opts->chains;
        options.mcmc.iterations = opts->iterations;
        options.mcmc.burn_in = opts->burn_in;
        options.mcmc.prior_variance = opts->prior_variance;
        options.mcmc.seed = opts->seed;
        options.mcmc.threads = opts->threads;
        options.slice = opts->slice;
        options.standardize = opts->standardize != 0;
        options.backward = opts->backward != 0;
        options.strict = opts->strict != 0;
        if (opts->variables && *opts->variables) {
            std::stringstream ss(opts->variables);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (!item.empty()) options.variables.push_back(item);
            }
        }
        ixrisk::stages::fit(require(data_csv, "data_csv"), options,
                            require(out_json, "out_json"));
    });
}

ix_status ix_score(const char* model_json, const char* paper_model, const char* data_csv,
                   const char* out_csv) {
    return guarded([&] {
        ixrisk::stages::score(model_json ? model_json : "", paper_model ? paper_model : "",
                              require(data_csv, "data_csv"), require(out_csv, "out_csv"));
    });
}

ix_status ix_evaluate(const char* scores_csv, const char* out_csv, double* auc_out) {
    return guarded([&] {
        const double auc = ixrisk::stages::evaluate(require(scores_csv, "scores_csv"),
                                                    require(out_csv, "out_csv"));
        if (auc_out) *auc_out = auc;
    });
}

ix_status ix_report(const char* data_csv, const char* out_csv) {
    return guarded([&] {
        ixrisk::stages::report(require(data_csv, "data_csv"), require(out_csv, "out_csv"));
    });
}

ix_status ix_recover(const char* scenario_json, int replications, uint64_t seed,
                     const char* out_dir, int threads) {
    return guarded([&] {
        ixrisk::stages::recover(require(scenario_json, "scenario_json"), replications, seed,
                                require(out_dir, "out_dir"), threads);
    });
}

ix_status ix_dataset_open(const char* csv_path, ix_dataset** out) {
    return guarded([&] {
        if (!out) ixrisk::throw_invalid("out must not be NULL");
        auto handle = std::make_unique<ix_dataset>();
        handle->table = ixrisk::load_wide_csv(require(csv_path, "csv_path"));
        handle->strata = handle->table.to_strata();
        *out = handle.release();
    });
}

void ix_dataset_close(ix_dataset* dataset) { delete dataset; }

int64_t ix_dataset_rows(const ix_dataset* dataset) {
    return dataset ? static_cast<int64_t>(dataset->table.rows()) : 0;
}

int64_t ix_dataset_strata(const ix_dataset* dataset) {
    return dataset ? static_cast<int64_t>(dataset->strata.size()) : 0;
}

int ix_dataset_num_variables(const ix_dataset* dataset) {
    return dataset ? static_cast<int>(dataset->table.variables.size()) : 0;
}

const char* ix_dataset_variable(const ix_dataset* dataset, int index) {
    if (!dataset || index < 0 ||
        index >= static_cast<int>(dataset->table.variables.size())) {
        return nullptr;
    }
    return dataset->table.variables[static_cast<std::size_t>(index)].c_str();
}

ix_status ix_model_open(const char* json_path, ix_model** out) {
    return guarded([&] {
        if (!out) ixrisk::throw_invalid("out must not be NULL");
        auto handle = std::make_unique<ix_model>();
        handle->model = ixrisk::model_from_json(ixrisk::read_file(require(json_path, "json_path")));
        *out = handle.release();
    });
}

ix_status ix_model_paper(const char* name, ix_model** out) {
    return guarded([&] {
        if (!out) ixrisk::throw_invalid("out must not be NULL");
        auto handle = std::make_unique<ix_model>();
        handle->model = ixrisk::load_paper_model(require(name, "name"));
        *out = handle.release();
    });
}

void ix_model_close(ix_model* model) { delete model; }

int ix_model_num_variables(const ix_model* model) {
    return model ? static_cast<int>(model->model.variables.size()) : 0;
}

ix_status ix_model_variable(const ix_model* model, int index, const char** name, double* mean,
                            double* bci_lo, double* bci_hi) {
    return guarded([&] {
        if (!model) ixrisk::throw_invalid("model must not be NULL");
        if (index < 0 || index >= static_cast<int>(model->model.variables.size())) {
            ixrisk::throw_invalid("variable index out of range");
        }
        const auto& v = model->model.variables[static_cast<std::size_t>(index)];
        if (name) *name = v.name.c_str();
        if (mean) *mean = v.mean;
        if (bci_lo) *bci_lo = v.ci_lo;
        if (bci_hi) *bci_hi = v.ci_hi;
    });
}

double ix_model_auc(const ix_model* model) {
    return model ? model->model.auc : std::numeric_limits<double>::quiet_NaN();
}

ix_status ix_clogit_loglik(const ix_dataset* dataset, const double* beta, size_t k,
                           double* out) {
    return guarded([&] {
        if (!dataset || !beta || !out) ixrisk::throw_invalid("NULL argument");
        if (k != dataset->table.variables.size()) {
            ixrisk::throw_invalid("beta length must match the dataset variable count");
        }
        auto* mutable_dataset = const_cast<ix_dataset*>(dataset);
        if (!mutable_dataset->data) {
            mutable_dataset->data =
                ixrisk::make_clogit_data(dataset->strata, dataset->table.variables);
        }
        Eigen::VectorXd b(static_cast<Eigen::Index>(k));
        for (std::size_t i = 0; i < k; ++i) b(static_cast<Eigen::Index>(i)) = beta[i];
        *out = ixrisk::clogit_loglik(b, *mutable_dataset->data);
    });
}

ix_status ix_score_rows(const ix_model* model, const ix_dataset* dataset, double* scores,
                        int* labels) {
    return guarded([&] {
        if (!model || !dataset || !scores) ixrisk::throw_invalid("NULL argument");
        const auto result = ixrisk::score_table(model->model, dataset->table);
        for (std::size_t i = 0; i < result.size(); ++i) {
            scores[i] = result[i].adjusted;
            if (labels) labels[i] = result[i].label == ixrisk::EventRole::crash ? 1 : 0;
        }
    });
}

ix_status ix_auc(const double* scores, const int* labels, size_t n, double* out) {
    return guarded([&] {
        if (!scores || !labels || !out) ixrisk::throw_invalid("NULL argument");
        const std::vector<double> s(scores, scores + n);
        const std::vector<int> l(labels, labels + n);
        *out = ixrisk::roc_auc(s, l).auc;
    });
}

} // extern "C"
