/* ixrisk - real-time crash-risk analysis for signalized intersections.
 *
 * C API over the shared library. Handles are opaque; every function that can
 * fail returns an ix_status, and ix_last_error() describes the most recent
 * failure on the calling thread.
 */
#ifndef IXRISK_H
#define IXRISK_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define IXRISK_API __declspec(dllexport)
#else
#define IXRISK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ix_status {
    IX_OK = 0,
    IX_ERR_INVALID_INPUT = 2,
    IX_ERR_NUMERIC = 3,
    IX_ERR_NON_CONVERGENCE = 4,
    IX_ERR_IO = 5
} ix_status;

IXRISK_API const char* ix_version(void);

/* Message for the last failing call on this thread; empty string if none. */
IXRISK_API const char* ix_last_error(void);

/* ---- pipeline stages (files in, files out; one manifest per target) ---- */

IXRISK_API ix_status ix_simulate(const char* scenario_json, const char* out_dir, int threads);

IXRISK_API ix_status ix_prepare(const char* streams_dir, const char* out_dir);

IXRISK_API ix_status ix_match(const char* streams_dir, const char* crashes_csv, int m,
                              uint64_t seed, const char* out_dir, int threads);

/* slice = 0 screens every slice scope; cross_slice adds same-measure pairs
 * across slices. Writes the report plus *_retained.csv / *_dropped.csv. */
IXRISK_API ix_status ix_screen(const char* data_csv, double r_threshold, double mic_threshold,
                               int slice, int cross_slice, const char* out_csv, int threads);

typedef struct ix_fit_opts {
    int chains;            /* default 3 */
    int iterations;        /* default 20000 */
    int burn_in;           /* default 5000 */
    double prior_variance; /* default 1000 */
    uint64_t seed;
    int slice;       /* 0 = full window */
    int standardize; /* z-score covariates, recorded in the artifact */
    int backward;    /* MLE-guided backward elimination first */
    int strict;      /* non-convergence becomes an error */
    int threads;
    const char* variables; /* comma-separated subset; NULL = all columns */
} ix_fit_opts;

IXRISK_API void ix_fit_opts_init(ix_fit_opts* opts);

IXRISK_API ix_status ix_fit(const char* data_csv, const ix_fit_opts* opts,
                            const char* out_json);

/* Exactly one of model_json / paper_model must be non-NULL. */
IXRISK_API ix_status ix_score(const char* model_json, const char* paper_model,
                              const char* data_csv, const char* out_csv);

IXRISK_API ix_status ix_evaluate(const char* scores_csv, const char* out_csv,
                                 double* auc_out);

IXRISK_API ix_status ix_report(const char* data_csv, const char* out_csv);

IXRISK_API ix_status ix_recover(const char* scenario_json, int replications, uint64_t seed,
                                const char* out_dir, int threads);

/* ---- in-memory handles ---- */

typedef struct ix_dataset ix_dataset; /* a loaded wide feature table */

IXRISK_API ix_status ix_dataset_open(const char* csv_path, ix_dataset** out);
IXRISK_API void ix_dataset_close(ix_dataset* dataset);
IXRISK_API int64_t ix_dataset_rows(const ix_dataset* dataset);
IXRISK_API int64_t ix_dataset_strata(const ix_dataset* dataset);
IXRISK_API int ix_dataset_num_variables(const ix_dataset* dataset);
IXRISK_API const char* ix_dataset_variable(const ix_dataset* dataset, int index);

typedef struct ix_model ix_model; /* a fitted or embedded reference model */

IXRISK_API ix_status ix_model_open(const char* json_path, ix_model** out);
IXRISK_API ix_status ix_model_paper(const char* name, ix_model** out);
IXRISK_API void ix_model_close(ix_model* model);
IXRISK_API int ix_model_num_variables(const ix_model* model);
IXRISK_API ix_status ix_model_variable(const ix_model* model, int index, const char** name,
                                       double* mean, double* bci_lo, double* bci_hi);
IXRISK_API double ix_model_auc(const ix_model* model); /* NaN when unknown */

/* Conditional log-likelihood of the dataset at beta (one coefficient per
 * dataset variable, dataset variable order). */
IXRISK_API ix_status ix_clogit_loglik(const ix_dataset* dataset, const double* beta,
                                      size_t k, double* out);

/* Eq. 7 odds-ratio scores in row order; scores/labels must hold
 * ix_dataset_rows() entries. labels receive 1 for crash rows. */
IXRISK_API ix_status ix_score_rows(const ix_model* model, const ix_dataset* dataset,
                                   double* scores, int* labels);

/* Trapezoidal AUC (Mann-Whitney with ties at 0.5). */
IXRISK_API ix_status ix_auc(const double* scores, const int* labels, size_t n, double* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* IXRISK_H */
