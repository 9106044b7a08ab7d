// ixrisk command line: thin shell over the C API in ixrisk.h.
//
// Exit codes: 0 ok, 2 bad input, 3 numerical failure, 4 non-convergence
// under --strict, 5 I/O failure.

#include "ixrisk.h"

#include <CLI11.hpp>

#include <cstdio>
#include <string>

namespace {

int finish(ix_status status, const char* command) {
    if (status == IX_OK) return 0;
    std::fprintf(stderr, "ixrisk %s: error(%d): %s\n", command, static_cast<int>(status),
                 ix_last_error());
    return static_cast<int>(status);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Real-time crash-risk pipeline for signalized intersections"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ix_version()));

    int threads = 1;
    app.add_option("--threads", threads, "Worker threads (default 1)")->capture_default_str();

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Generate synthetic stream CSVs + crashes");
    std::string sim_scenario, sim_out;
    simulate->add_option("--scenario", sim_scenario, "Scenario JSON")->required();
    simulate->add_option("--out", sim_out, "Output directory")->required();

    // prepare
    auto* prepare = app.add_subcommand("prepare", "Filter and classify the crash list");
    std::string prep_streams, prep_out;
    prepare->add_option("--streams", prep_streams, "Stream CSV directory")->required();
    prepare->add_option("--out", prep_out, "Output directory")->required();

    // match
    auto* match = app.add_subcommand("match", "Build the matched case-control datasets");
    std::string match_streams, match_crashes, match_out;
    int match_m = 4;
    std::uint64_t match_seed = 0;
    bool match_seed_set = false;
    match->add_option("--streams", match_streams, "Stream CSV directory")->required();
    match->add_option("--crashes", match_crashes, "Eligible crash CSV")->required();
    match->add_option("--m", match_m, "Controls per case")->capture_default_str();
    match->add_option("--seed", match_seed, "Sampling seed (required)")
        ->required()
        ->each([&](const std::string&) { match_seed_set = true; });
    match->add_option("--out", match_out, "Output directory")->required();

    // screen
    auto* screen = app.add_subcommand("screen", "Correlation screening (Pearson + MIC)");
    std::string screen_data, screen_out;
    double screen_r = 0.6, screen_mic = 0.7;
    int screen_slice = 0;
    bool screen_no_cross = false;
    screen->add_option("--data", screen_data, "Wide feature CSV")->required();
    screen->add_option("--r", screen_r, "Pearson |r| threshold")->capture_default_str();
    screen->add_option("--mic", screen_mic, "MIC threshold")->capture_default_str();
    screen->add_option("--slice", screen_slice, "Restrict to one time slice (1..4)");
    screen->add_flag("--no-cross-slice", screen_no_cross,
                     "Skip same-measure pairs across slices");
    screen->add_option("--out", screen_out, "Report CSV path")->required();

    // fit
    auto* fit = app.add_subcommand("fit", "Bayesian conditional logistic fit");
    std::string fit_data, fit_out, fit_vars;
    ix_fit_opts fit_opts;
    ix_fit_opts_init(&fit_opts);
    bool fit_standardize = false, fit_backward = false, fit_strict = false;
    fit->add_option("--data", fit_data, "Wide feature CSV")->required();
    fit->add_option("--vars", fit_vars, "Comma-separated variables (default: all)");
    fit->add_option("--chains", fit_opts.chains, "MCMC chains")->capture_default_str();
    fit->add_option("--iters", fit_opts.iterations, "Iterations per chain")
        ->capture_default_str();
    fit->add_option("--burn", fit_opts.burn_in, "Burn-in iterations")->capture_default_str();
    fit->add_option("--prior-variance", fit_opts.prior_variance, "Normal prior variance")
        ->capture_default_str();
    fit->add_option("--seed", fit_opts.seed, "Sampler seed (required)")->required();
    fit->add_option("--slice", fit_opts.slice, "Fit one time slice (1..4)");
    fit->add_flag("--standardize", fit_standardize, "Z-score covariates before fitting");
    fit->add_flag("--backward", fit_backward, "Backward elimination before the Bayes fit");
    fit->add_flag("--strict", fit_strict, "Treat non-convergence as an error");
    fit->add_option("--out", fit_out, "Model JSON path")->required();

    // score
    auto* score = app.add_subcommand("score", "Odds-ratio scores for every event");
    std::string score_model, score_paper, score_data, score_out;
    score->add_option("--model", score_model, "Model JSON from fit");
    score->add_option("--paper-model", score_paper,
                      "Embedded reference model (within_full, within_slice1..4, "
                      "entrance_full, entrance_slice1..4)");
    score->add_option("--data", score_data, "Wide feature CSV")->required();
    score->add_option("--out", score_out, "Scores CSV path")->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "ROC curve and AUC from scores");
    std::string eval_scores, eval_out;
    evaluate->add_option("--scores", eval_scores, "Scores CSV")->required();
    evaluate->add_option("--out", eval_out, "ROC CSV path")->required();

    // report
    auto* report = app.add_subcommand("report", "Descriptive statistics table");
    std::string report_data, report_out;
    report->add_option("--data", report_data, "Wide feature CSV")->required();
    report->add_option("--out", report_out, "Statistics CSV path")->required();

    // recover
    auto* recover = app.add_subcommand("recover", "Parameter-recovery experiment");
    std::string rec_scenario, rec_out;
    int rec_reps = 20;
    std::uint64_t rec_seed = 0;
    recover->add_option("--scenario", rec_scenario, "Scenario JSON")->required();
    recover->add_option("--reps", rec_reps, "Replications")->capture_default_str();
    recover->add_option("--seed", rec_seed, "Experiment seed (required)")->required();
    recover->add_option("--out", rec_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (simulate->parsed()) {
        return finish(ix_simulate(sim_scenario.c_str(), sim_out.c_str(), threads), "simulate");
    }
    if (prepare->parsed()) {
        return finish(ix_prepare(prep_streams.c_str(), prep_out.c_str()), "prepare");
    }
    if (match->parsed()) {
        return finish(ix_match(match_streams.c_str(), match_crashes.c_str(), match_m,
                               match_seed, match_out.c_str(), threads),
                      "match");
    }
    if (screen->parsed()) {
        return finish(ix_screen(screen_data.c_str(), screen_r, screen_mic, screen_slice,
                                screen_no_cross ? 0 : 1, screen_out.c_str(), threads),
                      "screen");
    }
    if (fit->parsed()) {
        fit_opts.standardize = fit_standardize ? 1 : 0;
        fit_opts.backward = fit_backward ? 1 : 0;
        fit_opts.strict = fit_strict ? 1 : 0;
        fit_opts.threads = threads;
        if (!fit_vars.empty()) fit_opts.variables = fit_vars.c_str();
        return finish(ix_fit(fit_data.c_str(), &fit_opts, fit_out.c_str()), "fit");
    }
    if (score->parsed()) {
        return finish(ix_score(score_model.empty() ? nullptr : score_model.c_str(),
                               score_paper.empty() ? nullptr : score_paper.c_str(),
                               score_data.c_str(), score_out.c_str()),
                      "score");
    }
    if (evaluate->parsed()) {
        double auc = 0.0;
        const ix_status st = ix_evaluate(eval_scores.c_str(), eval_out.c_str(), &auc);
        if (st == IX_OK) std::printf("auc %.6f\n", auc);
        return finish(st, "evaluate");
    }
    if (report->parsed()) {
        return finish(ix_report(report_data.c_str(), report_out.c_str()), "report");
    }
    if (recover->parsed()) {
        return finish(ix_recover(rec_scenario.c_str(), rec_reps, rec_seed, rec_out.c_str(),
                                 threads),
                      "recover");
    }
    return 0;
}
