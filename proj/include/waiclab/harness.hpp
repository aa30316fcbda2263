#pragma once

#include <limits>
#include <map>
#include <variant>

#include "waiclab/estimators.hpp"
#include "waiclab/zoo.hpp"

namespace waiclab {

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using ModelSpec =
    std::variant<ReducedRankConfig, RegularGaussianConfig, BernoulliBetaConfig>;

struct ExperimentConfig {
    ModelSpec model;
    std::size_t n = 500;
    std::size_t test_size = 10000;
    double beta = 1.0;
    std::size_t trials = 25;
    McmcConfig mcmc;
    std::uint64_t master_seed = 1;
    std::string output_dir = ".";

    void validate() const;
};

// Flat "dotted.key = value" text format; unknown keys are rejected with
// the offending key named.
ExperimentConfig parse_experiment_config(const std::string& path,
                                         const std::vector<std::string>& overrides = {});
ExperimentConfig parse_experiment_config_text(const std::string& text,
                                              const std::vector<std::string>& overrides = {});

Model build_model(const ModelSpec& spec);

struct TrialFailure {
    std::size_t trial = 0;
    std::string message;
};

struct ExperimentAggregate {
    std::vector<ErrorReport> reports; // completed trials, in trial order
    std::vector<TrialFailure> failures;
    std::size_t trials = 0;
    ExperimentConfig config;

    double mean(const std::string& field) const;
    double stddev(const std::string& field) const; // sample std across trials
};

ErrorReport run_trial(const ExperimentConfig& cfg, std::size_t trial_index);
ExperimentAggregate run_experiment(const ExperimentConfig& cfg,
                                   bool write_outputs = true);

struct StateEquationResiduals {
    // r1: (Bg-Bt) - 2 beta (Gt-Bt); r2: (Gg-Gt) - 2 beta (Gt-Bt);
    // r3 (conservation): (Gg-Bg) - (Gt-Bt). Residuals of across-trial
    // means; SEs propagate the per-field SEs of the four errors.
    double r1 = 0, r2 = 0, r3 = 0;
    double se1 = 0, se2 = 0, se3 = 0;
    bool pass1 = false, pass2 = false, pass3 = false;

    bool all_pass() const { return pass1 && pass2 && pass3; }
};

StateEquationResiduals verify_state_equations(const ExperimentAggregate& agg,
                                              double beta);
StateEquationResiduals verify_state_equations(
    const std::vector<ErrorReport>& reports, double beta);

void write_trials_csv(const ExperimentAggregate& agg, const std::string& path);
std::vector<ErrorReport> read_trials_csv(const std::string& path);
void write_aggregate_csv(const ExperimentAggregate& agg,
                         const std::string& path);
void write_aggregate_text(const ExperimentAggregate& agg,
                          const std::string& path);

// WAIC1 excess over the empirical entropy: Bt + 2 beta (Gt - Bt).
double waic1_excess(const ErrorReport& r);

struct Table1Row {
    int H = 0;
    double theory_lambda_over_n = std::numeric_limits<double>::quiet_NaN();
    double mean_Bg = 0, std_Bg = 0;
    double mean_waic1_excess = 0, std_waic1_excess = 0;
};

// Runs the reduced rank experiment for each model rank in `ranks`,
// sharing one true distribution, and writes table1.csv in output_dir.
std::vector<Table1Row> run_table1(const ExperimentConfig& base,
                                  const std::vector<int>& ranks,
                                  bool write_outputs = true);

} // namespace waiclab
