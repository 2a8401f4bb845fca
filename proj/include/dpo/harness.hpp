#pragma once

#include "dpo/envs.hpp"
#include "dpo/linear_mdp.hpp"
#include "dpo/linear_q.hpp"
#include "dpo/record.hpp"
#include "dpo/tabular.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dpo {

enum class Algorithm { tabular, linear_q, linear_q_exploratory, linear_mdp };

Algorithm parse_algorithm(const std::string& name);
std::string to_string(Algorithm algorithm);

/// One experiment: an instance, a loss schedule, an algorithm and its
/// parameter overrides, and the seeds to run.
struct RunConfig {
    Algorithm algorithm = Algorithm::tabular;
    InstanceSpec instance;
    LossScheduleSpec losses;
    /// Losses linear in the features (needed by the linear learners for a
    /// linear Q); defaults to true for every algorithm but tabular.
    bool feature_linear_losses = false;
    std::size_t T = 1000;

    TabularParams tabular;
    LinearQParams linear_q;
    ExploratoryParams exploratory;
    LinearMDPParams linear_mdp;

    std::vector<std::uint64_t> seeds{1};
    std::string out_dir = "runs";
    bool plot = true;

    /// Echo of the document the config was parsed from.
    nlohmann::json source;
};

/// Strict parse: unknown keys and wrong types are ConfigErrors naming the
/// offending location as a JSON pointer.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

/// Applies "a.b.c=value" to a document; value is read as JSON, or as a string
/// when it does not parse.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Warnings for parameter choices that fall outside the conditions the
/// regret analysis of each algorithm relies on.
std::vector<std::string> parameter_warnings(const RunConfig& config);

/// Records plus the exact cumulative regret of the uniform policy.
struct ExperimentResult {
    std::vector<ExperimentRecord> records; // seed order
    std::vector<double> uniform_regret;    // per episode
    std::vector<std::string> warnings;
};

/// Number of parallel seed workers: the DPO_WORKERS environment variable, or
/// the OpenMP default.
int worker_count();

/// Runs every seed (in parallel) and returns the records in seed order.
ExperimentResult run_experiment(const RunConfig& config);

/// Cumulative regret of the uniform policy against the comparator column of `record`.
std::vector<double> uniform_regret_curve(const LayeredMDP& mdp, const LossSchedule& schedule,
                                         const ExperimentRecord& record);

struct RegretReport {
    std::size_t T = 0;
    std::vector<std::size_t> checkpoints; // T/8, T/4, T/2, T
    std::vector<double> mean;             // mean cumulative regret
    std::vector<double> stddev;           // sample standard deviation over seeds
    std::vector<double> ratio;            // mean / checkpoint
    /// Least-squares slope of log regret on log t; NaN when some mean is not positive.
    double slope = 0.0;
    std::size_t seeds = 0;
};

/// Throws InputError on an empty set or records of different length or algorithm.
RegretReport regret_report(const std::vector<ExperimentRecord>& records);

void write_summary_csv(const RegretReport& report, const std::vector<double>& uniform_regret,
                       std::ostream& out);
void print_report(const RegretReport& report, std::ostream& out);

/// Cumulative regret per seed, their mean, and an optional baseline curve.
void write_regret_svg(const std::vector<ExperimentRecord>& records,
                      const std::vector<double>& baseline, std::ostream& out);

/// Writes run<i>_seed<s>.csv per record, summary.csv, regret.svg and config.json.
/// Returns the written paths.
std::vector<std::string> write_outputs(const RunConfig& config, const ExperimentResult& result);

/// Reads every per-seed CSV in a directory (summary.csv excluded), seed order.
std::vector<ExperimentRecord> read_records(const std::string& dir);

} // namespace dpo
