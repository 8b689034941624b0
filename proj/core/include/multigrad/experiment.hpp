#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "multigrad/optim.hpp"

namespace multigrad {

// Grid-search window for the 1-D oracle plus the near-oracle tolerance.
struct OracleSpec {
    double lo = -10.0;
    double hi = 10.0;
    double step = 1e-4;
    double tol = 0.05;
};

struct ProblemSpec {
    std::string name = "sines";
    double c = 1.0;          // quad_pair separation
    std::uint64_t seed = 7;  // data seed (mlp_multitask, transfer_toy)
    std::size_t hidden = 16; // mlp_multitask width
    std::size_t tasks = 8;   // mlp_multitask head count
};

struct ExperimentSpec {
    ProblemSpec problem;
    std::vector<MethodConfig> methods;
    std::size_t steps = 10000;
    std::size_t trials = 200;
    std::uint64_t seed = 2024;
    std::string out_dir; // empty = decided by the caller
    std::size_t traj_trials = 5;
    std::size_t keep_every = 10;
    OracleSpec oracle;
};

// Reads a JSON experiment document and applies all defaults. Errors carry the
// offending field path (semantic) or line/column (syntax) as ParseError.
ExperimentSpec parse_spec(const std::string& path);
ExperimentSpec parse_spec_text(const std::string& text, const std::string& origin);

// Fully-defaulted JSON document equivalent to the spec; reparsing it yields
// the same experiment.
std::string resolved_json(const ExperimentSpec& spec);

std::unique_ptr<Problem> make_problem(const ProblemSpec& ps);

struct SummaryRow {
    std::string method;
    double min = std::numeric_limits<double>::quiet_NaN();
    double q1 = std::numeric_limits<double>::quiet_NaN();
    double median = std::numeric_limits<double>::quiet_NaN();
    double q3 = std::numeric_limits<double>::quiet_NaN();
    double max = std::numeric_limits<double>::quiet_NaN();
    double mean = std::numeric_limits<double>::quiet_NaN();
    double oracle_frac = std::numeric_limits<double>::quiet_NaN();
    std::size_t diverged = 0;
    double mean_wall_ms = 0.0;
    bool failed = false; // every trial diverged
};

struct ExperimentResult {
    ExperimentSpec spec; // resolved
    std::vector<std::vector<TrialRecord>> records; // [method][trial]
    std::vector<SummaryRow> summaries;
    double oracle_x = std::numeric_limits<double>::quiet_NaN();
    double oracle_loss = std::numeric_limits<double>::quiet_NaN();
};

// Deterministic trial seeding: a hash chain over (base, method, trial).
std::uint64_t trial_seed(std::uint64_t base, std::size_t method_idx,
                         std::size_t trial_idx);

// Runs trials x methods on a worker pool (workers = 0 picks the hardware
// count). Results are identical at any width; a trial that throws is recorded
// as diverged rather than aborting the sweep.
ExperimentResult run_experiment(const ExperimentSpec& spec, std::size_t workers = 0);

// Quantiles over non-diverged finals by linear interpolation; diverged trials
// are counted separately. oracle_loss may be NaN (no oracle available).
SummaryRow summarize(const std::string& method,
                     const std::vector<TrialRecord>& records, double oracle_loss,
                     double tol);

// Writes summary.csv, trials.csv, traj_<method>_<trial>.csv for the first
// traj_trials trials per method, and spec.resolved.json into dir.
void emit(const ExperimentResult& result, const std::string& dir);

// Linear-interpolation quantile of an ascending-sorted nonempty vector.
double quantile(const std::vector<double>& sorted, double q);

// Shortest round-trip decimal form, '.' separator, "nan"/"inf"/"-inf".
std::string format_double(double v);

} // namespace multigrad
