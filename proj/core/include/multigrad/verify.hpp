#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "multigrad/problems.hpp"

namespace multigrad {

// One Monte Carlo estimate of the masked-update loss change against the
// matching closed form. z-scores use empirical standard errors (fourth
// central moment for the variance); a zero-spread estimate that agrees
// exactly reports z = 0.
struct StatReport {
    double p = 0.0; // positive gradient mass
    double n = 0.0; // negative gradient mass
    double k = 1.0;
    std::size_t samples = 0;
    double mean_mc = 0.0;
    double var_mc = 0.0;
    double mean_closed = 0.0;
    double var_closed = 0.0;
    double se_mean = 0.0;
    double se_var = 0.0;
    double z_mean = 0.0;
    double z_var = 0.0;
};

// Exact two-outcome statistics of the scalar-set loss change: the shared draw
// either keeps the positive side (probability f) or the negative side, so
// E = -(p-n)(f p - (1-f) n) and Var = f(1-f)(p-n)^2(p+n)^2. Valid for any
// k >= 0 including the clipped region.
void two_outcome_stats(double p, double n, double k, double& mean, double& var);

// The analytic forms E = -0.5(k+1)(p-n)^2 and
// Var = 0.25(p-n)^2((p-n)^2(-k^2-1) + 2p^2 + 2n^2), valid only for k in [0,1]
// where the activation never clips. p + n must be positive.
void closed_form_stats(double p, double n, double k, double& mean, double& var);

// Monte Carlo over mask draws on a scalar gradient set; loss change is
// -(sum of grads) * (masked sum) with unit step. samples >= 10^4.
StatReport mc_delta_loss(const std::vector<double>& grads, double k,
                         std::size_t samples, RngStream& rng);

struct SweepReport {
    std::vector<double> k_grid;
    std::vector<StatReport> stats;
    bool closed_monotone = false;      // |E| nondecreasing, Var nonincreasing
    bool empirical_consistent = false; // every z-score within 3
};

// k_grid must be sorted ascending within [0, 1].
SweepReport monotonicity_sweep(const std::vector<double>& grads,
                               const std::vector<double>& k_grid,
                               std::size_t samples, RngStream& rng);

struct SteeperReport {
    StatReport steep;   // higher slope
    StatReport shallow; // lower slope
    bool mean_ordered = false; // E_steep <= E_shallow <= 0 within 3 sigma
    bool var_ordered = false;  // Var_steep <= Var_shallow within 3 sigma
};

// Compares two clipped-linear activations with k_hi >= k_lo >= 0; either may
// exceed 1, where the two-outcome oracle (not the analytic form) is the
// reference.
SteeperReport steeper_compare(double k_hi, double k_lo,
                              const std::vector<double>& grads,
                              std::size_t samples, RngStream& rng);

// True iff every per-task gradient at w has L2 norm below eps.
bool check_joint_minimum(const Problem& p, const Tensor& w, double eps);

struct Prop2Report {
    std::vector<double> radii;
    std::vector<double> mean_norm;
    std::vector<double> se_norm;
    bool nondecreasing = false;        // within 3 sigma
    bool strictly_increasing = false;  // significant (or exact) increase
};

// Monte Carlo E[|masked combined gradient|_2] at w_star + d * direction for
// each d in radii (sorted ascending). w_star must be a stationary point of at
// least one component loss (grad norm < 1e-8), else ContractError.
Prop2Report check_prop2(const Problem& p, const Tensor& w_star,
                        const Tensor& direction, const std::vector<double>& radii,
                        double k, std::size_t samples, RngStream& rng);

// Named verification suites backing the CLI. Each runs a fixed battery at the
// given seed and sample count and reports a human-readable detail block.
struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

SuiteResult run_prop1_suite(std::uint64_t seed, std::size_t samples);
SuiteResult run_prop2_suite(std::uint64_t seed, std::size_t samples);
SuiteResult run_prop3_suite(std::uint64_t seed, std::size_t samples);
SuiteResult run_corollary_suite(std::uint64_t seed, std::size_t samples);

} // namespace multigrad
