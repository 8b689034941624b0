#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "multigrad/problems.hpp"

namespace multigrad {

// Learning-rate schedule: constant, or lr0 * ratio^floor(step/every).
struct Schedule {
    double lr0 = 0.2;
    double ratio = 1.0;
    std::size_t every = 0; // 0 => constant

    double lr(std::size_t step) const;

    static Schedule constant(double lr0);
    static Schedule step_decay(double lr0, double ratio, std::size_t every);
};

// Mutable optimizer state. Moment tensors are lazily shaped on first use and
// stay shape-congruent with w afterwards.
struct OptimState {
    Tensor w;
    std::size_t step = 0;
    Tensor velocity; // SGD momentum buffer
    Tensor m;        // Adam first moment
    Tensor v;        // Adam second moment
    bool moments_ready = false;

    explicit OptimState(Tensor weights) : w(std::move(weights)) {}
};

// w <- w - lr(step) * (momentum buffer of) g; increments step.
void sgd_step(OptimState& st, const Tensor& g, const Schedule& sched,
              double momentum = 0.0);

// Standard bias-corrected adaptive moment update.
void adam_step(OptimState& st, const Tensor& g, const Schedule& sched,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

enum class CombinerKind {
    GradDrop,
    NaiveSum,
    PcgradStatic,
    PcgradIterative,
    Mgda,
    GradNorm,
};

enum class OptimizerKind { Sgd, Adam };

// Full description of one method entry: combiner choice plus optimizer.
// clip_norm > 0 clips the combined weight-space gradient regardless of kind,
// so the clipping baseline is NaiveSum + clip_norm.
struct MethodConfig {
    std::string label;
    CombinerKind kind = CombinerKind::GradDrop;
    double k = 1.0;
    std::vector<double> leaks; // empty => all zero
    bool marginalize = true;
    bool renormalize = true;
    double clip_norm = 0.0; // 0 => off
    OptimizerKind optimizer = OptimizerKind::Sgd;
    double momentum = 0.0;
    Schedule schedule = Schedule::step_decay(0.2, 0.5, 1000);
    double gradnorm_alpha = 1.0;
    double gradnorm_lr = 0.025;
};

// Stable hex digest of everything that affects the trajectory except the
// seed: combiner settings, optimizer, schedule, and step count.
std::string config_fingerprint(const MethodConfig& m, std::size_t steps);

struct TrialRecord {
    std::string method;
    std::string fingerprint;
    std::uint64_t seed = 0;
    std::vector<double> trajectory; // sum loss; steps + 1 entries when completed
    std::vector<std::size_t> keep_steps;
    std::vector<double> keep_values;
    std::vector<double> final_task_losses;
    Tensor final_w;
    double final_loss = std::numeric_limits<double>::quiet_NaN();
    bool diverged = false;
    double wall_ms = 0.0;
};

// Runs one trial: seeds the weights, then loops grad -> combine -> clip ->
// optimizer step for `steps` iterations. Streams: 0 init, 1 combiner,
// 2 keep-fraction probe. Deterministic in (seed, config). Non-finite losses
// or gradients mark the record diverged instead of throwing.
TrialRecord train(const Problem& p, const MethodConfig& m, std::size_t steps,
                  std::uint64_t seed, std::size_t keep_every = 10);

} // namespace multigrad
