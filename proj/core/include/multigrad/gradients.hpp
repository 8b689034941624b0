#pragma once

#include <optional>
#include <vector>

#include "multigrad/rng.hpp"
#include "multigrad/tensor.hpp"

namespace multigrad {

// Per-task gradients over one shared variable.
//
// When `batched` is set, axis 0 of every gradient (and of the activations) is
// a batch axis that marginalization may sum over. `batch_separated` marks
// gradient sets whose nonzero rows are disjoint across tasks (mixed-batch
// transfer); it requires `batched` and `activations`.
struct TaskGradients {
    std::vector<Tensor> grads;
    bool batch_separated = false;
    bool batched = false;
    std::optional<Tensor> activations;

    std::size_t n_tasks() const { return grads.size(); }

    // Throws ShapeError/ContractError if the fields are inconsistent.
    void validate() const;
};

// GradDrop knobs. `rng` advances as masks are sampled, so a config owns its
// stream for the lifetime of a trial.
struct CombinerConfig {
    double k = 1.0;                 // activation slope; 0 = random graddrop
    std::vector<double> leaks;      // per-task, empty = all zero
    bool marginalize = true;        // sum batched gradients over axis 0
    bool renormalize = true;        // rescale output to the naive sum's norm
    RngStream rng;
};

// Sampled masks plus the purity they were drawn from.
struct MaskSet {
    std::vector<Tensor> masks;  // {0,1} per task, one entry per position
    Tensor purity;
    double keep_fraction = 1.0; // kept entries / nonzero entries, 1 if none
};

} // namespace multigrad
