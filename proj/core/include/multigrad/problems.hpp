#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "multigrad/gradients.hpp"

namespace multigrad {

// A multi-loss differentiable objective over a flat weight vector. eval and
// the gradient methods are pure and safe to call concurrently; all synthetic
// data is generated once at construction and frozen.
class Problem {
public:
    virtual ~Problem() = default;

    const std::string& name() const { return name_; }
    std::size_t dim() const { return dim_; }
    std::size_t n_tasks() const { return n_tasks_; }

    // Per-task loss values at w.
    virtual std::vector<double> eval(const Tensor& w) const = 0;

    // Per-task gradients in weight space (finite-difference checkable).
    virtual TaskGradients grad(const Tensor& w) const = 0;

    // Per-task gradients at the point where combiners operate. Weight space by
    // default; MLP problems combine at the last shared activation instead.
    virtual TaskGradients combine_grads(const Tensor& w) const { return grad(w); }

    // Maps a combined gradient from combine_grads' space back to a full
    // weight-space gradient. Identity for weight-space problems.
    virtual Tensor backprop(const Tensor& w, const Tensor& combined) const;

    // Trial weight initialization. Uniform [-10,10] per coordinate by default;
    // MLP problems use per-block scaled normals.
    virtual Tensor init_weights(RngStream& rng) const;

protected:
    Problem(std::string name, std::size_t dim, std::size_t n_tasks)
        : name_(std::move(name)), dim_(dim), n_tasks_(n_tasks) {}

    std::string name_;
    std::size_t dim_;
    std::size_t n_tasks_;
};

double sum_loss(const Problem& p, const Tensor& w);

// Five losses sin(a_i x + b_i) + 1 over one weight.
std::unique_ptr<Problem> sines_problem();

// Two quadratics (x - c)^2 and (x + c)^2; c = 0 collapses them onto a joint
// minimum at the origin.
std::unique_ptr<Problem> quad_pair_problem(double c);

// One tanh hidden layer with n_tasks linear heads on frozen synthetic
// regression data; combiners operate on the hidden-activation gradients.
std::unique_ptr<Problem> mlp_multitask_problem(std::uint64_t seed,
                                               std::size_t hidden,
                                               std::size_t n_tasks);

// Same architecture with explicit data, for edge-case tests.
// x is [batch, inputs], y is [batch, n_tasks].
std::unique_ptr<Problem> mlp_problem_from_data(Tensor x, Tensor y,
                                               std::size_t hidden);

// Two-task mixed-batch problem: the first half of the batch feeds only the
// source loss and the second half only the transfer loss, so the
// activation-gradient supports partition the batch (batch-separated).
std::unique_ptr<Problem> transfer_toy_problem(std::uint64_t seed);

// Max relative error between analytic per-task gradients and central
// differences of eval, with an absolute floor of 1e-8 on the denominator.
double finite_diff_check(const Problem& p, const Tensor& w, double h = 1e-5);

struct GridSearchResult {
    double x = 0.0;
    double loss = 0.0;
};

// Dense scan of the sum loss over [lo, hi] followed by golden-section
// refinement of the winning cell. One-dimensional problems only.
GridSearchResult grid_search_min(const Problem& p, double lo, double hi,
                                 double step);

} // namespace multigrad
