#pragma once

#include <vector>

#include "multigrad/gradients.hpp"

namespace multigrad {

// Projects each task gradient off every gradient it conflicts with (negative
// dot product) and returns the sum. Both the task order and the order of
// projection references are reshuffled per call. `iterative` projects against
// the working (already projected) gradients instead of static copies of the
// originals, which keeps the method non-degenerate in low dimensions.
Tensor pcgrad(const TaskGradients& tg, RngStream& rng, bool iterative);

struct MgdaResult {
    std::vector<double> weights; // simplex coefficients
    Tensor direction;            // sum_i weights[i] * g_i
    int iterations = 0;
    double gap = 0.0;            // final Frank-Wolfe duality gap
};

// Min-norm point in the convex hull of the task gradients via pairwise
// Frank-Wolfe (mass moves from the worst supported vertex to the best one)
// with exact line search; linearly convergent on the simplex.
MgdaResult mgda_minnorm(const TaskGradients& tg, int max_iters = 250,
                        double tol = 1e-9);

// One task-weight update: pushes each weighted gradient norm toward the mean
// norm scaled by that task's relative training rate, then clamps at zero and
// renormalizes the weights to sum to n. Targets are treated as constants, so
// the weight gradient is sign(G_i - target_i) * |grad_i|.
std::vector<double> gradnorm_step(const std::vector<double>& weights,
                                  const std::vector<double>& losses,
                                  const std::vector<double>& grad_norms,
                                  const std::vector<double>& initial_losses,
                                  double alpha, double lr);

} // namespace multigrad
