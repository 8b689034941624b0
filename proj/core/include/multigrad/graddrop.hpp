#pragma once

#include <utility>
#include <vector>

#include "multigrad/gradients.hpp"

namespace multigrad {

// Gradient positive sign purity P = 0.5 * (1 + sum_i G_i / sum_i |G_i|),
// elementwise over same-shape tensors. Positions with zero total magnitude
// get P = 0.5.
Tensor purity(const std::vector<Tensor>& task_grads);

// Clipped linear activation f(p) = clip(k*(p - 0.5) + 0.5, 0, 1). k = 1 is the
// identity on [0,1]; k = 0 maps everything to 0.5.
Tensor activation(const Tensor& p, double k);

// Draws one uniform tensor U shared across tasks and keeps positive entries
// where f(P) > U, negative entries where f(P) < U. Zero entries always get
// mask 0.
MaskSet sample_masks(const std::vector<Tensor>& task_grads, const Tensor& fp,
                     RngStream& rng);

// sum_batch(sign(activations) * grad): collapses the batch axis so gradient
// signs from different examples can be compared.
Tensor batch_marginalize(const Tensor& activations, const Tensor& grad);

// Full GradDrop: sign-premultiply by activations when present, marginalize
// over the batch axis when requested (always for batch-separated sets), sample
// coupled sign masks, blend with per-task leaks, optionally renormalize to the
// naive sum's L2 norm. Masks are tiled over the batch axis when they were
// sampled on the marginalized shape.
std::pair<Tensor, MaskSet> graddrop(const TaskGradients& tg, CombinerConfig& cfg);

// Plain sum of the per-task gradients.
Tensor naive_sum(const TaskGradients& tg);

// Scales g to norm c when its L2 norm exceeds c.
Tensor clip_global_norm(const Tensor& g, double c);

} // namespace multigrad
