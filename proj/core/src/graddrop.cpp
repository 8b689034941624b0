#include "multigrad/graddrop.hpp"

#include <cmath>
#include <string>

#include "multigrad/errors.hpp"

namespace multigrad {

Tensor purity(const std::vector<Tensor>& task_grads) {
    if (task_grads.empty()) throw ContractError("purity: no tasks");
    for (std::size_t i = 1; i < task_grads.size(); ++i)
        if (!task_grads[i].same_shape(task_grads[0]))
            throw ShapeError("purity: gradient shapes differ");
    Tensor p(task_grads[0].shape());
    for (std::size_t j = 0; j < p.size(); ++j) {
        double total = 0.0, mass = 0.0;
        for (const Tensor& g : task_grads) {
            total += g[j];
            mass += std::abs(g[j]);
        }
        p[j] = mass > 0.0 ? 0.5 * (1.0 + total / mass) : 0.5;
    }
    return p;
}

Tensor activation(const Tensor& p, double k) {
    if (k < 0.0) throw ConfigError("activation: k must be >= 0");
    Tensor out = p;
    for (std::size_t j = 0; j < out.size(); ++j) {
        double v = k * (out[j] - 0.5) + 0.5;
        out[j] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    }
    return out;
}

MaskSet sample_masks(const std::vector<Tensor>& task_grads, const Tensor& fp,
                     RngStream& rng) {
    if (task_grads.empty()) throw ContractError("sample_masks: no tasks");
    if (!fp.same_shape(task_grads[0]))
        throw ShapeError("sample_masks: f(P) shape differs from gradients");

    MaskSet ms;
    ms.purity = purity(task_grads);
    Tensor u = rng.uniform(fp.shape());

    std::size_t kept = 0, nonzero = 0;
    ms.masks.reserve(task_grads.size());
    for (const Tensor& g : task_grads) {
        Tensor m(g.shape());
        for (std::size_t j = 0; j < g.size(); ++j) {
            bool keep = (g[j] > 0.0 && fp[j] > u[j]) || (g[j] < 0.0 && fp[j] < u[j]);
            m[j] = keep ? 1.0 : 0.0;
            if (g[j] != 0.0) {
                ++nonzero;
                if (keep) ++kept;
            }
        }
        ms.masks.push_back(std::move(m));
    }
    ms.keep_fraction = nonzero ? double(kept) / double(nonzero) : 1.0;
    return ms;
}

Tensor batch_marginalize(const Tensor& activations, const Tensor& grad) {
    if (!activations.same_shape(grad))
        throw ShapeError("batch_marginalize: activations and gradient shapes differ");
    return sum_over_batch(elementwise_mul(grad, sign(activations)));
}

std::pair<Tensor, MaskSet> graddrop(const TaskGradients& tg, CombinerConfig& cfg) {
    tg.validate();
    std::size_t n = tg.n_tasks();

    std::vector<double> leaks = cfg.leaks;
    if (leaks.empty()) leaks.assign(n, 0.0);
    if (leaks.size() != n)
        throw ConfigError("graddrop: " + std::to_string(leaks.size()) + " leaks for " +
                          std::to_string(n) + " tasks");
    for (double l : leaks)
        if (l < 0.0 || l > 1.0) throw ConfigError("graddrop: leak outside [0,1]");

    // Sign content per task, collapsed over the batch axis when comparing
    // gradients across examples is wanted (or required, for batch-separated
    // sets).
    bool marg = tg.batched && (tg.batch_separated || cfg.marginalize);
    std::vector<Tensor> gsign;
    gsign.reserve(n);
    for (const Tensor& g : tg.grads) {
        Tensor s = tg.activations ? elementwise_mul(g, sign(*tg.activations)) : g;
        gsign.push_back(marg ? sum_over_batch(s) : std::move(s));
    }

    Tensor fp = activation(purity(gsign), cfg.k);
    MaskSet ms = sample_masks(gsign, fp, cfg.rng);

    // Accumulate in task order, same as naive_sum, so leak = 1 reproduces the
    // plain sum bit for bit.
    Tensor out;
    for (std::size_t i = 0; i < n; ++i) {
        // coefficient l_i + (1 - l_i) * M_i, tiled over the batch axis
        Tensor coef = ms.masks[i];
        for (std::size_t j = 0; j < coef.size(); ++j)
            coef[j] = leaks[i] + (1.0 - leaks[i]) * coef[j];
        Tensor term = elementwise_mul(tg.grads[i], coef);
        out = i == 0 ? std::move(term) : add(out, term);
    }

    if (cfg.renormalize) {
        double ref = l2_norm(naive_sum(tg));
        double cur = l2_norm(out);
        if (ref > 0.0 && cur > 0.0) out = scale(out, ref / cur);
    }
    return {std::move(out), std::move(ms)};
}

Tensor naive_sum(const TaskGradients& tg) {
    if (tg.grads.empty()) throw ContractError("naive_sum: no tasks");
    Tensor out = tg.grads[0];
    for (std::size_t i = 1; i < tg.grads.size(); ++i) out = add(out, tg.grads[i]);
    return out;
}

Tensor clip_global_norm(const Tensor& g, double c) {
    if (c <= 0.0) throw ConfigError("clip_global_norm: c must be positive");
    double n = l2_norm(g);
    return n > c ? scale(g, c / n) : g;
}

} // namespace multigrad
