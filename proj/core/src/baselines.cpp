#include "multigrad/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "multigrad/errors.hpp"

namespace multigrad {

Tensor pcgrad(const TaskGradients& tg, RngStream& rng, bool iterative) {
    tg.validate();
    std::size_t n = tg.n_tasks();
    std::vector<Tensor> work = tg.grads;
    const std::vector<Tensor> originals = iterative ? std::vector<Tensor>{} : tg.grads;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);

    for (std::size_t i : order) {
        std::vector<std::size_t> refs;
        refs.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) refs.push_back(j);
        shuffle(refs, rng);

        for (std::size_t j : refs) {
            const Tensor& ref = iterative ? work[j] : originals[j];
            double d = dot(work[i], ref);
            if (d < 0.0) {
                // d < 0 implies ref is nonzero
                work[i] = sub(work[i], scale(ref, d / dot(ref, ref)));
            }
        }
    }

    Tensor out = work[0];
    for (std::size_t i = 1; i < n; ++i) out = add(out, work[i]);
    return out;
}

MgdaResult mgda_minnorm(const TaskGradients& tg, int max_iters, double tol) {
    tg.validate();
    if (max_iters < 1) throw ConfigError("mgda_minnorm: max_iters must be >= 1");
    if (tol <= 0.0) throw ConfigError("mgda_minnorm: tol must be positive");
    std::size_t n = tg.n_tasks();

    // Gram matrix of the task gradients; everything else runs in weight space.
    std::vector<double> gram(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            gram[i * n + j] = gram[j * n + i] = dot(tg.grads[i], tg.grads[j]);

    MgdaResult res;
    res.weights.assign(n, 1.0 / double(n));

    std::vector<double> mg(n);
    for (int it = 0; it < max_iters; ++it) {
        // mg = gram * weights, so mg[i] = d . g_i and weights . mg = |d|^2
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += gram[i * n + j] * res.weights[j];
            mg[i] = s;
        }
        double dd = 0.0;
        for (std::size_t i = 0; i < n; ++i) dd += res.weights[i] * mg[i];

        std::size_t t = std::size_t(std::min_element(mg.begin(), mg.end()) - mg.begin());
        res.gap = dd - mg[t];
        res.iterations = it;
        if (res.gap < tol) break;

        // pairwise step: shift mass from the worst supported vertex a to the
        // best vertex t; d(s) = d + s (g_t - g_a), exact minimizer
        // s* = (mg_a - mg_t) / |g_t - g_a|^2, capped by the mass at a
        std::size_t a = t;
        for (std::size_t i = 0; i < n; ++i)
            if (res.weights[i] > 0.0 && (res.weights[a] <= 0.0 || mg[i] > mg[a])) a = i;
        double denom = gram[t * n + t] - 2.0 * gram[t * n + a] + gram[a * n + a];
        if (denom <= 0.0) break; // g_t == g_a: no direction left to move along
        double step = std::min(res.weights[a], (mg[a] - mg[t]) / denom);
        res.weights[t] += step;
        res.weights[a] -= step;
    }

    res.direction = scale(tg.grads[0], res.weights[0]);
    for (std::size_t i = 1; i < n; ++i)
        res.direction = add(res.direction, scale(tg.grads[i], res.weights[i]));
    return res;
}

std::vector<double> gradnorm_step(const std::vector<double>& weights,
                                  const std::vector<double>& losses,
                                  const std::vector<double>& grad_norms,
                                  const std::vector<double>& initial_losses,
                                  double alpha, double lr) {
    std::size_t n = weights.size();
    if (losses.size() != n || grad_norms.size() != n || initial_losses.size() != n)
        throw ConfigError("gradnorm_step: field lengths disagree");
    if (n == 0) throw ConfigError("gradnorm_step: no tasks");
    for (double l0 : initial_losses)
        if (l0 <= 0.0) throw ConfigError("gradnorm_step: nonpositive initial loss");

    // relative inverse training rates r_i
    std::vector<double> tilde(n);
    double mean_tilde = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        tilde[i] = losses[i] / initial_losses[i];
        mean_tilde += tilde[i];
    }
    mean_tilde /= double(n);

    double mean_g = 0.0;
    std::vector<double> weighted(n);
    for (std::size_t i = 0; i < n; ++i) {
        weighted[i] = weights[i] * grad_norms[i];
        mean_g += weighted[i];
    }
    mean_g /= double(n);

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double rate = mean_tilde > 0.0 ? tilde[i] / mean_tilde : 1.0;
        double target = mean_g * std::pow(rate, alpha);
        double diff = weighted[i] - target;
        double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        out[i] = std::max(0.0, weights[i] - lr * sgn * grad_norms[i]);
    }

    double total = std::accumulate(out.begin(), out.end(), 0.0);
    if (total <= 0.0) {
        out.assign(n, 1.0);
    } else {
        for (double& w : out) w *= double(n) / total;
    }
    return out;
}

} // namespace multigrad
