#include "multigrad/optim.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <utility>

#include "multigrad/baselines.hpp"
#include "multigrad/errors.hpp"
#include "multigrad/graddrop.hpp"

namespace multigrad {

double Schedule::lr(std::size_t step) const {
    if (every == 0 || ratio == 1.0) return lr0;
    return lr0 * std::pow(ratio, static_cast<double>(step / every));
}

Schedule Schedule::constant(double lr0) {
    if (!(lr0 > 0.0)) throw ConfigError("schedule: lr0 must be positive");
    return Schedule{lr0, 1.0, 0};
}

Schedule Schedule::step_decay(double lr0, double ratio, std::size_t every) {
    if (!(lr0 > 0.0)) throw ConfigError("schedule: lr0 must be positive");
    if (!(ratio > 0.0) || ratio > 1.0)
        throw ConfigError("schedule: decay ratio must be in (0, 1]");
    if (every == 0) throw ConfigError("schedule: decay_every must be >= 1");
    return Schedule{lr0, ratio, every};
}

namespace {

void ensure_moments(OptimState& st) {
    if (st.moments_ready) return;
    st.velocity = Tensor(st.w.shape());
    st.m = Tensor(st.w.shape());
    st.v = Tensor(st.w.shape());
    st.moments_ready = true;
}

} // namespace

void sgd_step(OptimState& st, const Tensor& g, const Schedule& sched,
              double momentum) {
    if (!st.w.same_shape(g))
        throw ShapeError("sgd_step: gradient shape does not match weights");
    ensure_moments(st);
    double lr = sched.lr(st.step);
    for (std::size_t i = 0; i < g.size(); ++i) {
        st.velocity[i] = momentum * st.velocity[i] + g[i];
        st.w[i] -= lr * st.velocity[i];
    }
    ++st.step;
}

void adam_step(OptimState& st, const Tensor& g, const Schedule& sched,
               double beta1, double beta2, double eps) {
    if (!st.w.same_shape(g))
        throw ShapeError("adam_step: gradient shape does not match weights");
    if (!(beta1 >= 0.0) || beta1 >= 1.0 || !(beta2 >= 0.0) || beta2 >= 1.0)
        throw ConfigError("adam_step: betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("adam_step: eps must be positive");
    ensure_moments(st);
    double lr = sched.lr(st.step);
    double t = static_cast<double>(st.step) + 1.0;
    double c1 = 1.0 - std::pow(beta1, t);
    double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < g.size(); ++i) {
        st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * g[i];
        st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * g[i] * g[i];
        st.w[i] -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + eps);
    }
    ++st.step;
}

std::string config_fingerprint(const MethodConfig& m, std::size_t steps) {
    auto mixd = [](std::uint64_t h, double v) {
        return hash_mix(h, std::bit_cast<std::uint64_t>(v));
    };
    std::uint64_t h = mix64(0x6d757467726164ULL);
    h = hash_mix(h, static_cast<std::uint64_t>(m.kind));
    h = mixd(h, m.k);
    h = hash_mix(h, m.leaks.size());
    for (double l : m.leaks) h = mixd(h, l);
    h = hash_mix(h, m.marginalize ? 1 : 0);
    h = hash_mix(h, m.renormalize ? 1 : 0);
    h = mixd(h, m.clip_norm);
    h = hash_mix(h, static_cast<std::uint64_t>(m.optimizer));
    h = mixd(h, m.momentum);
    h = mixd(h, m.schedule.lr0);
    h = mixd(h, m.schedule.ratio);
    h = hash_mix(h, m.schedule.every);
    h = mixd(h, m.gradnorm_alpha);
    h = mixd(h, m.gradnorm_lr);
    h = hash_mix(h, steps);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf, 16);
}

namespace {

// Measurement-only keep fraction: what a leak-free k=1 GradDrop would pass at
// this point, sampled from the probe stream so training rolls are untouched.
double keep_probe(const TaskGradients& tg, RngStream& rng) {
    std::vector<Tensor> gsign;
    gsign.reserve(tg.grads.size());
    for (const Tensor& g : tg.grads) {
        Tensor s = tg.activations ? elementwise_mul(g, sign(*tg.activations)) : g;
        gsign.push_back(tg.batched ? sum_over_batch(s) : std::move(s));
    }
    Tensor fp = activation(purity(gsign), 1.0);
    return sample_masks(gsign, fp, rng).keep_fraction;
}

double loss_sum(const std::vector<double>& losses) {
    double s = 0.0;
    for (double v : losses) s += v;
    return s;
}

} // namespace

TrialRecord train(const Problem& p, const MethodConfig& m, std::size_t steps,
                  std::uint64_t seed, std::size_t keep_every) {
    if (steps < 1) throw ConfigError("train: steps must be >= 1");
    if (keep_every == 0) throw ConfigError("train: keep_every must be >= 1");
    const std::size_t n = p.n_tasks();
    if (!m.leaks.empty() && m.leaks.size() != n)
        throw ConfigError("train: leak count does not match task count");

    auto t0 = std::chrono::steady_clock::now();
    TrialRecord rec;
    rec.method = m.label;
    rec.fingerprint = config_fingerprint(m, steps);
    rec.seed = seed;

    RngStream init_rng(seed, 0);
    RngStream pc_rng(seed, 1);
    RngStream keep_rng(seed, 2);
    OptimState st(p.init_weights(init_rng));

    CombinerConfig gd;
    gd.k = m.k;
    gd.leaks = m.leaks;
    gd.marginalize = m.marginalize;
    gd.renormalize = m.renormalize;
    gd.rng = RngStream(seed, 1);

    auto finish = [&](bool diverged) -> TrialRecord {
        rec.diverged = diverged;
        rec.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        return std::move(rec);
    };

    std::vector<double> losses = p.eval(st.w);
    if (!std::isfinite(loss_sum(losses))) {
        rec.final_task_losses = losses;
        return finish(true);
    }
    rec.trajectory.reserve(steps + 1);
    rec.trajectory.push_back(loss_sum(losses));

    std::vector<double> gn_weights(n, 1.0);
    std::vector<double> gn_init;
    if (m.kind == CombinerKind::GradNorm) {
        gn_init = losses;
        // The loss-ratio rule needs positive starting losses; a trial that
        // starts at zero is unrunnable for this method, not a crash.
        for (double v : losses)
            if (!(v > 0.0)) return finish(true);
    }

    for (std::size_t step = 0; step < steps; ++step) {
        TaskGradients tg = p.combine_grads(st.w);
        for (const Tensor& g : tg.grads)
            if (!all_finite(g)) return finish(true);

        Tensor combined;
        double actual_keep = -1.0;
        switch (m.kind) {
        case CombinerKind::GradDrop: {
            auto [out, masks] = graddrop(tg, gd);
            combined = std::move(out);
            actual_keep = masks.keep_fraction;
            break;
        }
        case CombinerKind::NaiveSum:
            combined = naive_sum(tg);
            break;
        case CombinerKind::PcgradStatic:
            combined = pcgrad(tg, pc_rng, false);
            break;
        case CombinerKind::PcgradIterative:
            combined = pcgrad(tg, pc_rng, true);
            break;
        case CombinerKind::Mgda:
            combined = mgda_minnorm(tg).direction;
            break;
        case CombinerKind::GradNorm: {
            combined = scale(tg.grads[0], gn_weights[0]);
            for (std::size_t t = 1; t < n; ++t)
                combined = add(combined, scale(tg.grads[t], gn_weights[t]));
            std::vector<double> norms(n);
            for (std::size_t t = 0; t < n; ++t) norms[t] = l2_norm(tg.grads[t]);
            gn_weights = gradnorm_step(gn_weights, losses, norms, gn_init,
                                       m.gradnorm_alpha, m.gradnorm_lr);
            break;
        }
        }

        if (step % keep_every == 0) {
            rec.keep_steps.push_back(step);
            rec.keep_values.push_back(actual_keep >= 0.0 ? actual_keep
                                                         : keep_probe(tg, keep_rng));
        }

        Tensor wg = p.backprop(st.w, combined);
        if (m.clip_norm > 0.0) wg = clip_global_norm(wg, m.clip_norm);
        if (!all_finite(wg)) return finish(true);

        if (m.optimizer == OptimizerKind::Sgd)
            sgd_step(st, wg, m.schedule, m.momentum);
        else
            adam_step(st, wg, m.schedule);

        losses = p.eval(st.w);
        double cur = loss_sum(losses);
        if (!std::isfinite(cur) || !all_finite(st.w)) {
            rec.final_task_losses = losses;
            return finish(true);
        }
        rec.trajectory.push_back(cur);
    }

    rec.final_task_losses = losses;
    rec.final_w = st.w;
    rec.final_loss = rec.trajectory.back();
    return finish(false);
}

} // namespace multigrad
