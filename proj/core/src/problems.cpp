#include "multigrad/problems.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "multigrad/errors.hpp"

namespace multigrad {

namespace {

constexpr double kGolden = 0.6180339887498949; // (sqrt(5) - 1) / 2

} // namespace

Tensor Problem::backprop(const Tensor&, const Tensor& combined) const {
    if (combined.size() != dim_)
        throw ShapeError("backprop: combined gradient has " +
                         std::to_string(combined.size()) + " entries, expected " +
                         std::to_string(dim_));
    return combined;
}

Tensor Problem::init_weights(RngStream& rng) const {
    Tensor w({dim_});
    for (std::size_t i = 0; i < dim_; ++i)
        w[i] = rng.next_uniform() * 20.0 - 10.0;
    return w;
}

double sum_loss(const Problem& p, const Tensor& w) {
    double total = 0.0;
    for (double v : p.eval(w)) total += v;
    return total;
}

// ---------------------------------------------------------------------------
// Five shifted sines over a single weight.

namespace {

class SinesProblem final : public Problem {
public:
    SinesProblem() : Problem("sines", 1, 5) {}

    std::vector<double> eval(const Tensor& w) const override {
        double x = w.item();
        std::vector<double> out(5);
        for (std::size_t i = 0; i < 5; ++i)
            out[i] = std::sin(kA[i] * x + kB[i]) + 1.0;
        return out;
    }

    TaskGradients grad(const Tensor& w) const override {
        double x = w.item();
        TaskGradients tg;
        tg.grads.reserve(5);
        for (std::size_t i = 0; i < 5; ++i)
            tg.grads.push_back(Tensor::full({1}, kA[i] * std::cos(kA[i] * x + kB[i])));
        return tg;
    }

private:
    static constexpr double kA[5] = {1.0, 1.5, 2.0, 2.5, 5.0};
    static constexpr double kB[5] = {0.0, 0.2, 0.4, 0.6, 0.8};
};

class QuadPairProblem final : public Problem {
public:
    explicit QuadPairProblem(double c) : Problem("quad_pair", 1, 2), c_(c) {}

    std::vector<double> eval(const Tensor& w) const override {
        double x = w.item();
        return {(x - c_) * (x - c_), (x + c_) * (x + c_)};
    }

    TaskGradients grad(const Tensor& w) const override {
        double x = w.item();
        TaskGradients tg;
        tg.grads.push_back(Tensor::full({1}, 2.0 * (x - c_)));
        tg.grads.push_back(Tensor::full({1}, 2.0 * (x + c_)));
        return tg;
    }

private:
    double c_;
};

// ---------------------------------------------------------------------------
// One tanh hidden layer, linear heads, frozen regression data. Each task may
// own a contiguous row range of the batch; tasks on disjoint ranges make the
// activation gradients batch-separated.

class MlpProblem final : public Problem {
public:
    MlpProblem(std::string name, Tensor x, Tensor y, std::size_t hidden,
               std::vector<std::pair<std::size_t, std::size_t>> rows,
               bool batch_separated)
        : Problem(std::move(name), 0, rows.size()),
          x_(std::move(x)), y_(std::move(y)), hidden_(hidden),
          rows_(std::move(rows)), batch_separated_(batch_separated) {
        if (x_.rank() != 2 || y_.rank() != 2)
            throw ShapeError("mlp problem: x and y must be rank-2");
        batch_ = x_.shape()[0];
        inputs_ = x_.shape()[1];
        if (y_.shape()[0] != batch_ || y_.shape()[1] != n_tasks_)
            throw ShapeError("mlp problem: y must be [batch, n_tasks]");
        if (hidden_ == 0 || inputs_ == 0 || batch_ == 0)
            throw ConfigError("mlp problem: empty dimension");
        for (auto [b, e] : rows_)
            if (b >= e || e > batch_)
                throw ConfigError("mlp problem: bad task row range");
        dim_ = hidden_ * inputs_ + hidden_ + n_tasks_ * hidden_ + n_tasks_;
    }

    std::vector<double> eval(const Tensor& w) const override {
        Forward f = forward(w);
        std::vector<double> losses(n_tasks_, 0.0);
        for (std::size_t t = 0; t < n_tasks_; ++t) {
            auto [rb, re] = rows_[t];
            double acc = 0.0;
            for (std::size_t b = rb; b < re; ++b) {
                double r = f.pred[b * n_tasks_ + t] - y_[b * n_tasks_ + t];
                acc += r * r;
            }
            losses[t] = acc / (2.0 * static_cast<double>(re - rb));
        }
        return losses;
    }

    TaskGradients grad(const Tensor& w) const override {
        Forward f = forward(w);
        TaskGradients tg;
        tg.grads.reserve(n_tasks_);
        for (std::size_t t = 0; t < n_tasks_; ++t) {
            Tensor dh = act_grad(w, f, t);
            Tensor g({dim_});
            trunk_into(f, dh, g);
            head_into(f, t, g);
            tg.grads.push_back(std::move(g));
        }
        return tg;
    }

    TaskGradients combine_grads(const Tensor& w) const override {
        Forward f = forward(w);
        TaskGradients tg;
        tg.grads.reserve(n_tasks_);
        for (std::size_t t = 0; t < n_tasks_; ++t)
            tg.grads.push_back(act_grad(w, f, t));
        tg.batched = true;
        tg.batch_separated = batch_separated_;
        tg.activations = f.a;
        return tg;
    }

    Tensor backprop(const Tensor& w, const Tensor& combined) const override {
        if (!(combined.rank() == 2 && combined.shape()[0] == batch_ &&
              combined.shape()[1] == hidden_))
            throw ShapeError("mlp backprop: combined gradient must be [batch, hidden]");
        Forward f = forward(w);
        Tensor g({dim_});
        trunk_into(f, combined, g);
        // Head parameters see exactly one task each, so their gradients are
        // never in conflict and bypass the combiner.
        for (std::size_t t = 0; t < n_tasks_; ++t) head_into(f, t, g);
        return g;
    }

    Tensor init_weights(RngStream& rng) const override {
        Tensor w({dim_});
        double s1 = 1.0 / std::sqrt(static_cast<double>(inputs_));
        double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
        std::size_t o = 0;
        for (std::size_t i = 0; i < hidden_ * inputs_; ++i)
            w[o++] = rng.next_normal() * s1;
        o += hidden_; // b1 stays zero
        for (std::size_t i = 0; i < n_tasks_ * hidden_; ++i)
            w[o++] = rng.next_normal() * s2;
        return w; // b2 stays zero
    }

private:
    struct Forward {
        Tensor a;                 // [batch, hidden] tanh activations
        std::vector<double> pred; // batch * n_tasks
    };

    std::size_t w1_off() const { return 0; }
    std::size_t b1_off() const { return hidden_ * inputs_; }
    std::size_t w2_off() const { return b1_off() + hidden_; }
    std::size_t b2_off() const { return w2_off() + n_tasks_ * hidden_; }

    Forward forward(const Tensor& w) const {
        if (!(w.rank() == 1 && w.size() == dim_))
            throw ShapeError("mlp problem: weight vector must have " +
                             std::to_string(dim_) + " entries");
        Forward f{Tensor({batch_, hidden_}), std::vector<double>(batch_ * n_tasks_)};
        for (std::size_t b = 0; b < batch_; ++b) {
            for (std::size_t h = 0; h < hidden_; ++h) {
                double z = w[b1_off() + h];
                for (std::size_t i = 0; i < inputs_; ++i)
                    z += x_[b * inputs_ + i] * w[w1_off() + h * inputs_ + i];
                f.a[b * hidden_ + h] = std::tanh(z);
            }
            for (std::size_t t = 0; t < n_tasks_; ++t) {
                double p = w[b2_off() + t];
                for (std::size_t h = 0; h < hidden_; ++h)
                    p += f.a[b * hidden_ + h] * w[w2_off() + t * hidden_ + h];
                f.pred[b * n_tasks_ + t] = p;
            }
        }
        return f;
    }

    // dL_t / d activations, zero outside the task's rows.
    Tensor act_grad(const Tensor& w, const Forward& f, std::size_t t) const {
        Tensor dh({batch_, hidden_});
        auto [rb, re] = rows_[t];
        double inv = 1.0 / static_cast<double>(re - rb);
        for (std::size_t b = rb; b < re; ++b) {
            double dp = (f.pred[b * n_tasks_ + t] - y_[b * n_tasks_ + t]) * inv;
            for (std::size_t h = 0; h < hidden_; ++h)
                dh[b * hidden_ + h] = dp * w[w2_off() + t * hidden_ + h];
        }
        return dh;
    }

    // Accumulates trunk (W1, b1) gradients implied by activation grads dh.
    void trunk_into(const Forward& f, const Tensor& dh, Tensor& g) const {
        for (std::size_t b = 0; b < batch_; ++b) {
            for (std::size_t h = 0; h < hidden_; ++h) {
                double a = f.a[b * hidden_ + h];
                double dz = dh[b * hidden_ + h] * (1.0 - a * a);
                if (dz == 0.0) continue;
                for (std::size_t i = 0; i < inputs_; ++i)
                    g[w1_off() + h * inputs_ + i] += dz * x_[b * inputs_ + i];
                g[b1_off() + h] += dz;
            }
        }
    }

    // Accumulates head (W2 row t, b2[t]) gradients for one task.
    void head_into(const Forward& f, std::size_t t, Tensor& g) const {
        auto [rb, re] = rows_[t];
        double inv = 1.0 / static_cast<double>(re - rb);
        for (std::size_t b = rb; b < re; ++b) {
            double dp = (f.pred[b * n_tasks_ + t] - y_[b * n_tasks_ + t]) * inv;
            for (std::size_t h = 0; h < hidden_; ++h)
                g[w2_off() + t * hidden_ + h] += dp * f.a[b * hidden_ + h];
            g[b2_off() + t] += dp;
        }
    }

    Tensor x_;
    Tensor y_;
    std::size_t hidden_;
    std::vector<std::pair<std::size_t, std::size_t>> rows_;
    bool batch_separated_;
    std::size_t batch_ = 0;
    std::size_t inputs_ = 0;
};

} // namespace

std::unique_ptr<Problem> sines_problem() {
    return std::make_unique<SinesProblem>();
}

std::unique_ptr<Problem> quad_pair_problem(double c) {
    return std::make_unique<QuadPairProblem>(c);
}

std::unique_ptr<Problem> mlp_multitask_problem(std::uint64_t seed,
                                               std::size_t hidden,
                                               std::size_t n_tasks) {
    if (n_tasks == 0) throw ConfigError("mlp_multitask_problem: n_tasks == 0");
    const std::size_t batch = 32, inputs = 4;
    RngStream data_rng(seed, 0);
    Tensor x({batch, inputs});
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = data_rng.next_uniform() * 3.0 - 1.5;

    RngStream teacher(seed, 1);
    double s = 1.0 / std::sqrt(static_cast<double>(inputs));
    Tensor y({batch, n_tasks});
    for (std::size_t t = 0; t < n_tasks; ++t) {
        std::vector<double> u(inputs);
        for (auto& v : u) v = teacher.next_normal() * s;
        double c = teacher.next_uniform() * 2.0 - 1.0;
        for (std::size_t b = 0; b < batch; ++b) {
            double z = c;
            for (std::size_t i = 0; i < inputs; ++i) z += x[b * inputs + i] * u[i];
            y[b * n_tasks + t] = std::sin(z);
        }
    }

    std::vector<std::pair<std::size_t, std::size_t>> rows(n_tasks, {0, batch});
    return std::make_unique<MlpProblem>("mlp_multitask", std::move(x), std::move(y),
                                        hidden, std::move(rows), false);
}

std::unique_ptr<Problem> mlp_problem_from_data(Tensor x, Tensor y,
                                               std::size_t hidden) {
    if (y.rank() != 2) throw ShapeError("mlp_problem_from_data: y must be rank-2");
    std::size_t n_tasks = y.shape()[1];
    if (n_tasks == 0) throw ConfigError("mlp_problem_from_data: y has no tasks");
    std::vector<std::pair<std::size_t, std::size_t>> rows(n_tasks, {0, y.shape()[0]});
    return std::make_unique<MlpProblem>("mlp_custom", std::move(x), std::move(y),
                                        hidden, std::move(rows), false);
}

std::unique_ptr<Problem> transfer_toy_problem(std::uint64_t seed) {
    const std::size_t batch = 16, half = 8, inputs = 3, hidden = 6;
    RngStream data_rng(seed, 0);
    Tensor x({batch, inputs});
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = data_rng.next_uniform() * 4.0 - 2.0;

    RngStream teacher(seed, 1);
    double s = 1.0 / std::sqrt(static_cast<double>(inputs));
    Tensor y({batch, 2});
    for (std::size_t t = 0; t < 2; ++t) {
        std::vector<double> u(inputs);
        for (auto& v : u) v = teacher.next_normal() * s;
        double c = teacher.next_uniform() * 2.0 - 1.0;
        std::size_t rb = t * half, re = rb + half;
        for (std::size_t b = rb; b < re; ++b) {
            double z = c;
            for (std::size_t i = 0; i < inputs; ++i) z += x[b * inputs + i] * u[i];
            y[b * 2 + t] = std::sin(z);
        }
    }

    std::vector<std::pair<std::size_t, std::size_t>> rows = {{0, half}, {half, batch}};
    return std::make_unique<MlpProblem>("transfer_toy", std::move(x), std::move(y),
                                        hidden, std::move(rows), true);
}

double finite_diff_check(const Problem& p, const Tensor& w, double h) {
    if (h <= 0.0) throw DomainError("finite_diff_check: h must be positive");
    TaskGradients tg = p.grad(w);
    if (tg.grads.size() != p.n_tasks())
        throw ContractError("finite_diff_check: grad() task count mismatch");
    Tensor wp = w;
    double worst = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
        double orig = w[j];
        wp[j] = orig + h;
        std::vector<double> up = p.eval(wp);
        wp[j] = orig - h;
        std::vector<double> dn = p.eval(wp);
        wp[j] = orig;
        for (std::size_t t = 0; t < p.n_tasks(); ++t) {
            double fd = (up[t] - dn[t]) / (2.0 * h);
            double an = tg.grads[t][j];
            double denom = std::max(1e-8, std::max(std::fabs(fd), std::fabs(an)));
            worst = std::max(worst, std::fabs(fd - an) / denom);
        }
    }
    return worst;
}

GridSearchResult grid_search_min(const Problem& p, double lo, double hi,
                                 double step) {
    if (p.dim() != 1)
        throw DomainError("grid_search_min: problem must be one-dimensional");
    if (!(lo < hi) || !(step > 0.0))
        throw DomainError("grid_search_min: need lo < hi and step > 0");

    auto f = [&](double x) { return sum_loss(p, Tensor::full({1}, x)); };

    double best_x = lo, best = f(lo);
    std::size_t cells = static_cast<std::size_t>((hi - lo) / step);
    for (std::size_t i = 1; i <= cells + 1; ++i) {
        double x = std::min(lo + static_cast<double>(i) * step, hi);
        double v = f(x);
        if (v < best) { best = v; best_x = x; }
        if (x >= hi) break;
    }

    double a = std::max(lo, best_x - step);
    double b = std::min(hi, best_x + step);
    double c = b - kGolden * (b - a);
    double d = a + kGolden * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 200 && (b - a) > 1e-13; ++it) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - kGolden * (b - a); fc = f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + kGolden * (b - a); fd = f(d);
        }
    }
    double x = 0.5 * (a + b);
    return {x, f(x)};
}

} // namespace multigrad
