#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "multigrad/baselines.hpp"
#include "multigrad/errors.hpp"
#include "multigrad/graddrop.hpp"

using namespace multigrad;

namespace {

TaskGradients vec_set(const std::vector<std::vector<double>>& vs) {
    TaskGradients tg;
    for (const auto& v : vs) tg.grads.push_back(Tensor({v.size()}, v));
    return tg;
}

Tensor project_off(const Tensor& g, const Tensor& ref) {
    double d = dot(g, ref);
    if (d >= 0.0) return g;
    return sub(g, scale(ref, d / dot(ref, ref)));
}

} // namespace

TEST_CASE("pcgrad without conflicts is the plain sum, bitwise") {
    RngStream gen(4, 0);
    for (int rep = 0; rep < 50; ++rep) {
        TaskGradients tg;
        std::size_t n = 2 + gen.next_below(3);
        for (std::size_t i = 0; i < n; ++i) {
            Tensor g({3});
            for (std::size_t j = 0; j < 3; ++j) g[j] = gen.next_uniform() + 0.1;
            tg.grads.push_back(std::move(g)); // all-positive: every dot > 0
        }
        Tensor ref = naive_sum(tg);
        RngStream rng(rep, 1);
        Tensor out = pcgrad(tg, rng, rep % 2 == 0);
        REQUIRE(out.same_shape(ref));
        for (std::size_t j = 0; j < out.size(); ++j) CHECK(out[j] == ref[j]);
    }
}

TEST_CASE("static pcgrad on two conflicting tasks matches the analytic form") {
    // order cannot matter with static references and n = 2
    RngStream gen(5, 0);
    for (int rep = 0; rep < 100; ++rep) {
        Tensor g1({2}, {gen.next_uniform() * 4 - 2, gen.next_uniform() * 4 - 2});
        Tensor g2({2}, {gen.next_uniform() * 4 - 2, gen.next_uniform() * 4 - 2});
        if (dot(g1, g2) >= 0.0) continue;
        TaskGradients tg;
        tg.grads = {g1, g2};
        RngStream rng(rep, 1);
        Tensor out = pcgrad(tg, rng, false);
        Tensor expect = add(project_off(g1, g2), project_off(g2, g1));
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(out[j] == doctest::Approx(expect[j]).epsilon(1e-12));
        // post-projection orthogonality, the invariant the projection exists for
        double scale1 = l2_norm(g1) * l2_norm(g2);
        CHECK(std::abs(dot(project_off(g1, g2), g2)) <= 1e-12 * scale1);
        CHECK(std::abs(dot(project_off(g2, g1), g1)) <= 1e-12 * scale1);
    }
}

TEST_CASE("iterative pcgrad on two conflicting tasks matches one projection order") {
    RngStream gen(6, 0);
    int conflicts = 0;
    for (int rep = 0; rep < 100; ++rep) {
        Tensor g1({2}, {gen.next_uniform() * 4 - 2, gen.next_uniform() * 4 - 2});
        Tensor g2({2}, {gen.next_uniform() * 4 - 2, gen.next_uniform() * 4 - 2});
        if (dot(g1, g2) >= 0.0) continue;
        ++conflicts;
        TaskGradients tg;
        tg.grads = {g1, g2};
        RngStream rng(rep, 1);
        Tensor out = pcgrad(tg, rng, true);

        // order (1 then 2): g1' = proj(g1 off g2); then g2 sees g1' (working copy)
        Tensor a1 = project_off(g1, g2);
        Tensor a = add(a1, project_off(g2, a1));
        // order (2 then 1)
        Tensor b2 = project_off(g2, g1);
        Tensor b = add(project_off(g1, b2), b2);

        bool matches_a = std::abs(out[0] - a[0]) <= 1e-12 && std::abs(out[1] - a[1]) <= 1e-12;
        bool matches_b = std::abs(out[0] - b[0]) <= 1e-12 && std::abs(out[1] - b[1]) <= 1e-12;
        CHECK((matches_a || matches_b));
    }
    CHECK(conflicts > 10);
}

TEST_CASE("pcgrad shuffles the task order") {
    // with three mutually conflicting 2-D gradients the iterative result is
    // order dependent; different streams should reach different outputs
    TaskGradients tg = vec_set({{1.0, 0.1}, {-0.6, 0.8}, {-0.5, -0.9}});
    std::vector<double> first;
    bool varied = false;
    for (int rep = 0; rep < 20; ++rep) {
        RngStream rng(rep, 0);
        Tensor out = pcgrad(tg, rng, true);
        if (rep == 0) {
            first = {out[0], out[1]};
        } else if (std::abs(out[0] - first[0]) > 1e-9 ||
                   std::abs(out[1] - first[1]) > 1e-9) {
            varied = true;
        }
    }
    CHECK(varied);
}

TEST_CASE("mgda on one task returns that gradient") {
    TaskGradients tg = vec_set({{3.0, -4.0}});
    MgdaResult r = mgda_minnorm(tg);
    REQUIRE(r.weights.size() == 1);
    CHECK(r.weights[0] == 1.0);
    CHECK(r.direction == tg.grads[0]);
    CHECK(r.gap <= 1e-9);
}

TEST_CASE("mgda orthogonal pair splits evenly") {
    TaskGradients tg = vec_set({{1.0, 0.0}, {0.0, 1.0}});
    MgdaResult r = mgda_minnorm(tg);
    CHECK(r.weights[0] == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(r.weights[1] == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(l2_norm(r.direction) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-8));
}

TEST_CASE("mgda collinear opposed pair finds the zero point") {
    // hull of {2e, -e} contains 0 at gamma = (1/3, 2/3)
    TaskGradients tg = vec_set({{2.0, 0.0}, {-1.0, 0.0}});
    MgdaResult r = mgda_minnorm(tg);
    CHECK(r.weights[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-4));
    CHECK(r.weights[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-4));
    CHECK(l2_norm(r.direction) <= 2e-4);
}

TEST_CASE("mgda containment: a dominated vertex gets weight") {
    // g2 = 2 g1: the min-norm point of the hull is g1 itself
    TaskGradients tg = vec_set({{1.0, 1.0}, {2.0, 2.0}});
    MgdaResult r = mgda_minnorm(tg);
    CHECK(l2_norm(sub(r.direction, tg.grads[0])) <= 1e-4);
}

TEST_CASE("mgda two-task closed form over random instances") {
    RngStream gen(7, 0);
    for (int rep = 0; rep < 100; ++rep) {
        Tensor g1({3}), g2({3});
        for (std::size_t j = 0; j < 3; ++j) {
            g1[j] = gen.next_uniform() * 6 - 3;
            g2[j] = gen.next_uniform() * 6 - 3;
        }
        TaskGradients tg;
        tg.grads = {g1, g2};
        MgdaResult r = mgda_minnorm(tg);

        // min over t of |(1-t) g1 + t g2|^2 on [0,1]
        Tensor diff = sub(g2, g1);
        double dd = dot(diff, diff);
        double t = dd > 0.0 ? std::clamp(-dot(g1, diff) / dd, 0.0, 1.0) : 0.0;
        Tensor best = add(scale(g1, 1.0 - t), scale(g2, t));
        double best2 = dot(best, best);
        double got2 = dot(r.direction, r.direction);
        CHECK(got2 <= best2 + 1e-6);
        CHECK(got2 >= best2 - 1e-9); // cannot beat the true minimum
    }
}

TEST_CASE("mgda satisfies the min-norm descent property") {
    // at the min-norm point d, every <d, g_i> >= |d|^2 (up to the gap)
    RngStream gen(8, 0);
    for (int rep = 0; rep < 30; ++rep) {
        TaskGradients tg;
        std::size_t n = 2 + gen.next_below(2);
        for (std::size_t i = 0; i < n; ++i) {
            Tensor g({3});
            for (std::size_t j = 0; j < 3; ++j) g[j] = gen.next_uniform() * 4 - 2;
            tg.grads.push_back(std::move(g));
        }
        MgdaResult r = mgda_minnorm(tg);
        double d2 = dot(r.direction, r.direction);
        for (const Tensor& g : tg.grads)
            CHECK(dot(r.direction, g) >= d2 - 1e-6);
        double wsum = 0.0;
        for (double w : r.weights) {
            CHECK(w >= -1e-12);
            wsum += w;
        }
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("mgda validates its knobs") {
    TaskGradients tg = vec_set({{1.0}});
    CHECK_THROWS_AS(mgda_minnorm(tg, 0), ConfigError);
    CHECK_THROWS_AS(mgda_minnorm(tg, 10, 0.0), ConfigError);
}

TEST_CASE("gradnorm_step hand-computed update") {
    // ratios r = {4/3, 2/3}; targets {8/3, 4/3}; signs {-1, +1}
    std::vector<double> w = gradnorm_step({1.0, 1.0}, {2.0, 1.0}, {1.0, 3.0},
                                          {2.0, 2.0}, 1.0, 0.1);
    // raw update {1.1, 0.7}, renormalized to sum 2
    CHECK(w[0] == doctest::Approx(11.0 / 9.0).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(7.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("gradnorm_step clamps at zero and renormalizes") {
    // task 0 overshoots: weighted norm 10 vs target 8.08, lr large enough to
    // push the weight negative -> clamped to 0, all mass moves to task 1
    std::vector<double> w = gradnorm_step({1.0, 1.0}, {4.0, 1.0}, {10.0, 0.1},
                                          {1.0, 1.0}, 1.0, 0.5);
    CHECK(w[0] == 0.0);
    CHECK(w[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("gradnorm_step balanced tasks stay balanced") {
    std::vector<double> w = gradnorm_step({1.0, 1.0}, {1.0, 1.0}, {2.0, 2.0},
                                          {2.0, 2.0}, 1.0, 0.1);
    CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gradnorm_step validates inputs") {
    CHECK_THROWS_AS(gradnorm_step({1.0}, {1.0, 2.0}, {1.0}, {1.0}, 1.0, 0.1),
                    ConfigError);
    CHECK_THROWS_AS(gradnorm_step({}, {}, {}, {}, 1.0, 0.1), ConfigError);
    CHECK_THROWS_AS(gradnorm_step({1.0}, {1.0}, {1.0}, {0.0}, 1.0, 0.1),
                    ConfigError);
}
