#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "multigrad/errors.hpp"
#include "multigrad/verify.hpp"

using namespace multigrad;

TEST_CASE("two-outcome enumeration equals the analytic forms on k in [0,1]") {
    RngStream rng(21, 0);
    for (int rep = 0; rep < 100; ++rep) {
        double p = rng.next_uniform() * 10.0;
        double n = rng.next_uniform() * 10.0;
        if (p + n <= 0.0) continue;
        double k = rng.next_uniform();
        double me, ve, mc, vc;
        two_outcome_stats(p, n, k, me, ve);
        closed_form_stats(p, n, k, mc, vc);
        CHECK(me == doctest::Approx(mc).epsilon(1e-12));
        CHECK(ve == doctest::Approx(vc).epsilon(1e-12));
    }
}

TEST_CASE("frozen {7,-3} table across the slope grid") {
    const double ks[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    const double Es[5] = {-8.0, -10.0, -12.0, -14.0, -16.0};
    const double Vs[5] = {400.0, 396.0, 384.0, 364.0, 336.0};
    for (int i = 0; i < 5; ++i) {
        double m, v;
        two_outcome_stats(7.0, 3.0, ks[i], m, v);
        CHECK(m == doctest::Approx(Es[i]).epsilon(1e-12));
        CHECK(v == doctest::Approx(Vs[i]).epsilon(1e-12));
        closed_form_stats(7.0, 3.0, ks[i], m, v);
        CHECK(m == doctest::Approx(Es[i]).epsilon(1e-12));
        CHECK(v == doctest::Approx(Vs[i]).epsilon(1e-12));
    }
}

TEST_CASE("clipped slopes keep steepening the mean and shrinking the variance") {
    // {7,-3} at k=2: f clips to 0.9 -> E = -24, Var = 144
    double m, v;
    two_outcome_stats(7.0, 3.0, 2.0, m, v);
    CHECK(m == doctest::Approx(-24.0).epsilon(1e-12));
    CHECK(v == doctest::Approx(144.0).epsilon(1e-12));

    // single-sign mass {3,1}: k >= 1 passes everything deterministically
    two_outcome_stats(4.0, 0.0, 1.0, m, v);
    CHECK(m == doctest::Approx(-16.0).epsilon(1e-12));
    CHECK(v == doctest::Approx(0.0).epsilon(1e-10));
    two_outcome_stats(4.0, 0.0, 2.0, m, v);
    CHECK(m == doctest::Approx(-16.0).epsilon(1e-12));
    CHECK(v == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("enumeration is monotone in k for any gradient masses") {
    RngStream rng(22, 0);
    for (int rep = 0; rep < 50; ++rep) {
        double p = rng.next_uniform() * 8.0;
        double n = rng.next_uniform() * 8.0;
        if (p + n < 1e-6) continue;
        double prev_m = 0.0, prev_v = 1e300; // vacuous sentinels for the first k
        for (double k = 0.0; k <= 3.0; k += 0.125) {
            double m, v;
            two_outcome_stats(p, n, k, m, v);
            CHECK(m <= 1e-12);            // never ascends the loss in expectation
            CHECK(std::abs(m) >= std::abs(prev_m) - 1e-12);
            CHECK(v <= prev_v + 1e-12);
            prev_m = m;
            prev_v = v;
        }
    }
}

TEST_CASE("closed_form_stats guards its domain") {
    double m, v;
    CHECK_THROWS_AS(closed_form_stats(1.0, 1.0, 1.5, m, v), DomainError);
    CHECK_THROWS_AS(closed_form_stats(1.0, 1.0, -0.5, m, v), DomainError);
    CHECK_THROWS_AS(closed_form_stats(0.0, 0.0, 0.5, m, v), DomainError);
}

TEST_CASE("mc_delta_loss agrees with the enumeration") {
    std::vector<double> grads{7.0, -3.0};
    RngStream rng(23, 0);
    StatReport r = mc_delta_loss(grads, 1.0, 200000, rng);
    CHECK(r.p == doctest::Approx(7.0).epsilon(1e-15));
    CHECK(r.n == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(r.mean_closed == doctest::Approx(-16.0).epsilon(1e-12));
    CHECK(r.var_closed == doctest::Approx(336.0).epsilon(1e-12));
    CHECK(std::abs(r.z_mean) < 4.0);
    CHECK(std::abs(r.var_mc - 336.0) / 336.0 < 0.03);
    CHECK(r.se_mean > 0.0);
    CHECK(r.samples == 200000);

    CHECK_THROWS_AS(mc_delta_loss(grads, 1.0, 100, rng), DomainError);
    CHECK_THROWS_AS(mc_delta_loss({}, 1.0, 20000, rng), DomainError);
}

TEST_CASE("quasi-deterministic sets report z = 0, not sqrt(samples)") {
    // single-sign set at k=1: every draw keeps everything; the MC mean can
    // differ from the closed form only by accumulation rounding
    std::vector<double> grads{3.0, 1.0};
    RngStream rng(24, 0);
    StatReport r = mc_delta_loss(grads, 1.0, 50000, rng);
    CHECK(r.z_mean == 0.0);
    CHECK(r.mean_mc == doctest::Approx(-16.0).epsilon(1e-12));
}

TEST_CASE("monotonicity_sweep validates and reports") {
    std::vector<double> grads{2.0, -1.0, 0.5};
    RngStream rng(25, 0);
    SweepReport rep = monotonicity_sweep(grads, {0.0, 0.5, 1.0}, 50000, rng);
    REQUIRE(rep.stats.size() == 3);
    CHECK(rep.closed_monotone);
    CHECK(rep.empirical_consistent);

    CHECK_THROWS_AS(monotonicity_sweep(grads, {0.5, 0.0}, 50000, rng), DomainError);
    CHECK_THROWS_AS(monotonicity_sweep(grads, {0.5, 1.5}, 50000, rng), DomainError);
    CHECK_THROWS_AS(monotonicity_sweep(grads, {}, 50000, rng), DomainError);
}

TEST_CASE("steeper_compare orders clipped activations via enumeration") {
    std::vector<double> grads{7.0, -3.0};
    RngStream rng(26, 0);
    SteeperReport rep = steeper_compare(2.0, 1.0, grads, 100000, rng);
    CHECK(rep.mean_ordered);
    CHECK(rep.var_ordered);
    CHECK(rep.steep.mean_closed == doctest::Approx(-24.0).epsilon(1e-12));
    CHECK(rep.shallow.mean_closed == doctest::Approx(-16.0).epsilon(1e-12));
    CHECK_THROWS_AS(steeper_compare(1.0, 2.0, grads, 100000, rng), DomainError);
}

TEST_CASE("joint minimum detection") {
    auto joint = quad_pair_problem(0.0);
    auto split = quad_pair_problem(1.0);
    Tensor origin({1}, {0.0});
    CHECK(check_joint_minimum(*joint, origin, 1e-12));
    CHECK_FALSE(check_joint_minimum(*split, origin, 1e-12));
    CHECK_THROWS_AS(check_joint_minimum(*joint, origin, 0.0), DomainError);
}

TEST_CASE("prop2 gradient norms grow away from the L1 minimum") {
    auto p = quad_pair_problem(1.0);
    Tensor w_star({1}, {1.0}); // minimum of (x-1)^2
    Tensor dir({1}, {1.0});
    RngStream rng(27, 0);
    Prop2Report rep =
        check_prop2(*p, w_star, dir, {0.01, 0.05, 0.1}, 1.0, 2000, rng);
    REQUIRE(rep.mean_norm.size() == 3);
    // at k=1 both gradients are positive there: everything passes, no noise
    CHECK(rep.mean_norm[0] == doctest::Approx(4.04).epsilon(1e-10));
    CHECK(rep.mean_norm[1] == doctest::Approx(4.2).epsilon(1e-10));
    CHECK(rep.mean_norm[2] == doctest::Approx(4.4).epsilon(1e-10));
    CHECK(rep.nondecreasing);
    CHECK(rep.strictly_increasing);

    // not a stationary point of any component -> precondition fails
    Tensor elsewhere({1}, {0.3});
    CHECK_THROWS_AS(check_prop2(*p, elsewhere, dir, {0.01}, 1.0, 2000, rng),
                    ContractError);
    CHECK_THROWS_AS(check_prop2(*p, w_star, dir, {}, 1.0, 2000, rng), DomainError);
    CHECK_THROWS_AS(check_prop2(*p, w_star, dir, {0.1, 0.05}, 1.0, 2000, rng),
                    DomainError);
    CHECK_THROWS_AS(check_prop2(*p, w_star, dir, {0.01}, 1.0, 10, rng), DomainError);
}

TEST_CASE("verification suites pass at the default battery") {
    for (auto* fn : {run_prop1_suite, run_prop2_suite, run_prop3_suite,
                     run_corollary_suite}) {
        SuiteResult r = fn(2024, 200000);
        INFO(r.name, ": ", r.detail);
        CHECK(r.passed);
        CHECK_FALSE(r.detail.empty());
    }
}
