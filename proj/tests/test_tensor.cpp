#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "multigrad/errors.hpp"
#include "multigrad/tensor.hpp"

using namespace multigrad;

TEST_CASE("default tensor is a rank-0 scalar holding zero") {
    Tensor t;
    CHECK(t.rank() == 0);
    CHECK(t.size() == 1);
    CHECK(t.item() == 0.0);
}

TEST_CASE("construction and element access") {
    Tensor t({2, 3});
    CHECK(t.rank() == 2);
    CHECK(t.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(t[i] == 0.0);

    Tensor v({3}, {1.0, 2.0, 3.0});
    CHECK(v.size() == 3);
    CHECK(v[2] == 3.0);

    CHECK_THROWS_AS(Tensor({2}, {1.0, 2.0, 3.0}), ShapeError);
}

TEST_CASE("factories") {
    CHECK(Tensor::scalar(4.5).item() == 4.5);
    CHECK(Tensor::scalar(4.5).rank() == 0);
    Tensor z = Tensor::zeros({4});
    CHECK(z.size() == 4);
    Tensor f = Tensor::full({2, 2}, -1.5);
    for (std::size_t i = 0; i < 4; ++i) CHECK(f[i] == -1.5);
}

TEST_CASE("item requires a single element") {
    Tensor v({2}, {1.0, 2.0});
    CHECK_THROWS_AS(v.item(), ShapeError);
    CHECK(Tensor({1}, {7.0}).item() == 7.0);
}

TEST_CASE("equality is shape plus contents") {
    Tensor a({2}, {1.0, 2.0});
    Tensor b({2}, {1.0, 2.0});
    Tensor c({1, 2}, {1.0, 2.0});
    CHECK(a == b);
    CHECK_FALSE(a == c);
}

TEST_CASE("same-shape arithmetic") {
    Tensor a({3}, {1.0, -2.0, 3.0});
    Tensor b({3}, {0.5, 4.0, -1.0});
    Tensor s = add(a, b);
    CHECK(s == Tensor({3}, {1.5, 2.0, 2.0}));
    Tensor d = sub(a, b);
    CHECK(d == Tensor({3}, {0.5, -6.0, 4.0}));
    Tensor sc = scale(a, -2.0);
    CHECK(sc == Tensor({3}, {-2.0, 4.0, -6.0}));
    CHECK_THROWS_AS(add(a, Tensor({2}, {1.0, 2.0})), ShapeError);
    CHECK_THROWS_AS(sub(a, Tensor({2}, {1.0, 2.0})), ShapeError);
}

TEST_CASE("elementwise_mul broadcasts a suffix shape over leading axes") {
    Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b({3}, {10.0, 0.0, -1.0});
    Tensor r = elementwise_mul(a, b);
    CHECK(r == Tensor({2, 3}, {10, 0, -3, 40, 0, -6}));

    Tensor same = elementwise_mul(b, Tensor({3}, {2.0, 2.0, 2.0}));
    CHECK(same == Tensor({3}, {20.0, 0.0, -2.0}));

    CHECK_THROWS_AS(elementwise_mul(a, Tensor({2}, {1.0, 1.0})), ShapeError);
    CHECK_THROWS_AS(elementwise_mul(b, a), ShapeError);
}

TEST_CASE("sign maps negatives, zeros, and positives") {
    Tensor a({5}, {-3.0, -0.0, 0.0, 0.25, 1e300});
    Tensor s = sign(a);
    CHECK(s == Tensor({5}, {-1.0, 0.0, 0.0, 1.0, 1.0}));
}

TEST_CASE("norms and dot products") {
    Tensor a({2}, {3.0, 4.0});
    CHECK(l2_norm(a) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(dot(a, a) == doctest::Approx(25.0).epsilon(1e-15));
    CHECK(dot(a, Tensor({2}, {-1.0, 1.0})) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(dot(a, Tensor({3}, {1, 2, 3})), ShapeError);
    CHECK(l2_norm(Tensor::zeros({3})) == 0.0);
}

TEST_CASE("sum_over_batch collapses axis 0") {
    Tensor a({2, 3}, {1, 2, 3, 10, 20, 30});
    Tensor s = sum_over_batch(a);
    CHECK(s == Tensor({3}, {11.0, 22.0, 33.0}));

    Tensor v({4}, {1, 2, 3, 4});
    Tensor sv = sum_over_batch(v);
    CHECK(sv.rank() == 0);
    CHECK(sv.item() == 10.0);

    CHECK_THROWS_AS(sum_over_batch(Tensor::scalar(1.0)), ShapeError);
}

TEST_CASE("all_finite flags infinities and NaNs") {
    CHECK(all_finite(Tensor({2}, {1.0, -2.0})));
    CHECK_FALSE(all_finite(Tensor({2}, {1.0, std::numeric_limits<double>::infinity()})));
    CHECK_FALSE(all_finite(Tensor({2}, {std::nan(""), 0.0})));
}
