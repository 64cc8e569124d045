#include <catch2/catch_amalgamated.hpp>

#include "fd.hpp"
#include "wifid/autograd.hpp"
#include "wifid/rng.hpp"

using namespace wifid;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(s));
    for (float& v : t.data) v = static_cast<float>(rng.gaussian() * scale);
    return t;
}

}  // namespace

TEST_CASE("linear derivative: loss = sum(w*x)") {
    Var w = make_var(Tensor({1}, {2.0f}), true);
    Var x = make_const(Tensor({1}, {3.0f}));
    Var loss = sum(mul(w, x));
    backward(loss);
    CHECK(loss->value.data[0] == 6.0f);
    REQUIRE(w->has_grad());
    CHECK(w->grad.data[0] == 3.0f);
}

TEST_CASE("backward rejects non-scalar loss") {
    Var a = make_var(Tensor({2}, {1.0f, 2.0f}), true);
    CHECK_THROWS_AS(backward(a), std::invalid_argument);
}

TEST_CASE("gradients accumulate across backward calls") {
    Var w = make_var(Tensor({1}, {1.5f}), true);
    Var loss = scale(w, 4.0f);
    backward(loss);
    CHECK(w->grad.data[0] == 4.0f);
    backward(loss);
    CHECK(w->grad.data[0] == 8.0f);
    w->zero_grad();
    backward(loss);
    CHECK(w->grad.data[0] == 4.0f);
}

TEST_CASE("diamond graph gradient sums both paths") {
    // loss = sum(a*a + a*a) = 2*sum(a^2); dloss/da = 4a
    Var a = make_var(Tensor({3}, {1.0f, -2.0f, 0.5f}), true);
    Var sq = mul(a, a);
    Var loss = sum(add(sq, sq));
    backward(loss);
    CHECK(a->grad.data[0] == Catch::Approx(4.0));
    CHECK(a->grad.data[1] == Catch::Approx(-8.0));
    CHECK(a->grad.data[2] == Catch::Approx(2.0));
}

TEST_CASE("matmul forward matches hand result") {
    Var a = make_const(Tensor({2, 2}, {1, 2, 3, 4}));
    Var b = make_const(Tensor({2, 2}, {5, 6, 7, 8}));
    Var c = matmul(a, b);
    CHECK(c->value.data == std::vector<float>{19, 22, 43, 50});
    CHECK_THROWS_AS(matmul(a, make_const(Tensor({3, 2}))), std::invalid_argument);
}

TEST_CASE("elementwise and reduction ops pass finite differences") {
    Rng rng(11);
    for (int seed = 0; seed < 10; ++seed) {
        Var a = make_var(random_tensor({3, 4}, rng), true);
        Var b = make_var(random_tensor({3, 4}, rng), true);
        Var m = make_var(random_tensor({4, 2}, rng), true);

        auto loss_fn = [&]() {
            Var h = add(mul(a, b), scale(sub(a, b), 0.5f));
            h = matmul(reshape(h, {3, 4}), m);
            return mean(mul(h, h));
        };
        auto res = testutil::check_gradients({a, b, m}, loss_fn);
        INFO("seed " << seed << " worst at " << res.where);
        CHECK(res.max_err < 1e-4);
    }
}

TEST_CASE("sum and mean gradients are exact") {
    Var a = make_var(Tensor({2, 2}, {1, 2, 3, 4}), true);
    backward(sum(a));
    for (float g : a->grad.data) CHECK(g == 1.0f);
    a->zero_grad();
    backward(mean(a));
    for (float g : a->grad.data) CHECK(g == 0.25f);
}

TEST_CASE("reshape preserves data and routes gradients") {
    Var a = make_var(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), true);
    Var r = reshape(a, {3, 2});
    CHECK(r->value.shape == Shape{3, 2});
    CHECK(r->value.data == a->value.data);
    backward(sum(mul(r, r)));
    CHECK(a->grad.data[4] == Catch::Approx(10.0));
    CHECK_THROWS_AS(reshape(a, {4, 2}), std::invalid_argument);
}

TEST_CASE("constants receive no gradient buffers") {
    Var a = make_var(Tensor({2}, {1, 2}), true);
    Var c = make_const(Tensor({2}, {3, 4}));
    backward(sum(mul(a, c)));
    CHECK(a->has_grad());
    CHECK_FALSE(c->has_grad());
}

TEST_CASE("gemm transpose variants agree with naive multiply") {
    Rng rng(5);
    const int m = 3, k = 4, n = 2;
    Tensor A = random_tensor({m, k}, rng), B = random_tensor({k, n}, rng);
    Tensor At({k, m}), Bt({n, k});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j) At.data[j * m + i] = A.data[i * k + j];
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < n; ++j) Bt.data[j * k + i] = B.data[i * n + j];

    std::vector<float> want(m * n, 0.0f);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            for (int t = 0; t < k; ++t) want[i * n + j] += A.data[i * k + t] * B.data[t * n + j];

    std::vector<float> got(m * n);
    gemm(A.data.data(), B.data.data(), got.data(), m, k, n);
    for (int i = 0; i < m * n; ++i) CHECK(got[i] == Catch::Approx(want[i]).margin(1e-5));
    gemm(At.data.data(), B.data.data(), got.data(), m, k, n, true, false);
    for (int i = 0; i < m * n; ++i) CHECK(got[i] == Catch::Approx(want[i]).margin(1e-5));
    gemm(A.data.data(), Bt.data.data(), got.data(), m, k, n, false, true);
    for (int i = 0; i < m * n; ++i) CHECK(got[i] == Catch::Approx(want[i]).margin(1e-5));
    gemm(At.data.data(), Bt.data.data(), got.data(), m, k, n, true, true);
    for (int i = 0; i < m * n; ++i) CHECK(got[i] == Catch::Approx(want[i]).margin(1e-5));
    // accumulate doubles the result
    gemm(A.data.data(), B.data.data(), got.data(), m, k, n, false, false, false);
    gemm(A.data.data(), B.data.data(), got.data(), m, k, n, false, false, true);
    for (int i = 0; i < m * n; ++i) CHECK(got[i] == Catch::Approx(2 * want[i]).margin(1e-5));
}
