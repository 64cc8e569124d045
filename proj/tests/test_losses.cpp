#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fd.hpp"
#include "wifid/losses.hpp"
#include "wifid/rng.hpp"

using namespace wifid;

namespace {

Tensor randn(Shape s, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(s));
    for (float& v : t.data) v = static_cast<float>(rng.gaussian() * scale);
    return t;
}

// independent double-precision evaluation of the proxy-anchor objective
double proxy_anchor_oracle(const Tensor& emb, const std::vector<int>& labels,
                           const Tensor& prox, double alpha, double margin,
                           double oe_weight) {
    const int n = emb.dim(0), e = emb.dim(1), np = prox.dim(0);
    auto cosine = [&](int i, int p) {
        double dot = 0.0, nx = 0.0, npn = 0.0;
        for (int j = 0; j < e; ++j) {
            dot += double(emb.data[i * e + j]) * prox.data[p * e + j];
            nx += double(emb.data[i * e + j]) * emb.data[i * e + j];
            npn += double(prox.data[p * e + j]) * prox.data[p * e + j];
        }
        return dot / (std::sqrt(std::max(nx, 1e-24)) * std::sqrt(std::max(npn, 1e-24)));
    };
    int pos_proxies = 0;
    for (int p = 0; p < np; ++p)
        for (int i = 0; i < n; ++i)
            if (labels[i] == p) {
                ++pos_proxies;
                break;
            }
    double loss = 0.0;
    for (int p = 0; p < np; ++p) {
        double a = 0.0;
        bool any = false;
        for (int i = 0; i < n; ++i)
            if (labels[i] == p) {
                a += std::exp(-alpha * (cosine(i, p) - margin));
                any = true;
            }
        if (any) loss += std::log1p(a) / pos_proxies;
        double b = 0.0;
        for (int i = 0; i < n; ++i)
            if (labels[i] != p)
                b += (labels[i] < 0 ? oe_weight : 1.0) *
                     std::exp(alpha * (cosine(i, p) + margin));
        loss += std::log1p(b) / np;
    }
    return loss;
}

}  // namespace

TEST_CASE("cross entropy on tied two-way logits") {
    Var logits = make_var(Tensor({1, 2}, {0.0f, 0.0f}), true);
    Var loss = softmax_cross_entropy(logits, {0});
    CHECK(loss->value.data[0] == Catch::Approx(std::log(2.0)).margin(1e-6));
    backward(loss);
    CHECK(logits->grad.data[0] == Catch::Approx(-0.5).margin(1e-6));
    CHECK(logits->grad.data[1] == Catch::Approx(0.5).margin(1e-6));
}

TEST_CASE("cross entropy validates batch agreement") {
    Var logits = make_const(Tensor({2, 3}));
    CHECK_THROWS_AS(softmax_cross_entropy(logits, {0}), std::invalid_argument);
}

TEST_CASE("uniform cross entropy bottoms out at ln C with zero gradient") {
    Var logits = make_var(Tensor({2, 4}), true);  // all-zero logits
    Var loss = uniform_cross_entropy(logits);
    CHECK(loss->value.data[0] == Catch::Approx(std::log(4.0)).margin(1e-6));
    backward(loss);
    for (float g : logits->grad.data) CHECK(g == Catch::Approx(0.0).margin(1e-7));
    // any perturbation away from uniform raises the penalty
    Var skew = make_const(Tensor({1, 4}, {1.0f, 0.0f, 0.0f, 0.0f}));
    CHECK(uniform_cross_entropy(skew)->value.data[0] > std::log(4.0) + 1e-3);
}

TEST_CASE("proxy anchor: embedding on its proxy, no negatives") {
    // cosine = 1, alpha = 32, margin = 0.1 -> loss = ln(1 + e^{-28.8})
    Var emb = make_const(Tensor({1, 2}, {0.6f, 0.8f}));
    Var prox = make_const(Tensor({1, 2}, {0.6f, 0.8f}));
    Var loss = proxy_anchor_loss(emb, {0}, prox, 32.0f, 0.1f);
    CHECK(loss->value.data[0] ==
          Catch::Approx(std::log1p(std::exp(-28.8))).margin(1e-9));
}

TEST_CASE("proxy anchor: similarity exactly at the margin gives ln 2") {
    const float s = 0.1f;
    Var emb = make_const(Tensor({1, 2}, {s, std::sqrt(1.0f - s * s)}));
    Var prox = make_const(Tensor({1, 2}, {1.0f, 0.0f}));  // cosine = 0.1 = margin
    Var loss = proxy_anchor_loss(emb, {0}, prox, 32.0f, 0.1f);
    CHECK(loss->value.data[0] == Catch::Approx(std::log(2.0)).margin(1e-5));
}

TEST_CASE("proxy anchor matches a direct-summation oracle") {
    Rng rng(31);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor emb = randn({6, 8}, rng);
        Tensor prox = randn({4, 8}, rng);
        std::vector<int> labels = {0, 1, 2, 3, -1, -1};  // two outlier rows
        const float alpha = 32.0f, margin = 0.1f, w = 0.7f;
        Var loss = proxy_anchor_loss(make_const(emb), labels, make_const(prox),
                                     alpha, margin, w);
        const double want = proxy_anchor_oracle(emb, labels, prox, alpha, margin, w);
        CHECK(loss->value.data[0] == Catch::Approx(want).margin(1e-5));
    }
}

TEST_CASE("proxy anchor decreases as an embedding approaches its proxy") {
    Var prox = make_const(Tensor({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f}));
    auto at_angle = [&](double theta) {
        Var emb = make_const(Tensor({1, 2}, {static_cast<float>(std::cos(theta)),
                                             static_cast<float>(std::sin(theta))}));
        return proxy_anchor_loss(emb, {0}, prox, 32.0f, 0.1f)->value.data[0];
    };
    CHECK(at_angle(0.1) < at_angle(0.4));
    CHECK(at_angle(0.4) < at_angle(0.8));
}

TEST_CASE("proxy anchor gradients pass finite differences") {
    Rng rng(77);
    for (int trial = 0; trial < 5; ++trial) {
        Var emb = make_var(randn({5, 6}, rng), true);
        Var prox = make_var(randn({4, 6}, rng), true);
        std::vector<int> labels = {0, 1, 2, 3, -1};
        auto loss_fn = [&]() {
            return proxy_anchor_loss(emb, labels, prox, 8.0f, 0.1f, 0.5f);
        };
        auto res = testutil::check_gradients({emb, prox}, loss_fn);
        INFO("trial " << trial << " worst at " << res.where);
        CHECK(res.max_err < 1e-3);
    }
}

TEST_CASE("classifier losses pass finite differences") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        Var logits = make_var(randn({4, 5}, rng), true);
        std::vector<int> labels = {0, 2, 4, 1};
        auto ce = [&]() { return softmax_cross_entropy(logits, labels); };
        CHECK(testutil::check_gradients({logits}, ce).max_err < 1e-4);
        auto uce = [&]() { return uniform_cross_entropy(logits); };
        CHECK(testutil::check_gradients({logits}, uce).max_err < 1e-4);
    }
}

TEST_CASE("gaussian KL closed form: unit variance, unit mean") {
    Var mu = make_var(Tensor({1, 1}, {1.0f}), true);
    Var lv = make_var(Tensor({1, 1}, {0.0f}), true);
    Var kl = gaussian_kl(mu, lv);
    CHECK(kl->value.data[0] == Catch::Approx(0.5).margin(1e-7));
    backward(kl);
    CHECK(mu->grad.data[0] == Catch::Approx(1.0).margin(1e-6));   // d/dmu = mu
    CHECK(lv->grad.data[0] == Catch::Approx(0.0).margin(1e-6));   // d/dlv = (e^lv - 1)/2
}

TEST_CASE("gaussian KL is zero only at the prior and averages over batch") {
    Var mu0 = make_const(Tensor({3, 4}));
    Var lv0 = make_const(Tensor({3, 4}));
    CHECK(gaussian_kl(mu0, lv0)->value.data[0] == Catch::Approx(0.0).margin(1e-7));
    // batch mean: two identical rows give the same value as one
    Var mu1 = make_const(Tensor({1, 2}, {1.0f, -1.0f}));
    Var lv1 = make_const(Tensor({1, 2}, {0.5f, -0.5f}));
    Var mu2 = make_const(Tensor({2, 2}, {1.0f, -1.0f, 1.0f, -1.0f}));
    Var lv2 = make_const(Tensor({2, 2}, {0.5f, -0.5f, 0.5f, -0.5f}));
    CHECK(gaussian_kl(mu1, lv1)->value.data[0] ==
          Catch::Approx(gaussian_kl(mu2, lv2)->value.data[0]).margin(1e-6));
}

TEST_CASE("gaussian NLL closed form") {
    constexpr double kLog2Pi = 1.8378770664093454835606594728112;
    Var mean = make_var(Tensor({1, 1}, {0.0f}), true);
    Var lv = make_var(Tensor({1, 1}, {0.0f}), true);
    Tensor target({1, 1}, {2.0f});
    Var nll = gaussian_nll_sum(mean, lv, target);
    CHECK(nll->value.data[0] == Catch::Approx(0.5 * (kLog2Pi + 4.0)).margin(1e-6));
    backward(nll);
    CHECK(mean->grad.data[0] == Catch::Approx(-2.0).margin(1e-5));       // (m - t)/var
    CHECK(lv->grad.data[0] == Catch::Approx(0.5 * (1.0 - 4.0)).margin(1e-5));
}

TEST_CASE("gaussian losses pass finite differences") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        Var mu = make_var(randn({3, 4}, rng), true);
        Var lv = make_var(randn({3, 4}, rng, 0.5), true);
        auto kl_fn = [&]() { return gaussian_kl(mu, lv); };
        CHECK(testutil::check_gradients({mu, lv}, kl_fn).max_err < 1e-4);
        Tensor tgt = randn({3, 4}, rng);
        auto nll_fn = [&]() { return gaussian_nll_sum(mu, lv, tgt); };
        CHECK(testutil::check_gradients({mu, lv}, nll_fn, 1e-2, 4.0).max_err < 1e-4);
    }
}

TEST_CASE("mse to constant target value and gradient") {
    Var a = make_var(Tensor({1, 2}, {1.0f, 3.0f}), true);
    Tensor target({1, 2}, {0.0f, 1.0f});
    Var l = mse_to_const(a, target);
    CHECK(l->value.data[0] == Catch::Approx((1.0 + 4.0) / 2.0).margin(1e-6));
    backward(l);
    CHECK(a->grad.data[0] == Catch::Approx(1.0).margin(1e-6));  // 2*(1-0)/2
    CHECK(a->grad.data[1] == Catch::Approx(2.0).margin(1e-6));  // 2*(3-1)/2
}

TEST_CASE("expv exponentiates elementwise with chain rule") {
    Var a = make_var(Tensor({2}, {0.0f, 1.0f}), true);
    Var e = expv(a, 0.5f);
    CHECK(e->value.data[0] == Catch::Approx(1.0).margin(1e-6));
    CHECK(e->value.data[1] == Catch::Approx(std::exp(0.5)).margin(1e-6));
    backward(sum(e));
    CHECK(a->grad.data[0] == Catch::Approx(0.5).margin(1e-6));
    CHECK(a->grad.data[1] == Catch::Approx(0.5 * std::exp(0.5)).margin(1e-6));
}
