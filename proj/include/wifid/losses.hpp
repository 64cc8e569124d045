#pragma once

#include <cmath>
#include <vector>

#include "wifid/autograd.hpp"

namespace wifid {

inline std::vector<double> softmax_row(const float* logits, int c) {
    double mx = logits[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, double(logits[j]));
    std::vector<double> p(c);
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
        p[j] = std::exp(double(logits[j]) - mx);
        z += p[j];
    }
    for (int j = 0; j < c; ++j) p[j] /= z;
    return p;
}

// mean over the batch of -log softmax(logits)[label]
inline Var softmax_cross_entropy(const Var& logits, std::vector<int> labels) {
    if (logits->value.ndim() != 2 ||
        logits->value.dim(0) != static_cast<int>(labels.size()))
        throw std::invalid_argument("softmax_cross_entropy: logits " +
                                    shape_str(logits->value.shape) + " vs " +
                                    std::to_string(labels.size()) + " labels");
    const int n = logits->value.dim(0), c = logits->value.dim(1);
    double loss = 0.0;
    auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n) * c);
    for (int b = 0; b < n; ++b) {
        auto p = softmax_row(logits->value.data.data() + static_cast<std::size_t>(b) * c, c);
        loss -= std::log(std::max(p[labels[b]], 1e-30));
        std::copy(p.begin(), p.end(), probs->begin() + static_cast<std::size_t>(b) * c);
    }
    loss /= n;
    return detail::make_op(Tensor::scalar(static_cast<float>(loss)), {logits},
                           [labels = std::move(labels), probs, n, c](Node& nd) {
        Node& p = *nd.parents[0];
        if (!p.requires_grad) return;
        Tensor& g = p.grad_buf();
        const float go = nd.grad.data[0] / static_cast<float>(n);
        for (int b = 0; b < n; ++b)
            for (int j = 0; j < c; ++j) {
                double d = (*probs)[static_cast<std::size_t>(b) * c + j];
                if (j == labels[b]) d -= 1.0;
                g.data[static_cast<std::size_t>(b) * c + j] += go * static_cast<float>(d);
            }
    });
}

// cross entropy to the uniform distribution; the outlier-exposure penalty
// for classifiers. Minimum value is ln(C), reached at equal logits.
inline Var uniform_cross_entropy(const Var& logits) {
    const int n = logits->value.dim(0), c = logits->value.dim(1);
    double loss = 0.0;
    auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n) * c);
    for (int b = 0; b < n; ++b) {
        const float* row = logits->value.data.data() + static_cast<std::size_t>(b) * c;
        auto p = softmax_row(row, c);
        double mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, double(row[j]));
        double lse = 0.0;
        for (int j = 0; j < c; ++j) lse += std::exp(double(row[j]) - mx);
        lse = std::log(lse) + mx;
        for (int j = 0; j < c; ++j) loss += (lse - double(row[j])) / c;
        std::copy(p.begin(), p.end(), probs->begin() + static_cast<std::size_t>(b) * c);
    }
    loss /= n;
    return detail::make_op(Tensor::scalar(static_cast<float>(loss)), {logits},
                           [probs, n, c](Node& nd) {
        Node& p = *nd.parents[0];
        if (!p.requires_grad) return;
        Tensor& g = p.grad_buf();
        const float go = nd.grad.data[0] / static_cast<float>(n);
        for (int b = 0; b < n; ++b)
            for (int j = 0; j < c; ++j)
                g.data[static_cast<std::size_t>(b) * c + j] +=
                    go * static_cast<float>((*probs)[static_cast<std::size_t>(b) * c + j] -
                                            1.0 / c);
    });
}

// Proxy-anchor loss over a batch of embeddings and learnable proxies.
// label < 0 marks an outlier-exposure row: it enters every proxy's negative
// set with weight oe_weight and no positive term.
inline Var proxy_anchor_loss(const Var& embeddings, const std::vector<int>& labels,
                             const Var& proxies, float alpha, float margin,
                             float oe_weight = 1.0f) {
    const int n = embeddings->value.dim(0), e = embeddings->value.dim(1);
    const int np = proxies->value.dim(0);
    if (proxies->value.dim(1) != e)
        throw std::invalid_argument("proxy_anchor_loss: embedding dim mismatch");
    if (n != static_cast<int>(labels.size()))
        throw std::invalid_argument("proxy_anchor_loss: label count mismatch");

    const float* X = embeddings->value.data.data();
    const float* P = proxies->value.data.data();

    std::vector<double> xn(n), pn(np);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < e; ++j) s += double(X[i * e + j]) * X[i * e + j];
        xn[i] = std::sqrt(std::max(s, 1e-24));
    }
    for (int p = 0; p < np; ++p) {
        double s = 0.0;
        for (int j = 0; j < e; ++j) s += double(P[p * e + j]) * P[p * e + j];
        pn[p] = std::sqrt(std::max(s, 1e-24));
    }
    std::vector<double> sim(static_cast<std::size_t>(n) * np);
    for (int i = 0; i < n; ++i)
        for (int p = 0; p < np; ++p) {
            double d = 0.0;
            for (int j = 0; j < e; ++j) d += double(X[i * e + j]) * P[p * e + j];
            sim[static_cast<std::size_t>(i) * np + p] = d / (xn[i] * pn[p]);
        }

    std::vector<bool> has_pos(np, false);
    int n_pos_proxies = 0;
    for (int i = 0; i < n; ++i)
        if (labels[i] >= 0 && labels[i] < np && !has_pos[labels[i]]) {
            has_pos[labels[i]] = true;
            ++n_pos_proxies;
        }

    // dL/dsim for every (i,p) pair
    auto dsim = std::make_shared<std::vector<double>>(sim.size(), 0.0);
    double loss = 0.0;
    for (int p = 0; p < np; ++p) {
        if (has_pos[p]) {
            double a = 0.0;
            for (int i = 0; i < n; ++i)
                if (labels[i] == p)
                    a += std::exp(-alpha * (sim[static_cast<std::size_t>(i) * np + p] - margin));
            loss += std::log1p(a) / n_pos_proxies;
            for (int i = 0; i < n; ++i)
                if (labels[i] == p) {
                    const double ex =
                        std::exp(-alpha * (sim[static_cast<std::size_t>(i) * np + p] - margin));
                    (*dsim)[static_cast<std::size_t>(i) * np + p] +=
                        (-alpha * ex) / ((1.0 + a) * n_pos_proxies);
                }
        }
        double bsum = 0.0;
        for (int i = 0; i < n; ++i) {
            if (labels[i] == p) continue;
            const double w = labels[i] < 0 ? double(oe_weight) : 1.0;
            bsum += w * std::exp(alpha * (sim[static_cast<std::size_t>(i) * np + p] + margin));
        }
        loss += std::log1p(bsum) / np;
        for (int i = 0; i < n; ++i) {
            if (labels[i] == p) continue;
            const double w = labels[i] < 0 ? double(oe_weight) : 1.0;
            const double ex =
                w * std::exp(alpha * (sim[static_cast<std::size_t>(i) * np + p] + margin));
            (*dsim)[static_cast<std::size_t>(i) * np + p] += (alpha * ex) / ((1.0 + bsum) * np);
        }
    }

    auto xn_s = std::make_shared<std::vector<double>>(std::move(xn));
    auto pn_s = std::make_shared<std::vector<double>>(std::move(pn));
    auto sim_s = std::make_shared<std::vector<double>>(std::move(sim));
    return detail::make_op(Tensor::scalar(static_cast<float>(loss)), {embeddings, proxies},
                           [n, e, np, dsim, xn_s, pn_s, sim_s](Node& nd) {
        Node& px = *nd.parents[0];
        Node& pp = *nd.parents[1];
        const float go = nd.grad.data[0];
        const float* X = px.value.data.data();
        const float* P = pp.value.data.data();
        for (int i = 0; i < n; ++i)
            for (int p = 0; p < np; ++p) {
                const double ds = (*dsim)[static_cast<std::size_t>(i) * np + p];
                if (ds == 0.0) continue;
                const double s = (*sim_s)[static_cast<std::size_t>(i) * np + p];
                const double inx = 1.0 / (*xn_s)[i], inp = 1.0 / (*pn_s)[p];
                if (px.requires_grad) {
                    Tensor& g = px.grad_buf();
                    for (int j = 0; j < e; ++j)
                        g.data[i * e + j] += go * static_cast<float>(
                            ds * (P[p * e + j] * inx * inp - s * X[i * e + j] * inx * inx));
                }
                if (pp.requires_grad) {
                    Tensor& g = pp.grad_buf();
                    for (int j = 0; j < e; ++j)
                        g.data[p * e + j] += go * static_cast<float>(
                            ds * (X[i * e + j] * inx * inp - s * P[p * e + j] * inp * inp));
                }
            }
    });
}

// elementwise exp(mul * a)
inline Var expv(const Var& a, float mul = 1.0f) {
    Tensor out = a->value;
    for (float& v : out.data) v = std::exp(mul * v);
    auto cached = std::make_shared<std::vector<float>>(out.data);
    return detail::make_op(std::move(out), {a}, [mul, cached](Node& nd) {
        Node& p = *nd.parents[0];
        if (!p.requires_grad) return;
        Tensor& g = p.grad_buf();
        for (std::size_t i = 0; i < g.numel(); ++i)
            g.data[i] += nd.grad.data[i] * mul * (*cached)[i];
    });
}

inline Var square(const Var& a) { return mul(a, a); }

// mean((a - target)^2) against a constant target
inline Var mse_to_const(const Var& a, const Tensor& target) {
    check_same_shape(a->value, target, "mse_to_const");
    const std::size_t n = a->value.numel();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = double(a->value.data[i]) - target.data[i];
        acc += d * d;
    }
    auto tgt = std::make_shared<Tensor>(target);
    return detail::make_op(Tensor::scalar(static_cast<float>(acc / double(n))), {a},
                           [tgt, n](Node& nd) {
        Node& p = *nd.parents[0];
        if (!p.requires_grad) return;
        Tensor& g = p.grad_buf();
        const float go = nd.grad.data[0] * 2.0f / static_cast<float>(n);
        for (std::size_t i = 0; i < n; ++i)
            g.data[i] += go * (p.value.data[i] - tgt->data[i]);
    });
}

// closed-form Gaussian KL to the unit prior, mean over the batch:
// (1/N) sum_b 0.5 sum_d (mu^2 + sigma^2 - 1 - log sigma^2)
inline Var gaussian_kl(const Var& mu, const Var& logvar) {
    check_same_shape(mu->value, logvar->value, "gaussian_kl");
    const int n = mu->value.dim(0);
    const std::size_t total = mu->value.numel();
    double acc = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
        const double m = mu->value.data[i], lv = logvar->value.data[i];
        acc += 0.5 * (m * m + std::exp(lv) - 1.0 - lv);
    }
    return detail::make_op(Tensor::scalar(static_cast<float>(acc / n)), {mu, logvar},
                           [n, total](Node& nd) {
        Node& pm = *nd.parents[0];
        Node& pl = *nd.parents[1];
        const float go = nd.grad.data[0] / static_cast<float>(n);
        if (pm.requires_grad) {
            Tensor& g = pm.grad_buf();
            for (std::size_t i = 0; i < total; ++i)
                g.data[i] += go * pm.value.data[i];
        }
        if (pl.requires_grad) {
            Tensor& g = pl.grad_buf();
            for (std::size_t i = 0; i < total; ++i)
                g.data[i] += go * 0.5f *
                             (std::exp(pl.value.data[i]) - 1.0f);
        }
    });
}

// sum over all elements of the Gaussian negative log density
// 0.5 * (log 2pi + logvar + (target - mean)^2 / exp(logvar))
inline Var gaussian_nll_sum(const Var& mean, const Var& logvar, const Tensor& target) {
    check_same_shape(mean->value, logvar->value, "gaussian_nll");
    check_same_shape(mean->value, target, "gaussian_nll");
    const std::size_t n = mean->value.numel();
    constexpr double kLog2Pi = 1.8378770664093454835606594728112;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = double(target.data[i]) - mean->value.data[i];
        const double lv = logvar->value.data[i];
        acc += 0.5 * (kLog2Pi + lv + d * d * std::exp(-lv));
    }
    auto tgt = std::make_shared<Tensor>(target);
    return detail::make_op(Tensor::scalar(static_cast<float>(acc)), {mean, logvar},
                           [tgt, n](Node& nd) {
        Node& pm = *nd.parents[0];
        Node& pl = *nd.parents[1];
        const float go = nd.grad.data[0];
        for (std::size_t i = 0; i < n; ++i) {
            const float d = pm.value.data[i] - tgt->data[i];
            const float iv = std::exp(-pl.value.data[i]);
            if (pm.requires_grad) pm.grad_buf().data[i] += go * d * iv;
            if (pl.requires_grad)
                pl.grad_buf().data[i] += go * 0.5f * (1.0f - d * d * iv);
        }
    });
}

}  // namespace wifid
