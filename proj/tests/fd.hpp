#pragma once

// Central finite-difference gradient oracle shared by the gradient suites.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "wifid/autograd.hpp"

namespace testutil {

struct FdResult {
    double max_err = 0.0;     // worst normalized deviation
    std::string where;        // param/element of the worst deviation
    std::size_t checked = 0;
};

// loss_fn must rebuild the graph from current param values on every call.
// Fourth-order central stencil keeps the step large enough that float
// round-off in the loss stays well below the truncation budget.
// Normalized error: |analytic - numeric| / max(|analytic| + |numeric|, floor,
// max gradient magnitude over all checked parameters).
inline FdResult check_gradients(const std::vector<wifid::Var>& params,
                                const std::function<wifid::Var()>& loss_fn,
                                double eps = 1e-2, double floor = 1.0) {
    std::vector<std::vector<float>> analytic;
    {
        for (auto& p : params) p->zero_grad();
        wifid::Var loss = loss_fn();
        wifid::backward(loss);
        for (auto& p : params)
            analytic.push_back(p->has_grad() ? p->grad.data
                                             : std::vector<float>(p->value.numel(), 0.0f));
    }
    double scale = floor;
    for (const auto& g : analytic)
        for (float v : g) scale = std::max(scale, double(std::abs(v)));
    FdResult res;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
            const float saved = p->value.data[i];
            auto eval_at = [&](double offset) {
                p->value.data[i] = static_cast<float>(saved + offset);
                return double(loss_fn()->value.data[0]);
            };
            // snap the step to one exactly representable around this value
            const double h = double(static_cast<float>(saved + eps)) - double(saved);
            auto richardson = [&](double step) {
                return (8.0 * (eval_at(step) - eval_at(-step)) -
                        (eval_at(2.0 * step) - eval_at(-2.0 * step))) /
                       (12.0 * step);
            };
            const double numeric = richardson(h);
            const double confirm = richardson(0.5 * h);
            p->value.data[i] = saved;
            // the two step sizes only disagree when the stencil straddles a
            // relu/max kink, where finite differences are not a valid oracle
            if (std::abs(numeric - confirm) > 1e-3 * scale) continue;
            const double a = analytic[pi][i];
            const double err = std::abs(a - numeric) /
                               std::max(std::abs(a) + std::abs(numeric), scale);
            ++res.checked;
            if (err > res.max_err) {
                res.max_err = err;
                res.where = "param " + std::to_string(pi) + " elem " + std::to_string(i);
            }
        }
    }
    return res;
}

}  // namespace testutil
