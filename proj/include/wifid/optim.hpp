#pragma once

#include <cmath>
#include <vector>

#include "wifid/autograd.hpp"

namespace wifid {

enum class OptimKind { Adam, RAdam };

// Adam / RAdam over a fixed parameter list. Moment buffers are allocated on
// construction and follow parameter declaration order.
class Optimizer {
public:
    Optimizer(OptimKind kind, std::vector<Var> params, float lr,
              float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f)
        : kind_(kind), params_(std::move(params)), lr_(lr),
          beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto& p : params_) {
            m_.emplace_back(p->value.shape);
            v_.emplace_back(p->value.shape);
        }
    }

    void zero_grad() {
        for (auto& p : params_) p->zero_grad();
    }

    void step() {
        ++t_;
        const double b1t = 1.0 - std::pow(double(beta1_), t_);
        const double b2t = 1.0 - std::pow(double(beta2_), t_);
        // RAdam variance rectification
        const double rho_inf = 2.0 / (1.0 - double(beta2_)) - 1.0;
        const double rho_t =
            rho_inf - 2.0 * t_ * std::pow(double(beta2_), t_) / b2t;
        const bool rectified = rho_t > 4.0;
        double r_t = 1.0;
        if (rectified)
            r_t = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                            ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));

        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            Node& p = *params_[pi];
            if (!p.requires_grad) continue;
            if (!p.has_grad())
                throw std::runtime_error("optimizer step: parameter " + std::to_string(pi) +
                                         " has no gradient");
            for (std::size_t i = 0; i < p.value.numel(); ++i) {
                const double g = p.grad.data[i];
                float& mf = m_[pi].data[i];
                float& vf = v_[pi].data[i];
                mf = beta1_ * mf + (1.0f - beta1_) * static_cast<float>(g);
                vf = beta2_ * vf + (1.0f - beta2_) * static_cast<float>(g * g);
                const double mhat = double(mf) / b1t;
                if (kind_ == OptimKind::Adam || rectified) {
                    const double vhat = std::sqrt(double(vf) / b2t);
                    const double scale = kind_ == OptimKind::RAdam ? r_t : 1.0;
                    p.value.data[i] -= static_cast<float>(lr_ * scale * mhat /
                                                          (vhat + eps_));
                } else {
                    // variance term undefined this early: plain momentum step
                    p.value.data[i] -= static_cast<float>(lr_ * mhat);
                }
            }
        }
    }

    long step_count() const { return t_; }
    void set_step_count(long t) { t_ = t; }
    float learning_rate() const { return lr_; }
    void set_learning_rate(float lr) { lr_ = lr; }
    OptimKind kind() const { return kind_; }

private:
    OptimKind kind_;
    std::vector<Var> params_;
    std::vector<Tensor> m_, v_;
    float lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace wifid
