#pragma once

#include "wifid/detectors/common.hpp"

namespace wifid {

// Causal temporal conv net predicting the next I/Q sample as a diagonal
// Gaussian. The cyclic prefix makes clean packets highly predictable, so
// per-sample negative log likelihood rises when an interferer is present.
class ArModel {
public:
    ArModel(const ArchConfig& arch, std::uint64_t init_seed)
        : arch_(arch), rng_(split_seed(init_seed, 0x6172)) {
        const int c = arch_.ar_channels;
        stem_ = std::make_unique<Conv1d>(5, c, 2, 1, 1, PadMode::Causal, rng_);
        int dilation = 1;
        for (int i = 0; i < arch_.ar_levels; ++i) {
            blocks_.push_back(std::make_unique<PreActResBlock>(
                c, 2, dilation, PadMode::Causal, arch_.dropout, rng_));
            dilation *= 2;
        }
        final_bn_ = std::make_unique<BatchNorm1d>(c);
        mean_head_ = std::make_unique<Conv1d>(c, 2, 1, 1, 1, PadMode::Valid, rng_);
        logvar_head_ = std::make_unique<Conv1d>(c, 2, 1, 1, 1, PadMode::Valid, rng_);
    }

    // input [N,2,T] of right-shifted samples -> (mean [N,2,T], logvar [N,2,T])
    std::pair<Var, Var> forward(const Var& x, bool training, Rng* rng) {
        // append derived channels, all strictly causal: a copy of the stream
        // delayed to the cyclic-prefix repetition period (predicting position
        // t may use position t-64), and the magnitude of the lag-64 copy
        // residual, which lets the variance head calibrate directly to how
        // well the prefix structure is holding up
        const Tensor& xv = x->value;
        const int n = xv.dim(0), t_len = xv.dim(2);
        Tensor tapped({n, 5, t_len});
        for (int b = 0; b < n; ++b) {
            const float* re = xv.data.data() + std::size_t(b) * 2 * t_len;
            const float* im = re + t_len;
            float* out = tapped.data.data() + std::size_t(b) * 5 * t_len;
            for (int t = 0; t < t_len; ++t) {
                const float re_lag = t >= 63 ? re[t - 63] : 0.0f;
                const float im_lag = t >= 63 ? im[t - 63] : 0.0f;
                out[0 * t_len + t] = re[t];
                out[1 * t_len + t] = im[t];
                out[2 * t_len + t] = re_lag;
                out[3 * t_len + t] = im_lag;
                out[4 * t_len + t] = std::hypot(re[t] - re_lag, im[t] - im_lag);
            }
        }
        Var h = stem_->forward(make_const(std::move(tapped)), training, rng);
        for (auto& b : blocks_) h = b->forward(h, training, rng);
        h = Relu::apply(final_bn_->forward(h, training, rng));
        return {mean_head_->forward(h, training, rng),
                logvar_head_->forward(h, training, rng)};
    }

    // receptive field in samples: stem + 2 causal convs per block
    int receptive_field() const {
        int rf = 2, dilation = 1;
        for (int i = 0; i < arch_.ar_levels; ++i) {
            rf += 2 * dilation;
            dilation *= 2;
        }
        return rf;
    }

    std::vector<LayerSpec> layer_specs() const {
        std::vector<LayerSpec> out{stem_->spec()};
        for (auto& b : blocks_) out.push_back(b->spec());
        out.push_back(final_bn_->spec());
        out.push_back(mean_head_->spec());
        out.push_back(logvar_head_->spec());
        return out;
    }
    std::vector<Var> params() const {
        std::vector<Var> out = stem_->params();
        for (auto& b : blocks_)
            for (auto& p : b->params()) out.push_back(p);
        for (auto& p : final_bn_->params()) out.push_back(p);
        for (auto& p : mean_head_->params()) out.push_back(p);
        for (auto& p : logvar_head_->params()) out.push_back(p);
        return out;
    }
    std::vector<Tensor*> buffers() const {
        std::vector<Tensor*> out;
        for (auto& b : blocks_)
            for (auto* t : b->buffers()) out.push_back(t);
        for (auto* t : final_bn_->buffers()) out.push_back(t);
        return out;
    }

    const ArchConfig& arch() const { return arch_; }

private:
    ArchConfig arch_;
    Rng rng_;
    std::unique_ptr<Conv1d> stem_, mean_head_, logvar_head_;
    std::vector<std::unique_ptr<PreActResBlock>> blocks_;
    mutable std::unique_ptr<BatchNorm1d> final_bn_;
};

// (shifted input, prediction target) for a batch of packets:
// input[:, :, t] = x[t-1] with a zero start token, target[:, :, t] = x[t].
inline std::pair<Tensor, Tensor> ar_shift_batch(const std::vector<const IqBlock*>& batch) {
    const int n = static_cast<int>(batch.size());
    const int t_len = static_cast<int>(batch[0]->size());
    Tensor in({n, 2, t_len}), tgt({n, 2, t_len});
    for (int b = 0; b < n; ++b) {
        const IqBlock& iq = *batch[b];
        if (static_cast<int>(iq.size()) != t_len)
            throw std::invalid_argument("ar_shift_batch: ragged packet lengths");
        float* in_re = in.data.data() + (std::size_t(b) * 2 + 0) * t_len;
        float* in_im = in.data.data() + (std::size_t(b) * 2 + 1) * t_len;
        float* tg_re = tgt.data.data() + (std::size_t(b) * 2 + 0) * t_len;
        float* tg_im = tgt.data.data() + (std::size_t(b) * 2 + 1) * t_len;
        in_re[0] = in_im[0] = 0.0f;
        for (int t = 0; t < t_len; ++t) {
            tg_re[t] = iq[t].real();
            tg_im[t] = iq[t].imag();
            if (t + 1 < t_len) {
                in_re[t + 1] = iq[t].real();
                in_im[t + 1] = iq[t].imag();
            }
        }
    }
    return {std::move(in), std::move(tgt)};
}

// per-packet mean NLL per element, inference mode
inline std::vector<double> ar_nll_batch(ArModel& model,
                                        const std::vector<const IqBlock*>& batch) {
    auto [in, tgt] = ar_shift_batch(batch);
    const int n = in.dim(0), t_len = in.dim(2);
    auto [mean_v, logvar_v] = model.forward(make_const(std::move(in)), false, nullptr);
    constexpr double kLog2Pi = 1.8378770664093454835606594728112;
    std::vector<double> out(n, 0.0);
    const std::size_t per = std::size_t(2) * t_len;
    for (int b = 0; b < n; ++b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < per; ++i) {
            const std::size_t idx = b * per + i;
            const double d = double(tgt.data[idx]) - mean_v->value.data[idx];
            const double lv = logvar_v->value.data[idx];
            acc += 0.5 * (kLog2Pi + lv + d * d * std::exp(-lv));
        }
        out[b] = acc / double(per);
    }
    return out;
}

// Next-sample likelihood detector. Without OE the score is the semantic
// model's NLL; with OE a background twin is trained on the exposure set and
// the score becomes the log-likelihood ratio NLL_semantic - NLL_background.
class ArDetector : public Detector {
public:
    ArDetector(const ArchConfig& arch, std::uint64_t init_seed, bool with_background)
        : semantic_(std::make_unique<ArModel>(arch, split_seed(init_seed, 0x617273))) {
        if (with_background)
            background_ = std::make_unique<ArModel>(arch, split_seed(init_seed, 0x617262));
    }

    ArModel& semantic() { return *semantic_; }
    ArModel* background() { return background_.get(); }

    ModelKind kind() const override { return ModelKind::Ar; }
    bool oe_trained() const override { return background_ != nullptr; }
    ArchConfig arch() const override { return semantic_->arch(); }

    std::vector<LayerSpec> layer_specs() const override {
        auto out = semantic_->layer_specs();
        if (background_)
            for (auto& s : background_->layer_specs()) out.push_back(s);
        return out;
    }
    std::vector<Var> params() const override {
        auto out = semantic_->params();
        if (background_)
            for (auto& p : background_->params()) out.push_back(p);
        return out;
    }
    std::vector<Tensor*> buffers() const override {
        auto out = semantic_->buffers();
        if (background_)
            for (auto* b : background_->buffers()) out.push_back(b);
        return out;
    }

    std::vector<float> score_batch(const std::vector<const IqBlock*>& batch) override {
        auto nll = ar_nll_batch(*semantic_, batch);
        std::vector<float> out(batch.size());
        if (background_) {
            auto bg = ar_nll_batch(*background_, batch);
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = static_cast<float>(nll[i] - bg[i]);
        } else {
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = static_cast<float>(nll[i]);
        }
        return out;
    }

private:
    std::unique_ptr<ArModel> semantic_, background_;
};

namespace detail {

inline long ar_fit(ArModel& model, const Dataset& data, const TrainConfig& cfg,
                   std::uint64_t rng_salt, const char* tag, long start_step = 0) {
    Rng rng(split_seed(cfg.seed, rng_salt));
    Optimizer opt(OptimKind::Adam, model.params(), cfg.lr);
    opt.set_step_count(start_step);
    EpochSampler sampler(data.examples.size(), rng,
                         std::size_t(cfg.max_examples_per_epoch));
    std::vector<std::size_t> batch_idx;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        sampler.reshuffle();
        while (sampler.next_batch(std::size_t(cfg.batch_size), batch_idx)) {
            std::vector<const IqBlock*> batch;
            for (auto i : batch_idx) batch.push_back(&data.examples[i].iq);
            opt.zero_grad();
            auto [in, tgt] = ar_shift_batch(batch);
            auto [mean_v, logvar_v] = model.forward(make_const(std::move(in)), true, &rng);
            Var loss = scale(gaussian_nll_sum(mean_v, logvar_v, tgt),
                             1.0f / static_cast<float>(tgt.numel()));
            backward(loss);
            opt.step();
            log_line(cfg.log, std::string(tag) + " step=" + std::to_string(opt.step_count()) +
                                  " nll=" + std::to_string(loss->value.data[0]));
        }
    }
    return opt.step_count();
}

}  // namespace detail

// With OE active the background twin is fit on DoutOE; otherwise only the
// semantic model is trained and scores are plain NLL.
inline std::unique_ptr<ArDetector> ar_train(const Dataset& din, const Dataset* dout_oe,
                                            const ArchConfig& arch, const TrainConfig& cfg) {
    require_nonempty(din, "ar_train");
    cfg.oe.validate();
    const bool oe = cfg.oe.active();
    if (oe && (!dout_oe || dout_oe->examples.empty()))
        throw std::invalid_argument("ar_train: OE enabled but no DoutOE dataset");

    auto det = std::make_unique<ArDetector>(arch, cfg.seed, oe);
    const long start = apply_resume(cfg, *det, ModelKind::Ar);
    const long steps = detail::ar_fit(det->semantic(), din, cfg, 0x61727473, "ar", start);
    if (oe) detail::ar_fit(*det->background(), *dout_oe, cfg, 0x61727462, "ar_bg", start);
    det->train_steps = static_cast<std::uint32_t>(steps);
    return det;
}

}  // namespace wifid
