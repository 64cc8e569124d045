#pragma once

#include "wifid/detectors/common.hpp"

namespace wifid {

// Modulation classifier scored by maximum softmax probability.
// score(x) = 1 - max_c softmax(f(x))_c, higher = more anomalous.
class MspModel : public Detector {
public:
    MspModel(const ArchConfig& arch, std::uint64_t init_seed)
        : arch_(arch), rng_(split_seed(init_seed, 0x6d7370)) {
        backbone_ = std::make_unique<ConvBackbone>(arch_, rng_);
        fc1_ = std::make_unique<Linear>(arch_.backbone_channels, arch_.head_hidden, rng_);
        fc2_ = std::make_unique<Linear>(arch_.head_hidden, kNumModSchemes, rng_);
    }

    Var logits(const Var& features, bool training, Rng* rng) {
        Var h = backbone_->forward(features, training, rng);
        h = Relu::apply(fc1_->forward(h, training, rng));
        return fc2_->forward(h, training, rng);
    }

    Var logits_from_batch(const std::vector<const IqBlock*>& batch, bool training,
                          Rng* rng) {
        std::vector<Tensor> feats;
        feats.reserve(batch.size());
        for (const auto* iq : batch) feats.push_back(moment_features(*iq));
        return logits(make_const(stack_batch(feats)), training, rng);
    }

    ModelKind kind() const override { return ModelKind::Msp; }
    bool oe_trained() const override { return oe_trained_; }
    void set_oe_trained(bool v) { oe_trained_ = v; }
    ArchConfig arch() const override { return arch_; }

    std::vector<LayerSpec> layer_specs() const override {
        auto out = backbone_->layer_specs();
        out.push_back(fc1_->spec());
        out.push_back(fc2_->spec());
        return out;
    }
    std::vector<Var> params() const override {
        auto out = backbone_->params();
        for (auto& p : fc1_->params()) out.push_back(p);
        for (auto& p : fc2_->params()) out.push_back(p);
        return out;
    }
    std::vector<Tensor*> buffers() const override { return backbone_->buffers(); }

    std::vector<float> score_batch(const std::vector<const IqBlock*>& batch) override {
        Var lg = logits_from_batch(batch, false, nullptr);
        std::vector<float> out(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            auto p = softmax_row(lg->value.data.data() + i * kNumModSchemes,
                                 kNumModSchemes);
            double mx = p[0];
            for (int c = 1; c < kNumModSchemes; ++c) mx = std::max(mx, p[c]);
            out[i] = static_cast<float>(1.0 - mx);
        }
        return out;
    }

    std::vector<int> classify_batch(const std::vector<const IqBlock*>& batch) {
        Var lg = logits_from_batch(batch, false, nullptr);
        std::vector<int> out(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const float* row = lg->value.data.data() + i * kNumModSchemes;
            int best = 0;
            for (int c = 1; c < kNumModSchemes; ++c)
                if (row[c] > row[best]) best = c;
            out[i] = best;
        }
        return out;
    }

private:
    ArchConfig arch_;
    Rng rng_;
    std::unique_ptr<ConvBackbone> backbone_;
    std::unique_ptr<Linear> fc1_, fc2_;
    bool oe_trained_ = false;
};

// Cross-entropy on Din, plus lambda * cross-entropy-to-uniform on DoutOE
// samples when outlier exposure is active.
inline std::unique_ptr<MspModel> msp_train(const Dataset& din, const Dataset* dout_oe,
                                           const ArchConfig& arch, const TrainConfig& cfg) {
    require_nonempty(din, "msp_train");
    cfg.oe.validate();
    const bool oe = cfg.oe.active();
    if (oe && (!dout_oe || dout_oe->examples.empty()))
        throw std::invalid_argument("msp_train: OE enabled but no DoutOE dataset");

    auto model = std::make_unique<MspModel>(arch, cfg.seed);
    model->set_oe_trained(cfg.oe.enabled);
    Rng rng(split_seed(cfg.seed, 0x6d737074));
    Optimizer opt(OptimKind::Adam, model->params(), cfg.lr);
    opt.set_step_count(apply_resume(cfg, *model, ModelKind::Msp));
    detail::EpochSampler sampler(din.examples.size(), rng,
                                 std::size_t(cfg.max_examples_per_epoch));
    std::size_t oe_cursor = 0;
    const int oe_per_batch =
        oe ? std::max(1, int(cfg.batch_size * cfg.oe.oe_batch_fraction)) : 0;

    std::vector<std::size_t> batch_idx;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        sampler.reshuffle();
        while (sampler.next_batch(std::size_t(cfg.batch_size), batch_idx)) {
            std::vector<const IqBlock*> batch;
            std::vector<int> labels;
            for (auto i : batch_idx) {
                batch.push_back(&din.examples[i].iq);
                labels.push_back(din.examples[i].label);
            }
            opt.zero_grad();
            Var loss = softmax_cross_entropy(
                model->logits_from_batch(batch, true, &rng), labels);
            float oe_part = 0.0f;
            if (oe) {
                std::vector<const IqBlock*> oe_batch;
                for (int i = 0; i < oe_per_batch; ++i) {
                    oe_batch.push_back(
                        &dout_oe->examples[oe_cursor % dout_oe->examples.size()].iq);
                    ++oe_cursor;
                }
                Var oe_loss = uniform_cross_entropy(
                    model->logits_from_batch(oe_batch, true, &rng));
                oe_part = oe_loss->value.data[0];
                loss = add(loss, scale(oe_loss, cfg.oe.lambda));
            }
            backward(loss);
            opt.step();
            detail::log_line(cfg.log, "msp step=" + std::to_string(opt.step_count()) +
                                          " loss=" + std::to_string(loss->value.data[0]) +
                                          " oe=" + std::to_string(oe_part));
        }
    }
    model->train_steps = static_cast<std::uint32_t>(opt.step_count());
    return model;
}

}  // namespace wifid
