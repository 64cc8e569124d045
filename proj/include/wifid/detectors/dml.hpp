#pragma once

#include "wifid/detectors/common.hpp"

namespace wifid {

// Proxy-anchor metric learner. One learnable proxy per modulation class;
// score(x) = 1 - max_p cosine(f(x), p), higher = more anomalous.
class DmlModel : public Detector {
public:
    DmlModel(const ArchConfig& arch, std::uint64_t init_seed)
        : arch_(arch), rng_(split_seed(init_seed, 0x646d6c)) {
        backbone_ = std::make_unique<ConvBackbone>(arch_, rng_);
        head_ = std::make_unique<Linear>(arch_.backbone_channels, arch_.embed_dim, rng_);
        Tensor p({kNumModSchemes, arch_.embed_dim});
        for (float& v : p.data) v = static_cast<float>(rng_.gaussian() * 0.1);
        proxies_ = make_var(std::move(p), true);
    }

    Var embed(const std::vector<const IqBlock*>& batch, bool training, Rng* rng) {
        std::vector<Tensor> feats;
        feats.reserve(batch.size());
        for (const auto* iq : batch) feats.push_back(moment_features(*iq));
        Var h = backbone_->forward(make_const(stack_batch(feats)), training, rng);
        return head_->forward(h, training, rng);
    }

    const Var& proxies() const { return proxies_; }

    // cosine similarity of each embedding row against each proxy
    static std::vector<double> cosine_to_proxies(const Tensor& emb, const Tensor& prox,
                                                 std::size_t row) {
        const int e = emb.dim(1), np = prox.dim(0);
        std::vector<double> out(np);
        double xn = 0.0;
        for (int j = 0; j < e; ++j) {
            const double v = emb.data[row * e + j];
            xn += v * v;
        }
        xn = std::sqrt(std::max(xn, 1e-24));
        for (int p = 0; p < np; ++p) {
            double dot = 0.0, pn = 0.0;
            for (int j = 0; j < e; ++j) {
                dot += double(emb.data[row * e + j]) * prox.data[p * e + j];
                pn += double(prox.data[p * e + j]) * prox.data[p * e + j];
            }
            out[p] = dot / (xn * std::sqrt(std::max(pn, 1e-24)));
        }
        return out;
    }

    ModelKind kind() const override { return ModelKind::Dml; }
    bool oe_trained() const override { return oe_trained_; }
    void set_oe_trained(bool v) { oe_trained_ = v; }
    ArchConfig arch() const override { return arch_; }

    std::vector<LayerSpec> layer_specs() const override {
        auto out = backbone_->layer_specs();
        out.push_back(head_->spec());
        return out;
    }
    std::vector<Var> params() const override {
        auto out = backbone_->params();
        for (auto& p : head_->params()) out.push_back(p);
        out.push_back(proxies_);
        return out;
    }
    std::vector<Tensor*> buffers() const override { return backbone_->buffers(); }

    std::vector<float> score_batch(const std::vector<const IqBlock*>& batch) override {
        Var emb = embed(batch, false, nullptr);
        std::vector<float> out(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            auto sims = cosine_to_proxies(emb->value, proxies_->value, i);
            double mx = sims[0];
            for (std::size_t p = 1; p < sims.size(); ++p) mx = std::max(mx, sims[p]);
            out[i] = static_cast<float>(1.0 - mx);
        }
        return out;
    }

private:
    ArchConfig arch_;
    Rng rng_;
    std::unique_ptr<ConvBackbone> backbone_;
    std::unique_ptr<Linear> head_;
    Var proxies_;
    bool oe_trained_ = false;
};

// Proxy-anchor training; with OE active, outlier examples join the batch
// with label -1 and enter every proxy's negative term at weight lambda.
inline std::unique_ptr<DmlModel> dml_train(const Dataset& din, const Dataset* dout_oe,
                                           const ArchConfig& arch, const TrainConfig& cfg) {
    require_nonempty(din, "dml_train");
    cfg.oe.validate();
    const bool oe = cfg.oe.active();
    if (oe && (!dout_oe || dout_oe->examples.empty()))
        throw std::invalid_argument("dml_train: OE enabled but no DoutOE dataset");

    auto model = std::make_unique<DmlModel>(arch, cfg.seed);
    model->set_oe_trained(cfg.oe.enabled);
    Rng rng(split_seed(cfg.seed, 0x646d6c74));
    Optimizer opt(OptimKind::Adam, model->params(), cfg.lr);
    opt.set_step_count(apply_resume(cfg, *model, ModelKind::Dml));
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
            if (oe) {
                for (int i = 0; i < oe_per_batch; ++i) {
                    batch.push_back(
                        &dout_oe->examples[oe_cursor % dout_oe->examples.size()].iq);
                    labels.push_back(-1);
                    ++oe_cursor;
                }
            }
            opt.zero_grad();
            Var emb = model->embed(batch, true, &rng);
            Var loss = proxy_anchor_loss(emb, labels, model->proxies(), cfg.alpha,
                                         cfg.margin, oe ? cfg.oe.lambda : 1.0f);
            backward(loss);
            opt.step();
            detail::log_line(cfg.log, "dml step=" + std::to_string(opt.step_count()) +
                                          " loss=" + std::to_string(loss->value.data[0]));
        }
    }
    model->train_steps = static_cast<std::uint32_t>(opt.step_count());
    return model;
}

}  // namespace wifid
