#pragma once

#include "wifid/detectors/common.hpp"

namespace wifid {

// Spectrum autoencoder. Each OFDM symbol's [2,64] spectral view is encoded
// independently; the decoder reproduces the symbol's magnitude spectrum and
// the per-packet score is the mean reconstruction error over its 12 symbols.
class VaeModel : public Detector {
public:
    static constexpr int kBins = 64;
    static constexpr int kRowsPerPacket = 12;

    VaeModel(const ArchConfig& arch, std::uint64_t init_seed)
        : arch_(arch), rng_(split_seed(init_seed, 0x766165)) {
        const int c = arch_.vae_channels, h = c / 2, z = arch_.vae_latent;
        bottleneck_len_ = kBins / 4;  // two stride-2 stages
        flat_ = c * bottleneck_len_;
        enc_c1_ = std::make_unique<Conv1d>(2, h, 5, 2, 1, PadMode::Same, rng_);
        enc_bn1_ = std::make_unique<BatchNorm1d>(h);
        enc_c2_ = std::make_unique<Conv1d>(h, c, 5, 2, 1, PadMode::Same, rng_);
        enc_bn2_ = std::make_unique<BatchNorm1d>(c);
        fc_mu_ = std::make_unique<Linear>(flat_, z, rng_);
        fc_logvar_ = std::make_unique<Linear>(flat_, z, rng_);
        dec_fc_ = std::make_unique<Linear>(z, flat_, rng_);
        dec_t1_ = std::make_unique<TransposedConv1d>(c, h, 4, 2, rng_);
        dec_bn1_ = std::make_unique<BatchNorm1d>(h);
        dec_t2_ = std::make_unique<TransposedConv1d>(h, 8, 4, 2, rng_);
        dec_bn2_ = std::make_unique<BatchNorm1d>(8);
    }

    // [N,2,64] -> (mu [N,z], logvar [N,z])
    std::pair<Var, Var> encode(const Var& x, bool training, Rng* rng) {
        Var h = Relu::apply(enc_bn1_->forward(enc_c1_->forward(x, training, rng),
                                              training, rng));
        h = Relu::apply(enc_bn2_->forward(enc_c2_->forward(h, training, rng),
                                          training, rng));
        const int n = h->value.dim(0);
        h = reshape(h, {n, flat_});
        return {fc_mu_->forward(h, training, rng), fc_logvar_->forward(h, training, rng)};
    }

    // [N,z] -> [N,64] reconstructed magnitude spectrum
    Var decode(const Var& z, bool training, Rng* rng) {
        const int n = z->value.dim(0);
        Var h = Relu::apply(dec_fc_->forward(z, training, rng));
        h = reshape(h, {n, arch_.vae_channels, bottleneck_len_});
        h = Relu::apply(dec_bn1_->forward(dec_t1_->forward(h, training, rng),
                                          training, rng));
        h = Relu::apply(dec_bn2_->forward(dec_t2_->forward(h, training, rng),
                                          training, rng));
        h = ChannelMax::apply(h);
        return reshape(h, {n, kBins});
    }

    // z = mu + eps * exp(logvar / 2)
    Var reparameterize(const Var& mu, const Var& logvar, Rng& rng) {
        Tensor eps(mu->value.shape);
        for (float& v : eps.data) v = static_cast<float>(rng.gaussian());
        return add(mu, mul(make_const(std::move(eps)), expv(logvar, 0.5f)));
    }

    // unroll packets into per-symbol rows: ([12N,2,64] inputs, [12N,64] targets)
    static std::pair<Tensor, Tensor> symbol_rows(const std::vector<const IqBlock*>& batch,
                                                 const OfdmConfig& cfg = OfdmConfig{}) {
        const int n = static_cast<int>(batch.size()) * kRowsPerPacket;
        Tensor in({n, 2, kBins}), tgt({n, kBins});
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const Tensor view = preprocess(*batch[b], cfg);
            const Tensor mag = magnitude_spectrum(view);
            std::copy(view.data.begin(), view.data.end(),
                      in.data.begin() + b * view.numel());
            std::copy(mag.data.begin(), mag.data.end(),
                      tgt.data.begin() + b * mag.numel());
        }
        return {std::move(in), std::move(tgt)};
    }

    ModelKind kind() const override { return ModelKind::Vae; }
    bool oe_trained() const override { return oe_trained_; }
    void set_oe_trained(bool v) { oe_trained_ = v; }
    ArchConfig arch() const override { return arch_; }

    std::vector<LayerSpec> layer_specs() const override {
        return {enc_c1_->spec(), enc_bn1_->spec(), enc_c2_->spec(), enc_bn2_->spec(),
                fc_mu_->spec(), fc_logvar_->spec(), dec_fc_->spec(), dec_t1_->spec(),
                dec_bn1_->spec(), dec_t2_->spec(), dec_bn2_->spec()};
    }
    std::vector<Var> params() const override {
        std::vector<Var> out;
        for (Layer* l : ordered_layers())
            for (auto& p : l->params()) out.push_back(p);
        return out;
    }
    std::vector<Tensor*> buffers() const override {
        std::vector<Tensor*> out;
        for (Layer* l : ordered_layers())
            for (auto* b : l->buffers()) out.push_back(b);
        return out;
    }

    std::vector<float> score_batch(const std::vector<const IqBlock*>& batch) override {
        auto [in, tgt] = symbol_rows(batch);
        auto [mu, logvar] = encode(make_const(std::move(in)), false, nullptr);
        (void)logvar;  // deterministic z = mu at inference
        Var recon = decode(mu, false, nullptr);
        std::vector<float> out(batch.size());
        const std::size_t per = std::size_t(kRowsPerPacket) * kBins;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < per; ++i) {
                const double d = double(recon->value.data[b * per + i]) -
                                 tgt.data[b * per + i];
                acc += d * d;
            }
            out[b] = static_cast<float>(acc / double(per));
        }
        return out;
    }

private:
    std::vector<Layer*> ordered_layers() const {
        return {enc_c1_.get(), enc_bn1_.get(), enc_c2_.get(), enc_bn2_.get(),
                fc_mu_.get(), fc_logvar_.get(), dec_fc_.get(), dec_t1_.get(),
                dec_bn1_.get(), dec_t2_.get(), dec_bn2_.get()};
    }

    ArchConfig arch_;
    Rng rng_;
    int bottleneck_len_ = 0, flat_ = 0;
    std::unique_ptr<Conv1d> enc_c1_, enc_c2_;
    std::unique_ptr<BatchNorm1d> enc_bn1_, enc_bn2_, dec_bn1_, dec_bn2_;
    std::unique_ptr<Linear> fc_mu_, fc_logvar_, dec_fc_;
    std::unique_ptr<TransposedConv1d> dec_t1_, dec_t2_;
    bool oe_trained_ = false;
};

// Loss per step: MSE(recon, magnitude) + beta * KL(q(z|x) || N(0,I)).
// With OE active, outlier reconstructions are pushed above a moving margin:
// lambda * relu(margin - MSE_oe), margin = 2x the running in-distribution MSE.
inline std::unique_ptr<VaeModel> vae_train(const Dataset& din, const Dataset* dout_oe,
                                           const ArchConfig& arch, const TrainConfig& cfg) {
    require_nonempty(din, "vae_train");
    cfg.oe.validate();
    const bool oe = cfg.oe.active();
    if (oe && (!dout_oe || dout_oe->examples.empty()))
        throw std::invalid_argument("vae_train: OE enabled but no DoutOE dataset");

    auto model = std::make_unique<VaeModel>(arch, cfg.seed);
    model->set_oe_trained(cfg.oe.enabled);
    Rng rng(split_seed(cfg.seed, 0x76616574));
    Optimizer opt(OptimKind::RAdam, model->params(), cfg.lr);
    opt.set_step_count(apply_resume(cfg, *model, ModelKind::Vae));
    detail::EpochSampler sampler(din.examples.size(), rng,
                                 std::size_t(cfg.max_examples_per_epoch));
    std::size_t oe_cursor = 0;
    const int oe_per_batch =
        oe ? std::max(1, int(cfg.batch_size * cfg.oe.oe_batch_fraction)) : 0;
    double id_mse_ema = -1.0;

    std::vector<std::size_t> batch_idx;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        sampler.reshuffle();
        while (sampler.next_batch(std::size_t(cfg.batch_size), batch_idx)) {
            std::vector<const IqBlock*> batch;
            for (auto i : batch_idx) batch.push_back(&din.examples[i].iq);
            opt.zero_grad();
            auto [in, tgt] = VaeModel::symbol_rows(batch);
            auto [mu, logvar] = model->encode(make_const(std::move(in)), true, &rng);
            Var z = model->reparameterize(mu, logvar, rng);
            Var recon = model->decode(z, true, &rng);
            Var mse = mse_to_const(recon, tgt);
            Var loss = add(mse, scale(gaussian_kl(mu, logvar), cfg.beta));
            id_mse_ema = id_mse_ema < 0.0
                             ? double(mse->value.data[0])
                             : 0.99 * id_mse_ema + 0.01 * double(mse->value.data[0]);
            float oe_part = 0.0f;
            if (oe) {
                std::vector<const IqBlock*> oe_batch;
                for (int i = 0; i < oe_per_batch; ++i) {
                    oe_batch.push_back(
                        &dout_oe->examples[oe_cursor % dout_oe->examples.size()].iq);
                    ++oe_cursor;
                }
                auto [oin, otgt] = VaeModel::symbol_rows(oe_batch);
                auto [omu, ologvar] = model->encode(make_const(std::move(oin)), true, &rng);
                Var oz = model->reparameterize(omu, ologvar, rng);
                Var omse = mse_to_const(model->decode(oz, true, &rng), otgt);
                const float hinge_margin = static_cast<float>(2.0 * id_mse_ema);
                Var gap = Relu::apply(
                    sub(make_const(Tensor::scalar(hinge_margin)), omse));
                oe_part = gap->value.data[0];
                loss = add(loss, scale(gap, cfg.oe.lambda));
            }
            backward(loss);
            opt.step();
            detail::log_line(cfg.log, "vae step=" + std::to_string(opt.step_count()) +
                                          " loss=" + std::to_string(loss->value.data[0]) +
                                          " mse=" + std::to_string(mse->value.data[0]) +
                                          " oe=" + std::to_string(oe_part));
        }
    }
    model->train_steps = static_cast<std::uint32_t>(opt.step_count());
    return model;
}

}  // namespace wifid
