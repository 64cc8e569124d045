#pragma once

#include <memory>
#include <ostream>

#include "wifid/checkpoint.hpp"
#include "wifid/dataset.hpp"
#include "wifid/eval.hpp"
#include "wifid/layers.hpp"
#include "wifid/losses.hpp"
#include "wifid/optim.hpp"

namespace wifid {

struct OeConfig {
    bool enabled = false;
    float lambda = 0.5f;
    float oe_batch_fraction = 0.5f;  // fraction of each step drawn from DoutOE

    // zero weight is contractually identical to disabled, so the OE code
    // path (including its rng draws) is skipped entirely
    bool active() const { return enabled && lambda > 0.0f; }

    void validate() const {
        if (lambda < 0.0f) throw std::invalid_argument("oe lambda must be >= 0");
        if (oe_batch_fraction <= 0.0f || oe_batch_fraction > 1.0f)
            throw std::invalid_argument("oe batch fraction must be in (0,1]");
    }
};

// Desk-scale architecture knobs shared by all four detectors.
struct ArchConfig {
    int backbone_channels = 64;
    int n_res_blocks = 3;
    int stem_stride = 2;
    int head_hidden = 128;
    int embed_dim = 64;      // DML
    int ar_channels = 24;
    int ar_levels = 7;       // dilations 1..2^(levels-1)
    int vae_latent = 16;
    int vae_channels = 128;
    float dropout = 0.1f;

    std::vector<std::uint32_t> pack() const {
        return {std::uint32_t(backbone_channels), std::uint32_t(n_res_blocks),
                std::uint32_t(stem_stride), std::uint32_t(head_hidden),
                std::uint32_t(embed_dim), std::uint32_t(ar_channels),
                std::uint32_t(ar_levels), std::uint32_t(vae_latent),
                std::uint32_t(vae_channels),
                std::uint32_t(dropout * 10000.0f + 0.5f)};
    }
    static ArchConfig unpack(const std::vector<std::uint32_t>& v) {
        ArchConfig a;
        if (v.size() < 10) return a;
        a.backbone_channels = int(v[0]);
        a.n_res_blocks = int(v[1]);
        a.stem_stride = int(v[2]);
        a.head_hidden = int(v[3]);
        a.embed_dim = int(v[4]);
        a.ar_channels = int(v[5]);
        a.ar_levels = int(v[6]);
        a.vae_latent = int(v[7]);
        a.vae_channels = int(v[8]);
        a.dropout = float(v[9]) / 10000.0f;
        return a;
    }
};

struct TrainConfig {
    std::uint64_t seed = 1;
    int epochs = 2;
    int batch_size = 64;
    float lr = 1e-3f;
    OeConfig oe;
    float beta = 0.5f;     // VAE KL weight
    float alpha = 32.0f;   // proxy-anchor scale
    float margin = 0.1f;   // proxy-anchor margin
    int max_examples_per_epoch = 0;  // 0 = full dataset
    std::ostream* log = nullptr;
    const Checkpoint* resume = nullptr;  // continue from these weights/step count
};

// mean over the length axis: [N,C,L] -> [N,C]
inline Var global_avg_pool(const Var& x) {
    if (x->value.ndim() != 3)
        throw std::invalid_argument("global_avg_pool: expected [N,C,L], got " +
                                    shape_str(x->value.shape));
    const int n = x->value.dim(0), c = x->value.dim(1), len = x->value.dim(2);
    Tensor out({n, c});
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            const float* row = x->value.data.data() + (std::size_t(b) * c + ch) * len;
            for (int j = 0; j < len; ++j) acc += row[j];
            out.data[std::size_t(b) * c + ch] = static_cast<float>(acc / len);
        }
    return detail::make_op(std::move(out), {x}, [n, c, len](Node& nd) {
        Node& p = *nd.parents[0];
        if (!p.requires_grad) return;
        Tensor& g = p.grad_buf();
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch) {
                const float go = nd.grad.data[std::size_t(b) * c + ch] / float(len);
                float* row = g.data.data() + (std::size_t(b) * c + ch) * len;
                for (int j = 0; j < len; ++j) row[j] += go;
            }
    });
}

// Fixed moment-feature front end for the classifier backbones. The 12x64
// spectral view is unrolled into a 768-long sequence; each position carries
// the raw I/Q pair plus modulus, 2nd/4th power moments, and radial moments,
// which expose the constellation statistics the classifiers key on.
// 9 moment channels plus a two-scale radial soft histogram: a coarse set
// that tracks gross ring occupancy and a fine set that resolves the closely
// spaced rings of dense QAM constellations
constexpr int kRadialBinsCoarse = 16;
constexpr int kRadialBinsFine = 20;
constexpr int kMomentChannels = 9 + kRadialBinsCoarse + kRadialBinsFine;

inline Tensor moment_features(const IqBlock& iq, const OfdmConfig& cfg = OfdmConfig{}) {
    const Tensor view = preprocess(iq, cfg);
    const int rows = view.dim(0), bins = view.dim(2);
    const int len = rows * bins;
    // rms-normalize the constellation so ring radii sit at absolute positions
    // regardless of which symbols happened to set the per-packet peak
    double power = 0.0;
    for (float v : view.data) power += double(v) * v;
    const float inv_rms =
        power > 0.0 ? static_cast<float>(1.0 / std::sqrt(power / len)) : 0.0f;
    Tensor out({kMomentChannels, len});
    for (int r = 0; r < rows; ++r)
        for (int i = 0; i < bins; ++i) {
            const float re = view.data[(std::size_t(r) * 2 + 0) * bins + i] * inv_rms;
            const float im = view.data[(std::size_t(r) * 2 + 1) * bins + i] * inv_rms;
            const std::complex<double> s(re, im);
            const std::complex<double> s2 = s * s;
            const std::complex<double> s4 = s2 * s2;
            const int pos = r * bins + i;
            out.data[0 * len + pos] = re;
            out.data[1 * len + pos] = im;
            out.data[2 * len + pos] = static_cast<float>(std::abs(s));
            out.data[3 * len + pos] = static_cast<float>(s2.real());
            out.data[4 * len + pos] = static_cast<float>(s2.imag());
            out.data[5 * len + pos] = static_cast<float>(s4.real());
            out.data[6 * len + pos] = static_cast<float>(s4.imag());
            // rotation-invariant radial moments; their averages are the
            // classic discriminants between constellation orders
            const double r2 = std::norm(s);
            out.data[7 * len + pos] = static_cast<float>(r2);
            out.data[8 * len + pos] = static_cast<float>(r2 * r2);
            // soft radius histogram: averaged over the packet these channels
            // give the ring-occupancy profile that separates QAM orders
            const double radius = std::sqrt(r2);
            for (int b = 0; b < kRadialBinsCoarse; ++b) {
                const double z = (radius - 0.1 * (b + 1)) / 0.12;
                out.data[std::size_t(9 + b) * len + pos] =
                    static_cast<float>(std::exp(-0.5 * z * z));
            }
            for (int b = 0; b < kRadialBinsFine; ++b) {
                const double z = (radius - 0.08 * (b + 1)) / 0.04;
                out.data[std::size_t(9 + kRadialBinsCoarse + b) * len + pos] =
                    static_cast<float>(std::exp(-0.5 * z * z));
            }
        }
    return out;
}

// stack per-example tensors of identical shape into one [N, ...] batch
inline Tensor stack_batch(const std::vector<Tensor>& items) {
    if (items.empty()) throw std::invalid_argument("stack_batch: empty batch");
    Shape s;
    s.push_back(static_cast<int>(items.size()));
    for (int e : items[0].shape) s.push_back(e);
    Tensor out(std::move(s));
    const std::size_t per = items[0].numel();
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].shape != items[0].shape)
            throw std::invalid_argument("stack_batch: ragged shapes");
        std::copy(items[i].data.begin(), items[i].data.end(),
                  out.data.begin() + i * per);
    }
    return out;
}

// Pre-activation residual block: x + conv(relu(bn(conv(relu(bn(x)))))),
// dropout right before the second convolution.
class PreActResBlock : public Layer {
public:
    PreActResBlock(int channels, int kernel, int dilation, PadMode pad, float dropout,
                   Rng& rng)
        : Layer(LayerSpec{LayerKind::Conv1d, channels, channels, kernel, 1, dilation, pad,
                          dropout}),
          bn1_(channels), bn2_(channels), drop_(dropout) {
        c1_ = std::make_unique<Conv1d>(channels, channels, kernel, 1, dilation, pad, rng);
        c2_ = std::make_unique<Conv1d>(channels, channels, kernel, 1, dilation, pad, rng);
    }

    Var forward(const Var& x, bool training, Rng* rng) override {
        Var h = Relu::apply(bn1_.forward(x, training, rng));
        h = c1_->forward(h, training, rng);
        h = Relu::apply(bn2_.forward(h, training, rng));
        h = drop_.forward(h, training, rng);
        h = c2_->forward(h, training, rng);
        return add(x, h);
    }

    std::vector<Var> params() override {
        std::vector<Var> out;
        for (auto& p : bn1_.params()) out.push_back(p);
        for (auto& p : c1_->params()) out.push_back(p);
        for (auto& p : bn2_.params()) out.push_back(p);
        for (auto& p : c2_->params()) out.push_back(p);
        return out;
    }

    std::vector<Tensor*> buffers() override {
        std::vector<Tensor*> out;
        for (auto* b : bn1_.buffers()) out.push_back(b);
        for (auto* b : bn2_.buffers()) out.push_back(b);
        return out;
    }

private:
    BatchNorm1d bn1_, bn2_;
    Dropout drop_;
    std::unique_ptr<Conv1d> c1_, c2_;
};

// Shared residual conv backbone for the MSP and DML classifiers:
// strided stem, pre-activation residual stacks, batchnorm + relu, mean
// pooling down to a feature vector.
class ConvBackbone {
public:
    ConvBackbone(const ArchConfig& a, Rng& rng) : final_bn_(a.backbone_channels) {
        stem_ = std::make_unique<Conv1d>(kMomentChannels, a.backbone_channels, 5,
                                         a.stem_stride, 1, PadMode::Same, rng);
        for (int i = 0; i < a.n_res_blocks; ++i)
            blocks_.push_back(std::make_unique<PreActResBlock>(
                a.backbone_channels, 3, 1, PadMode::Same, a.dropout, rng));
        skip_ = std::make_unique<Linear>(kMomentChannels, a.backbone_channels, rng);
    }

    Var forward(const Var& x, bool training, Rng* rng) {
        Var h = stem_->forward(x, training, rng);
        for (auto& b : blocks_) h = b->forward(h, training, rng);
        h = Relu::apply(final_bn_.forward(h, training, rng));
        // linear skip over the pooled input statistics: keeps the head's view
        // of the packet's channel means linear, so confidence extrapolates
        // sanely on inputs far from the training manifold
        return add(global_avg_pool(h),
                   skip_->forward(global_avg_pool(x), training, rng));
    }

    std::vector<Var> params() const {
        std::vector<Var> out = stem_->params();
        for (auto& b : blocks_)
            for (auto& p : b->params()) out.push_back(p);
        for (auto& p : final_bn_.params()) out.push_back(p);
        for (auto& p : skip_->params()) out.push_back(p);
        return out;
    }

    std::vector<Tensor*> buffers() const {
        std::vector<Tensor*> out;
        for (auto& b : blocks_)
            for (auto* t : b->buffers()) out.push_back(t);
        for (auto* t : final_bn_.buffers()) out.push_back(t);
        return out;
    }

    std::vector<LayerSpec> layer_specs() const {
        std::vector<LayerSpec> out{stem_->spec()};
        for (auto& b : blocks_) out.push_back(b->spec());
        out.push_back(final_bn_.spec());
        out.push_back(skip_->spec());
        return out;
    }

private:
    std::unique_ptr<Conv1d> stem_;
    std::vector<std::unique_ptr<PreActResBlock>> blocks_;
    mutable BatchNorm1d final_bn_;
    std::unique_ptr<Linear> skip_;
};

class Detector {
public:
    virtual ~Detector() = default;

    virtual ModelKind kind() const = 0;
    virtual bool oe_trained() const = 0;
    virtual std::vector<LayerSpec> layer_specs() const = 0;
    virtual std::vector<Var> params() const = 0;
    virtual std::vector<Tensor*> buffers() const = 0;
    virtual ArchConfig arch() const = 0;

    // one scalar per example, higher = more anomalous; inference mode
    virtual std::vector<float> score_batch(const std::vector<const IqBlock*>& batch) = 0;

    float score(const IqBlock& iq) {
        std::vector<const IqBlock*> b{&iq};
        return score_batch(b)[0];
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& p : params()) n += p->value.numel();
        return n;
    }

    std::uint32_t train_steps = 0;  // optimizer steps taken, monotone across resumes
};

// shared resume hook: restore weights and report the step offset
inline long apply_resume(const TrainConfig& cfg, const Detector& det, ModelKind want) {
    if (!cfg.resume) return 0;
    if (cfg.resume->meta.kind != want)
        throw std::invalid_argument("resume: checkpoint model kind mismatch");
    load_into(*cfg.resume, det.params(), det.buffers());
    return long(cfg.resume->meta.train_steps);
}

// Score every example of a dataset into a (mod, sir_bin)-keyed table.
inline ScoreTable score_dataset(Detector& det, const Dataset& ds, int batch_size = 64) {
    ScoreTable t;
    t.init(ds.spec.n_mod, ds.spec.n_sir_bins);
    t.sir_grid_db = ds.spec.sir_grid_db;
    t.model = model_kind_name(det.kind());
    t.oe = det.oe_trained();
    t.dataset = ds.kind.name();
    t.seed = ds.spec.base_seed;
    std::vector<const IqBlock*> batch;
    std::vector<const Example*> meta;
    auto flush = [&]() {
        if (batch.empty()) return;
        auto scores = det.score_batch(batch);
        for (std::size_t i = 0; i < scores.size(); ++i)
            t.cell(meta[i]->label, meta[i]->sir_bin).push_back(scores[i]);
        batch.clear();
        meta.clear();
    };
    for (const Example& ex : ds.examples) {
        batch.push_back(&ex.iq);
        meta.push_back(&ex);
        if (static_cast<int>(batch.size()) == batch_size) flush();
    }
    flush();
    return t;
}

namespace detail {

// shuffled index stream over a dataset, one permutation per epoch
class EpochSampler {
public:
    EpochSampler(std::size_t n, Rng& rng, std::size_t cap = 0)
        : n_(n), cap_(cap && cap < n ? cap : n), rng_(rng) {
        idx_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) idx_[i] = i;
    }

    void reshuffle() {
        for (std::size_t i = n_ - 1; i > 0; --i) {
            const std::size_t j = std::size_t(rng_.uniform_int(0, std::int64_t(i)));
            std::swap(idx_[i], idx_[j]);
        }
        pos_ = 0;
    }

    bool next_batch(std::size_t batch, std::vector<std::size_t>& out) {
        out.clear();
        while (out.size() < batch && pos_ < cap_) out.push_back(idx_[pos_++]);
        return !out.empty();
    }

private:
    std::size_t n_, cap_, pos_ = 0;
    std::vector<std::size_t> idx_;
    Rng& rng_;
};

inline void log_line(std::ostream* log, const std::string& line) {
    if (log) (*log) << line << "\n";
}

}  // namespace detail

inline void require_nonempty(const Dataset& ds, const char* who) {
    if (ds.examples.empty())
        throw std::invalid_argument(std::string(who) + ": empty training dataset");
}

}  // namespace wifid
