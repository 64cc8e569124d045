#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "wifid/autograd.hpp"
#include "wifid/rng.hpp"

namespace wifid {

enum class LayerKind {
    Conv1d,
    TransposedConv1d,
    Linear,
    BatchNorm1d,
    Relu,
    Dropout,
    Flatten,
    Reshape,
    ChannelMax,
};

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv1d: return "conv1d";
        case LayerKind::TransposedConv1d: return "transposed_conv1d";
        case LayerKind::Linear: return "linear";
        case LayerKind::BatchNorm1d: return "batchnorm1d";
        case LayerKind::Relu: return "relu";
        case LayerKind::Dropout: return "dropout";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::Reshape: return "reshape";
        case LayerKind::ChannelMax: return "channel_max";
    }
    return "?";
}

enum class PadMode { Same, Valid, Causal };

struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 1;
    int stride = 1;
    int dilation = 1;
    PadMode pad = PadMode::Same;
    float dropout_rate = 0.0f;
    int in_features = 0;
    int out_features = 0;
    Shape target_shape;  // reshape only (without batch dim)

    void validate() const {
        if (kernel < 1 || stride < 1 || dilation < 1)
            throw std::invalid_argument("layer hyperparameters must be >= 1");
        if (dropout_rate < 0.0f || dropout_rate >= 1.0f)
            throw std::invalid_argument("dropout rate must be in [0,1)");
        if (pad == PadMode::Causal && kind != LayerKind::Conv1d)
            throw std::invalid_argument("causal padding is only valid for conv1d");
    }
};

struct ConvGeom {
    int pad_left = 0, pad_right = 0, out_len = 0;
};

inline ConvGeom conv_geometry(const LayerSpec& s, int in_len) {
    ConvGeom g;
    const int eff_k = (s.kernel - 1) * s.dilation + 1;
    switch (s.pad) {
        case PadMode::Causal:
            g.pad_left = (s.kernel - 1) * s.dilation;
            g.pad_right = 0;
            g.out_len = (in_len + g.pad_left - eff_k) / s.stride + 1;
            break;
        case PadMode::Same: {
            g.out_len = (in_len + s.stride - 1) / s.stride;
            int total = std::max(0, (g.out_len - 1) * s.stride + eff_k - in_len);
            g.pad_left = total / 2;
            g.pad_right = total - g.pad_left;
            break;
        }
        case PadMode::Valid:
            g.out_len = (in_len - eff_k) / s.stride + 1;
            break;
    }
    if (g.out_len < 1)
        throw std::invalid_argument("conv1d: input length " + std::to_string(in_len) +
                                    " too short for kernel geometry");
    return g;
}

inline int tconv_out_len(const LayerSpec& s, int in_len) {
    // symmetric padding chosen so stride-s upsampling gives exactly in_len*s
    // when kernel = 2*stride; general formula otherwise
    const int pad = (s.kernel - s.stride) / 2;
    return (in_len - 1) * s.stride + s.kernel - 2 * pad;
}

class Layer {
public:
    explicit Layer(LayerSpec spec) : spec_(std::move(spec)) { spec_.validate(); }
    virtual ~Layer() = default;

    virtual Var forward(const Var& x, bool training, Rng* rng) = 0;
    virtual std::vector<Var> params() { return {}; }
    // non-learned state carried through checkpoints (batchnorm running stats)
    virtual std::vector<Tensor*> buffers() { return {}; }

    const LayerSpec& spec() const { return spec_; }

protected:
    LayerSpec spec_;
};

namespace detail {

inline Tensor init_uniform_fan_in(Shape shape, int fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (float& v : t.data) v = static_cast<float>(rng.uniform(-bound, bound));
    return t;
}

// col[(c*k + t), j] = x[c, j*stride + t*dilation - pad_left], zero outside
inline void im2col(const float* x, int c_in, int in_len, const LayerSpec& s,
                   const ConvGeom& g, float* col) {
    const int k = s.kernel;
    for (int c = 0; c < c_in; ++c) {
        for (int t = 0; t < k; ++t) {
            float* row = col + (static_cast<std::size_t>(c) * k + t) * g.out_len;
            const int off = t * s.dilation - g.pad_left;
            for (int j = 0; j < g.out_len; ++j) {
                const int src = j * s.stride + off;
                row[j] = (src >= 0 && src < in_len) ? x[c * in_len + src] : 0.0f;
            }
        }
    }
}

inline void col2im_accum(const float* col, int c_in, int in_len, const LayerSpec& s,
                         const ConvGeom& g, float* x_grad) {
    const int k = s.kernel;
    for (int c = 0; c < c_in; ++c) {
        for (int t = 0; t < k; ++t) {
            const float* row = col + (static_cast<std::size_t>(c) * k + t) * g.out_len;
            const int off = t * s.dilation - g.pad_left;
            for (int j = 0; j < g.out_len; ++j) {
                const int src = j * s.stride + off;
                if (src >= 0 && src < in_len) x_grad[c * in_len + src] += row[j];
            }
        }
    }
}

inline void check_ncl(const Tensor& t, int want_c, const char* who) {
    if (t.ndim() != 3)
        throw std::invalid_argument(std::string(who) + ": expected [N,C,L] input, got " +
                                    shape_str(t.shape));
    if (t.dim(1) != want_c)
        throw std::invalid_argument(std::string(who) + ": expected " + std::to_string(want_c) +
                                    " input channels, got " + shape_str(t.shape));
}

}  // namespace detail

// weight [C_out, C_in*k], bias [C_out]; input [N, C_in, L]
class Conv1d : public Layer {
public:
    Conv1d(int in_ch, int out_ch, int kernel, int stride, int dilation, PadMode pad, Rng& rng)
        : Layer(make_spec(in_ch, out_ch, kernel, stride, dilation, pad)) {
        const int fan_in = in_ch * kernel;
        weight_ = make_var(detail::init_uniform_fan_in({out_ch, in_ch * kernel}, fan_in, rng), true);
        bias_ = make_var(detail::init_uniform_fan_in({out_ch}, fan_in, rng), true);
    }

    Var forward(const Var& x, bool, Rng*) override {
        detail::check_ncl(x->value, spec_.in_channels, "conv1d");
        const int n = x->value.dim(0), c_in = spec_.in_channels, in_len = x->value.dim(2);
        const int c_out = spec_.out_channels, k = spec_.kernel;
        const ConvGeom g = conv_geometry(spec_, in_len);
        Tensor out({n, c_out, g.out_len});
        std::vector<float> col(static_cast<std::size_t>(c_in) * k * g.out_len);
        const float* xd = x->value.data.data();
        for (int b = 0; b < n; ++b) {
            detail::im2col(xd + static_cast<std::size_t>(b) * c_in * in_len, c_in, in_len,
                           spec_, g, col.data());
            float* od = out.data.data() + static_cast<std::size_t>(b) * c_out * g.out_len;
            gemm(weight_->value.data.data(), col.data(), od, c_out, c_in * k, g.out_len);
            for (int c = 0; c < c_out; ++c) {
                const float bv = bias_->value.data[c];
                for (int j = 0; j < g.out_len; ++j) od[c * g.out_len + j] += bv;
            }
        }
        LayerSpec s = spec_;
        Var w = weight_, bvar = bias_;
        return wifid::detail::make_op(std::move(out), {x, w, bvar},
                                      [s, g, n, c_in, in_len, c_out, k](Node& nd) {
            Node& px = *nd.parents[0];
            Node& pw = *nd.parents[1];
            Node& pb = *nd.parents[2];
            std::vector<float> col(static_cast<std::size_t>(c_in) * k * g.out_len);
            std::vector<float> dcol(col.size());
            if (pb.requires_grad) {
                Tensor& gb = pb.grad_buf();
                for (int b = 0; b < n; ++b) {
                    const float* gd = nd.grad.data.data() +
                                      static_cast<std::size_t>(b) * c_out * g.out_len;
                    for (int c = 0; c < c_out; ++c) {
                        double acc = 0.0;
                        for (int j = 0; j < g.out_len; ++j) acc += gd[c * g.out_len + j];
                        gb.data[c] += static_cast<float>(acc);
                    }
                }
            }
            for (int b = 0; b < n; ++b) {
                const float* gd = nd.grad.data.data() +
                                  static_cast<std::size_t>(b) * c_out * g.out_len;
                if (pw.requires_grad) {
                    detail::im2col(px.value.data.data() +
                                       static_cast<std::size_t>(b) * c_in * in_len,
                                   c_in, in_len, s, g, col.data());
                    gemm(gd, col.data(), pw.grad_buf().data.data(), c_out, g.out_len,
                         c_in * k, false, true, true);
                }
                if (px.requires_grad) {
                    gemm(pw.value.data.data(), gd, dcol.data(), c_in * k, c_out, g.out_len,
                         true, false, false);
                    detail::col2im_accum(dcol.data(), c_in, in_len, s, g,
                                         px.grad_buf().data.data() +
                                             static_cast<std::size_t>(b) * c_in * in_len);
                }
            }
        });
    }

    std::vector<Var> params() override { return {weight_, bias_}; }

private:
    static LayerSpec make_spec(int in_ch, int out_ch, int k, int st, int dil, PadMode pad) {
        LayerSpec s;
        s.kind = LayerKind::Conv1d;
        s.in_channels = in_ch;
        s.out_channels = out_ch;
        s.kernel = k;
        s.stride = st;
        s.dilation = dil;
        s.pad = pad;
        return s;
    }
    Var weight_, bias_;
};

// weight [C_in, C_out*k], bias [C_out]; input [N, C_in, L] ->
// [N, C_out, (L-1)*stride + k - 2*pad] with pad = (k - stride) / 2
class TransposedConv1d : public Layer {
public:
    TransposedConv1d(int in_ch, int out_ch, int kernel, int stride, Rng& rng)
        : Layer(make_spec(in_ch, out_ch, kernel, stride)) {
        const int fan_in = in_ch * kernel;
        weight_ = make_var(detail::init_uniform_fan_in({in_ch, out_ch * kernel}, fan_in, rng), true);
        bias_ = make_var(detail::init_uniform_fan_in({out_ch}, fan_in, rng), true);
    }

    Var forward(const Var& x, bool, Rng*) override {
        detail::check_ncl(x->value, spec_.in_channels, "transposed_conv1d");
        const int n = x->value.dim(0), c_in = spec_.in_channels, in_len = x->value.dim(2);
        const int c_out = spec_.out_channels, k = spec_.kernel, st = spec_.stride;
        const int pad = (k - st) / 2;
        const int out_len = (in_len - 1) * st + k - 2 * pad;
        Tensor out({n, c_out, out_len});
        std::vector<float> col(static_cast<std::size_t>(c_out) * k * in_len);
        for (int b = 0; b < n; ++b) {
            const float* xd = x->value.data.data() + static_cast<std::size_t>(b) * c_in * in_len;
            // col[(c*k+t), j] = sum_ci W[ci, c*k+t] * x[ci, j]
            gemm(weight_->value.data.data(), xd, col.data(), c_out * k, c_in, in_len,
                 true, false, false);
            float* od = out.data.data() + static_cast<std::size_t>(b) * c_out * out_len;
            for (int c = 0; c < c_out; ++c) {
                const float bv = bias_->value.data[c];
                for (int j = 0; j < out_len; ++j) od[c * out_len + j] = bv;
                for (int t = 0; t < k; ++t) {
                    const float* row = col.data() + (static_cast<std::size_t>(c) * k + t) * in_len;
                    for (int j = 0; j < in_len; ++j) {
                        const int dst = j * st + t - pad;
                        if (dst >= 0 && dst < out_len) od[c * out_len + dst] += row[j];
                    }
                }
            }
        }
        Var w = weight_, bvar = bias_;
        const int kk = k, stt = st, padd = pad;
        return wifid::detail::make_op(std::move(out), {x, w, bvar},
                                      [n, c_in, in_len, c_out, kk, stt, padd, out_len](Node& nd) {
            Node& px = *nd.parents[0];
            Node& pw = *nd.parents[1];
            Node& pb = *nd.parents[2];
            std::vector<float> dcol(static_cast<std::size_t>(c_out) * kk * in_len);
            for (int b = 0; b < n; ++b) {
                const float* gd = nd.grad.data.data() +
                                  static_cast<std::size_t>(b) * c_out * out_len;
                if (pb.requires_grad) {
                    Tensor& gb = pb.grad_buf();
                    for (int c = 0; c < c_out; ++c) {
                        double acc = 0.0;
                        for (int j = 0; j < out_len; ++j) acc += gd[c * out_len + j];
                        gb.data[c] += static_cast<float>(acc);
                    }
                }
                // gather dcol from output grad
                for (int c = 0; c < c_out; ++c) {
                    for (int t = 0; t < kk; ++t) {
                        float* row = dcol.data() + (static_cast<std::size_t>(c) * kk + t) * in_len;
                        for (int j = 0; j < in_len; ++j) {
                            const int dst = j * stt + t - padd;
                            row[j] = (dst >= 0 && dst < out_len) ? gd[c * out_len + dst] : 0.0f;
                        }
                    }
                }
                const float* xd = px.value.data.data() +
                                  static_cast<std::size_t>(b) * c_in * in_len;
                if (pw.requires_grad)  // dW[ci, c*k+t] += x[ci,:] . dcol[c*k+t,:]
                    gemm(xd, dcol.data(), pw.grad_buf().data.data(), c_in, in_len,
                         c_out * kk, false, true, true);
                if (px.requires_grad)  // dx[ci,:] += W[ci,:] * dcol
                    gemm(pw.value.data.data(), dcol.data(),
                         px.grad_buf().data.data() + static_cast<std::size_t>(b) * c_in * in_len,
                         c_in, c_out * kk, in_len, false, false, true);
            }
        });
    }

    std::vector<Var> params() override { return {weight_, bias_}; }

private:
    static LayerSpec make_spec(int in_ch, int out_ch, int k, int st) {
        LayerSpec s;
        s.kind = LayerKind::TransposedConv1d;
        s.in_channels = in_ch;
        s.out_channels = out_ch;
        s.kernel = k;
        s.stride = st;
        return s;
    }
    Var weight_, bias_;
};

// weight [in, out], bias [out]; input [N, in]
class Linear : public Layer {
public:
    Linear(int in_features, int out_features, Rng& rng)
        : Layer(make_spec(in_features, out_features)) {
        weight_ = make_var(detail::init_uniform_fan_in({in_features, out_features},
                                                       in_features, rng), true);
        bias_ = make_var(detail::init_uniform_fan_in({out_features}, in_features, rng), true);
    }

    Var forward(const Var& x, bool, Rng*) override {
        if (x->value.ndim() != 2 || x->value.dim(1) != spec_.in_features)
            throw std::invalid_argument("linear: expected [N," +
                                        std::to_string(spec_.in_features) + "], got " +
                                        shape_str(x->value.shape));
        const int n = x->value.dim(0), fi = spec_.in_features, fo = spec_.out_features;
        Tensor out({n, fo});
        gemm(x->value.data.data(), weight_->value.data.data(), out.data.data(), n, fi, fo);
        for (int b = 0; b < n; ++b)
            for (int j = 0; j < fo; ++j) out.data[b * fo + j] += bias_->value.data[j];
        Var w = weight_, bvar = bias_;
        return wifid::detail::make_op(std::move(out), {x, w, bvar}, [n, fi, fo](Node& nd) {
            Node& px = *nd.parents[0];
            Node& pw = *nd.parents[1];
            Node& pb = *nd.parents[2];
            if (pb.requires_grad) {
                Tensor& gb = pb.grad_buf();
                for (int b = 0; b < n; ++b)
                    for (int j = 0; j < fo; ++j) gb.data[j] += nd.grad.data[b * fo + j];
            }
            if (pw.requires_grad)
                gemm(px.value.data.data(), nd.grad.data.data(), pw.grad_buf().data.data(),
                     fi, n, fo, true, false, true);
            if (px.requires_grad)
                gemm(nd.grad.data.data(), pw.value.data.data(), px.grad_buf().data.data(),
                     n, fo, fi, false, true, true);
        });
    }

    std::vector<Var> params() override { return {weight_, bias_}; }

private:
    static LayerSpec make_spec(int fi, int fo) {
        LayerSpec s;
        s.kind = LayerKind::Linear;
        s.in_features = fi;
        s.out_features = fo;
        return s;
    }
    Var weight_, bias_;
};

// Per-channel statistics over batch and spatial axes. Accepts [N,C,L] or [N,C].
class BatchNorm1d : public Layer {
public:
    explicit BatchNorm1d(int channels)
        : Layer(make_spec(channels)),
          running_mean_({channels}), running_var_({channels}) {
        Tensor g({channels});
        g.fill(1.0f);
        gamma_ = make_var(std::move(g), true);
        beta_ = make_var(Tensor({channels}), true);
        running_var_.fill(1.0f);
    }

    Var forward(const Var& x, bool training, Rng*) override {
        const bool flat = x->value.ndim() == 2;
        if (!flat) detail::check_ncl(x->value, spec_.in_channels, "batchnorm1d");
        else if (x->value.dim(1) != spec_.in_channels)
            throw std::invalid_argument("batchnorm1d: channel mismatch " +
                                        shape_str(x->value.shape));
        const int n = x->value.dim(0), c = spec_.in_channels;
        const int len = flat ? 1 : x->value.dim(2);
        const std::size_t per_ch = static_cast<std::size_t>(n) * len;

        std::vector<float> mean(c), inv_std(c);
        if (training) {
            for (int ch = 0; ch < c; ++ch) {
                double m = 0.0, v = 0.0;
                for (int b = 0; b < n; ++b) {
                    const float* xd = x->value.data.data() +
                                      (static_cast<std::size_t>(b) * c + ch) * len;
                    for (int j = 0; j < len; ++j) m += xd[j];
                }
                m /= double(per_ch);
                for (int b = 0; b < n; ++b) {
                    const float* xd = x->value.data.data() +
                                      (static_cast<std::size_t>(b) * c + ch) * len;
                    for (int j = 0; j < len; ++j) {
                        const double d = xd[j] - m;
                        v += d * d;
                    }
                }
                v /= double(per_ch);
                mean[ch] = static_cast<float>(m);
                inv_std[ch] = static_cast<float>(1.0 / std::sqrt(v + kEps));
                running_mean_.data[ch] = 0.9f * running_mean_.data[ch] +
                                         0.1f * static_cast<float>(m);
                running_var_.data[ch] = 0.9f * running_var_.data[ch] +
                                        0.1f * static_cast<float>(v);
            }
        } else {
            for (int ch = 0; ch < c; ++ch) {
                mean[ch] = running_mean_.data[ch];
                inv_std[ch] = static_cast<float>(
                    1.0 / std::sqrt(double(running_var_.data[ch]) + kEps));
            }
        }

        Tensor out(x->value.shape);
        std::vector<float> xhat(x->value.numel());
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch) {
                const std::size_t base = (static_cast<std::size_t>(b) * c + ch) * len;
                const float g = gamma_->value.data[ch], bt = beta_->value.data[ch];
                for (int j = 0; j < len; ++j) {
                    const float xh = (x->value.data[base + j] - mean[ch]) * inv_std[ch];
                    xhat[base + j] = xh;
                    out.data[base + j] = g * xh + bt;
                }
            }

        Var g = gamma_, bvar = beta_;
        const bool use_batch_stats = training;
        return wifid::detail::make_op(
            std::move(out), {x, g, bvar},
            [n, c, len, per_ch, inv_std, xhat = std::move(xhat), use_batch_stats](Node& nd) {
                Node& px = *nd.parents[0];
                Node& pg = *nd.parents[1];
                Node& pb = *nd.parents[2];
                for (int ch = 0; ch < c; ++ch) {
                    double sum_dy = 0.0, sum_dy_xhat = 0.0;
                    for (int b = 0; b < n; ++b) {
                        const std::size_t base = (static_cast<std::size_t>(b) * c + ch) * len;
                        for (int j = 0; j < len; ++j) {
                            sum_dy += nd.grad.data[base + j];
                            sum_dy_xhat += double(nd.grad.data[base + j]) * xhat[base + j];
                        }
                    }
                    if (pg.requires_grad)
                        pg.grad_buf().data[ch] += static_cast<float>(sum_dy_xhat);
                    if (pb.requires_grad)
                        pb.grad_buf().data[ch] += static_cast<float>(sum_dy);
                    if (px.requires_grad) {
                        Tensor& gx = px.grad_buf();
                        const float gscale = pg.value.data[ch] * inv_std[ch];
                        const float m_dy = static_cast<float>(sum_dy / double(per_ch));
                        const float m_dy_xhat =
                            static_cast<float>(sum_dy_xhat / double(per_ch));
                        for (int b = 0; b < n; ++b) {
                            const std::size_t base =
                                (static_cast<std::size_t>(b) * c + ch) * len;
                            for (int j = 0; j < len; ++j) {
                                float dy = nd.grad.data[base + j];
                                if (use_batch_stats)
                                    dy = dy - m_dy - xhat[base + j] * m_dy_xhat;
                                gx.data[base + j] += gscale * dy;
                            }
                        }
                    }
                }
            });
    }

    std::vector<Var> params() override { return {gamma_, beta_}; }
    std::vector<Tensor*> buffers() override { return {&running_mean_, &running_var_}; }

    static constexpr double kEps = 1e-5;

private:
    static LayerSpec make_spec(int channels) {
        LayerSpec s;
        s.kind = LayerKind::BatchNorm1d;
        s.in_channels = channels;
        s.out_channels = channels;
        return s;
    }
    Var gamma_, beta_;
    Tensor running_mean_, running_var_;
};

class Relu : public Layer {
public:
    Relu() : Layer(LayerSpec{LayerKind::Relu}) {}
    Var forward(const Var& x, bool, Rng*) override { return apply(x); }

    static Var apply(const Var& x) {
        Tensor out = x->value;
        for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
        return wifid::detail::make_op(std::move(out), {x}, [](Node& nd) {
            Node& p = *nd.parents[0];
            if (!p.requires_grad) return;
            Tensor& g = p.grad_buf();
            for (std::size_t i = 0; i < g.numel(); ++i)
                if (p.value.data[i] > 0.0f) g.data[i] += nd.grad.data[i];
        });
    }
};

class Dropout : public Layer {
public:
    explicit Dropout(float rate) : Layer(make_spec(rate)) {}

    Var forward(const Var& x, bool training, Rng* rng) override {
        if (!training || spec_.dropout_rate == 0.0f) return x;
        if (!rng) throw std::invalid_argument("dropout: training forward needs an rng");
        const float keep = 1.0f - spec_.dropout_rate;
        auto mask = std::make_shared<std::vector<float>>(x->value.numel());
        Tensor out = x->value;
        for (std::size_t i = 0; i < out.numel(); ++i) {
            const float m = (rng->uniform() < keep) ? 1.0f / keep : 0.0f;
            (*mask)[i] = m;
            out.data[i] *= m;
        }
        return wifid::detail::make_op(std::move(out), {x}, [mask](Node& nd) {
            Node& p = *nd.parents[0];
            if (!p.requires_grad) return;
            Tensor& g = p.grad_buf();
            for (std::size_t i = 0; i < g.numel(); ++i)
                g.data[i] += nd.grad.data[i] * (*mask)[i];
        });
    }

private:
    static LayerSpec make_spec(float rate) {
        LayerSpec s;
        s.kind = LayerKind::Dropout;
        s.dropout_rate = rate;
        return s;
    }
};

class Flatten : public Layer {
public:
    Flatten() : Layer(LayerSpec{LayerKind::Flatten}) {}
    Var forward(const Var& x, bool, Rng*) override {
        const int n = x->value.dim(0);
        return reshape(x, {n, static_cast<int>(x->value.numel()) / n});
    }
};

class ReshapeLayer : public Layer {
public:
    explicit ReshapeLayer(Shape per_example) : Layer(make_spec(std::move(per_example))) {}
    Var forward(const Var& x, bool, Rng*) override {
        Shape s;
        s.push_back(x->value.dim(0));
        for (int e : spec_.target_shape) s.push_back(e);
        return reshape(x, std::move(s));
    }

private:
    static LayerSpec make_spec(Shape t) {
        LayerSpec s;
        s.kind = LayerKind::Reshape;
        s.target_shape = std::move(t);
        return s;
    }
};

// [N, C, L] -> [N, 1, L], elementwise maximum across channels
class ChannelMax : public Layer {
public:
    ChannelMax() : Layer(LayerSpec{LayerKind::ChannelMax}) {}
    Var forward(const Var& x, bool, Rng*) override { return apply(x); }

    static Var apply(const Var& x) {
        if (x->value.ndim() != 3)
            throw std::invalid_argument("channel_max: expected [N,C,L], got " +
                                        shape_str(x->value.shape));
        const int n = x->value.dim(0), c = x->value.dim(1), len = x->value.dim(2);
        Tensor out({n, 1, len});
        auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(n) * len);
        for (int b = 0; b < n; ++b)
            for (int j = 0; j < len; ++j) {
                int best = 0;
                float bv = x->value.data[(static_cast<std::size_t>(b) * c) * len + j];
                for (int ch = 1; ch < c; ++ch) {
                    const float v =
                        x->value.data[(static_cast<std::size_t>(b) * c + ch) * len + j];
                    if (v > bv) {
                        bv = v;
                        best = ch;
                    }
                }
                out.data[static_cast<std::size_t>(b) * len + j] = bv;
                (*argmax)[static_cast<std::size_t>(b) * len + j] = best;
            }
        return wifid::detail::make_op(std::move(out), {x}, [argmax, c, len](Node& nd) {
            Node& p = *nd.parents[0];
            if (!p.requires_grad) return;
            const int n = p.value.dim(0);
            Tensor& g = p.grad_buf();
            for (int b = 0; b < n; ++b)
                for (int j = 0; j < len; ++j) {
                    const int ch = (*argmax)[static_cast<std::size_t>(b) * len + j];
                    g.data[(static_cast<std::size_t>(b) * c + ch) * len + j] +=
                        nd.grad.data[static_cast<std::size_t>(b) * len + j];
                }
        });
    }
};

// Ordered stack of layers. Parameter order is declaration order, which the
// checkpoint format relies on.
class Sequential {
public:
    template <typename L, typename... Args>
    L* emplace(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L* raw = layer.get();
        layers_.push_back(std::move(layer));
        return raw;
    }

    Var forward(Var x, bool training, Rng* rng) {
        for (auto& l : layers_) x = l->forward(x, training, rng);
        return x;
    }

    std::vector<Var> params() const {
        std::vector<Var> out;
        for (auto& l : layers_)
            for (auto& p : l->params()) out.push_back(p);
        return out;
    }

    std::vector<Tensor*> buffers() const {
        std::vector<Tensor*> out;
        for (auto& l : layers_)
            for (auto* b : l->buffers()) out.push_back(b);
        return out;
    }

    std::vector<LayerSpec> specs() const {
        std::vector<LayerSpec> out;
        for (auto& l : layers_) out.push_back(l->spec());
        return out;
    }

    std::size_t size() const { return layers_.size(); }
    Layer& at(std::size_t i) { return *layers_.at(i); }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace wifid
