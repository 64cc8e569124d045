#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "wifid/layers.hpp"

namespace wifid {

enum class ModelKind : std::uint8_t { Msp = 0, Dml = 1, Vae = 2, Ar = 3 };

inline const char* model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::Msp: return "msp";
        case ModelKind::Dml: return "dml";
        case ModelKind::Vae: return "vae";
        case ModelKind::Ar: return "ar";
    }
    return "?";
}

inline ModelKind model_kind_from_name(const std::string& s) {
    if (s == "msp") return ModelKind::Msp;
    if (s == "dml") return ModelKind::Dml;
    if (s == "vae") return ModelKind::Vae;
    if (s == "ar") return ModelKind::Ar;
    throw std::invalid_argument("unknown model kind '" + s + "'");
}

// Training-config echo stored alongside the weights.
struct CheckpointMeta {
    ModelKind kind = ModelKind::Msp;
    bool oe_enabled = false;
    std::uint64_t seed = 0;
    float oe_lambda = 0.0f;
    float beta = 0.0f;
    std::uint32_t train_steps = 0;
    std::vector<std::uint32_t> arch;  // model-kind-specific architecture echo
};

struct Checkpoint {
    CheckpointMeta meta;
    std::vector<LayerSpec> layers;
    std::vector<Tensor> params;   // declaration order
    std::vector<Tensor> buffers;  // batchnorm running stats etc.
};

namespace detail {

constexpr char kCkptMagic[8] = {'W', 'I', 'D', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kCkptVersion = 1;

inline void write_u32(std::ostream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
}
inline void write_u64(std::ostream& f, std::uint64_t v) {
    f.write(reinterpret_cast<const char*>(&v), 8);
}
inline void write_f32(std::ostream& f, float v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
}
inline std::uint32_t read_u32(std::istream& f) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
inline std::uint64_t read_u64(std::istream& f) {
    std::uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
inline float read_f32(std::istream& f) {
    float v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

inline void write_layer_spec(std::ostream& f, const LayerSpec& s) {
    f.put(static_cast<char>(s.kind));
    f.put(static_cast<char>(s.pad));
    write_u32(f, s.in_channels);
    write_u32(f, s.out_channels);
    write_u32(f, s.kernel);
    write_u32(f, s.stride);
    write_u32(f, s.dilation);
    write_f32(f, s.dropout_rate);
    write_u32(f, s.in_features);
    write_u32(f, s.out_features);
    write_u32(f, static_cast<std::uint32_t>(s.target_shape.size()));
    for (int e : s.target_shape) write_u32(f, e);
}

inline LayerSpec read_layer_spec(std::istream& f) {
    LayerSpec s;
    s.kind = static_cast<LayerKind>(f.get());
    s.pad = static_cast<PadMode>(f.get());
    s.in_channels = static_cast<int>(read_u32(f));
    s.out_channels = static_cast<int>(read_u32(f));
    s.kernel = static_cast<int>(read_u32(f));
    s.stride = static_cast<int>(read_u32(f));
    s.dilation = static_cast<int>(read_u32(f));
    s.dropout_rate = read_f32(f);
    s.in_features = static_cast<int>(read_u32(f));
    s.out_features = static_cast<int>(read_u32(f));
    const std::uint32_t n = read_u32(f);
    s.target_shape.resize(n);
    for (auto& e : s.target_shape) e = static_cast<int>(read_u32(f));
    return s;
}

inline void write_tensor(std::ostream& f, const Tensor& t) {
    write_u32(f, static_cast<std::uint32_t>(t.shape.size()));
    for (int e : t.shape) write_u32(f, e);
    f.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * 4));
}

inline Tensor read_tensor(std::istream& f) {
    const std::uint32_t nd = read_u32(f);
    if (!f || nd > 8) throw std::runtime_error("checkpoint: corrupt tensor header");
    Shape s(nd);
    for (auto& e : s) e = static_cast<int>(read_u32(f));
    Tensor t(std::move(s));
    f.read(reinterpret_cast<char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * 4));
    if (!f) throw std::runtime_error("checkpoint: truncated tensor payload");
    return t;
}

}  // namespace detail

inline void write_checkpoint(const std::string& path, const CheckpointMeta& meta,
                             const std::vector<LayerSpec>& layers,
                             const std::vector<Var>& params,
                             const std::vector<Tensor*>& buffers) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_checkpoint: cannot open " + path);
    f.write(detail::kCkptMagic, 8);
    detail::write_u32(f, detail::kCkptVersion);
    f.put(static_cast<char>(meta.kind));
    f.put(meta.oe_enabled ? 1 : 0);
    detail::write_u64(f, meta.seed);
    detail::write_f32(f, meta.oe_lambda);
    detail::write_f32(f, meta.beta);
    detail::write_u32(f, meta.train_steps);
    detail::write_u32(f, static_cast<std::uint32_t>(meta.arch.size()));
    for (auto v : meta.arch) detail::write_u32(f, v);
    detail::write_u32(f, static_cast<std::uint32_t>(layers.size()));
    for (const auto& l : layers) detail::write_layer_spec(f, l);
    detail::write_u32(f, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) detail::write_tensor(f, p->value);
    detail::write_u32(f, static_cast<std::uint32_t>(buffers.size()));
    for (const auto* b : buffers) detail::write_tensor(f, *b);
    if (!f) throw std::runtime_error("write_checkpoint: write failed for " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_checkpoint: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, detail::kCkptMagic, 8) != 0)
        throw std::runtime_error("read_checkpoint: bad magic in " + path);
    const auto version = detail::read_u32(f);
    if (version != detail::kCkptVersion)
        throw std::runtime_error("read_checkpoint: unsupported version " +
                                 std::to_string(version));
    Checkpoint ck;
    ck.meta.kind = static_cast<ModelKind>(f.get());
    ck.meta.oe_enabled = f.get() != 0;
    ck.meta.seed = detail::read_u64(f);
    ck.meta.oe_lambda = detail::read_f32(f);
    ck.meta.beta = detail::read_f32(f);
    ck.meta.train_steps = detail::read_u32(f);
    const auto n_arch = detail::read_u32(f);
    if (!f || n_arch > 64)
        throw std::runtime_error("read_checkpoint: corrupt arch block in " + path);
    ck.meta.arch.resize(n_arch);
    for (auto& v : ck.meta.arch) v = detail::read_u32(f);
    const auto n_layers = detail::read_u32(f);
    if (!f) throw std::runtime_error("read_checkpoint: truncated header in " + path);
    ck.layers.resize(n_layers);
    for (auto& l : ck.layers) l = detail::read_layer_spec(f);
    const auto n_params = detail::read_u32(f);
    ck.params.reserve(n_params);
    for (std::uint32_t i = 0; i < n_params; ++i) ck.params.push_back(detail::read_tensor(f));
    const auto n_buffers = detail::read_u32(f);
    ck.buffers.reserve(n_buffers);
    for (std::uint32_t i = 0; i < n_buffers; ++i)
        ck.buffers.push_back(detail::read_tensor(f));
    return ck;
}

// Copy checkpoint weights into live parameters/buffers, validating shapes.
inline void load_into(const Checkpoint& ck, const std::vector<Var>& params,
                      const std::vector<Tensor*>& buffers) {
    if (ck.params.size() != params.size() || ck.buffers.size() != buffers.size())
        throw std::runtime_error("checkpoint: parameter/buffer count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (ck.params[i].shape != params[i]->value.shape)
            throw std::runtime_error("checkpoint: parameter " + std::to_string(i) +
                                     " shape mismatch " + shape_str(ck.params[i].shape) +
                                     " vs " + shape_str(params[i]->value.shape));
        params[i]->value.data = ck.params[i].data;
    }
    for (std::size_t i = 0; i < buffers.size(); ++i) {
        if (ck.buffers[i].shape != buffers[i]->shape)
            throw std::runtime_error("checkpoint: buffer shape mismatch");
        buffers[i]->data = ck.buffers[i].data;
    }
}

}  // namespace wifid
