#pragma once

#include <array>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "wifid/signal.hpp"

namespace wifid {

enum class InterfererKind : std::uint8_t { None = 0, Mti = 1, Dsss = 2, Ofdm = 3 };

inline const char* interferer_name(InterfererKind k) {
    switch (k) {
        case InterfererKind::None: return "none";
        case InterfererKind::Mti: return "mti";
        case InterfererKind::Dsss: return "dsss";
        case InterfererKind::Ofdm: return "ofdm";
    }
    return "?";
}

// Which of the three dataset families a container holds.
struct DatasetKind {
    enum class Tag : std::uint8_t { Din = 0, DoutOE = 1, DoutTest = 2 };
    Tag tag = Tag::Din;
    InterfererKind interferer = InterfererKind::None;
    bool channel_on_interferer = false;

    static DatasetKind din() { return {}; }
    static DatasetKind dout_oe() { return {Tag::DoutOE, InterfererKind::Mti, false}; }
    static DatasetKind dout_test(InterfererKind i, bool channel) {
        if (i != InterfererKind::Dsss && i != InterfererKind::Ofdm)
            throw std::invalid_argument("dout_test interferer must be dsss or ofdm");
        return {Tag::DoutTest, i, channel};
    }

    std::string name() const {
        switch (tag) {
            case Tag::Din: return "din";
            case Tag::DoutOE: return "dout-oe";
            case Tag::DoutTest:
                return std::string("dout-test-") + interferer_name(interferer) +
                       (channel_on_interferer ? "-chan" : "");
        }
        return "?";
    }

    bool operator==(const DatasetKind& o) const {
        return tag == o.tag && interferer == o.interferer &&
               channel_on_interferer == o.channel_on_interferer;
    }
};

// Full provenance of one example: together with the dataset geometry this
// is enough to re-synthesize the waveform bit-exactly.
struct PacketSpec {
    ModScheme scheme = ModScheme::BPSK;
    InterfererKind interferer = InterfererKind::None;
    std::uint8_t channel_on_interferer = 0;
    float snr_db = 0.0f;
    float sir_db = std::numeric_limits<float>::infinity();
    std::uint64_t seed = 0;
    float victim_phase = 0.0f;
    float victim_cfo = 0.0f;
    float interferer_phase = 0.0f;
    float interferer_cfo = 0.0f;
};

struct Example {
    IqBlock iq;   // block_size complex samples, average power 1
    int label = 0;     // victim modulation index
    int sir_bin = 0;   // 0..n_sir_bins-1 (interferer-free duplicate for Din)
    PacketSpec prov;
};

struct DatasetSpec {
    int n_mod = 4;
    int n_sir_bins = 14;
    int n_batches = 16;
    int batch_size = 64;
    int n_channels = 2;
    OfdmConfig ofdm;  // block_size = 960
    std::vector<double> sir_grid_db;        // dB per bin, default 0..39 step 3
    std::array<double, 4> snr_db = {5.0, 8.0, 15.0, 25.0};
    std::uint64_t base_seed = 0;

    DatasetSpec() {
        sir_grid_db.resize(n_sir_bins);
        for (int i = 0; i < n_sir_bins; ++i) sir_grid_db[i] = 3.0 * i;
    }

    int block_size() const { return ofdm.block_size(); }
    std::size_t n_examples() const {
        return std::size_t(n_mod) * n_sir_bins * n_batches * batch_size;
    }
    std::size_t per_bin() const { return std::size_t(n_batches) * batch_size; }

    void validate() const {
        if (n_mod < 1 || n_mod > kNumModSchemes)
            throw std::invalid_argument("dataset: n_mod must be 1..4");
        if (n_sir_bins < 1 || n_batches < 1 || batch_size < 1)
            throw std::invalid_argument("dataset: dims must be positive");
        if (static_cast<int>(sir_grid_db.size()) != n_sir_bins)
            throw std::invalid_argument("dataset: sir grid size != n_sir_bins");
        if (n_channels != 2) throw std::invalid_argument("dataset: n_channels must be 2");
    }
};

// FNV over the f32 images of the grid values (the format stores f32)
inline std::uint64_t sir_grid_hash(const std::vector<double>& grid) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double dv : grid) {
        const float v = static_cast<float>(dv);
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        for (int i = 0; i < 4; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

namespace detail {
inline std::uint64_t kind_code(const DatasetKind& k) {
    return (std::uint64_t(k.tag) << 16) | (std::uint64_t(k.interferer) << 8) |
           std::uint64_t(k.channel_on_interferer);
}
}  // namespace detail

// Synthesize one dataset cell element. All randomness flows from the split
// seed, so any example can be regenerated from its provenance alone.
inline Example synth_example(const DatasetSpec& spec, const DatasetKind& kind, int mod_idx,
                             int sir_bin, std::size_t item_idx) {
    const std::uint64_t seed =
        split_seed(spec.base_seed, detail::kind_code(kind),
                   std::uint64_t(mod_idx) + 1, std::uint64_t(sir_bin) + 1, item_idx + 1);
    Rng rng(seed);
    const auto scheme = static_cast<ModScheme>(mod_idx);
    const ImpairmentSpec vimp = ImpairmentSpec::draw(rng);
    OfdmPacket victim = synth_ofdm_packet(spec.ofdm, scheme, vimp, rng);

    Example ex;
    ex.label = mod_idx;
    ex.sir_bin = sir_bin;
    ex.prov.scheme = scheme;
    ex.prov.interferer = kind.tag == DatasetKind::Tag::Din ? InterfererKind::None
                                                           : kind.interferer;
    ex.prov.channel_on_interferer = kind.channel_on_interferer ? 1 : 0;
    ex.prov.snr_db = static_cast<float>(spec.snr_db[mod_idx]);
    ex.prov.seed = seed;
    ex.prov.victim_phase = static_cast<float>(vimp.phase);
    ex.prov.victim_cfo = static_cast<float>(vimp.freq_offset);

    std::vector<cplx> interferer;
    double sir = std::numeric_limits<double>::infinity();
    if (ex.prov.interferer != InterfererKind::None) {
        sir = spec.sir_grid_db[sir_bin];
        const int n = spec.block_size();
        ImpairmentSpec iimp;
        switch (ex.prov.interferer) {
            case InterfererKind::Mti: {
                auto mti = MtiSpec::draw(spec.ofdm.n_subcarriers, rng);
                interferer = synth_mti(mti, n, spec.ofdm.n_subcarriers);
                break;
            }
            case InterfererKind::Dsss: {
                DsssSpec d;
                d.imp = iimp = ImpairmentSpec::draw(rng);
                interferer = synth_dsss(d, n, rng);
                break;
            }
            case InterfererKind::Ofdm: {
                iimp = ImpairmentSpec::draw(rng);
                const auto ischeme =
                    static_cast<ModScheme>(rng.uniform_int(0, kNumModSchemes - 1));
                interferer = synth_ofdm_packet(spec.ofdm, ischeme, iimp, rng).samples;
                break;
            }
            default: break;
        }
        ex.prov.interferer_phase = static_cast<float>(iimp.phase);
        ex.prov.interferer_cfo = static_cast<float>(iimp.freq_offset);
        if (kind.channel_on_interferer)
            interferer = apply_channel(interferer, ChannelModel::tapped_delay_line(), rng);
    }
    ex.prov.sir_db = static_cast<float>(sir);

    auto mixed = mix(victim.samples, interferer.empty()
                                         ? std::vector<cplx>(victim.samples.size())
                                         : interferer,
                     interferer.empty() ? std::numeric_limits<double>::infinity() : sir,
                     spec.snr_db[mod_idx], rng);
    normalize_power(mixed);
    ex.iq = to_iq_block(mixed);
    return ex;
}

struct Dataset {
    DatasetSpec spec;
    DatasetKind kind;
    std::vector<Example> examples;

    std::size_t index(int mod, int sir_bin, int batch, int item) const {
        return ((std::size_t(mod) * spec.n_sir_bins + sir_bin) * spec.n_batches + batch) *
                   spec.batch_size + item;
    }
    const Example& at(int mod, int sir_bin, int batch, int item) const {
        return examples[index(mod, sir_bin, batch, item)];
    }
};

inline Dataset generate(const DatasetSpec& spec, const DatasetKind& kind) {
    spec.validate();
    Dataset ds;
    ds.spec = spec;
    ds.kind = kind;
    ds.examples.reserve(spec.n_examples());
    for (int m = 0; m < spec.n_mod; ++m)
        for (int s = 0; s < spec.n_sir_bins; ++s)
            for (std::size_t i = 0; i < spec.per_bin(); ++i)
                ds.examples.push_back(synth_example(spec, kind, m, s, i));
    return ds;
}

// 12x80 reshape, cyclic prefix removal, per-row 64-point DFT, real/imag
// channels, max normalization. Output tensor shape [12, 2, 64].
inline Tensor preprocess(const IqBlock& iq, const OfdmConfig& cfg = OfdmConfig{}) {
    if (static_cast<int>(iq.size()) != cfg.block_size())
        throw std::invalid_argument("preprocess: expected " +
                                    std::to_string(cfg.block_size()) + " samples, got " +
                                    std::to_string(iq.size()));
    const int k = cfg.n_subcarriers, cp = cfg.cp_len, sl = cfg.symbol_len();
    Tensor out({cfg.n_symbols, 2, k});
    double max_abs = 0.0;
    for (int row = 0; row < cfg.n_symbols; ++row) {
        std::vector<cplx> window(k);
        for (int i = 0; i < k; ++i) {
            const auto& v = iq[row * sl + cp + i];
            window[i] = cplx(v.real(), v.imag());
        }
        auto spec = dft(window);
        for (int i = 0; i < k; ++i) {
            const float re = static_cast<float>(spec[i].real());
            const float im = static_cast<float>(spec[i].imag());
            out.data[(std::size_t(row) * 2 + 0) * k + i] = re;
            out.data[(std::size_t(row) * 2 + 1) * k + i] = im;
            max_abs = std::max({max_abs, std::abs(double(re)), std::abs(double(im))});
        }
    }
    if (max_abs > 0.0) {
        const float inv = static_cast<float>(1.0 / max_abs);
        for (float& v : out.data) v *= inv;
    }
    return out;
}

// per-row magnitude spectrum (I^2 + Q^2)^(1/2) of a [12, 2, 64] view -> [12, 64]
inline Tensor magnitude_spectrum(const Tensor& view) {
    if (view.ndim() != 3 || view.dim(1) != 2)
        throw std::invalid_argument("magnitude_spectrum: expected [rows, 2, bins]");
    const int rows = view.dim(0), bins = view.dim(2);
    Tensor out({rows, bins});
    for (int r = 0; r < rows; ++r)
        for (int i = 0; i < bins; ++i) {
            const float re = view.data[(std::size_t(r) * 2 + 0) * bins + i];
            const float im = view.data[(std::size_t(r) * 2 + 1) * bins + i];
            out.data[std::size_t(r) * bins + i] = std::sqrt(re * re + im * im);
        }
    return out;
}

// ---- binary dataset file format ----
// 64-byte header, then examples as interleaved little-endian f32 I/Q pairs
// followed by a fixed-width provenance record.

namespace detail {

constexpr char kDatasetMagic[8] = {'W', 'I', 'D', 'D', 'S', 'E', 'T', '1'};
constexpr std::uint32_t kDatasetVersion = 1;

#pragma pack(push, 1)
struct DatasetHeader {
    char magic[8];
    std::uint32_t version;
    std::uint8_t kind_tag;
    std::uint8_t interferer;
    std::uint8_t channel;
    std::uint8_t pad0;
    std::uint16_t n_mod, n_sir_bins, n_batches, batch_size;
    std::uint32_t block_size;
    std::uint16_t n_channels;
    std::uint16_t pad1;
    std::uint64_t sir_hash;
    std::uint64_t base_seed;
    std::uint64_t n_examples;
    std::uint8_t reserved[8];
};
struct ProvRecord {
    std::int32_t label;
    std::int32_t sir_bin;
    std::uint8_t scheme;
    std::uint8_t interferer;
    std::uint8_t channel;
    std::uint8_t pad;
    float snr_db;
    float sir_db;
    std::uint64_t seed;
    float victim_phase, victim_cfo, interferer_phase, interferer_cfo;
};
#pragma pack(pop)
static_assert(sizeof(DatasetHeader) == 64, "dataset header must be 64 bytes");

}  // namespace detail

inline void write_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_dataset: cannot open " + path);
    detail::DatasetHeader h{};
    std::memcpy(h.magic, detail::kDatasetMagic, 8);
    h.version = detail::kDatasetVersion;
    h.kind_tag = static_cast<std::uint8_t>(ds.kind.tag);
    h.interferer = static_cast<std::uint8_t>(ds.kind.interferer);
    h.channel = ds.kind.channel_on_interferer ? 1 : 0;
    h.n_mod = static_cast<std::uint16_t>(ds.spec.n_mod);
    h.n_sir_bins = static_cast<std::uint16_t>(ds.spec.n_sir_bins);
    h.n_batches = static_cast<std::uint16_t>(ds.spec.n_batches);
    h.batch_size = static_cast<std::uint16_t>(ds.spec.batch_size);
    h.block_size = static_cast<std::uint32_t>(ds.spec.block_size());
    h.n_channels = static_cast<std::uint16_t>(ds.spec.n_channels);
    h.sir_hash = sir_grid_hash(ds.spec.sir_grid_db);
    h.base_seed = ds.spec.base_seed;
    h.n_examples = ds.examples.size();
    f.write(reinterpret_cast<const char*>(&h), sizeof(h));
    // SIR grid stored after the header so readers do not depend on defaults
    for (double v : ds.spec.sir_grid_db) {
        const float fv = static_cast<float>(v);
        f.write(reinterpret_cast<const char*>(&fv), 4);
    }
    for (double v : ds.spec.snr_db) {
        const float fv = static_cast<float>(v);
        f.write(reinterpret_cast<const char*>(&fv), 4);
    }
    for (const Example& ex : ds.examples) {
        for (const auto& s : ex.iq) {
            const float iv = s.real(), qv = s.imag();
            f.write(reinterpret_cast<const char*>(&iv), 4);
            f.write(reinterpret_cast<const char*>(&qv), 4);
        }
        detail::ProvRecord p{};
        p.label = ex.label;
        p.sir_bin = ex.sir_bin;
        p.scheme = static_cast<std::uint8_t>(ex.prov.scheme);
        p.interferer = static_cast<std::uint8_t>(ex.prov.interferer);
        p.channel = ex.prov.channel_on_interferer;
        p.snr_db = ex.prov.snr_db;
        p.sir_db = ex.prov.sir_db;
        p.seed = ex.prov.seed;
        p.victim_phase = ex.prov.victim_phase;
        p.victim_cfo = ex.prov.victim_cfo;
        p.interferer_phase = ex.prov.interferer_phase;
        p.interferer_cfo = ex.prov.interferer_cfo;
        f.write(reinterpret_cast<const char*>(&p), sizeof(p));
    }
    if (!f) throw std::runtime_error("write_dataset: write failed for " + path);
}

inline Dataset read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_dataset: cannot open " + path);
    detail::DatasetHeader h{};
    f.read(reinterpret_cast<char*>(&h), sizeof(h));
    if (!f) throw std::runtime_error("read_dataset: truncated header in " + path);
    if (std::memcmp(h.magic, detail::kDatasetMagic, 8) != 0)
        throw std::runtime_error("read_dataset: bad magic in " + path);
    if (h.version != detail::kDatasetVersion)
        throw std::runtime_error("read_dataset: unsupported version " +
                                 std::to_string(h.version));
    Dataset ds;
    ds.spec.n_mod = h.n_mod;
    ds.spec.n_sir_bins = h.n_sir_bins;
    ds.spec.n_batches = h.n_batches;
    ds.spec.batch_size = h.batch_size;
    ds.spec.base_seed = h.base_seed;
    ds.kind.tag = static_cast<DatasetKind::Tag>(h.kind_tag);
    ds.kind.interferer = static_cast<InterfererKind>(h.interferer);
    ds.kind.channel_on_interferer = h.channel != 0;
    ds.spec.sir_grid_db.resize(h.n_sir_bins);
    for (int i = 0; i < h.n_sir_bins; ++i) {
        float v;
        f.read(reinterpret_cast<char*>(&v), 4);
        ds.spec.sir_grid_db[i] = v;
    }
    for (auto& v : ds.spec.snr_db) {
        float fv;
        f.read(reinterpret_cast<char*>(&fv), 4);
        v = fv;
    }
    if (!f) throw std::runtime_error("read_dataset: truncated grid tables in " + path);
    if (sir_grid_hash(ds.spec.sir_grid_db) != h.sir_hash)
        throw std::runtime_error("read_dataset: SIR grid hash mismatch in " + path);
    const int block = static_cast<int>(h.block_size);
    ds.examples.resize(h.n_examples);
    for (std::size_t i = 0; i < h.n_examples; ++i) {
        Example& ex = ds.examples[i];
        ex.iq.resize(block);
        for (int t = 0; t < block; ++t) {
            float iv, qv;
            f.read(reinterpret_cast<char*>(&iv), 4);
            f.read(reinterpret_cast<char*>(&qv), 4);
            ex.iq[t] = {iv, qv};
        }
        detail::ProvRecord p{};
        f.read(reinterpret_cast<char*>(&p), sizeof(p));
        if (!f)
            throw std::runtime_error("read_dataset: truncated at example " +
                                     std::to_string(i) + " (byte offset " +
                                     std::to_string(f.tellg() == -1
                                                        ? -1L
                                                        : long(f.tellg())) + ") in " + path);
        ex.label = p.label;
        ex.sir_bin = p.sir_bin;
        ex.prov.scheme = static_cast<ModScheme>(p.scheme);
        ex.prov.interferer = static_cast<InterfererKind>(p.interferer);
        ex.prov.channel_on_interferer = p.channel;
        ex.prov.snr_db = p.snr_db;
        ex.prov.sir_db = p.sir_db;
        ex.prov.seed = p.seed;
        ex.prov.victim_phase = p.victim_phase;
        ex.prov.victim_cfo = p.victim_cfo;
        ex.prov.interferer_phase = p.interferer_phase;
        ex.prov.interferer_cfo = p.interferer_cfo;
    }
    return ds;
}

inline void append_manifest(const std::string& manifest_path, const std::string& ds_path,
                            const Dataset& ds) {
    std::ofstream f(manifest_path, std::ios::app);
    if (!f) throw std::runtime_error("append_manifest: cannot open " + manifest_path);
    f << ds_path << "\t" << ds.kind.name() << "\t[" << ds.spec.n_mod << ","
      << ds.spec.n_sir_bins << "," << ds.spec.n_batches << "," << ds.spec.batch_size
      << "]x[" << ds.spec.block_size() << "," << ds.spec.n_channels << "]\tseed="
      << ds.spec.base_seed << "\n";
}

}  // namespace wifid
