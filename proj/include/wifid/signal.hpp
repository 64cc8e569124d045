#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "wifid/rng.hpp"
#include "wifid/tensor.hpp"

namespace wifid {

using cplx = std::complex<double>;
using IqBlock = std::vector<std::complex<float>>;

constexpr double kTwoPi = 6.283185307179586476925286766559;

enum class ModScheme { BPSK, QPSK, QAM16, QAM64 };
constexpr int kNumModSchemes = 4;

inline const char* mod_scheme_name(ModScheme m) {
    switch (m) {
        case ModScheme::BPSK: return "bpsk";
        case ModScheme::QPSK: return "qpsk";
        case ModScheme::QAM16: return "qam16";
        case ModScheme::QAM64: return "qam64";
    }
    return "?";
}

inline int bits_per_symbol(ModScheme m) {
    switch (m) {
        case ModScheme::BPSK: return 1;
        case ModScheme::QPSK: return 2;
        case ModScheme::QAM16: return 4;
        case ModScheme::QAM64: return 6;
    }
    return 0;
}

namespace detail {

// Gray-coded PAM levels: index g of n bits -> odd level, unit spacing 2.
// 1 bit: 0->+1, 1->-1 (BPSK convention). More bits: reflected Gray code
// over levels {-(2^n - 1), ..., -1, +1, ..., 2^n - 1}.
inline double gray_level(unsigned bits, int n_bits) {
    if (n_bits == 1) return bits ? -1.0 : 1.0;
    // gray -> binary rank
    unsigned g = bits, b = 0;
    for (unsigned mask = g; mask; mask >>= 1) b ^= mask;
    const int levels = 1 << n_bits;
    return 2.0 * static_cast<int>(b) - (levels - 1);
}

inline unsigned gray_from_level(double level, int n_bits) {
    const int levels = 1 << n_bits;
    int rank = static_cast<int>(std::lround((level + (levels - 1)) / 2.0));
    rank = std::min(std::max(rank, 0), levels - 1);
    unsigned b = static_cast<unsigned>(rank);
    if (n_bits == 1) return b ? 0u : 1u;  // inverse of the BPSK convention
    return b ^ (b >> 1);
}

inline double qam_scale(ModScheme m) {
    switch (m) {
        case ModScheme::BPSK: return 1.0;
        case ModScheme::QPSK: return 1.0 / std::sqrt(2.0);
        case ModScheme::QAM16: return 1.0 / std::sqrt(10.0);
        case ModScheme::QAM64: return 1.0 / std::sqrt(42.0);
    }
    return 1.0;
}

}  // namespace detail

// Gray-mapped, unit-average-energy constellation mapping.
inline cplx map_one_symbol(const int* bits, ModScheme m) {
    const double sc = detail::qam_scale(m);
    if (m == ModScheme::BPSK) return {detail::gray_level(bits[0], 1), 0.0};
    const int half = bits_per_symbol(m) / 2;
    unsigned bi = 0, bq = 0;
    for (int i = 0; i < half; ++i) bi = (bi << 1) | unsigned(bits[i]);
    for (int i = 0; i < half; ++i) bq = (bq << 1) | unsigned(bits[half + i]);
    if (m == ModScheme::QPSK)
        return {sc * detail::gray_level(bi, 1), sc * detail::gray_level(bq, 1)};
    return {sc * detail::gray_level(bi, half), sc * detail::gray_level(bq, half)};
}

inline std::vector<cplx> map_symbols(const std::vector<int>& bits, ModScheme m) {
    const int bps = bits_per_symbol(m);
    if (bits.size() % bps != 0)
        throw std::invalid_argument("map_symbols: bit count " + std::to_string(bits.size()) +
                                    " not divisible by " + std::to_string(bps));
    std::vector<cplx> out(bits.size() / bps);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = map_one_symbol(bits.data() + i * bps, m);
    return out;
}

// nearest-point demapping, inverse of map_symbols
inline std::vector<int> demap_symbols(const std::vector<cplx>& syms, ModScheme m) {
    const int bps = bits_per_symbol(m);
    const double inv_sc = 1.0 / detail::qam_scale(m);
    std::vector<int> bits;
    bits.reserve(syms.size() * bps);
    for (const cplx& s : syms) {
        if (m == ModScheme::BPSK) {
            bits.push_back(static_cast<int>(detail::gray_from_level(s.real(), 1)));
            continue;
        }
        const int half = bps / 2;
        const unsigned bi = detail::gray_from_level(s.real() * inv_sc, half);
        const unsigned bq = detail::gray_from_level(s.imag() * inv_sc, half);
        for (int i = half - 1; i >= 0; --i) bits.push_back((bi >> i) & 1u);
        for (int i = half - 1; i >= 0; --i) bits.push_back((bq >> i) & 1u);
    }
    return bits;
}

struct OfdmConfig {
    int n_subcarriers = 64;
    int cp_len = 16;
    int n_symbols = 12;

    int symbol_len() const { return n_subcarriers + cp_len; }
    int block_size() const { return symbol_len() * n_symbols; }
};

struct ImpairmentSpec {
    double amplitude = 1.0;       // a
    double phase = 0.0;           // theta, radians in [0, 2pi)
    double freq_offset = 0.0;     // delta f_c, cycles per sample
    double timing_offset = 0.0;   // epsilon, fixed to 0 here

    static ImpairmentSpec draw(Rng& rng, double max_cfo = 0.001) {
        ImpairmentSpec s;
        s.phase = rng.uniform(0.0, kTwoPi);
        s.freq_offset = rng.uniform(-max_cfo, max_cfo);
        return s;
    }
};

inline void apply_impairments(std::vector<cplx>& x, const ImpairmentSpec& imp) {
    for (std::size_t t = 0; t < x.size(); ++t)
        x[t] *= imp.amplitude *
                std::exp(cplx(0.0, imp.phase + kTwoPi * imp.freq_offset * double(t)));
}

inline double avg_power(const std::vector<cplx>& x) {
    double acc = 0.0;
    for (const cplx& v : x) acc += std::norm(v);
    return x.empty() ? 0.0 : acc / double(x.size());
}

inline double avg_power(const IqBlock& x) {
    double acc = 0.0;
    for (const auto& v : x) acc += double(v.real()) * v.real() + double(v.imag()) * v.imag();
    return x.empty() ? 0.0 : acc / double(x.size());
}

inline void normalize_power(std::vector<cplx>& x) {
    const double p = avg_power(x);
    if (p <= 0.0) return;
    const double s = 1.0 / std::sqrt(p);
    for (cplx& v : x) v *= s;
}

// K-point forward DFT, 1/sqrt(K) normalization
inline std::vector<cplx> dft(const std::vector<cplx>& x) {
    const std::size_t k = x.size();
    std::vector<cplx> out(k);
    const double scale = 1.0 / std::sqrt(double(k));
    for (std::size_t f = 0; f < k; ++f) {
        cplx acc = 0.0;
        for (std::size_t n = 0; n < k; ++n)
            acc += x[n] * std::exp(cplx(0.0, -kTwoPi * double(f) * double(n) / double(k)));
        out[f] = acc * scale;
    }
    return out;
}

inline std::vector<cplx> idft(const std::vector<cplx>& s) {
    const std::size_t k = s.size();
    std::vector<cplx> out(k);
    const double scale = 1.0 / std::sqrt(double(k));
    for (std::size_t n = 0; n < k; ++n) {
        cplx acc = 0.0;
        for (std::size_t f = 0; f < k; ++f)
            acc += s[f] * std::exp(cplx(0.0, kTwoPi * double(f) * double(n) / double(k)));
        out[n] = acc * scale;
    }
    return out;
}

struct OfdmPacket {
    std::vector<cplx> samples;  // block_size() complex baseband samples
    std::vector<int> bits;      // transmitted payload, for round-trip checks
};

// 12 OFDM symbols of K-point IDFT output with cyclic prefix, impairments
// applied samplewise, average power normalized to 1.
inline OfdmPacket synth_ofdm_packet(const OfdmConfig& cfg, ModScheme scheme,
                                    const ImpairmentSpec& imp, Rng& rng) {
    const int k = cfg.n_subcarriers, cp = cfg.cp_len, bps = bits_per_symbol(scheme);
    OfdmPacket pkt;
    pkt.samples.reserve(cfg.block_size());
    for (int l = 0; l < cfg.n_symbols; ++l) {
        std::vector<int> bits(static_cast<std::size_t>(k) * bps);
        for (int& b : bits) b = static_cast<int>(rng.uniform_int(0, 1));
        auto syms = map_symbols(bits, scheme);
        auto time = idft(syms);
        for (int i = 0; i < cp; ++i) pkt.samples.push_back(time[k - cp + i]);
        for (int i = 0; i < k; ++i) pkt.samples.push_back(time[i]);
        pkt.bits.insert(pkt.bits.end(), bits.begin(), bits.end());
    }
    apply_impairments(pkt.samples, imp);
    normalize_power(pkt.samples);
    return pkt;
}

// CP-strip + per-symbol DFT + nearest-point demapping
inline std::vector<int> demod_ofdm(const std::vector<cplx>& samples, const OfdmConfig& cfg,
                                   ModScheme scheme) {
    if (static_cast<int>(samples.size()) != cfg.block_size())
        throw std::invalid_argument("demod_ofdm: expected " +
                                    std::to_string(cfg.block_size()) + " samples");
    const int k = cfg.n_subcarriers, cp = cfg.cp_len, sl = cfg.symbol_len();
    std::vector<int> bits;
    for (int l = 0; l < cfg.n_symbols; ++l) {
        std::vector<cplx> window(samples.begin() + l * sl + cp,
                                 samples.begin() + l * sl + cp + k);
        auto spec = dft(window);
        auto b = demap_symbols(spec, scheme);
        bits.insert(bits.end(), b.begin(), b.end());
    }
    return bits;
}

// 802.11 DSSS with the standard 11-chip Barker sequence, DBPSK symbols,
// rectangular pulse at one chip per sample.
struct DsssSpec {
    std::vector<int> chips = {+1, -1, +1, +1, -1, +1, +1, +1, -1, -1, -1};
    std::vector<int> data_bits;  // optional fixed +-1 payload; random when empty
    ImpairmentSpec imp;

    int spreading_length() const { return static_cast<int>(chips.size()); }
};

inline std::vector<cplx> synth_dsss(const DsssSpec& spec, int n_samples, Rng& rng) {
    const int p = spec.spreading_length();
    if (n_samples < p)
        throw std::invalid_argument("synth_dsss: need at least one symbol of samples");
    std::vector<cplx> out(n_samples);
    int x_prev = 1;  // DBPSK reference symbol
    for (int t = 0; t < n_samples; ++t) {
        const int m = t / p;
        const int chip_idx = t % p;
        if (chip_idx == 0 && m > 0) {
            int d;
            if (spec.data_bits.empty())
                d = rng.uniform() < 0.5 ? 1 : -1;
            else
                d = spec.data_bits[(m - 1) % spec.data_bits.size()];
            x_prev *= d;  // differential encoding
        }
        out[t] = double(spec.chips[chip_idx] * x_prev);
    }
    apply_impairments(out, spec.imp);
    return out;
}

// Multi-tone interference: q tones on distinct subcarrier centers,
// independent uniform phases.
struct MtiSpec {
    double amplitude = 1.0;          // a_i
    std::vector<int> tone_bins;      // subcarrier indices, distinct
    std::vector<double> phases;      // one per tone, [0, 2pi)

    int tone_count() const { return static_cast<int>(tone_bins.size()); }

    // q ~ U[K/8, K]; bins chosen without replacement, no contiguity
    static MtiSpec draw(int n_subcarriers, Rng& rng) {
        MtiSpec s;
        const int q = static_cast<int>(
            rng.uniform_int(n_subcarriers / 8, n_subcarriers));
        std::vector<int> bins(n_subcarriers);
        for (int i = 0; i < n_subcarriers; ++i) bins[i] = i;
        for (int i = 0; i < q; ++i) {
            const int j = i + static_cast<int>(rng.uniform_int(0, n_subcarriers - 1 - i));
            std::swap(bins[i], bins[j]);
        }
        s.tone_bins.assign(bins.begin(), bins.begin() + q);
        s.phases.resize(q);
        for (double& ph : s.phases) ph = rng.uniform(0.0, kTwoPi);
        s.amplitude = 1.0 / std::sqrt(double(std::max(q, 1)));
        return s;
    }
};

inline std::vector<cplx> synth_mti(const MtiSpec& spec, int n_samples,
                                   int n_subcarriers = 64) {
    std::vector<cplx> out(n_samples, cplx(0.0, 0.0));
    for (int j = 0; j < spec.tone_count(); ++j) {
        const double f = double(spec.tone_bins[j]) / double(n_subcarriers);
        const double ph = spec.phases[j];
        for (int t = 0; t < n_samples; ++t)
            out[t] += spec.amplitude * std::exp(cplx(0.0, kTwoPi * f * double(t) + ph));
    }
    return out;
}

// Simplified multipath surrogate: short tapped delay line with an
// exponentially decaying power profile and i.i.d. complex Gaussian taps.
struct ChannelModel {
    enum class Kind { None, TappedDelayLine };
    Kind kind = Kind::None;
    std::vector<int> tap_delays = {0, 1, 2, 3, 4};
    std::vector<double> tap_powers_db = {0.0, -3.0, -6.0, -9.0, -12.0};

    static ChannelModel none() { return ChannelModel{}; }
    static ChannelModel tapped_delay_line() {
        ChannelModel c;
        c.kind = Kind::TappedDelayLine;
        return c;
    }
};

inline std::vector<cplx> apply_channel(const std::vector<cplx>& x, const ChannelModel& ch,
                                       Rng& rng) {
    if (ch.kind == ChannelModel::Kind::None) return x;
    if (ch.tap_delays.size() != ch.tap_powers_db.size())
        throw std::invalid_argument("apply_channel: delay/power profile size mismatch");
    // normalize profile to unit total power
    double total = 0.0;
    std::vector<double> lin(ch.tap_powers_db.size());
    for (std::size_t i = 0; i < lin.size(); ++i) {
        lin[i] = std::pow(10.0, ch.tap_powers_db[i] / 10.0);
        total += lin[i];
    }
    std::vector<cplx> taps(lin.size());
    for (std::size_t i = 0; i < lin.size(); ++i) {
        const double sigma = std::sqrt(lin[i] / total / 2.0);
        taps[i] = cplx(sigma * rng.gaussian(), sigma * rng.gaussian());
    }
    std::vector<cplx> out(x.size(), cplx(0.0, 0.0));
    for (std::size_t i = 0; i < taps.size(); ++i) {
        const int d = ch.tap_delays[i];
        for (std::size_t t = d; t < x.size(); ++t) out[t] += taps[i] * x[t - d];
    }
    return out;
}

// Scale the interferer to the requested SIR against the measured signal
// power, then add complex AWGN at the requested SNR. snr_db = +inf
// disables the noise term.
inline std::vector<cplx> mix(const std::vector<cplx>& signal,
                             const std::vector<cplx>& interferer, double sir_db,
                             double snr_db, Rng& rng) {
    if (signal.size() != interferer.size() && !interferer.empty())
        throw std::invalid_argument("mix: length mismatch");
    const double p_sig = avg_power(signal);
    std::vector<cplx> out = signal;
    if (std::isfinite(sir_db)) {
        const double p_int = avg_power(interferer);
        if (p_int <= 0.0)
            throw std::invalid_argument("mix: zero-power interferer with finite SIR");
        const double scale = std::sqrt(p_sig / (p_int * std::pow(10.0, sir_db / 10.0)));
        for (std::size_t t = 0; t < out.size(); ++t) out[t] += scale * interferer[t];
    }
    if (std::isfinite(snr_db)) {
        const double p_noise = p_sig / std::pow(10.0, snr_db / 10.0);
        const double sigma = std::sqrt(p_noise / 2.0);
        for (cplx& v : out) v += cplx(sigma * rng.gaussian(), sigma * rng.gaussian());
    }
    return out;
}

inline IqBlock to_iq_block(const std::vector<cplx>& x) {
    IqBlock out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = std::complex<float>(static_cast<float>(x[i].real()),
                                     static_cast<float>(x[i].imag()));
    return out;
}

inline std::vector<cplx> from_iq_block(const IqBlock& x) {
    std::vector<cplx> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = cplx(x[i].real(), x[i].imag());
    return out;
}

// [2, L] tensor, channel 0 = I, channel 1 = Q
inline Tensor iq_to_tensor(const IqBlock& x) {
    const int l = static_cast<int>(x.size());
    Tensor t({2, l});
    for (int i = 0; i < l; ++i) {
        t.data[i] = x[i].real();
        t.data[l + i] = x[i].imag();
    }
    return t;
}

}  // namespace wifid
