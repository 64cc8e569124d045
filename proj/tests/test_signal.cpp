#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "wifid/signal.hpp"

using namespace wifid;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> random_bits(std::size_t n, Rng& rng) {
    std::vector<int> b(n);
    for (int& v : b) v = static_cast<int>(rng.uniform_int(0, 1));
    return b;
}
}  // namespace

TEST_CASE("bpsk maps bit 0 to +1 and bit 1 to -1") {
    auto syms = map_symbols({0, 1}, ModScheme::BPSK);
    CHECK(syms[0] == cplx(1.0, 0.0));
    CHECK(syms[1] == cplx(-1.0, 0.0));
}

TEST_CASE("constellations have unit average energy") {
    for (ModScheme m : {ModScheme::BPSK, ModScheme::QPSK, ModScheme::QAM16,
                        ModScheme::QAM64}) {
        const int bps = bits_per_symbol(m);
        const int points = 1 << bps;
        double acc = 0.0;
        for (int w = 0; w < points; ++w) {
            std::vector<int> bits(bps);
            for (int i = 0; i < bps; ++i) bits[i] = (w >> (bps - 1 - i)) & 1;
            acc += std::norm(map_one_symbol(bits.data(), m));
        }
        INFO(mod_scheme_name(m));
        CHECK(acc / points == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("qam16 uses 1/sqrt(10) level spacing") {
    const double sc = 1.0 / std::sqrt(10.0);
    for (int w = 0; w < 16; ++w) {
        std::vector<int> bits = {(w >> 3) & 1, (w >> 2) & 1, (w >> 1) & 1, w & 1};
        const cplx s = map_one_symbol(bits.data(), ModScheme::QAM16);
        const double li = s.real() / sc, lq = s.imag() / sc;
        // levels must be odd integers in {-3,-1,1,3}
        CHECK(std::abs(li - std::round(li)) < 1e-12);
        CHECK(std::abs(lq - std::round(lq)) < 1e-12);
        CHECK(std::abs(li) <= 3.0 + 1e-12);
        CHECK((std::lround(std::abs(li)) % 2) == 1);
    }
}

TEST_CASE("gray coding: adjacent amplitude levels differ in one bit") {
    for (ModScheme m : {ModScheme::QAM16, ModScheme::QAM64}) {
        const int half = bits_per_symbol(m) / 2;
        const int levels = 1 << half;
        for (int r = 0; r + 1 < levels; ++r) {
            const double la = 2.0 * r - (levels - 1);
            const double lb = 2.0 * (r + 1) - (levels - 1);
            const unsigned ga = detail::gray_from_level(la, half);
            const unsigned gb = detail::gray_from_level(lb, half);
            CHECK(__builtin_popcount(ga ^ gb) == 1);
        }
    }
}

TEST_CASE("map/demap round-trips bits exactly for every scheme") {
    Rng rng(101);
    for (ModScheme m : {ModScheme::BPSK, ModScheme::QPSK, ModScheme::QAM16,
                        ModScheme::QAM64}) {
        auto bits = random_bits(std::size_t(64) * bits_per_symbol(m), rng);
        CHECK(demap_symbols(map_symbols(bits, m), m) == bits);
    }
    CHECK_THROWS_AS(map_symbols({0, 1, 1}, ModScheme::QPSK), std::invalid_argument);
}

TEST_CASE("dft and idft are unitary inverses") {
    Rng rng(5);
    std::vector<cplx> x(64);
    for (cplx& v : x) v = cplx(rng.gaussian(), rng.gaussian());
    auto back = idft(dft(x));
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(std::abs(back[i] - x[i]) < 1e-9);
    // Parseval with the symmetric 1/sqrt(K) convention
    CHECK(avg_power(dft(x)) == Catch::Approx(avg_power(x)).margin(1e-9));
}

TEST_CASE("a single-bin spectrum synthesizes a pure tone") {
    std::vector<cplx> spec(64, cplx(0.0, 0.0));
    spec[5] = cplx(8.0, 0.0);
    auto x = idft(spec);
    auto round = dft(x);
    double total = 0.0, in_bin = std::norm(round[5]);
    for (const cplx& v : round) total += std::norm(v);
    CHECK(in_bin / total > 0.999);
}

TEST_CASE("ofdm packet has unit power and the advertised length") {
    OfdmConfig cfg;
    Rng rng(7);
    auto pkt = synth_ofdm_packet(cfg, ModScheme::QAM16, ImpairmentSpec{}, rng);
    CHECK(pkt.samples.size() == 960);
    CHECK(pkt.bits.size() == std::size_t(12) * 64 * 4);
    CHECK(avg_power(pkt.samples) == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("clean ofdm demodulates to the transmitted bits") {
    OfdmConfig cfg;
    for (ModScheme m : {ModScheme::BPSK, ModScheme::QPSK, ModScheme::QAM16,
                        ModScheme::QAM64}) {
        Rng rng(11 + static_cast<int>(m));
        auto pkt = synth_ofdm_packet(cfg, m, ImpairmentSpec{}, rng);
        INFO(mod_scheme_name(m));
        // power normalization rescales all constellation points equally, and the
        // per-packet scale stays close enough to 1 for nearest-point demapping
        CHECK(demod_ofdm(pkt.samples, cfg, m) == pkt.bits);
    }
}

TEST_CASE("impairments rotate samples as advertised") {
    std::vector<cplx> x(4, cplx(1.0, 0.0));
    ImpairmentSpec imp;
    imp.amplitude = 2.0;
    imp.phase = kTwoPi / 4.0;  // 90 degrees
    apply_impairments(x, imp);
    CHECK(std::abs(x[0] - cplx(0.0, 2.0)) < 1e-12);

    std::vector<cplx> y(4, cplx(1.0, 0.0));
    ImpairmentSpec cfo;
    cfo.freq_offset = 0.25;  // quarter cycle per sample
    apply_impairments(y, cfo);
    CHECK(std::abs(y[0] - cplx(1.0, 0.0)) < 1e-12);
    CHECK(std::abs(y[1] - cplx(0.0, 1.0)) < 1e-12);
    CHECK(std::abs(y[2] - cplx(-1.0, 0.0)) < 1e-12);
}

TEST_CASE("dsss emits unit-modulus chips from the barker sequence") {
    Rng rng(3);
    DsssSpec spec;
    auto x = synth_dsss(spec, 110, rng);
    for (const cplx& v : x) CHECK(std::abs(v) == Catch::Approx(1.0).margin(1e-12));
    // fixed all-ones payload keeps the differential symbol constant: the
    // waveform is the Barker sequence tiled verbatim
    DsssSpec fixed;
    fixed.data_bits = {1};
    auto y = synth_dsss(fixed, 44, rng);
    for (int t = 0; t < 44; ++t)
        CHECK(y[t].real() == Catch::Approx(double(fixed.chips[t % 11])).margin(1e-12));
}

TEST_CASE("barker despreading shows the processing gain") {
    Rng rng(9);
    DsssSpec spec;
    auto x = synth_dsss(spec, 11 * 20, rng);
    for (int m = 0; m < 20; ++m) {
        cplx acc = 0.0;
        for (int c = 0; c < 11; ++c) acc += x[m * 11 + c] * double(spec.chips[c]);
        CHECK(std::abs(acc) == Catch::Approx(11.0).margin(1e-9));  // coherent sum
    }
}

TEST_CASE("multi-tone draw respects the tone-count and distinctness rules") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        auto spec = MtiSpec::draw(64, rng);
        REQUIRE(spec.tone_count() >= 8);
        REQUIRE(spec.tone_count() <= 64);
        std::vector<bool> seen(64, false);
        for (int b : spec.tone_bins) {
            REQUIRE(b >= 0);
            REQUIRE(b < 64);
            REQUIRE_FALSE(seen[b]);
            seen[b] = true;
        }
        CHECK(spec.amplitude ==
              Catch::Approx(1.0 / std::sqrt(double(spec.tone_count()))).margin(1e-12));
    }
}

TEST_CASE("single multi-tone component lands in its dft bin") {
    MtiSpec spec;
    spec.tone_bins = {3};
    spec.phases = {0.7};
    spec.amplitude = 1.0;
    auto x = synth_mti(spec, 64, 64);
    auto s = dft(x);
    double total = 0.0;
    for (const cplx& v : s) total += std::norm(v);
    CHECK(std::norm(s[3]) / total > 0.999);
}

TEST_CASE("channel: none is the identity, tdl preserves power on average") {
    Rng rng(23);
    std::vector<cplx> x(960);
    for (cplx& v : x) v = cplx(rng.gaussian(), rng.gaussian()) / std::sqrt(2.0);
    auto same = apply_channel(x, ChannelModel::none(), rng);
    CHECK(same == x);

    double acc = 0.0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t)
        acc += avg_power(apply_channel(x, ChannelModel::tapped_delay_line(), rng));
    acc /= trials;
    // unit-normalized tap power profile -> expected output power = input power
    CHECK(acc == Catch::Approx(avg_power(x)).epsilon(0.05));
}

TEST_CASE("tdl first sample depends only on the first input sample") {
    Rng rng(29);
    std::vector<cplx> x(32, cplx(1.0, 0.0));
    Rng r1(77), r2(77);
    auto a = apply_channel(x, ChannelModel::tapped_delay_line(), r1);
    x[5] += cplx(10.0, 0.0);
    auto b = apply_channel(x, ChannelModel::tapped_delay_line(), r2);
    for (int t = 0; t < 5; ++t) CHECK(a[t] == b[t]);
    CHECK(a[5] != b[5]);
}

TEST_CASE("mix hits the requested sir within 0.1 dB") {
    Rng rng(41);
    OfdmConfig cfg;
    auto sig = synth_ofdm_packet(cfg, ModScheme::QPSK, ImpairmentSpec{}, rng).samples;
    auto intf = synth_mti(MtiSpec::draw(64, rng), 960, 64);
    for (double sir : {0.0, 10.0, 20.0, 35.0}) {
        auto out = mix(sig, intf, sir, kInf, rng);
        std::vector<cplx> resid(out.size());
        for (std::size_t t = 0; t < out.size(); ++t) resid[t] = out[t] - sig[t];
        const double measured =
            10.0 * std::log10(avg_power(sig) / avg_power(resid));
        CHECK(measured == Catch::Approx(sir).margin(0.1));
    }
}

TEST_CASE("mix hits the requested snr within 0.1 dB") {
    Rng rng(43);
    OfdmConfig cfg;
    auto sig = synth_ofdm_packet(cfg, ModScheme::QPSK, ImpairmentSpec{}, rng).samples;
    for (double snr : {5.0, 15.0, 25.0}) {
        // average the noise power estimate over repeats to beat estimator noise
        double p_noise = 0.0;
        const int reps = 50;
        for (int r = 0; r < reps; ++r) {
            auto out = mix(sig, {}, kInf, snr, rng);
            std::vector<cplx> resid(out.size());
            for (std::size_t t = 0; t < out.size(); ++t) resid[t] = out[t] - sig[t];
            p_noise += avg_power(resid);
        }
        p_noise /= reps;
        const double measured = 10.0 * std::log10(avg_power(sig) / p_noise);
        CHECK(measured == Catch::Approx(snr).margin(0.1));
    }
}

TEST_CASE("mix with both knobs disabled is the identity") {
    Rng rng(47);
    std::vector<cplx> sig(100);
    for (cplx& v : sig) v = cplx(rng.gaussian(), rng.gaussian());
    auto out = mix(sig, {}, kInf, kInf, rng);
    CHECK(out == sig);
    CHECK_THROWS_AS(mix(sig, std::vector<cplx>(100, cplx(0.0, 0.0)), 10.0, kInf, rng),
                    std::invalid_argument);
}

TEST_CASE("iq block conversion round-trips float samples") {
    Rng rng(53);
    std::vector<cplx> x(64);
    for (cplx& v : x) {
        // values representable in float so the round trip is exact
        v = cplx(float(rng.gaussian()), float(rng.gaussian()));
    }
    auto back = from_iq_block(to_iq_block(x));
    CHECK(back == x);
    Tensor t = iq_to_tensor(to_iq_block(x));
    CHECK(t.shape == Shape{2, 64});
    CHECK(t.data[0] == Catch::Approx(x[0].real()));
    CHECK(t.data[64] == Catch::Approx(x[0].imag()));
}
