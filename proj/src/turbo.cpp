#include "phnturbo/turbo.hpp"

#include <cmath>
#include <stdexcept>

namespace phnturbo {

namespace {

int count_bit_errors(const Vec& decoded, const Vec& truth) {
    int errs = 0;
    for (int i = 0; i < decoded.size(); ++i)
        if (decoded[i] * truth[i] < 0) ++errs;
    return errs;
}

Vec message_from_hard(const Vec& hard, const ParityCheck& pc) {
    Vec msg(pc.k);
    for (int i = 0; i < pc.k; ++i) msg[i] = hard[pc.message_pos[i]];
    return msg;
}

IterationStats stats_from_decode(const DecodeResult& dec, const ParityCheck& pc,
                                 const Vec& true_msg, int fallbacks) {
    IterationStats st;
    st.detector_fallbacks = fallbacks;
    st.decoder_converged = dec.converged ? 1 : 0;
    const Vec msg = message_from_hard(dec.hard_bits, pc);
    st.bit_errors = count_bit_errors(msg, true_msg);
    st.frame_error = st.bit_errors > 0;
    return st;
}

// channel-position index of bit l of subcarrier n of symbol s
inline int frame_bit_index(const FrameConfig& cfg, int sym, int sc, int bit) {
    const int l = cfg.bits_per_symbol();
    return sym * cfg.n_subcarriers * l + sc * l + bit;
}

}  // namespace

int FrameConfig::bits_per_symbol() const {
    int l = 0;
    while ((1 << l) < qam_order) ++l;
    if ((1 << l) != qam_order || l % 2 != 0)
        throw std::invalid_argument("FrameConfig: qam_order must be 4^k");
    return l;
}

void FrameConfig::validate(const ParityCheck& pc) const {
    if (coded_bits_per_frame() != pc.n)
        throw std::invalid_argument(
            "FrameConfig: symbols_per_frame * N * log2(M) must equal the code length");
}

std::vector<BitMeanMatrix> frame_bits_from_codeword(const Vec& interleaved,
                                                    const FrameConfig& cfg) {
    const int l = cfg.bits_per_symbol();
    std::vector<BitMeanMatrix> out;
    out.reserve(cfg.symbols_per_frame);
    for (int s = 0; s < cfg.symbols_per_frame; ++s) {
        Mat b(cfg.n_subcarriers, l);
        for (int n = 0; n < cfg.n_subcarriers; ++n)
            for (int bit = 0; bit < l; ++bit)
                b(n, bit) = interleaved[frame_bit_index(cfg, s, n, bit)];
        out.emplace_back(std::move(b));
    }
    return out;
}

TurboResult run_turbo(const FrameInputs& in, const FrameConfig& cfg,
                      const ParityCheck& pc, const Permutation& perm,
                      const DetectorConfig& det_cfg, const Vec& true_msg) {
    cfg.validate(pc);
    if (static_cast<int>(in.rx.size()) != cfg.symbols_per_frame ||
        static_cast<int>(in.channels.size()) != cfg.symbols_per_frame)
        throw std::invalid_argument("run_turbo: frame size mismatch");

    const int l = cfg.bits_per_symbol();
    const int n = cfg.n_subcarriers;

    DetectorConfig det = det_cfg;
    det.num_iter = cfg.detector_iters;

    TurboResult res;
    Vec detector_priors = Vec::Zero(pc.n);  // channel-position order

    for (int outer = 1; outer <= cfg.outer_iters; ++outer) {
        Vec detector_ext(pc.n);
        int fallbacks = 0;
        for (int s = 0; s < cfg.symbols_per_frame; ++s) {
            Mat prior(n, l);
            for (int sc = 0; sc < n; ++sc)
                for (int bit = 0; bit < l; ++bit)
                    prior(sc, bit) = detector_priors[frame_bit_index(cfg, s, sc, bit)];
            const DetectorResult det_res = detect(in.rx[s], in.channels[s], prior, det);
            if (det_res.fell_back) ++fallbacks;
            for (int sc = 0; sc < n; ++sc)
                for (int bit = 0; bit < l; ++bit)
                    detector_ext[frame_bit_index(cfg, s, sc, bit)] =
                        det_res.llr.extrinsic(sc, bit);
        }

        const Vec decoder_in = deinterleave(detector_ext, perm);
        const DecodeResult dec = decode_bp(decoder_in, pc, cfg.decoder_iters);
        res.per_outer_iteration.push_back(stats_from_decode(dec, pc, true_msg, fallbacks));
        res.decoded_msg = message_from_hard(dec.hard_bits, pc);

        if (outer < cfg.outer_iters) {
            const Vec decoder_ext = dec.posterior_llr - decoder_in;
            detector_priors = interleave(decoder_ext, perm);
        }
    }
    return res;
}

TurboResult run_one_pass(const FrameInputs& in, const FrameConfig& cfg,
                         const ParityCheck& pc, const Permutation& perm,
                         const DetectorConfig& det_cfg, const Vec& true_msg) {
    FrameConfig once = cfg;
    once.outer_iters = 1;
    once.decoder_iters = cfg.standalone_decoder_iters;
    return run_turbo(in, once, pc, perm, det_cfg, true_msg);
}

TurboResult run_baseline(BaselineKind, const FrameInputs& in,
                         const FrameConfig& cfg, const ParityCheck& pc,
                         const Permutation& perm, const Vec& true_msg) {
    cfg.validate(pc);
    const int l = cfg.bits_per_symbol();
    const int n = cfg.n_subcarriers;

    Vec detector_ext(pc.n);
    for (int s = 0; s < cfg.symbols_per_frame; ++s) {
        const LlrFrame out = demap_soft(dft(in.rx[s].r), in.channels[s].h,
                                        in.rx[s].noise_var, Mat::Zero(n, l));
        for (int sc = 0; sc < n; ++sc)
            for (int bit = 0; bit < l; ++bit)
                detector_ext[frame_bit_index(cfg, s, sc, bit)] = out.extrinsic(sc, bit);
    }
    const Vec decoder_in = deinterleave(detector_ext, perm);
    const DecodeResult dec = decode_bp(decoder_in, pc, cfg.standalone_decoder_iters);

    TurboResult res;
    res.per_outer_iteration.push_back(stats_from_decode(dec, pc, true_msg, 0));
    res.decoded_msg = message_from_hard(dec.hard_bits, pc);
    return res;
}

}  // namespace phnturbo
