#pragma once

#include <vector>

#include "phnturbo/fec.hpp"
#include "phnturbo/ofdm.hpp"
#include "phnturbo/vi_detector.hpp"

namespace phnturbo {

struct FrameConfig {
    int n_subcarriers = 64;
    int qam_order = 64;
    int symbols_per_frame = 6;
    int outer_iters = 3;
    int decoder_iters = 6;
    int detector_iters = 5;
    int standalone_decoder_iters = 18;

    int bits_per_symbol() const;
    int coded_bits_per_frame() const {
        return symbols_per_frame * n_subcarriers * bits_per_symbol();
    }
    /// Throws unless symbols_per_frame * N * log2(M) equals the code length.
    void validate(const ParityCheck& pc) const;
};

/// Everything the receiver sees for one frame.
struct FrameInputs {
    std::vector<RxVector> rx;                 // symbols_per_frame entries
    std::vector<ChannelRealization> channels;
};

struct IterationStats {
    int bit_errors = 0;       // message-bit errors vs truth
    bool frame_error = false;
    int detector_fallbacks = 0;
    int decoder_converged = 0;  // 1 if all checks satisfied
};

struct TurboResult {
    Vec decoded_msg;  // +-1, length k
    std::vector<IterationStats> per_outer_iteration;
};

/// Full turbo loop: per outer iteration, detector on each OFDM symbol
/// (uniform priors first time, decoder extrinsics afterwards), deinterleave,
/// sum-product decode, feed decoder extrinsics back as detector priors.
TurboResult run_turbo(const FrameInputs& in, const FrameConfig& cfg,
                      const ParityCheck& pc, const Permutation& perm,
                      const DetectorConfig& det_cfg, const Vec& true_msg);

/// Detector once with uniform priors, decoder once with
/// standalone_decoder_iters.
TurboResult run_one_pass(const FrameInputs& in, const FrameConfig& cfg,
                         const ParityCheck& pc, const Permutation& perm,
                         const DetectorConfig& det_cfg, const Vec& true_msg);

enum class BaselineKind { no_phn, phn_ignored };

/// PHN-ignoring receiver: per-subcarrier soft demapper followed by the
/// standalone decoder.  The kind only tags which channel the harness
/// generated; the receiver path is identical.
TurboResult run_baseline(BaselineKind kind, const FrameInputs& in,
                         const FrameConfig& cfg, const ParityCheck& pc,
                         const Permutation& perm, const Vec& true_msg);

/// TX side: spread an interleaved codeword over symbols_per_frame bit-mean
/// matrices (hard +-1) in symbol-major, subcarrier-major, bit-minor order.
std::vector<BitMeanMatrix> frame_bits_from_codeword(const Vec& interleaved,
                                                    const FrameConfig& cfg);

}  // namespace phnturbo
