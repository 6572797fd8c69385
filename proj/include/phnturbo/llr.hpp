#pragma once

#include <algorithm>
#include <cmath>

#include "phnturbo/common.hpp"

namespace phnturbo {

// LLR convention used across the whole receiver:
//   llr = log P(b = +1) / P(b = -1) = 2 * atanh(mean),  sign + <-> bit +1.

/// Prior / extrinsic LLRs for one OFDM symbol's N x L bits.
/// extrinsic = posterior - prior is what crosses the detector/decoder boundary.
struct LlrFrame {
    Mat prior;      // N x L
    Mat extrinsic;  // N x L

    Mat posterior() const { return prior + extrinsic; }
};

inline constexpr double kMeanClampEps = 1e-12;

/// Clamp a bit mean into [-1+eps, 1-eps] so atanh/log stay finite.
inline double clamp_mean(double m, double eps = kMeanClampEps) {
    return std::clamp(m, -1.0 + eps, 1.0 - eps);
}

inline double llr_to_mean(double llr) { return std::tanh(0.5 * llr); }

inline double mean_to_llr(double mean, double eps = kMeanClampEps) {
    return 2.0 * std::atanh(clamp_mean(mean, eps));
}

}  // namespace phnturbo
