#pragma once

#include "phnturbo/common.hpp"
#include "phnturbo/llr.hpp"

namespace phnturbo {

/// N x L matrix of bit means in [-1, 1].  Hard bits are the +-1 subset.
/// Column layout: the first L/2 columns are the real-axis bits, the last
/// L/2 the imaginary-axis bits.  The Gray map per axis is
///   level = sum_{l=1..L/2} 2^(l-1) * prod_{p=l..L/2} b_p
/// which runs over the integer grid {+-1, +-3, ..., +-(sqrt(M)-1)}.
struct BitMeanMatrix {
    Mat values;

    BitMeanMatrix() = default;
    /// Validates shape (L even >= 2) and entry range; throws
    /// std::invalid_argument on violation.
    explicit BitMeanMatrix(Mat v);

    int rows() const { return static_cast<int>(values.rows()); }
    int bits_per_symbol() const { return static_cast<int>(values.cols()); }
    int bits_per_axis() const { return bits_per_symbol() / 2; }
    int order() const { return 1 << bits_per_symbol(); }

    Eigen::Block<const Mat> real_half() const {
        return values.block(0, 0, values.rows(), bits_per_axis());
    }
    Eigen::Block<const Mat> imag_half() const {
        return values.block(0, bits_per_axis(), values.rows(), bits_per_axis());
    }
};

/// Per-row second moments of the real / imaginary symbol parts under
/// independent bits with the given means.
struct SymbolMoments {
    Vec nu_r;
    Vec nu_i;
};

enum class Axis { real, imag };

/// Derivatives of the map and of the second moments w.r.t. the k-th bit
/// column of one axis (k is 1-based, 1..L/2).
///   axis = real:  d_mean = alpha_k (real), d_moment = delta_k
///   axis = imag:  d_mean = beta_k = j * (mirror of alpha_k), d_moment = Omega_k
struct MapDerivatives {
    CVec d_mean;
    Vec d_moment;
};

/// Gray map f applied rowwise; works on soft means (returns f(Bhat)).
CVec map_bits(const BitMeanMatrix& b);

/// Exact E[(Re d)^2], E[(Im d)^2] per row under independent +-1 bits.
SymbolMoments symbol_moments(const BitMeanMatrix& b);

MapDerivatives map_derivatives(const BitMeanMatrix& b, int k, Axis axis);

/// Exact per-subcarrier soft demapper for y_n = gain_n * d_n + CN(0, 2*noise_var),
/// marginalizing over all M constellation points with the given bit priors.
/// Returns extrinsic LLRs (posterior minus prior).  A zero gain entry is
/// treated as an erasure: zero extrinsic for that subcarrier's bits.
LlrFrame demap_soft(const CVec& y, const CVec& gain, double noise_var,
                    const Mat& prior_llr);

/// All M hard bit patterns (rows, +-1) in pattern-index order together with
/// their constellation points; pattern index i has bit l = +1 iff bit l of i
/// is zero.  Shared by the demapper and the enumeration oracles.
struct ConstellationTable {
    Mat patterns;  // M x L
    CVec points;   // M
};
ConstellationTable constellation_table(int bits_per_symbol);

}  // namespace phnturbo
